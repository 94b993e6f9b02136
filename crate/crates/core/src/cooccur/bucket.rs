use super::CooccurrenceRecord;
use crate::{Error, Result};

/// Label of bucket `b` out of `k`, lowest counts first.
pub fn bucket_label(b: usize, k: usize) -> String {
    match (k, b) {
        (3, 0) | (2, 0) => "low".into(),
        (3, 1) => "medium".into(),
        (3, 2) | (2, 1) => "high".into(),
        _ => format!("q{b}"),
    }
}

/// Sorts by `(count, source)` ascending and cuts into `k` contiguous groups
/// whose sizes differ by at most one; earlier groups take the remainder.
/// Records carrying an error are dropped.
pub fn bucketize(records: &[CooccurrenceRecord], k: usize) -> Result<Vec<CooccurrenceRecord>> {
    let mut ok: Vec<CooccurrenceRecord> = records.iter().filter(|r| r.error.is_none()).cloned().collect();
    if k == 0 || k > ok.len() {
        return Err(Error::TooManyBuckets { records: ok.len(), buckets: k });
    }
    ok.sort_by(|a, b| a.count.cmp(&b.count).then_with(|| a.source.cmp(&b.source)));
    let (base, extra) = (ok.len() / k, ok.len() % k);
    let mut it = ok.iter_mut();
    for b in 0..k {
        let size = base + usize::from(b < extra);
        for r in it.by_ref().take(size) {
            r.bucket = Some(bucket_label(b, k));
        }
    }
    Ok(ok)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub records: Vec<CooccurrenceRecord>,
    /// True when the bucket held fewer than `k` records.
    pub short: bool,
}

/// The `k` highest-count records, count-descending (ties by source).
pub fn top_k(bucket: &[CooccurrenceRecord], k: usize) -> Result<TopK> {
    if bucket.is_empty() {
        return Err(Error::InvalidConfig("top_k over an empty bucket".into()));
    }
    let mut v = bucket.to_vec();
    v.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.source.cmp(&b.source)));
    let short = v.len() < k;
    v.truncate(k);
    Ok(TopK { records: v, short })
}

pub fn median_count(records: &[CooccurrenceRecord]) -> Option<f64> {
    let mut c: Vec<u64> = records.iter().map(|r| r.count).collect();
    if c.is_empty() {
        return None;
    }
    c.sort_unstable();
    let m = c.len() / 2;
    Some(if c.len() % 2 == 1 { c[m] as f64 } else { (c[m - 1] + c[m]) as f64 / 2.0 })
}
