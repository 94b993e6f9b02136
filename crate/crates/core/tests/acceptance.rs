//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 6-8 are computed here from scratch. Criteria 1-5 and 9 read the
//! desk experiment described by `configs/desk.toml`; the experiment is run
//! (or resumed) on first use and cached in its output directory, so the
//! first invocation takes hours on one core and later ones take seconds.
//! Set `UNLEARNLAB_DESK_CONFIG` to use another config file.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unlearnlab::biograph::{build_dataset, Attribute, GenerationConfig, Split};
use unlearnlab::cooccur::{self, CooccurrenceRecord, CorpusIndex, PhraseQuery, SENTINEL};
use unlearnlab::evaluator::{lcs_len, rouge_l_words};
use unlearnlab::lab::{self, ExperimentConfig, Group, ModelSpec, RunOptions, Summary, UnlearnBlock, UnlearnHyper};
use unlearnlab::nanolm::{forward_ce, Model, ModelConfig, Query, TrainConfig};
use unlearnlab::packer::{answer_only_example, bundle_vocab, token_counts, QaTokens, StreamFactory};
use unlearnlab::unlearner::{forget_loss_ga, simnpo_from_logp, Method};

struct Verdict {
    pass: bool,
    gated: bool,
    detail: String,
}

impl Verdict {
    fn gate(pass: bool, detail: String) -> Self {
        Self { pass, gated: true, detail }
    }
}

fn main() {
    let mut lines: Vec<(u8, &str, Verdict)> = Vec::new();
    let t = Instant::now();
    lines.push((6, "oracle equivalences", criterion_6()));
    lines.push((7, "numerical correctness", criterion_7()));
    lines.push((8, "pipeline invariants", criterion_8()));
    match desk_summary() {
        Ok((cfg, summary)) => {
            lines.push((1, "learning dynamics", criterion_1(&cfg, &summary)));
            lines.push((2, "frequency effect under GA", criterion_2(&summary)));
            lines.push((3, "frequency effect under SimNPO", criterion_3(&summary)));
            lines.push((4, "IDK keeps biographies", criterion_4(&summary)));
            lines.push((5, "scaling gap", criterion_5(&summary)));
            lines.push((9, "delta ablation", criterion_9(&summary)));
        }
        Err(e) => {
            for (id, name) in [(1, "learning dynamics"), (2, "frequency effect under GA"), (3, "frequency effect under SimNPO"), (4, "IDK keeps biographies"), (5, "scaling gap"), (9, "delta ablation")] {
                lines.push((id, name, Verdict::gate(false, format!("desk experiment unavailable: {e}"))));
            }
        }
    }
    lines.sort_by_key(|l| l.0);
    let mut failed = 0;
    for (id, name, v) in &lines {
        let tag = match (v.pass, v.gated) {
            (true, true) => "PASS",
            (false, true) => "FAIL",
            (_, false) => "REPORT",
        };
        if v.gated && !v.pass {
            failed += 1;
        }
        println!("criterion {id} [{tag}] {name}: {}", v.detail);
    }
    println!("acceptance: {} gated criteria failed ({:.1}s)", failed, t.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- criterion 6

/// LCS by trying subsets of the shorter string, largest first.
fn lcs_oracle(a: &[u8], b: &[u8]) -> usize {
    let (s, l) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let n = s.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<u8> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect();
        let mut it = l.iter();
        if sub.iter().all(|c| it.any(|x| x == c)) {
            best = k;
        }
    }
    best
}

fn f1_oracle(lcs: usize, h: usize, r: usize) -> f64 {
    if lcs == 0 {
        return 0.0;
    }
    let (p, rc) = (lcs as f64 / h as f64, lcs as f64 / r as f64);
    2.0 * p * rc / (p + rc)
}

fn all_strings(max_len: usize) -> Vec<Vec<Vec<u8>>> {
    let mut by_len = vec![vec![vec![]]];
    for len in 1..=max_len {
        let prev: &Vec<Vec<u8>> = &by_len[len - 1];
        let next = prev.iter().flat_map(|p| (0..3u8).map(move |c| [p.as_slice(), &[c]].concat())).collect();
        by_len.push(next);
    }
    by_len
}

fn rouge_mismatch(a: &[u8], b: &[u8]) -> bool {
    let lcs = lcs_oracle(a, b);
    let got = rouge_l_words(a, b);
    lcs_len(a, b) != lcs || (got.f1 - f1_oracle(lcs, a.len(), b.len())).abs() > 1e-12
}

fn criterion_6() -> Verdict {
    let strings = all_strings(12);
    let mut pairs = 0u64;
    let mut rouge_bad = 0u64;
    for la in 0..=12 {
        for lb in 0..=(12 - la) {
            for a in &strings[la] {
                for b in &strings[lb] {
                    pairs += 1;
                    rouge_bad += u64::from(rouge_mismatch(a, b));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20_000 {
        let (la, lb) = (rng.gen_range(0..=12), rng.gen_range(0..=12));
        let a = &strings[la][rng.gen_range(0..strings[la].len())];
        let b = &strings[lb][rng.gen_range(0..strings[lb].len())];
        pairs += 1;
        rouge_bad += u64::from(rouge_mismatch(a, b));
    }

    let mut count_bad = 0;
    let mut total_tokens = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(0..=10_000);
        let vocab = rng.gen_range(2..40u32);
        let toks: Vec<u32> = (0..n).map(|_| if rng.gen_ratio(1, 150) { SENTINEL } else { rng.gen_range(0..vocab) }).collect();
        total_tokens += n;
        let phrase = |rng: &mut ChaCha8Rng| -> Vec<u32> {
            let len = rng.gen_range(1..=3);
            if n > len && rng.gen_bool(0.7) {
                let at = rng.gen_range(0..n - len);
                let p = toks[at..at + len].to_vec();
                if !p.contains(&SENTINEL) {
                    return p;
                }
            }
            (0..len).map(|_| rng.gen_range(0..vocab)).collect()
        };
        let s = phrase(&mut rng);
        let tq = if rng.gen_bool(0.1) { s.clone() } else { phrase(&mut rng) };
        let w = rng.gen_range(1..300);
        let corpus = CorpusIndex::from_ids(toks.clone());
        let q = PhraseQuery::new(s.clone(), tq.clone(), w).unwrap();
        let fast = cooccur::count_cooccurrence(&corpus, &q);
        let sharded = cooccur::count_sharded(&corpus.shards(rng.gen_range(1..5)), &q);
        let brute = brute_count(&toks, &s, &tq, w);
        if fast != brute || sharded != brute {
            count_bad += 1;
        }
    }

    let mut bucket_bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let k = rng.gen_range(1..=n.min(7));
        let recs: Vec<CooccurrenceRecord> = (0..n)
            .map(|i| CooccurrenceRecord {
                source: format!("s{}", rng.gen_range(0..1000) * 1000 + i),
                target: "t".into(),
                relation: "r".into(),
                count: rng.gen_range(0..30),
                bucket: None,
                error: None,
            })
            .collect();
        let out = cooccur::bucketize(&recs, k).unwrap();
        let labels: Vec<String> = (0..k).map(|b| cooccur::bucket_label(b, k)).collect();
        let idx: Vec<usize> = out.iter().map(|r| labels.iter().position(|l| Some(l) == r.bucket.as_ref()).unwrap()).collect();
        let mut sizes = vec![0usize; k];
        idx.iter().for_each(|&i| sizes[i] += 1);
        let ordered = out
            .windows(2)
            .zip(idx.windows(2))
            .all(|(r, i)| (r[0].count, &r[0].source) <= (r[1].count, &r[1].source) && i[0] <= i[1]);
        if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 || !ordered || out.len() != n {
            bucket_bad += 1;
        }
    }

    Verdict::gate(
        rouge_bad == 0 && count_bad == 0 && bucket_bad == 0,
        format!(
            "rouge {rouge_bad} mismatches / {pairs} pairs; co-occurrence {count_bad} / 1000 corpora ({total_tokens} tokens); bucketize {bucket_bad} / 1000"
        ),
    )
}

fn brute_count(toks: &[u32], s: &[u32], t: &[u32], w: usize) -> u64 {
    let mut doc = Vec::with_capacity(toks.len());
    let mut d = 0;
    for &x in toks {
        if x == SENTINEL {
            d += 1;
        }
        doc.push(d);
    }
    let starts = |p: &[u32]| -> Vec<usize> { (0..toks.len()).filter(|&i| toks[i..].starts_with(p)).collect() };
    let (ss, ts) = (starts(s), starts(t));
    let mut n = 0;
    for &i in &ss {
        for &j in &ts {
            if doc[i] == doc[j] && i.abs_diff(j) < w && !(s == t && i == j) {
                n += 1;
            }
        }
    }
    n
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Verdict {
    let mut cfg = ModelConfig::new(2, 2, 8, 11, 16);
    cfg.init_std_micro = 300_000;
    cfg.seed = 77;
    let model = Model::<f64>::init(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seqs: Vec<Vec<u32>> = (0..2).map(|_| (0..14).map(|_| rng.gen_range(0..11)).collect()).collect();
    let refs: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
    let queries: Vec<Query> = (0..2).flat_map(|s| Query::teacher_forced(s, &seqs[s], 1..14)).collect();
    let coef: Vec<f64> = queries.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |m: &Model<f64>| -> f64 {
        let p = m.forward(&refs, &queries).unwrap();
        p.logp.iter().zip(&coef).map(|(l, c)| l * c).sum()
    };
    let pass = model.forward(&refs, &queries).unwrap();
    let mut grads = vec![0.0; model.params.len()];
    model.backward(&pass, &coef, &mut grads);
    let mut idx: Vec<usize> = (0..model.params.len()).collect();
    idx.shuffle(&mut rng);
    let sampled = 150;
    let mut worst = 0.0f64;
    for &i in &idx[..sampled] {
        let mut m = model.clone();
        m.params[i] += 1e-5;
        let up = objective(&m);
        m.params[i] -= 2e-5;
        let fd = (up - objective(&m)) / 2e-5;
        worst = worst.max((fd - grads[i]).abs() / (fd.abs() + grads[i].abs()).max(1e-6));
    }

    let mut small = ModelConfig::new(2, 4, 32, 50, 64);
    small.seed = 3;
    let m32 = Model::<f32>::init(small).unwrap();
    let seq: Vec<u32> = (0..64).map(|_| rng.gen_range(0..50)).collect();
    let p = m32.forward(&[&seq], &Query::teacher_forced(0, &seq, 1..64)).unwrap();
    let worst_sum = (0..p.n_queries())
        .map(|r| (p.log_distribution(r).iter().map(|l| (*l as f64).exp()).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    let qa = QaTokens { id: 0, person_id: 0, attribute: Attribute::Employer, question: vec![1, 4, 5], answer: vec![7, 8, 9], terminator: vec![3] };
    let ce = forward_ce(&model, &answer_only_example(&qa, 16).unwrap()).unwrap().loss;
    let ga_exact = forget_loss_ga(&model, &qa).unwrap() == -ce;

    let s1 = simnpo_from_logp(0.0, 3, 0.1, 0.0);
    let s2 = simnpo_from_logp(-20.0, 2, 0.1, 0.0);
    let simnpo_ok = (s1 - 13.8629).abs() < 1e-4 && (s2 - 6.2652).abs() < 1e-4;

    Verdict::gate(
        worst < 1e-4 && worst_sum < 1e-5 && ga_exact && simnpo_ok,
        format!(
            "gradcheck max rel err {worst:.2e} over {sampled} params; softmax row-sum err {worst_sum:.1e}; GA == -CE {ga_exact}; SimNPO {s1:.4} / {s2:.4}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Verdict {
    let cfg = ExperimentConfig::desk(PathBuf::new());
    let bundle = build_dataset(&cfg.generation, cfg.data_seed).unwrap();
    let vocab = bundle_vocab(&bundle);
    let mut notes = Vec::new();
    let mut ok = true;

    for length in [cfg.pack_length, 512] {
        let f = StreamFactory::from_bundle(&bundle, &vocab, length, (1, 3), cfg.data_seed).unwrap();
        let stream = f.epoch(0);
        let exact = stream.iter().all(|p| p.tokens.len() == length && p.loss_mask.len() == length);
        let (b, q) = token_counts(&stream);
        let ratio = q as f64 / b as f64;
        ok &= exact && (ratio / 3.0 - 1.0).abs() <= 0.1 && stream.len() == f.packs_per_epoch();
        notes.push(format!("L={length}: {} packs exact={exact} ratio 1:{ratio:.3}", stream.len()));
    }

    let mut seen: BTreeMap<u32, Split> = BTreeMap::new();
    let mut disjoint = true;
    for b in &bundle.bios {
        disjoint &= *seen.entry(b.person_id).or_insert(b.split) == b.split;
    }
    for q in &bundle.qa {
        disjoint &= seen.get(&q.person_id) == Some(&q.split);
    }
    let per_split: Vec<HashSet<u32>> =
        Split::ALL.iter().map(|s| bundle.persons_in(*s).map(|p| p.id).collect()).collect();
    for i in 0..4 {
        for j in i + 1..4 {
            disjoint &= per_split[i].is_disjoint(&per_split[j]);
        }
    }
    let n_high = per_split[1].len();
    let factor = cfg.generation.upsample_factor as usize;
    let mut copies: BTreeMap<u32, usize> = BTreeMap::new();
    for b in &bundle.bios {
        *copies.entry(b.person_id).or_default() += 1;
    }
    let upsample_ok = bundle.bios.len() == cfg.generation.n_persons + (factor - 1) * n_high
        && copies.iter().all(|(p, c)| *c == if per_split[1].contains(p) { factor } else { 1 });
    ok &= disjoint && upsample_ok;
    notes.push(format!("splits disjoint {disjoint}; {} bios, up-sampling exact {upsample_ok}", bundle.bios.len()));

    let dir = tempfile::tempdir().unwrap();
    let tiny = |name: &str| {
        let mut c = ExperimentConfig::desk(dir.path().join(name));
        c.generation = GenerationConfig { n_persons: 30, ..GenerationConfig::default() };
        c.pack_length = 64;
        c.models = vec![ModelSpec {
            name: "m".into(),
            preset: None,
            n_layers: Some(1),
            n_heads: Some(2),
            hidden: Some(16),
            seed: 3,
            epochs: None,
            learning_rate: None,
        }];
        c.train = TrainConfig { epochs: 2, batch_size: 8, eval_every: 1, ..TrainConfig::default() };
        c.eval.persons_per_split = 3;
        c.eval.pretrain_attributes = vec![Attribute::Employer];
        c.unlearn = vec![UnlearnBlock {
            models: vec![],
            methods: vec![Method::GradientAscent],
            splits: vec![Split::HighCount],
            attributes: vec![Attribute::Employer],
            seeds: vec![0],
            deltas: vec![],
            hyper: UnlearnHyper { epochs: 2, batch_size: 2, ..UnlearnHyper::default() },
        }];
        c
    };
    let (_, a) = lab::run_experiment(&tiny("a"), &RunOptions::default()).unwrap();
    let (_, b) = lab::run_experiment(&tiny("b"), &RunOptions::default()).unwrap();
    let deterministic = a.models == b.models && a.cells == b.cells;
    ok &= deterministic;
    notes.push(format!("end-to-end rerun identical {deterministic}"));
    Verdict::gate(ok, notes.join("; "))
}

// ------------------------------------------------------------ desk criteria

fn desk_summary() -> unlearnlab::Result<(ExperimentConfig, Summary)> {
    let path = std::env::var_os("UNLEARNLAB_DESK_CONFIG")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let opts = RunOptions { verbose: true, ..RunOptions::default() };
    let (_, summary) = lab::run_experiment(&cfg, &opts)?;
    Ok((cfg, summary))
}

fn group(model: &str, method: Method, split: Split) -> Group {
    Group { model: model.into(), method, split, delta: 1.0 }
}

fn series<'a>(s: &'a Summary, g: &Group, metric: &str) -> Vec<(usize, f64)> {
    s.series(g, metric).map(|a| a.points.iter().map(|(e, st)| (*e, st.mean)).collect()).unwrap_or_default()
}

fn last(s: &Summary, g: &Group, metric: &str) -> f64 {
    series(s, g, metric).last().map_or(f64::NAN, |p| p.1)
}

const SMALL: &str = "small";
const LARGE: &str = "large";

fn criterion_1(cfg: &ExperimentConfig, s: &Summary) -> Verdict {
    let Some(m) = s.model(SMALL) else {
        return Verdict::gate(false, "no small model in summary".into());
    };
    let at = |split: Split, metric: &str| -> Vec<(usize, f64)> {
        m.pretrain.iter().filter(|r| r.split == split.as_str() && r.metric == metric).map(|r| (r.epoch, r.value)).collect()
    };
    let fin = |split: Split, metric: &str| at(split, metric).last().map_or(f64::NAN, |p| p.1);
    let retain_qa = fin(Split::Retain, "qa");
    let bio: Vec<f64> = Split::ALL.iter().map(|&sp| fin(sp, "bio")).collect();
    let bio_mean = bio.iter().sum::<f64>() / bio.len() as f64;
    let held: Vec<f64> = [Split::HighCount, Split::LowCount, Split::Utility].iter().map(|&sp| fin(sp, "qa")).collect();

    let high = at(Split::HighCount, "qa");
    let low = at(Split::LowCount, "qa");
    let final_high = high.last().map_or(f64::NAN, |p| p.1);
    let plateau = high.iter().find(|p| p.1 >= 0.95 * final_high).map_or(usize::MAX, |p| p.0);
    let inter: Vec<(usize, f64, f64)> = high
        .iter()
        .zip(&low)
        .filter(|(h, _)| h.0 > 0 && h.0 < plateau)
        .map(|(h, l)| (h.0, h.1, l.1))
        .collect();
    let ordered = inter.iter().all(|(_, h, l)| h >= l);
    let secs: f64 = lab::RunManifest::read(&cfg.out_dir)
        .map(|man| man.stages.iter().filter(|st| st.stage == format!("pretrain:{SMALL}")).map(|st| st.seconds).sum())
        .unwrap_or(f64::NAN);
    let pass = retain_qa >= 0.95 && bio_mean >= 0.95 && held.iter().all(|&v| v > 0.5) && ordered;
    Verdict::gate(
        pass,
        format!(
            "retain QA {retain_qa:.3}; BIO {bio_mean:.3} (per split {}); held-out QA high/low/utility {}; high>=low at {} checkpoints before epoch {plateau}: {ordered} {}; pre-training {:.0} min on 1 core",
            fmt(&bio),
            fmt(&held),
            inter.len(),
            inter.iter().map(|(e, h, l)| format!("[{e}: {h:.2}/{l:.2}]")).collect::<String>(),
            secs / 60.0
        ),
    )
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

fn criterion_2(s: &Summary) -> Verdict {
    let (h, l) = (group(SMALL, Method::GradientAscent, Split::HighCount), group(SMALL, Method::GradientAscent, Split::LowCount));
    let qa = [last(s, &h, "target_qa"), last(s, &l, "target_qa")];
    let diff = last(s, &h, "target_bio") - last(s, &l, "target_bio");
    let retain_min = [&h, &l]
        .iter()
        .flat_map(|g| series(s, g, "retain_qa"))
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    Verdict::gate(
        qa.iter().all(|&q| q < 0.2) && diff >= 0.1 && retain_min >= 0.9,
        format!(
            "final target QA high/low {}; target BIO high-low {diff:+.3} (high {:.3}, low {:.3}); min retain QA {retain_min:.3}",
            fmt(&qa),
            last(s, &h, "target_bio"),
            last(s, &l, "target_bio")
        ),
    )
}

fn criterion_3(s: &Summary) -> Verdict {
    let (h, l) = (group(SMALL, Method::Simnpo, Split::HighCount), group(SMALL, Method::Simnpo, Split::LowCount));
    let (bh, bl) = (last(s, &h, "target_bio"), last(s, &l, "target_bio"));
    Verdict::gate(
        bh > bl,
        format!(
            "final target BIO high {bh:.3} vs low {bl:.3}; target QA high/low {}",
            fmt(&[last(s, &h, "target_qa"), last(s, &l, "target_qa")])
        ),
    )
}

fn criterion_4(s: &Summary) -> Verdict {
    let groups = [group(SMALL, Method::Idk, Split::HighCount), group(SMALL, Method::Idk, Split::LowCount)];
    let mins: Vec<f64> = groups.iter().map(|g| series(s, g, "target_bio").iter().map(|p| p.1).fold(f64::INFINITY, f64::min)).collect();
    let qa: Vec<f64> = groups.iter().map(|g| last(s, g, "target_qa")).collect();
    Verdict::gate(
        mins.iter().all(|&m| m >= 0.95),
        format!("min target BIO over epochs high/low {}; final target QA high/low {}", fmt(&mins), fmt(&qa)),
    )
}

fn criterion_5(s: &Summary) -> Verdict {
    let gap = |model: &str| -> f64 {
        let g: Vec<f64> = s
            .gaps
            .iter()
            .filter(|r| r.group.model == model && r.group.method == Method::GradientAscent && r.group.delta == 1.0)
            .map(|r| r.gap.mean)
            .collect();
        g.iter().sum::<f64>() / g.len() as f64
    };
    let (gs, gl) = (gap(SMALL), gap(LARGE));
    let params = |m: &str| s.model(m).map_or(0, |x| x.params);
    Verdict::gate(
        gl > gs,
        format!("final GA gap (BIO - QA) {SMALL} ({} params) {gs:.3} vs {LARGE} ({} params) {gl:.3}", params(SMALL), params(LARGE)),
    )
}

fn criterion_9(s: &Summary) -> Verdict {
    let pick = |delta: f64| {
        s.cells
            .iter()
            .find(|(c, _)| c.model == SMALL && c.method == Method::GradientAscent && c.delta == delta && c.seed == 0 && c.split == Split::HighCount && c.attribute == Attribute::Employer)
            .map(|(_, t)| t.iter().map(|e| e.metrics.get("utility_qa").copied().unwrap_or(f64::NAN)).collect::<Vec<_>>())
    };
    match (pick(0.0), pick(1.0)) {
        (Some(a), Some(b)) => Verdict {
            pass: true,
            gated: false,
            detail: format!(
                "utility QA per epoch, delta=0 [{}] vs delta=1 [{}]",
                a.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" "),
                b.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
            ),
        },
        _ => Verdict::gate(false, "ablation cells missing from the desk experiment".into()),
    }
}
