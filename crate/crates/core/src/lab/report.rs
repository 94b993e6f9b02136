use serde::{Deserialize, Serialize};
use std::fmt::Write;

use crate::biograph::Split;
use crate::unlearner::Method;

use super::{GapRow, RunManifest, Stat, Summary, UNLEARN_METRICS};

/// Final-epoch metrics of one (model, method, target split, delta) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub run: String,
    pub model: String,
    pub params: usize,
    pub method: Method,
    pub split: Split,
    pub delta: f64,
    pub metrics: Vec<(String, Stat)>,
}

/// Gap of a larger model against a smaller one under the same method,
/// target split and delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub method: Method,
    pub split: Split,
    pub delta: f64,
    pub smaller: String,
    pub larger: String,
    pub gap_smaller: Stat,
    pub gap_larger: Stat,
    pub widened: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub finals: Vec<FinalRow>,
    pub gaps: Vec<(String, usize, GapRow)>,
    pub comparisons: Vec<GapComparison>,
    pub warnings: Vec<String>,
}

/// Builds comparison tables from the summaries behind `manifests`.
pub fn report(manifests: &[RunManifest]) -> crate::Result<Report> {
    let summaries = manifests.iter().map(|m| Summary::read(&m.out_dir)).collect::<crate::Result<Vec<_>>>()?;
    Ok(report_from(&summaries))
}

pub fn report_from(summaries: &[Summary]) -> Report {
    let mut rep = Report::default();
    for s in summaries {
        let params = |name: &str| s.model(name).map_or(0, |m| m.params);
        let mut groups: Vec<&super::Group> = s.unlearn.iter().map(|a| &a.group).collect();
        groups.dedup();
        for g in groups {
            let mut metrics = Vec::new();
            for m in UNLEARN_METRICS {
                match s.series(g, m).and_then(|a| a.points.last()) {
                    Some((_, st)) => metrics.push((m.to_string(), *st)),
                    None => rep.warnings.push(format!("{}: no {m} series for {} {} {}", s.name, g.model, g.method, g.split)),
                }
            }
            rep.finals.push(FinalRow {
                run: s.name.clone(),
                model: g.model.clone(),
                params: params(&g.model),
                method: g.method,
                split: g.split,
                delta: g.delta,
                metrics,
            });
        }
        for g in &s.gaps {
            if g.gap.n == 0 {
                rep.warnings.push(format!("{}: empty gap for {} {} {}", s.name, g.group.model, g.group.method, g.group.split));
                continue;
            }
            rep.gaps.push((s.name.clone(), params(&g.group.model), g.clone()));
        }
    }
    for (i, (_, pa, a)) in rep.gaps.iter().enumerate() {
        for (_, pb, b) in &rep.gaps[i + 1..] {
            let same = a.group.method == b.group.method && a.group.split == b.group.split && a.group.delta == b.group.delta;
            if !same || pa == pb {
                continue;
            }
            let (s, l) = if pa < pb { (a, b) } else { (b, a) };
            rep.comparisons.push(GapComparison {
                method: a.group.method,
                split: a.group.split,
                delta: a.group.delta,
                smaller: s.group.model.clone(),
                larger: l.group.model.clone(),
                gap_smaller: s.gap,
                gap_larger: l.gap,
                widened: l.gap.mean > s.gap.mean,
            });
        }
    }
    rep
}

fn fmt_stat(s: &Stat) -> String {
    format!("{:.3} ± {:.3}", s.mean, s.std)
}

/// Markdown rendering of a report.
pub fn render_report(rep: &Report) -> String {
    let mut out = String::new();
    out.push_str("## Final unlearning metrics\n\n| run | model | method | target | delta |");
    for m in UNLEARN_METRICS {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|---|---|---|---|");
    out.push_str(&"---|".repeat(UNLEARN_METRICS.len()));
    out.push('\n');
    for r in &rep.finals {
        let _ = write!(out, "| {} | {} | {} | {} | {} |", r.run, r.model, r.method, r.split, r.delta);
        for m in UNLEARN_METRICS {
            let cell = r.metrics.iter().find(|(k, _)| k == m).map(|(_, s)| fmt_stat(s)).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out.push_str("\n## BIO minus QA gap at the final epoch\n\n| run | model | params | method | target | delta | gap |\n|---|---|---|---|---|---|---|\n");
    for (run, params, g) in &rep.gaps {
        let _ = writeln!(
            out,
            "| {run} | {} | {params} | {} | {} | {} | {} |",
            g.group.model,
            g.group.method,
            g.group.split,
            g.group.delta,
            fmt_stat(&g.gap)
        );
    }
    if !rep.comparisons.is_empty() {
        out.push_str("\n## Gap by model size\n\n| method | target | delta | smaller | gap | larger | gap | widened |\n|---|---|---|---|---|---|---|---|\n");
        for c in &rep.comparisons {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                c.method,
                c.split,
                c.delta,
                c.smaller,
                fmt_stat(&c.gap_smaller),
                c.larger,
                fmt_stat(&c.gap_larger),
                if c.widened { "yes" } else { "no" }
            );
        }
    }
    for w in &rep.warnings {
        let _ = writeln!(out, "\nwarning: {w}");
    }
    out
}
