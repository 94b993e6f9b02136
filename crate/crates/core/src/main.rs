use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use unlearnlab::biograph::{Attribute, Split};
use unlearnlab::cooccur::{self, CorpusIndex};
use unlearnlab::lab::{self, Data, ExperimentConfig, RunManifest, RunOptions};
use unlearnlab::nanolm::{load_checkpoint, save_checkpoint, write_trace, Model};
use unlearnlab::unlearner::{write_unlearn_trace, Method};

#[derive(Parser)]
#[command(name = "unlearnlab", version, about = "Frequency-controlled unlearning experiments at desk scale")]
struct Cli {
    /// Experiment config (TOML). Defaults to the built-in desk config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate profiles, biographies and QA pairs.
    Generate,
    /// Pre-train one model of the config on generated data.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<String>,
    },
    /// Unlearn one attribute of one split from a checkpoint. Hyperparameters
    /// default to the first unlearning block of the config.
    Unlearn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, alias = "ckpt")]
        checkpoint: PathBuf,
        #[arg(long, default_value = "ga")]
        method: Method,
        #[arg(long, alias = "target-split", default_value = "high")]
        split: Split,
        #[arg(long, default_value = "employer")]
        attribute: Attribute,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        save_model: bool,
    },
    /// Score a checkpoint on every split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        probes: bool,
    },
    /// Count windowed co-occurrences of phrase pairs.
    Count {
        #[arg(long, num_args = 1.., required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = cooccur::DEFAULT_WINDOW)]
        window: usize,
    },
    /// Bucket counted records and keep the top of each bucket.
    Bucketize {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        top: usize,
    },
    /// Run the whole experiment, reusing cached stages.
    Run {
        #[arg(long)]
        force: bool,
    },
    /// Compare finished runs.
    Report { runs: Vec<PathBuf> },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::desk(PathBuf::from("runs/desk")),
    };
    if let Some(s) = cli.seed {
        cfg.data_seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e:#}");
        let stage = e.chain().any(|c| matches!(c.downcast_ref(), Some(unlearnlab::Error::Stage { .. })));
        std::process::exit(if stage { 2 } else { 1 });
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Generate => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, &cfg);
            let data = Data::generate(&cfg)?;
            data.write(&out)?;
            println!("{}", serde_json::to_string_pretty(&data.bundle.manifest.counts)?);
        }
        Cmd::Pretrain { data, model } => {
            let cfg = load_config(cli)?;
            let data = Data::read(data)?;
            let spec = match model {
                Some(name) => cfg.models.iter().find(|m| &m.name == name).with_context(|| format!("no model {name:?}"))?,
                None => &cfg.models[0],
            };
            let mcfg = spec.resolve(data.vocab.len(), cfg.pack_length)?;
            let train = spec.train_config(&cfg.train);
            let out = out_dir(cli, &cfg);
            let (m, trace) = lab::pretrain_model(&data, mcfg, &train, cfg.pack_length, &cfg.eval, cfg.data_seed)?;
            save_checkpoint(&out.join("checkpoint"), &m)?;
            write_trace(&out.join("trace.csv"), &trace)?;
        }
        Cmd::Unlearn { data, checkpoint, method, split, attribute, alpha, delta, beta, gamma, lr, epochs, batch, save_model } => {
            let cfg = load_config(cli)?;
            let data = Data::read(data)?;
            let model: Model<f32> = load_checkpoint(checkpoint)?;
            let mut hyper = cfg.unlearn.first().map(|b| b.hyper.clone()).unwrap_or_default();
            hyper.alpha = alpha.unwrap_or(hyper.alpha);
            hyper.beta = beta.unwrap_or(hyper.beta);
            hyper.gamma = gamma.unwrap_or(hyper.gamma);
            hyper.learning_rate = lr.unwrap_or(hyper.learning_rate);
            hyper.epochs = epochs.unwrap_or(hyper.epochs);
            hyper.batch_size = batch.unwrap_or(hyper.batch_size);
            let ucfg = hyper.to_config(*method, *delta, cli.seed.unwrap_or(0))?;
            let out = out_dir(cli, &cfg);
            std::fs::create_dir_all(&out)?;
            let (m, trace) = lab::unlearn_cell(&model, &data, *split, *attribute, &ucfg, &cfg.eval)?;
            write_unlearn_trace(&out.join("trace.csv"), &trace)?;
            if *save_model {
                save_checkpoint(&out.join("checkpoint"), &m)?;
            }
            if let Some(last) = trace.last() {
                println!("{}", serde_json::to_string_pretty(&last.metrics)?);
            }
        }
        Cmd::Eval { data, checkpoint, probes } => {
            let mut cfg = load_config(cli)?;
            cfg.eval.probes |= *probes;
            let data = Data::read(data)?;
            let model: Model<f32> = load_checkpoint(checkpoint)?;
            let rep = lab::evaluate_model(&model, &data, &cfg.eval, cfg.data_seed)?;
            let text = serde_json::to_string_pretty(&rep)?;
            match &cli.out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
        Cmd::Count { corpus, pairs, window } => {
            let index = CorpusIndex::from_files(corpus)?;
            let recs = cooccur::annotate(&cooccur::read_pairs(pairs)?, &index, *window)?;
            let failed = recs.iter().filter(|r| r.error.is_some()).count();
            match &cli.out {
                Some(p) => cooccur::write_records(p, &recs)?,
                None => {
                    for r in &recs {
                        println!("{}", serde_json::to_string(r)?);
                    }
                }
            }
            eprintln!("{} pairs over {} tokens ({failed} failed)", recs.len(), index.len());
        }
        Cmd::Bucketize { records, k, top } => {
            let recs = cooccur::bucketize(&cooccur::read_records(records)?, *k)?;
            let mut kept = Vec::new();
            for b in 0..*k {
                let label = cooccur::bucket_label(b, *k);
                let bucket: Vec<_> = recs.iter().filter(|r| r.bucket.as_deref() == Some(&label)).cloned().collect();
                let t = cooccur::top_k(&bucket, *top)?;
                if t.short {
                    eprintln!("bucket {label} holds only {} records", t.records.len());
                }
                kept.extend(t.records);
            }
            match &cli.out {
                Some(p) => cooccur::write_records(p, &kept)?,
                None => {
                    for r in &kept {
                        println!("{}", serde_json::to_string(r)?);
                    }
                }
            }
        }
        Cmd::Run { force } => {
            let cfg = load_config(cli)?;
            let opts = RunOptions { force: *force, workers: cli.workers, verbose: true };
            let (manifest, summary) = lab::run_experiment(&cfg, &opts)?;
            print!("{}", lab::render_report(&lab::report_from(&[summary])));
            eprintln!("manifest: {}", manifest.out_dir.join("manifest.json").display());
        }
        Cmd::Report { runs } => {
            if runs.is_empty() {
                bail!("report needs at least one run directory");
            }
            let manifests = runs.iter().map(|r| RunManifest::read(r)).collect::<unlearnlab::Result<Vec<_>>>()?;
            let text = lab::render_report(&lab::report(&manifests)?);
            match &cli.out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
