//! The `pdmrec` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 invalid
//! configuration or data.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::synthetic::{generate_synthetic, Ordering, SyntheticConfig};
use crate::data::{prepare, read_log, write_log, FilterRule, Holdout, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::model::checkpoint;
use crate::train::{fit_to_dir, TrainConfig, Variant};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pdmrec", version, about = "Position-decoupled sequential recommender")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` training config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input data: a raw log for `preprocess`, a split file otherwise.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum HoldoutArg {
    Valid,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OrderingArg {
    Shuffled,
    Chain,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a raw interaction log and write a leave-one-out split.
    Preprocess {
        /// Positive-interaction rule: wechat, tiktok1, tiktok2 or any-flag.
        #[arg(long, default_value = "wechat")]
        filter: String,
        /// k-core threshold; 0 disables pruning.
        #[arg(long, default_value_t = 0)]
        k_core: usize,
        #[arg(long, default_value_t = '\t')]
        delimiter: char,
        /// Also write an `index<TAB>raw id` item map here.
        #[arg(long)]
        index_map: Option<PathBuf>,
    },
    /// Train on a split file; writes checkpoints and a log under --out.
    Train {
        /// Config overrides, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Rank held-out items with a checkpoint and write a report.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated cutoffs.
        #[arg(long, default_value = "20,50,100", value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_enum, default_value = "test")]
        holdout: HoldoutArg,
    },
    /// Train and test a list of variants on one dataset.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "full,PDMRec1,PDMRec2,PDMRec3")]
        variants: Vec<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write a synthetic interaction log (or a ready split with --split).
    Synth {
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 5)]
        min_len: usize,
        #[arg(long, default_value_t = 20)]
        max_len: usize,
        #[arg(long, default_value_t = 0.9)]
        purity: f64,
        #[arg(long, value_enum, default_value = "shuffled")]
        ordering: OrderingArg,
        /// Write a leave-one-out split instead of a raw log.
        #[arg(long)]
        split: bool,
    },
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn read_split(path: &Path) -> Result<SplitDataset> {
    SplitDataset::read(BufReader::new(fs::File::open(path)?))
}

fn write_split(data: &SplitDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    data.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn train_config(
    common: &Common,
    overrides: &[String],
    variant: Option<&str>,
    epochs: Option<usize>,
) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::from_text(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override `{o}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(v) = variant {
        cfg.variant = v.parse()?;
    }
    if let Some(e) = epochs {
        cfg.max_epochs = e;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command; returns text for standard output.
pub fn execute(cli: &Cli) -> Result<String> {
    let c = &cli.common;
    match &cli.command {
        Command::Preprocess {
            filter,
            k_core,
            delimiter,
            index_map,
        } => {
            let input = required(&c.data, "data")?;
            let out = required(&c.out, "out")?;
            let rule = FilterRule::preset(filter)?;
            let log = read_log(BufReader::new(fs::File::open(input)?), *delimiter)?;
            let data = prepare(&log, &rule, *k_core);
            if data.num_users() == 0 {
                return Err(Error::Data("no user survives filtering".into()));
            }
            write_split(&data, out)?;
            if let Some(p) = index_map {
                data.write_index_map(BufWriter::new(fs::File::create(p)?))?;
            }
            Ok(format!(
                "{} records -> {} users, {} items, hash {}\n",
                log.len(),
                data.num_users(),
                data.num_items(),
                data.content_hash()
            ))
        }
        Command::Train {
            overrides,
            variant,
            epochs,
        } => {
            let data = read_split(required(&c.data, "data")?)?;
            let out = required(&c.out, "out")?;
            let cfg = train_config(c, overrides, variant.as_deref(), *epochs)?;
            let o = fit_to_dir(&data, &cfg, out)?;
            Ok(format!(
                "trained {} epochs; best epoch {} with valid recall@{} {}\n",
                o.log.len(),
                o.best_epoch,
                cfg.valid_k,
                o.best_valid
            ))
        }
        Command::Evaluate {
            checkpoint: ckpt,
            k,
            holdout,
        } => {
            let data = read_split(required(&c.data, "data")?)?;
            let (model, _) = checkpoint::load::<f32>(BufReader::new(fs::File::open(ckpt)?))?;
            let holdout = match holdout {
                HoldoutArg::Valid => Holdout::Valid,
                HoldoutArg::Test => Holdout::Test,
            };
            let text = evaluate(&model, &data, holdout, k)?.to_text();
            match &c.out {
                Some(p) => {
                    fs::write(p, &text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Ablate {
            variants,
            overrides,
            epochs,
        } => {
            let data = read_split(required(&c.data, "data")?)?;
            let out = required(&c.out, "out")?;
            let variants: Vec<Variant> = variants
                .iter()
                .map(|v| v.parse())
                .collect::<Result<_>>()?;
            let base = train_config(c, overrides, None, *epochs)?;
            let hash = data.content_hash();
            let mut rows = Vec::new();
            for v in variants {
                let cfg = TrainConfig {
                    variant: v,
                    ..base.clone()
                };
                let o = fit_to_dir(&data, &cfg, &out.join(v.tag()))?;
                let report = evaluate(&o.best, &data, Holdout::Test, &cfg.eval_ks)?;
                fs::write(out.join(v.tag()).join("report.txt"), report.to_text())?;
                rows.push((v, o.best_epoch, report));
            }
            let table = ablation_table(&rows, base.seed, &hash);
            fs::write(out.join("ablation.tsv"), &table)?;
            Ok(table)
        }
        Command::Synth {
            users,
            items,
            clusters,
            min_len,
            max_len,
            purity,
            ordering,
            split,
        } => {
            let out = required(&c.out, "out")?;
            let cfg = SyntheticConfig {
                users: *users,
                items: *items,
                clusters: *clusters,
                min_len: *min_len,
                max_len: *max_len,
                purity: *purity,
                ordering: match ordering {
                    OrderingArg::Shuffled => Ordering::Shuffled,
                    OrderingArg::Chain => Ordering::Chain,
                },
                seed: c.seed.unwrap_or(0),
            };
            let log = generate_synthetic(&cfg)?;
            if *split {
                let data = prepare(&log, &FilterRule::preset("any-flag")?, 0);
                write_split(&data, out)?;
                Ok(format!("{} users, hash {}\n", data.num_users(), data.content_hash()))
            } else {
                let mut w = BufWriter::new(fs::File::create(out)?);
                write_log(&mut w, &log, '\t')?;
                w.flush()?;
                Ok(format!("{} records\n", log.len()))
            }
        }
    }
}

fn ablation_table(rows: &[(Variant, usize, EvalReport)], seed: u64, hash: &str) -> String {
    let mut s = String::from("variant\tseed\tdata_hash\tbest_epoch");
    if let Some((_, _, r)) = rows.first() {
        for k in &r.ks {
            s.push_str(&format!("\trecall@{k}\tndcg@{k}"));
        }
    }
    s.push('\n');
    for (v, epoch, r) in rows {
        s.push_str(&format!("{v}\t{seed}\t{hash}\t{epoch}"));
        for (rec, nd) in r.recall.iter().zip(&r.ndcg) {
            s.push_str(&format!("\t{rec:.6}\t{nd:.6}"));
        }
        s.push('\n');
    }
    s
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Output goes to stdout, diagnostics to stderr.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
