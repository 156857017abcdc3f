//! `latentpatch`: corrupt feature-tensor mosaics over a synthetic lossy
//! channel, conceal the holes, sweep quality across loss rates, check the
//! shift-invariance suite, and benchmark the engines.
//!
//! Every long flag can also live in a flat `key=value` config file passed
//! with `--config`; a flag on the command line wins. `LP_SEED` supplies
//! the seed when neither gives one. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 flowcheck failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use latentpatch_cli::commands::{
    cmd_bench, cmd_corrupt, cmd_flowcheck, cmd_recover, cmd_sweep, BenchArgs, CorruptArgs,
    FlowcheckArgs, RecoverArgs, SweepConfig,
};
use latentpatch_cli::config::{env_default_seed, FileConfig};
use latentpatch_cli::corpus;
use latentpatch_cli::pipeline::Method;
use latentpatch_cli::CliError;
use latentpatch_core::fileio::read_tensor;
use latentpatch_core::metrics::DEFAULT_SWEEP;
use latentpatch_core::tensor::FeatureTensor;

#[derive(Parser)]
#[command(
    name = "latentpatch",
    version,
    about = "Loss concealment for tiled deep-feature tensors"
)]
struct Cli {
    /// Flat key=value config file; command-line flags win over its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantize a tensor, drop 8-row slabs, write mosaic.pgm, mask.pgm,
    /// params.txt, and meta.txt into the output directory.
    Corrupt {
        /// Input tensor (LTNS).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Per-packet loss probability in [0, 1].
        #[arg(long)]
        p: Option<f64>,
        /// Channel seed; defaults to LP_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the corrupted mosaic and its sidecars.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Conceal the holes of a corrupted mosaic and write the recovered
    /// tensor (LTNS).
    Recover {
        /// Corrupted mosaic (PGM). Sidecars default to mask.pgm,
        /// params.txt, meta.txt next to it.
        #[arg(long)]
        mosaic: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// One of: none, nearest_rows, telea, navier_stokes, silrtc_50,
        /// silrtc_250.
        #[arg(long)]
        method: Option<String>,
        /// Output tensor path (LTNS).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corrupt/recover/score a grid of (tensor, p, method, seed) runs and
    /// write sweep.csv, means.csv, gains.csv, and chart.svg.
    Sweep {
        /// Input tensor (LTNS); repeat for several. Config key `inputs`
        /// takes a comma-separated list.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// Generate the first N tensors of the documented synthetic
        /// corpus instead of (or in addition to) --input files.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Master seed for the synthetic corpus.
        #[arg(long)]
        corpus_seed: Option<u64>,
        /// Comma-separated loss probabilities; defaults to the standard
        /// 0.05..0.30 grid.
        #[arg(long)]
        probabilities: Option<String>,
        /// Comma-separated method names; defaults to all six.
        #[arg(long)]
        methods: Option<String>,
        /// Comma-separated channel seeds; defaults to the resolved seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads; 0 means one per core.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the shift-invariance suite and emit its CSV report; exits 3
    /// when any case exceeds the tolerance.
    Flowcheck {
        #[arg(long)]
        tolerance: Option<f64>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time every recovery method on one corrupted tensor and print the
    /// speedups over silrtc_250.
    Bench {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Timing samples per method; the median is reported.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

/// Flag value, else config value, else error naming the key.
fn require<T>(flag: Option<T>, cfg: Option<T>, key: &str) -> Result<T, CliError> {
    flag.or(cfg)
        .ok_or_else(|| CliError::Usage(format!("missing --{key} (or config key {key})")))
}

/// Seed precedence: flag, config, LP_SEED, 0.
fn resolve_seed(flag: Option<u64>, cfg: &FileConfig) -> Result<u64, CliError> {
    match flag.or(cfg.get_parsed::<u64>("seed")?) {
        Some(s) => Ok(s),
        None => env_default_seed(),
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry {item:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    match cli.command {
        Cmd::Corrupt { input, p, seed, out_dir } => {
            cmd_corrupt(&CorruptArgs {
                input: require(input, cfg.get_path("input"), "input")?,
                p: require(p, cfg.get_parsed("p")?, "p")?,
                seed: resolve_seed(seed, &cfg)?,
                out_dir: require(out_dir, cfg.get_path("out_dir"), "out-dir")?,
            })?;
            Ok(0)
        }
        Cmd::Recover { mosaic, mask, params, meta, method, out } => {
            let mosaic = require(mosaic, cfg.get_path("mosaic"), "mosaic")?;
            let sibling = |name: &str| sibling_path(&mosaic, name);
            let method_name = require(method, cfg.get_str("method"), "method")?;
            cmd_recover(&RecoverArgs {
                mask: mask.or(cfg.get_path("mask")).unwrap_or_else(|| sibling("mask.pgm")),
                params: params
                    .or(cfg.get_path("params"))
                    .unwrap_or_else(|| sibling("params.txt")),
                meta: meta.or(cfg.get_path("meta")).unwrap_or_else(|| sibling("meta.txt")),
                method: Method::parse(&method_name)?,
                out: require(out, cfg.get_path("out"), "out")?,
                mosaic,
            })?;
            Ok(0)
        }
        Cmd::Sweep {
            inputs,
            synthetic,
            corpus_seed,
            probabilities,
            methods,
            seeds,
            seed,
            out_dir,
            jobs,
        } => {
            let mut resolved: Vec<(String, FeatureTensor)> = Vec::new();
            let paths: Vec<PathBuf> = if inputs.is_empty() {
                cfg.get_list::<String>("inputs")?
                    .unwrap_or_default()
                    .into_iter()
                    .map(PathBuf::from)
                    .collect()
            } else {
                inputs
            };
            for path in &paths {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                resolved.push((name, read_tensor(path)?));
            }
            if let Some(n) = synthetic.or(cfg.get_parsed("synthetic")?) {
                if n == 0 || n > corpus::CORPUS_SIZE {
                    return Err(CliError::Usage(format!(
                        "--synthetic must be 1..={}, got {n}",
                        corpus::CORPUS_SIZE
                    )));
                }
                let corpus_seed = match corpus_seed.or(cfg.get_parsed("corpus_seed")?) {
                    Some(s) => s,
                    None => env_default_seed()?,
                };
                resolved.extend(corpus::standard_corpus(corpus_seed).into_iter().take(n));
            }
            let default_seed = resolve_seed(seed, &cfg)?;
            let seeds = match seeds.or(cfg.get_str("seeds")) {
                Some(raw) => parse_list::<u64>(&raw, "seed")?,
                None => vec![default_seed],
            };
            let probabilities = match probabilities.or(cfg.get_str("probabilities")) {
                Some(raw) => parse_list::<f64>(&raw, "probability")?,
                None => DEFAULT_SWEEP.to_vec(),
            };
            let methods = match methods.or(cfg.get_str("methods")) {
                Some(raw) => raw
                    .split(',')
                    .map(|m| Method::parse(m.trim()))
                    .collect::<Result<Vec<_>, _>>()?,
                None => Method::ALL.to_vec(),
            };
            let outputs = cmd_sweep(&SweepConfig {
                inputs: resolved,
                probabilities,
                methods,
                seeds,
                out_dir: require(out_dir, cfg.get_path("out_dir"), "out-dir")?,
                jobs: jobs.or(cfg.get_parsed("jobs")?).unwrap_or(0),
            })?;
            println!(
                "swept {} runs; wrote sweep.csv, means.csv, gains.csv, chart.svg",
                outputs.rows.len()
            );
            Ok(0)
        }
        Cmd::Flowcheck { tolerance, out } => {
            let (all_pass, rows) = cmd_flowcheck(&FlowcheckArgs {
                tolerance: tolerance.or(cfg.get_parsed("tolerance")?).unwrap_or(1e-6),
                out: out.or(cfg.get_path("out")),
            })?;
            if all_pass {
                eprintln!("flowcheck: all {} cases pass", rows.len());
                Ok(0)
            } else {
                let failing = rows.iter().filter(|r| !r.pass).count();
                eprintln!("flowcheck: {failing} of {} cases FAIL", rows.len());
                Ok(3)
            }
        }
        Cmd::Bench { input, p, seed, repeats } => {
            cmd_bench(&BenchArgs {
                input: require(input, cfg.get_path("input"), "input")?,
                p: require(p, cfg.get_parsed("p")?, "p")?,
                seed: resolve_seed(seed, &cfg)?,
                repeats: repeats.or(cfg.get_parsed("repeats")?).unwrap_or(3),
            })?;
            Ok(0)
        }
    }
}

/// Path of a sibling file next to `anchor`.
fn sibling_path(anchor: &std::path::Path, name: &str) -> PathBuf {
    anchor
        .parent()
        .map(|dir| dir.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}
