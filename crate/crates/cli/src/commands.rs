//! The five subcommand bodies. Each takes a fully resolved argument
//! struct (flag/config/env precedence already applied) and returns data
//! the caller can also use in-process, which is how the test suite drives
//! them.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use latentpatch_core::fileio::{read_pgm, read_tensor, write_pgm, write_tensor};
use latentpatch_core::flow::run_standard_suite;
use latentpatch_core::metrics::{average_gain, MetricCurve};
use latentpatch_core::rng::SplitMix64;
use latentpatch_core::tensor::{
    dequantize_bytes, gray_to_value, quantize, tile, untile, FeatureTensor, Mosaic, QuantParams,
    TileLayout,
};
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::FileConfig;
use crate::pipeline::{corrupt, recover_gray, score, valid_pixels, Method};
use crate::CliError;

/// Sidecar file names written next to each corrupted mosaic.
pub const MOSAIC_FILE: &str = "mosaic.pgm";
pub const MASK_FILE: &str = "mask.pgm";
pub const PARAMS_FILE: &str = "params.txt";
pub const META_FILE: &str = "meta.txt";

/// Sweep output file names.
pub const SWEEP_FILE: &str = "sweep.csv";
pub const MEANS_FILE: &str = "means.csv";
pub const GAINS_FILE: &str = "gains.csv";
pub const CHART_FILE: &str = "chart.svg";

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Quantization bounds as two decimal reals, one per line. f32 `Display`
/// prints the shortest digits that parse back to the identical value.
fn write_params(path: &Path, params: QuantParams) -> Result<(), CliError> {
    write_text(path, &format!("{}\n{}\n", params.lo, params.hi))
}

fn read_params(path: &Path) -> Result<QuantParams, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut reals = text.split_whitespace().map(|t| {
        t.parse::<f32>()
            .map_err(|_| CliError::Data(format!("{}: not a real: {t:?}", path.display())))
    });
    match (reals.next(), reals.next(), reals.next()) {
        (Some(lo), Some(hi), None) => Ok(QuantParams { lo: lo?, hi: hi? }),
        _ => Err(CliError::Data(format!(
            "{}: expected exactly two reals",
            path.display()
        ))),
    }
}

fn write_meta(path: &Path, layout: TileLayout) -> Result<(), CliError> {
    write_text(
        path,
        &format!(
            "channels={}\nchannel_height={}\nchannel_width={}\n",
            layout.channels, layout.channel_height, layout.channel_width
        ),
    )
}

fn read_meta(path: &Path) -> Result<TileLayout, CliError> {
    let cfg = FileConfig::load(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let field = |key: &str| -> Result<usize, CliError> {
        cfg.get_parsed::<usize>(key)
            .map_err(|e| CliError::Data(e.to_string()))?
            .ok_or_else(|| CliError::Data(format!("{}: missing {key}", path.display())))
    };
    Ok(TileLayout::for_channels(
        field("channels")?,
        field("channel_height")?,
        field("channel_width")?,
    ))
}

pub struct CorruptArgs {
    pub input: PathBuf,
    pub p: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Quantizes a tensor, pushes it through the lossy channel, and writes
/// the received mosaic plus everything needed to recover it later.
pub fn cmd_corrupt(args: &CorruptArgs) -> Result<(), CliError> {
    let tensor = read_tensor(&args.input)?;
    let quantized = quantize(&tile(&tensor));
    let rebuilt = corrupt(&quantized, args.p, args.seed)?;

    std::fs::create_dir_all(&args.out_dir)?;
    write_pgm(&args.out_dir.join(MOSAIC_FILE), &rebuilt.bytes)?;
    let mask_bytes = rebuilt.mask.grid().mapv(|m| if m { 255u8 } else { 0u8 });
    write_pgm(&args.out_dir.join(MASK_FILE), &mask_bytes)?;
    write_params(&args.out_dir.join(PARAMS_FILE), quantized.params)?;
    write_meta(&args.out_dir.join(META_FILE), quantized.layout)?;

    println!(
        "corrupted {} at p={} seed={}: {} of {} slabs lost -> {}",
        args.input.display(),
        args.p,
        args.seed,
        rebuilt.mask.missing_pixels() / (latentpatch_core::packet::SLAB_ROWS * rebuilt.bytes.ncols()),
        rebuilt.bytes.nrows() / latentpatch_core::packet::SLAB_ROWS,
        args.out_dir.display()
    );
    Ok(())
}

pub struct RecoverArgs {
    pub mosaic: PathBuf,
    pub mask: PathBuf,
    pub params: PathBuf,
    pub meta: PathBuf,
    pub method: Method,
    pub out: PathBuf,
}

/// Reads a corrupted mosaic and its sidecars, conceals the holes with the
/// chosen method, and writes the recovered tensor.
pub fn cmd_recover(args: &RecoverArgs) -> Result<(), CliError> {
    let bytes = read_pgm(&args.mosaic)?;
    let mask_bytes = read_pgm(&args.mask)?;
    if bytes.dim() != mask_bytes.dim() {
        return Err(CliError::Data(format!(
            "mosaic is {:?} but mask is {:?}",
            bytes.dim(),
            mask_bytes.dim()
        )));
    }
    let mask = mask_bytes.mapv(|b| b != 0);
    let params = read_params(&args.params)?;
    let layout = read_meta(&args.meta)?;
    if (layout.grid_rows(), layout.grid_cols()) != bytes.dim() {
        return Err(CliError::Data(format!(
            "meta describes a {}x{} mosaic but the image is {}x{}",
            layout.grid_rows(),
            layout.grid_cols(),
            bytes.nrows(),
            bytes.ncols()
        )));
    }

    let started = Instant::now();
    let gray = recover_gray(&bytes, &mask, layout, params, args.method)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let values = gray.mapv(|g| gray_to_value(g, params));
    let tensor = untile(&Mosaic::new(values, layout)?)?;
    write_tensor(&args.out, &tensor)?;
    println!(
        "recovered {} with {} in {elapsed_ms:.1} ms -> {}",
        args.mosaic.display(),
        args.method.name(),
        args.out.display()
    );
    Ok(())
}

/// Fully resolved sweep plan. Tensors are already in memory; the caller
/// decides whether they came from LTNS files or the synthetic generator.
pub struct SweepConfig {
    pub inputs: Vec<(String, FeatureTensor)>,
    pub probabilities: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 keeps the global default.
    pub jobs: usize,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.inputs.is_empty() {
            return Err(CliError::Usage("sweep needs at least one input tensor".into()));
        }
        if self.probabilities.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Usage(
                "sweep needs nonempty probabilities, methods, and seeds".into(),
            ));
        }
        for &p in &self.probabilities {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(CliError::Usage(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// One sweep CSV row. Failed runs carry the failure text in `status` and
/// empty score fields.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub tensor: String,
    pub p: f64,
    pub method: Method,
    pub seed: u64,
    pub masked_psnr_db: Option<f64>,
    pub psnr_db: Option<f64>,
    pub recover_ms: f64,
    pub status: String,
}

pub struct SweepOutputs {
    pub rows: Vec<SweepRow>,
    /// Mean masked PSNR per (method, p), over rows that succeeded.
    pub means: Vec<(Method, f64, f64)>,
    /// Trapezoidal average gain vs the `none` baseline per method.
    pub gains: Vec<(Method, f64)>,
}

/// The drop pattern for a run comes from the run seed's child stream for
/// that tensor, so tensors see different masks while rows stay keyed by
/// the seed the user asked for.
fn channel_seed(run_seed: u64, tensor_index: usize) -> u64 {
    let mut master = SplitMix64::new(run_seed);
    (0..=tensor_index).map(|_| master.next_u64()).last().unwrap()
}

/// Runs the corruption/recovery grid, writes sweep.csv, means.csv,
/// gains.csv, and chart.svg into the output directory, and returns the
/// same numbers for in-process callers.
pub fn cmd_sweep(config: &SweepConfig) -> Result<SweepOutputs, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;

    struct Prepared {
        name: String,
        truth_gray: Array2<f64>,
        quantized: latentpatch_core::tensor::QuantizedMosaic,
        valid: Array2<bool>,
    }
    let prepared: Vec<Prepared> = config
        .inputs
        .iter()
        .map(|(name, tensor)| {
            let quantized = quantize(&tile(tensor));
            Prepared {
                name: name.clone(),
                truth_gray: quantized.bytes.mapv(|b| b as f64),
                valid: valid_pixels(quantized.layout),
                quantized,
            }
        })
        .collect();

    // Work units share one corruption per (tensor, p, seed); methods fan
    // out inside the unit. Rows are re-sorted afterwards, so scheduling
    // order never shows in the output.
    let mut units = Vec::new();
    for (ti, _) in prepared.iter().enumerate() {
        for &p in &config.probabilities {
            for &seed in &config.seeds {
                units.push((ti, p, seed));
            }
        }
    }

    let run_units = || -> Vec<Vec<SweepRow>> {
        units
            .par_iter()
            .map(|&(ti, p, seed)| {
                let t = &prepared[ti];
                let mut rows = Vec::with_capacity(config.methods.len());
                let rebuilt = match corrupt(&t.quantized, p, channel_seed(seed, ti)) {
                    Ok(r) => r,
                    Err(e) => {
                        for &method in &config.methods {
                            rows.push(SweepRow {
                                tensor: t.name.clone(),
                                p,
                                method,
                                seed,
                                masked_psnr_db: None,
                                psnr_db: None,
                                recover_ms: 0.0,
                                status: sanitize(&e.to_string()),
                            });
                        }
                        return rows;
                    }
                };
                for &method in &config.methods {
                    let started = Instant::now();
                    let outcome = recover_gray(
                        &rebuilt.bytes,
                        rebuilt.mask.grid(),
                        t.quantized.layout,
                        t.quantized.params,
                        method,
                    );
                    let recover_ms = started.elapsed().as_secs_f64() * 1e3;
                    let row = match outcome.and_then(|rec| {
                        score(&t.truth_gray, &rec, rebuilt.mask.grid(), &t.valid)
                    }) {
                        Ok((masked_db, full_db)) => SweepRow {
                            tensor: t.name.clone(),
                            p,
                            method,
                            seed,
                            masked_psnr_db: Some(masked_db),
                            psnr_db: Some(full_db),
                            recover_ms,
                            status: "ok".into(),
                        },
                        Err(e) => SweepRow {
                            tensor: t.name.clone(),
                            p,
                            method,
                            seed,
                            masked_psnr_db: None,
                            psnr_db: None,
                            recover_ms,
                            status: sanitize(&e.to_string()),
                        },
                    };
                    rows.push(row);
                }
                rows
            })
            .collect()
    };
    let nested: Vec<Vec<SweepRow>> = if config.jobs == 0 {
        run_units()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| CliError::Data(format!("cannot build worker pool: {e}")))?;
        pool.install(run_units)
    };

    let mut rows: Vec<SweepRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (&a.tensor, a.p.to_bits(), a.method, a.seed)
            .cmp(&(&b.tensor, b.p.to_bits(), b.method, b.seed))
    });

    let means = sweep_means(&rows, &config.methods, &config.probabilities);
    let gains = sweep_gains(&means, &config.methods, &config.probabilities);

    write_sweep_csv(&config.out_dir.join(SWEEP_FILE), &rows)?;
    write_means_csv(&config.out_dir.join(MEANS_FILE), &means)?;
    write_gains_csv(&config.out_dir.join(GAINS_FILE), &gains)?;
    let series: Vec<(String, Vec<(f64, f64)>)> = config
        .methods
        .iter()
        .map(|&m| {
            let pts = means
                .iter()
                .filter(|&&(mm, _, _)| mm == m)
                .map(|&(_, p, db)| (p, db))
                .collect();
            (m.name().to_string(), pts)
        })
        .collect();
    write_text(
        &config.out_dir.join(CHART_FILE),
        &crate::svg::line_chart(
            "mean masked PSNR vs loss probability",
            "loss probability p",
            "mean masked PSNR (dB)",
            &series,
        ),
    )?;

    Ok(SweepOutputs { rows, means, gains })
}

fn sanitize(message: &str) -> String {
    message.replace(['\n', '\r'], " ").replace(',', ";")
}

/// Means keep the method roster order, probabilities ascending. Grid
/// points where every run failed are skipped.
fn sweep_means(
    rows: &[SweepRow],
    methods: &[Method],
    probabilities: &[f64],
) -> Vec<(Method, f64, f64)> {
    let mut ps: Vec<f64> = probabilities.to_vec();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut means = Vec::new();
    for &method in methods {
        for &p in &ps {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.p == p)
                .filter_map(|r| r.masked_psnr_db)
                .collect();
            if !scores.is_empty() {
                means.push((method, p, scores.iter().sum::<f64>() / scores.len() as f64));
            }
        }
    }
    means
}

/// Average gain over the swept range vs `none`, for every other method
/// with a complete curve. Needs at least two probabilities and a complete
/// baseline; otherwise there is nothing to integrate and the table is
/// empty.
fn sweep_gains(
    means: &[(Method, f64, f64)],
    methods: &[Method],
    probabilities: &[f64],
) -> Vec<(Method, f64)> {
    let curve_of = |method: Method| -> Option<MetricCurve> {
        let pts: Vec<(f64, f64)> = means
            .iter()
            .filter(|&&(m, _, _)| m == method)
            .map(|&(_, p, db)| (p, db))
            .collect();
        let mut unique = probabilities.to_vec();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        if pts.len() != unique.len() {
            return None;
        }
        MetricCurve::new(pts).ok()
    };
    let Some(baseline) = (methods.contains(&Method::None)).then(|| curve_of(Method::None)).flatten()
    else {
        return Vec::new();
    };
    methods
        .iter()
        .filter(|&&m| m != Method::None)
        .filter_map(|&m| {
            let curve = curve_of(m)?;
            average_gain(&curve, &baseline).ok().map(|g| (m, g))
        })
        .collect()
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    w.write_record([
        "tensor",
        "p",
        "method",
        "seed",
        "masked_psnr_db",
        "psnr_db",
        "recover_ms",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            r.tensor.as_str(),
            &r.p.to_string(),
            r.method.name(),
            &r.seed.to_string(),
            &r.masked_psnr_db.map(|v| format!("{v:.4}")).unwrap_or_default(),
            &r.psnr_db.map(|v| format!("{v:.4}")).unwrap_or_default(),
            &format!("{:.3}", r.recover_ms),
            &r.status,
        ])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}

fn write_means_csv(path: &Path, means: &[(Method, f64, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["method", "p", "mean_masked_psnr_db"])?;
    for &(method, p, db) in means {
        w.write_record([method.name(), &p.to_string(), &format!("{db:.4}")])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}

fn write_gains_csv(path: &Path, gains: &[(Method, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["method", "average_gain_db_vs_none"])?;
    for &(method, gain) in gains {
        w.write_record([method.name(), &format!("{gain:.4}")])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}

pub struct FlowcheckArgs {
    pub tolerance: f64,
    pub out: Option<PathBuf>,
}

/// One flowcheck report row: the worst flow for a signal/transform pair.
pub struct FlowcheckRow {
    pub transform: String,
    pub signal: String,
    pub flow: (i64, i64),
    pub max_residual: f64,
    pub rms_residual: f64,
    pub pass: bool,
}

/// Runs the shift-invariance suite and reports one row per
/// signal/transform pair, carrying that pair's worst flow. Returns
/// whether every case passed; the binary turns `false` into exit code 3.
pub fn cmd_flowcheck(args: &FlowcheckArgs) -> Result<(bool, Vec<FlowcheckRow>), CliError> {
    let cases = run_standard_suite(args.tolerance)?;
    let mut rows: Vec<FlowcheckRow> = Vec::new();
    for case in &cases {
        match rows
            .iter_mut()
            .find(|r| r.signal == case.signal && r.transform == case.transform)
        {
            None => rows.push(FlowcheckRow {
                transform: case.transform.clone(),
                signal: case.signal.clone(),
                flow: case.flow,
                max_residual: case.max_residual,
                rms_residual: case.rms_residual,
                pass: case.pass,
            }),
            Some(row) => {
                if case.max_residual > row.max_residual {
                    row.flow = case.flow;
                    row.max_residual = case.max_residual;
                    row.rms_residual = case.rms_residual;
                }
                row.pass = row.pass && case.pass;
            }
        }
    }

    let mut w: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(|e| {
            CliError::Data(format!("cannot write {}: {e}", path.display()))
        })?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(w, "transform,signal,flow,max_residual,rms_residual,pass")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},({};{}),{:.3e},{:.3e},{}",
            r.transform, r.signal, r.flow.0, r.flow.1, r.max_residual, r.rms_residual, r.pass
        )?;
    }
    w.flush()?;

    let all_pass = rows.iter().all(|r| r.pass);
    Ok((all_pass, rows))
}

pub struct BenchArgs {
    pub input: PathBuf,
    pub p: f64,
    pub seed: u64,
    pub repeats: usize,
}

pub struct BenchReport {
    /// Median wall-clock milliseconds per method.
    pub medians: Vec<(Method, f64)>,
}

impl BenchReport {
    pub fn median_ms(&self, method: Method) -> Option<f64> {
        self.medians.iter().find(|(m, _)| *m == method).map(|&(_, ms)| ms)
    }

    /// How many times faster `fast` runs than `slow`.
    pub fn speedup(&self, fast: Method, slow: Method) -> Option<f64> {
        match (self.median_ms(fast), self.median_ms(slow)) {
            (Some(f), Some(s)) if f > 0.0 => Some(s / f),
            _ => None,
        }
    }
}

/// Times every recovery method on one corrupted tensor and prints the
/// medians plus the speedups of the inpainting engines over the heaviest
/// completion preset.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let tensor = read_tensor(&args.input)?;
    bench_tensor(&tensor, args.p, args.seed, args.repeats)
}

/// In-memory bench body, shared with tests that synthesize the tensor.
pub fn bench_tensor(
    tensor: &FeatureTensor,
    p: f64,
    seed: u64,
    repeats: usize,
) -> Result<BenchReport, CliError> {
    let quantized = quantize(&tile(tensor));
    let rebuilt = corrupt(&quantized, p, seed)?;
    let mut medians = Vec::new();
    for method in Method::ALL {
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let started = Instant::now();
            let rec = recover_gray(
                &rebuilt.bytes,
                rebuilt.mask.grid(),
                quantized.layout,
                quantized.params,
                method,
            )?;
            samples.push(started.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(&rec);
        }
        samples.sort_by(f64::total_cmp);
        let median = samples[samples.len() / 2];
        medians.push((method, median));
        println!("{:>13}: {median:>10.2} ms median of {repeats}", method.name());
    }
    let report = BenchReport { medians };
    for fast in [Method::Telea, Method::NavierStokes] {
        if let Some(ratio) = report.speedup(fast, Method::Silrtc250) {
            println!(
                "{} is {ratio:.1}x faster than {}",
                fast.name(),
                Method::Silrtc250.name()
            );
        }
    }
    Ok(report)
}

/// Turns the dequantized ground truth of a tensor into the values the
/// sweep scores against; exposed for tests that need the same numbers.
pub fn ground_truth_gray(tensor: &FeatureTensor) -> (Array2<f64>, TileLayout, QuantParams) {
    let q = quantize(&tile(tensor));
    (q.bytes.mapv(|b| b as f64), q.layout, q.params)
}

/// The dequantized tensor itself, for comparisons in value space.
pub fn ground_truth_tensor(tensor: &FeatureTensor) -> Result<FeatureTensor, CliError> {
    let q = quantize(&tile(tensor));
    let grid = dequantize_bytes(&q.bytes, q.params);
    Ok(untile(&Mosaic::new(grid, q.layout)?)?)
}
