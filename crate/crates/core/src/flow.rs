//! Numerical lab for translation invariance of common feature-map
//! operations.
//!
//! Test sequences are exact circular translations: frame t is frame 0
//! shifted by t·v with periodic wraparound. Convolution, pointwise
//! activation, and windowed max all commute with integer circular shifts
//! bit for bit, so the transported sequences remain exact translations and
//! the transport residual below vanishes; downscaling by s turns a
//! translation by v into one by v/s. The lab measures those residuals
//! rather than assuming them.
//!
//! The residual is the characteristic-form transport defect
//! `I_{t+1}(x) − I_t(x − v)`: zero exactly when consecutive frames are
//! translations by v, and nonzero in proportion to how far the flow is
//! wrong. Reported maxima are normalized by the mean gradient magnitude of
//! the sequence so tolerances carry across signal scales.

use ndarray::Array2;
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("a sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index} is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    FrameSizeMismatch {
        index: usize,
        got_rows: usize,
        got_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("frame {index} contains a non-finite value")]
    NonFiniteFrame { index: usize },
    #[error("flow component {0} is not an integer; only whole-pixel shifts are generated")]
    NonIntegerFlow(f64),
    #[error("flow grids are {flow_rows}x{flow_cols} but frames are {rows}x{cols}")]
    FlowSizeMismatch {
        flow_rows: usize,
        flow_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("kernel {krows}x{kcols} does not fit a {rows}x{cols} frame")]
    KernelTooLarge {
        krows: usize,
        kcols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("kernel sides must be odd, got {0}x{1}")]
    EvenKernel(usize, usize),
    #[error("half-window must be at least 1")]
    ZeroHalfWindow,
    #[error("downscale factors must be at least 1")]
    ZeroFactor,
}

/// An ordered stack of equal-sized finite frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Array2<f64>>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Array2<f64>>) -> Result<Self, FlowError> {
        if frames.len() < 2 {
            return Err(FlowError::TooFewFrames(frames.len()));
        }
        let (rows, cols) = frames[0].dim();
        for (index, frame) in frames.iter().enumerate() {
            let (got_rows, got_cols) = frame.dim();
            if (got_rows, got_cols) != (rows, cols) {
                return Err(FlowError::FrameSizeMismatch {
                    index,
                    got_rows,
                    got_cols,
                    rows,
                    cols,
                });
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(FlowError::NonFiniteFrame { index });
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[Array2<f64>] {
        &self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dim()
    }
}

/// Pixels-per-frame velocity, either shared by the whole frame or given
/// per pixel. Components are (x = column, y = row).
#[derive(Debug, Clone, PartialEq)]
pub enum FlowField {
    Constant { vx: f64, vy: f64 },
    PerPixel { vx: Array2<f64>, vy: Array2<f64> },
}

impl FlowField {
    pub fn constant(vx: f64, vy: f64) -> Self {
        FlowField::Constant { vx, vy }
    }

    fn at(&self, r: usize, c: usize) -> (f64, f64) {
        match self {
            FlowField::Constant { vx, vy } => (*vx, *vy),
            FlowField::PerPixel { vx, vy } => (vx[[r, c]], vy[[r, c]]),
        }
    }

    fn check_dims(&self, rows: usize, cols: usize) -> Result<(), FlowError> {
        if let FlowField::PerPixel { vx, vy } = self {
            for grid in [vx, vy] {
                if grid.dim() != (rows, cols) {
                    let (flow_rows, flow_cols) = grid.dim();
                    return Err(FlowError::FlowSizeMismatch {
                        flow_rows,
                        flow_cols,
                        rows,
                        cols,
                    });
                }
            }
        }
        Ok(())
    }
}

fn as_shift(v: f64) -> Result<i64, FlowError> {
    if !v.is_finite() || v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
        return Err(FlowError::NonIntegerFlow(v));
    }
    Ok(v as i64)
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Scalar activations applied frame-wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

/// One feature-map operation under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// Periodic sliding dot product with a small odd-sided kernel (the
    /// orientation convention is irrelevant to every invariance here).
    Conv { kernel: Array2<f64> },
    Pointwise { activation: Activation },
    /// Max over the (2h+1)² periodic window.
    LocalMax { h: usize },
    /// Keep every s-th sample per axis.
    Downscale { sx: usize, sy: usize },
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transform::Conv { kernel } => {
                let (kh, kw) = kernel.dim();
                write!(f, "conv{kh}x{kw}")
            }
            Transform::Pointwise { activation } => write!(f, "{}", activation.name()),
            Transform::LocalMax { h } => write!(f, "localmax{h}"),
            Transform::Downscale { sx, sy } => write!(f, "downscale{sx}x{sy}"),
        }
    }
}

/// Shifts a frame circularly by (dy rows, dx cols).
fn circular_shift(frame: &Array2<f64>, dy: i64, dx: i64) -> Array2<f64> {
    let (rows, cols) = frame.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        frame[[wrap(r as i64 - dy, rows), wrap(c as i64 - dx, cols)]]
    })
}

/// Builds `n_frames` of `profile` translating at a constant whole-pixel
/// velocity with periodic wraparound.
pub fn synth_translating(
    profile: &Array2<f64>,
    flow: &FlowField,
    n_frames: usize,
) -> Result<FrameSequence, FlowError> {
    let (vx, vy) = match flow {
        FlowField::Constant { vx, vy } => (*vx, *vy),
        FlowField::PerPixel { vx, .. } => {
            // Translation sequences only make sense for a shared velocity.
            return Err(FlowError::NonIntegerFlow(vx[[0, 0]]));
        }
    };
    let (sx, sy) = (as_shift(vx)?, as_shift(vy)?);
    let frames = (0..n_frames.max(2))
        .map(|t| circular_shift(profile, sy * t as i64, sx * t as i64))
        .collect();
    FrameSequence::new(frames)
}

/// Transport defect of each consecutive frame pair under `flow`: frame
/// t+1 minus frame t advected by one step of the flow (periodic
/// sampling). Identically zero exactly when the sequence translates by
/// the flow.
pub fn flow_residual(
    seq: &FrameSequence,
    flow: &FlowField,
) -> Result<Vec<Array2<f64>>, FlowError> {
    let (rows, cols) = seq.dims();
    flow.check_dims(rows, cols)?;
    let mut residuals = Vec::with_capacity(seq.frames.len() - 1);
    for pair in seq.frames.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let mut res = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                let (vx, vy) = flow.at(r, c);
                let (dx, dy) = (as_shift(vx)?, as_shift(vy)?);
                let src = prev[[wrap(r as i64 - dy, rows), wrap(c as i64 - dx, cols)]];
                res[[r, c]] = next[[r, c]] - src;
            }
        }
        residuals.push(res);
    }
    Ok(residuals)
}

/// Applies one transform to every frame.
pub fn apply_transform(seq: &FrameSequence, transform: &Transform) -> Result<FrameSequence, FlowError> {
    let (rows, cols) = seq.dims();
    let frames: Result<Vec<Array2<f64>>, FlowError> = match transform {
        Transform::Conv { kernel } => {
            let (krows, kcols) = kernel.dim();
            if krows % 2 == 0 || kcols % 2 == 0 {
                return Err(FlowError::EvenKernel(krows, kcols));
            }
            if krows > rows || kcols > cols {
                return Err(FlowError::KernelTooLarge {
                    krows,
                    kcols,
                    rows,
                    cols,
                });
            }
            let (ch, cw) = (krows as i64 / 2, kcols as i64 / 2);
            Ok(seq
                .frames
                .iter()
                .map(|frame| {
                    Array2::from_shape_fn((rows, cols), |(r, c)| {
                        let mut acc = 0.0;
                        for i in 0..krows {
                            for j in 0..kcols {
                                let rr = wrap(r as i64 + i as i64 - ch, rows);
                                let cc = wrap(c as i64 + j as i64 - cw, cols);
                                acc += kernel[[i, j]] * frame[[rr, cc]];
                            }
                        }
                        acc
                    })
                })
                .collect())
        }
        Transform::Pointwise { activation } => Ok(seq
            .frames
            .iter()
            .map(|frame| frame.mapv(|x| activation.apply(x)))
            .collect()),
        Transform::LocalMax { h } => {
            if *h == 0 {
                return Err(FlowError::ZeroHalfWindow);
            }
            let h = *h as i64;
            Ok(seq
                .frames
                .iter()
                .map(|frame| {
                    Array2::from_shape_fn((rows, cols), |(r, c)| {
                        let mut best = f64::NEG_INFINITY;
                        for di in -h..=h {
                            for dj in -h..=h {
                                let v = frame[[wrap(r as i64 + di, rows), wrap(c as i64 + dj, cols)]];
                                best = best.max(v);
                            }
                        }
                        best
                    })
                })
                .collect())
        }
        Transform::Downscale { sx, sy } => {
            if *sx == 0 || *sy == 0 {
                return Err(FlowError::ZeroFactor);
            }
            let new_rows = rows.div_ceil(*sy);
            let new_cols = cols.div_ceil(*sx);
            Ok(seq
                .frames
                .iter()
                .map(|frame| {
                    Array2::from_shape_fn((new_rows, new_cols), |(r, c)| frame[[r * sy, c * sx]])
                })
                .collect())
        }
    };
    FrameSequence::new(frames?)
}

/// How the transform changes the velocity: spatial resampling divides it
/// by the keep-every factor, everything else leaves it alone.
pub fn predicted_flow(transform: &Transform, flow: &FlowField) -> FlowField {
    match transform {
        Transform::Downscale { sx, sy } => match flow {
            FlowField::Constant { vx, vy } => FlowField::Constant {
                vx: vx / *sx as f64,
                vy: vy / *sy as f64,
            },
            FlowField::PerPixel { vx, vy } => {
                let sample = |g: &Array2<f64>, s: usize, axis_s: usize| {
                    let (rows, cols) = g.dim();
                    let _ = s;
                    Array2::from_shape_fn(
                        (rows.div_ceil(*sy), cols.div_ceil(*sx)),
                        |(r, c)| g[[r * sy, c * sx]] / axis_s as f64,
                    )
                };
                FlowField::PerPixel {
                    vx: sample(vx, *sx, *sx),
                    vy: sample(vy, *sy, *sy),
                }
            }
        },
        _ => flow.clone(),
    }
}

/// Mean central-difference gradient magnitude over all frames (periodic),
/// the scale used to normalize residuals.
pub fn mean_gradient_scale(seq: &FrameSequence) -> f64 {
    let (rows, cols) = seq.dims();
    let mut total = 0.0;
    for frame in &seq.frames {
        for r in 0..rows {
            for c in 0..cols {
                let gy = (frame[[wrap(r as i64 + 1, rows), c]]
                    - frame[[wrap(r as i64 - 1, rows), c]])
                    / 2.0;
                let gx = (frame[[r, wrap(c as i64 + 1, cols)]]
                    - frame[[r, wrap(c as i64 - 1, cols)]])
                    / 2.0;
                total += (gy * gy + gx * gx).sqrt();
            }
        }
    }
    total / (seq.frames.len() * rows * cols) as f64
}

/// One transform's scorecard from [`invariance_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCase {
    pub transform: String,
    pub max_residual: f64,
    pub rms_residual: f64,
    pub pass: bool,
}

fn residual_stats(seq: &FrameSequence, flow: &FlowField) -> Result<(f64, f64), FlowError> {
    let residuals = flow_residual(seq, flow)?;
    let scale = mean_gradient_scale(seq) + 1e-12;
    let mut max = 0.0f64;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for grid in &residuals {
        for &v in grid.iter() {
            max = max.max(v.abs());
            sum_sq += v * v;
            count += 1;
        }
    }
    Ok((max / scale, (sum_sq / count as f64).sqrt() / scale))
}

/// Applies each transform, measures the residual against the transform's
/// predicted flow, and flags PASS when the normalized max residual is
/// strictly below `tolerance`.
pub fn invariance_report(
    seq: &FrameSequence,
    flow: &FlowField,
    transforms: &[Transform],
    tolerance: f64,
) -> Result<Vec<InvarianceCase>, FlowError> {
    transforms
        .iter()
        .map(|transform| {
            let transformed = apply_transform(seq, transform)?;
            let expect = predicted_flow(transform, flow);
            let (max_residual, rms_residual) = residual_stats(&transformed, &expect)?;
            Ok(InvarianceCase {
                transform: transform.to_string(),
                max_residual,
                rms_residual,
                pass: max_residual < tolerance,
            })
        })
        .collect()
}

/// Normalized max residuals of a downscaled translation sequence under
/// the correctly scaled flow and under the original unscaled flow.
pub fn downscale_comparison(
    profile: &Array2<f64>,
    flow: &FlowField,
    sx: usize,
    sy: usize,
    n_frames: usize,
) -> Result<(f64, f64), FlowError> {
    let seq = synth_translating(profile, flow, n_frames)?;
    let transform = Transform::Downscale { sx, sy };
    let transformed = apply_transform(&seq, &transform)?;
    let scaled = predicted_flow(&transform, flow);
    let (scaled_max, _) = residual_stats(&transformed, &scaled)?;
    let (unscaled_max, _) = residual_stats(&transformed, flow)?;
    Ok((scaled_max, unscaled_max))
}

/// Test profiles used across the invariance suite, all periodic on their
/// grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Isotropic bump with σ = 6 px at the grid center, wrapped distance.
    GaussianBump,
    /// Sinusoid along x with period 8 px, constant along y.
    Stripes,
    /// Uniform noise smoothed by two periodic 3×3 box passes.
    SmoothedNoise { seed: u64 },
}

impl SignalKind {
    pub fn name(&self) -> String {
        match self {
            SignalKind::GaussianBump => "gaussian_bump".into(),
            SignalKind::Stripes => "stripes".into(),
            SignalKind::SmoothedNoise { seed } => format!("smoothed_noise_{seed}"),
        }
    }

    pub fn sample(&self, rows: usize, cols: usize) -> Array2<f64> {
        match self {
            SignalKind::GaussianBump => {
                let (cy, cx) = (rows as f64 / 2.0, cols as f64 / 2.0);
                Array2::from_shape_fn((rows, cols), |(r, c)| {
                    let dy = (r as f64 - cy).abs().min(rows as f64 - (r as f64 - cy).abs());
                    let dx = (c as f64 - cx).abs().min(cols as f64 - (c as f64 - cx).abs());
                    (-(dx * dx + dy * dy) / (2.0 * 36.0)).exp()
                })
            }
            SignalKind::Stripes => Array2::from_shape_fn((rows, cols), |(_, c)| {
                (2.0 * std::f64::consts::PI * c as f64 / 8.0).sin()
            }),
            SignalKind::SmoothedNoise { seed } => {
                let mut rng = SplitMix64::new(*seed);
                let mut grid = Array2::from_shape_fn((rows, cols), |_| rng.next_f64());
                let kernel = Array2::from_elem((3, 3), 1.0 / 9.0);
                for _ in 0..2 {
                    grid = Array2::from_shape_fn((rows, cols), |(r, c)| {
                        let mut acc = 0.0;
                        for i in 0..3i64 {
                            for j in 0..3i64 {
                                acc += kernel[[i as usize, j as usize]]
                                    * grid[[wrap(r as i64 + i - 1, rows), wrap(c as i64 + j - 1, cols)]];
                            }
                        }
                        acc
                    });
                }
                grid
            }
        }
    }
}

/// One suite verdict: a signal, a transform, and the worst normalized
/// residual under the flow being tested.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub signal: String,
    pub transform: String,
    pub flow: (i64, i64),
    pub max_residual: f64,
    pub rms_residual: f64,
    pub pass: bool,
}

pub const SUITE_DIMS: (usize, usize) = (64, 64);
pub const SUITE_FRAMES: usize = 4;
/// Whole-pixel (vx, vy) velocities exercised by the suite.
pub const SUITE_FLOWS: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (2, 0)];

pub fn suite_signals() -> Vec<SignalKind> {
    vec![
        SignalKind::GaussianBump,
        SignalKind::Stripes,
        SignalKind::SmoothedNoise { seed: 1 },
        SignalKind::SmoothedNoise { seed: 2 },
        SignalKind::SmoothedNoise { seed: 3 },
    ]
}

pub fn suite_transforms() -> Vec<(String, Transform)> {
    let mut rng = SplitMix64::new(7);
    let random_kernel = Array2::from_shape_fn((3, 3), |_| rng.next_in(-1.0, 1.0));
    vec![
        (
            "conv3_box".into(),
            Transform::Conv {
                kernel: Array2::from_elem((3, 3), 1.0 / 9.0),
            },
        ),
        ("conv3_random".into(), Transform::Conv { kernel: random_kernel }),
        (
            "relu".into(),
            Transform::Pointwise {
                activation: Activation::Relu,
            },
        ),
        (
            "sigmoid".into(),
            Transform::Pointwise {
                activation: Activation::Sigmoid,
            },
        ),
        (
            "tanh".into(),
            Transform::Pointwise {
                activation: Activation::Tanh,
            },
        ),
        ("localmax1".into(), Transform::LocalMax { h: 1 }),
        ("downscale2".into(), Transform::Downscale { sx: 2, sy: 2 }),
    ]
}

/// Runs every signal × transform × flow combination (downscale only where
/// the velocity stays whole after halving) and returns one case per
/// combination.
pub fn run_standard_suite(tolerance: f64) -> Result<Vec<SuiteCase>, FlowError> {
    let (rows, cols) = SUITE_DIMS;
    let mut cases = Vec::new();
    for signal in suite_signals() {
        let profile = signal.sample(rows, cols);
        for &(vx, vy) in &SUITE_FLOWS {
            let flow = FlowField::constant(vx as f64, vy as f64);
            let seq = synth_translating(&profile, &flow, SUITE_FRAMES)?;
            for (label, transform) in suite_transforms() {
                if let Transform::Downscale { sx, sy } = transform {
                    if vx % sx as i64 != 0 || vy % sy as i64 != 0 {
                        continue;
                    }
                }
                let report = invariance_report(&seq, &flow, &[transform], tolerance)?;
                let case = &report[0];
                cases.push(SuiteCase {
                    signal: signal.name(),
                    transform: label,
                    flow: (vx, vy),
                    max_residual: case.max_residual,
                    rms_residual: case.rms_residual,
                    pass: case.pass,
                });
            }
        }
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> Array2<f64> {
        SignalKind::GaussianBump.sample(64, 64)
    }

    #[test]
    fn static_flow_freezes_the_sequence() {
        let seq = synth_translating(&bump(), &FlowField::constant(0.0, 0.0), 3).unwrap();
        assert_eq!(seq.frames()[0], seq.frames()[1]);
        assert_eq!(seq.frames()[0], seq.frames()[2]);
    }

    #[test]
    fn bump_center_advances_one_column_per_frame() {
        let seq = synth_translating(&bump(), &FlowField::constant(1.0, 0.0), 3).unwrap();
        let argmax = |frame: &Array2<f64>| {
            frame
                .indexed_iter()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(p, _)| p)
                .unwrap()
        };
        let (r0, c0) = argmax(&seq.frames()[0]);
        for (t, frame) in seq.frames().iter().enumerate() {
            assert_eq!(argmax(frame), (r0, (c0 + t) % 64));
        }
    }

    #[test]
    fn frames_match_direct_circular_shifts() {
        let profile = SignalKind::SmoothedNoise { seed: 5 }.sample(32, 48);
        let seq = synth_translating(&profile, &FlowField::constant(2.0, 1.0), 4).unwrap();
        for (t, frame) in seq.frames().iter().enumerate() {
            let expect = circular_shift(&profile, t as i64, 2 * t as i64);
            assert_eq!(frame, &expect, "frame {t}");
        }
    }

    #[test]
    fn non_integer_flow_is_rejected() {
        assert!(matches!(
            synth_translating(&bump(), &FlowField::constant(0.5, 0.0), 3),
            Err(FlowError::NonIntegerFlow(_))
        ));
    }

    #[test]
    fn constant_sequence_has_zero_residual_for_any_flow() {
        let frames = vec![Array2::from_elem((8, 8), 3.25); 3];
        let seq = FrameSequence::new(frames).unwrap();
        for flow in [FlowField::constant(1.0, 0.0), FlowField::constant(2.0, 3.0)] {
            let res = flow_residual(&seq, &flow).unwrap();
            assert!(res.iter().all(|g| g.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn plane_solution_has_zero_residual_off_the_seam() {
        // I(x, t) = x − t translating at vx = 1; exact except where the
        // periodic sample wraps the left edge.
        let frames: Vec<Array2<f64>> = (0..3)
            .map(|t| Array2::from_shape_fn((4, 16), |(_, c)| c as f64 - t as f64))
            .collect();
        let seq = FrameSequence::new(frames).unwrap();
        let res = flow_residual(&seq, &FlowField::constant(1.0, 0.0)).unwrap();
        for grid in &res {
            for r in 0..4 {
                for c in 1..16 {
                    assert_eq!(grid[[r, c]], 0.0);
                }
            }
        }
    }

    #[test]
    fn translating_sequences_have_bitwise_zero_residual() {
        let profile = SignalKind::SmoothedNoise { seed: 9 }.sample(64, 64);
        let flow = FlowField::constant(1.0, 1.0);
        let seq = synth_translating(&profile, &flow, 4).unwrap();
        let res = flow_residual(&seq, &flow).unwrap();
        assert!(res.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn wrong_flow_is_loud_on_stripes() {
        let profile = SignalKind::Stripes.sample(64, 64);
        let seq = synth_translating(&profile, &FlowField::constant(1.0, 0.0), 3).unwrap();
        let res = flow_residual(&seq, &FlowField::constant(2.0, 0.0)).unwrap();
        let max = res
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        // One sample of phase error on a period-8 sinusoid: 2·sin(π/8).
        assert!(max > 0.7, "wrong-flow residual {max} suspiciously quiet");
    }

    #[test]
    fn per_pixel_constant_flow_matches_constant() {
        let profile = SignalKind::SmoothedNoise { seed: 3 }.sample(16, 16);
        let flow = FlowField::constant(1.0, 0.0);
        let seq = synth_translating(&profile, &flow, 3).unwrap();
        let per_pixel = FlowField::PerPixel {
            vx: Array2::from_elem((16, 16), 1.0),
            vy: Array2::from_elem((16, 16), 0.0),
        };
        assert_eq!(
            flow_residual(&seq, &flow).unwrap(),
            flow_residual(&seq, &per_pixel).unwrap()
        );
    }

    #[test]
    fn relu_on_positive_data_is_identity() {
        let seq = synth_translating(&bump(), &FlowField::constant(1.0, 0.0), 3).unwrap();
        let out = apply_transform(
            &seq,
            &Transform::Pointwise {
                activation: Activation::Relu,
            },
        )
        .unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn one_point_kernel_is_identity() {
        let seq = synth_translating(&bump(), &FlowField::constant(0.0, 1.0), 3).unwrap();
        let kernel = Array2::from_elem((1, 1), 1.0);
        let out = apply_transform(&seq, &Transform::Conv { kernel }).unwrap();
        for (a, b) in out.frames().iter().zip(seq.frames().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn local_max_spreads_a_one_hot_into_a_plateau() {
        let mut frame = Array2::zeros((9, 9));
        frame[[4, 4]] = 1.0;
        let seq = FrameSequence::new(vec![frame.clone(), frame]).unwrap();
        let out = apply_transform(&seq, &Transform::LocalMax { h: 1 }).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                let inside = (3..=5).contains(&r) && (3..=5).contains(&c);
                assert_eq!(out.frames()[0][[r, c]], if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn transform_validation() {
        let seq = synth_translating(&bump(), &FlowField::constant(1.0, 0.0), 2).unwrap();
        assert!(matches!(
            apply_transform(
                &seq,
                &Transform::Conv {
                    kernel: Array2::zeros((2, 3))
                }
            ),
            Err(FlowError::EvenKernel(2, 3))
        ));
        assert!(matches!(
            apply_transform(
                &seq,
                &Transform::Conv {
                    kernel: Array2::zeros((65, 65))
                }
            ),
            Err(FlowError::KernelTooLarge { .. })
        ));
        assert!(matches!(
            apply_transform(&seq, &Transform::LocalMax { h: 0 }),
            Err(FlowError::ZeroHalfWindow)
        ));
        assert!(matches!(
            apply_transform(&seq, &Transform::Downscale { sx: 0, sy: 2 }),
            Err(FlowError::ZeroFactor)
        ));
    }

    #[test]
    fn predicted_flow_rules() {
        let flow = FlowField::constant(2.0, 0.0);
        let halved = predicted_flow(&Transform::Downscale { sx: 2, sy: 2 }, &flow);
        assert_eq!(halved, FlowField::constant(1.0, 0.0));

        let diag = FlowField::constant(1.0, 1.0);
        let kernel = Array2::from_elem((3, 3), 1.0 / 9.0);
        assert_eq!(predicted_flow(&Transform::Conv { kernel }, &diag), diag);

        let vertical = FlowField::constant(0.0, 3.0);
        assert_eq!(
            predicted_flow(
                &Transform::Pointwise {
                    activation: Activation::Tanh
                },
                &vertical
            ),
            vertical
        );
    }

    #[test]
    fn box_conv_keeps_the_flow_detectable() {
        let flow = FlowField::constant(1.0, 1.0);
        let seq = synth_translating(&bump(), &flow, 4).unwrap();
        let kernel = Array2::from_elem((3, 3), 1.0 / 9.0);
        let report =
            invariance_report(&seq, &flow, &[Transform::Conv { kernel }], 1e-6).unwrap();
        assert_eq!(report.len(), 1);
        assert!(report[0].pass);
        assert_eq!(report[0].max_residual, 0.0);
    }

    #[test]
    fn zero_tolerance_fails_everything() {
        let flow = FlowField::constant(1.0, 0.0);
        let seq = synth_translating(&bump(), &flow, 3).unwrap();
        let report = invariance_report(
            &seq,
            &flow,
            &[Transform::Pointwise {
                activation: Activation::Tanh,
            }],
            0.0,
        )
        .unwrap();
        assert!(!report[0].pass, "strict threshold must fail at zero");
    }

    #[test]
    fn downscale_wants_the_halved_flow() {
        let profile = SignalKind::SmoothedNoise { seed: 2 }.sample(64, 64);
        let flow = FlowField::constant(2.0, 0.0);
        let (scaled, unscaled) = downscale_comparison(&profile, &flow, 2, 2, 4).unwrap();
        assert!(scaled < 1e-6, "scaled-flow residual {scaled}");
        assert!(
            unscaled >= 100.0 * scaled && unscaled > 0.0,
            "unscaled {unscaled} vs scaled {scaled}"
        );
    }

    #[test]
    fn relu_dead_zone_is_silent_for_any_flow() {
        // Negative plateau on the left half turns into a zero plateau
        // after relu; the residual there is zero whatever flow is claimed.
        let profile = Array2::from_shape_fn((16, 32), |(_, c)| {
            if c < 16 {
                -1.0
            } else {
                (c - 16) as f64
            }
        });
        let seq = synth_translating(&profile, &FlowField::constant(0.0, 0.0), 3).unwrap();
        let out = apply_transform(
            &seq,
            &Transform::Pointwise {
                activation: Activation::Relu,
            },
        )
        .unwrap();
        for flow in [FlowField::constant(1.0, 0.0), FlowField::constant(3.0, 2.0)] {
            let res = flow_residual(&out, &flow).unwrap();
            // Columns 4..12 stay inside the plateau even after a 3-px shift.
            for grid in &res {
                for r in 0..16 {
                    for c in 4..12 {
                        assert_eq!(grid[[r, c]], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn standard_suite_is_all_green_at_1e6() {
        let cases = run_standard_suite(1e-6).unwrap();
        // 5 signals × (6 transforms × 4 flows + downscale × 1 flow).
        assert_eq!(cases.len(), 5 * (6 * 4 + 1));
        for case in &cases {
            assert!(
                case.pass,
                "{} / {} / {:?}: residual {}",
                case.signal, case.transform, case.flow, case.max_residual
            );
        }
    }
}
