//! Low-rank tensor completion over a 3-way tensor with pinned observations.
//!
//! One iteration shrinks the singular values of each mode unfolding,
//! refolds, and blends the three estimates into the unobserved entries;
//! observed entries are restored from the input every time, so they stay
//! bit-identical throughout.
//!
//! Singular value shrinkage runs through a symmetric eigendecomposition of
//! the Gram matrix: for an m×n unfolding with m ≤ n, A = U·diag(σ)·Vᵀ
//! follows from A·Aᵀ = U·diag(σ²)·Uᵀ, and the shrunk matrix is
//! U·diag(max(σ−τ, 0)/σ)·Uᵀ·A without ever forming V. Mode unfoldings are
//! short and wide, so the Gram matrix stays small while the matrix products
//! do the heavy lifting.

use ndarray::{Array2, Array3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LowRankError {
    #[error("mode {0} is not one of 0, 1, 2")]
    BadMode(usize),
    #[error("matrix of {rows}x{cols} cannot fold into {dims:?} along mode {mode}")]
    FoldShape {
        rows: usize,
        cols: usize,
        mode: usize,
        dims: (usize, usize, usize),
    },
    #[error("tensor is {tensor:?} but the observation grid is {omega:?}")]
    ObservationShape {
        tensor: (usize, usize, usize),
        omega: (usize, usize, usize),
    },
    #[error("no entry is observed")]
    EmptyObservation,
    #[error("mode weights sum to {0}, expected 1")]
    UnnormalizedAlphas(f64),
    #[error("mode weight {0} is negative")]
    NegativeAlpha(f64),
    #[error("shrinkage threshold {0} must be positive")]
    NonPositiveTau(f64),
    #[error("iteration budget must be at least 1")]
    ZeroIterations,
    #[error("stop tolerance {0} must be a finite nonnegative number")]
    BadStopTol(f64),
    #[error("shrinkage threshold {0} is not finite")]
    NonFiniteTau(f64),
    #[error("eigendecomposition did not converge")]
    EigenFailure,
}

/// Which `(channel, row, col)` entries are trusted (true = observed).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    grid: Array3<bool>,
}

impl ObservationSet {
    pub fn new(grid: Array3<bool>) -> Self {
        ObservationSet { grid }
    }

    pub fn grid(&self) -> &Array3<bool> {
        &self.grid
    }

    pub fn observed_count(&self) -> usize {
        self.grid.iter().filter(|&&o| o).count()
    }
}

/// Completion schedule: per-mode blend weights and shrinkage thresholds,
/// an iteration budget, and an early-stop threshold on the relative change
/// of the unobserved entries (0 runs the full budget).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiLRTCParams {
    alphas: [f64; 3],
    taus: [f64; 3],
    iterations: usize,
    stop_tol: f64,
}

impl SiLRTCParams {
    pub fn new(
        alphas: [f64; 3],
        taus: [f64; 3],
        iterations: usize,
        stop_tol: f64,
    ) -> Result<Self, LowRankError> {
        for &a in &alphas {
            if a < 0.0 || !a.is_finite() {
                return Err(LowRankError::NegativeAlpha(a));
            }
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(LowRankError::UnnormalizedAlphas(sum));
        }
        for &t in &taus {
            if !t.is_finite() {
                return Err(LowRankError::NonFiniteTau(t));
            }
            if t <= 0.0 {
                return Err(LowRankError::NonPositiveTau(t));
            }
        }
        if iterations == 0 {
            return Err(LowRankError::ZeroIterations);
        }
        if !(stop_tol >= 0.0 && stop_tol.is_finite()) {
            return Err(LowRankError::BadStopTol(stop_tol));
        }
        Ok(SiLRTCParams {
            alphas,
            taus,
            iterations,
            stop_tol,
        })
    }

    /// The 50-iteration operating point with equal mode weights and a
    /// threshold of 10 gray levels per mode.
    pub fn preset_50() -> Self {
        Self::preset(50)
    }

    /// The 250-iteration operating point.
    pub fn preset_250() -> Self {
        Self::preset(250)
    }

    fn preset(iterations: usize) -> Self {
        SiLRTCParams {
            alphas: [1.0 / 3.0; 3],
            taus: [10.0; 3],
            iterations,
            stop_tol: 0.0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Flattens a tensor into a matrix whose rows are indexed by `mode`;
/// columns run over the remaining modes in ascending order, last index
/// fastest.
pub fn unfold(tensor: &Array3<f64>, mode: usize) -> Result<Array2<f64>, LowRankError> {
    let (d0, d1, d2) = tensor.dim();
    let out = match mode {
        0 => {
            let mut m = Array2::zeros((d0, d1 * d2));
            for ((i, j, k), &v) in tensor.indexed_iter() {
                m[[i, j * d2 + k]] = v;
            }
            m
        }
        1 => {
            let mut m = Array2::zeros((d1, d0 * d2));
            for ((i, j, k), &v) in tensor.indexed_iter() {
                m[[j, i * d2 + k]] = v;
            }
            m
        }
        2 => {
            let mut m = Array2::zeros((d2, d0 * d1));
            for ((i, j, k), &v) in tensor.indexed_iter() {
                m[[k, i * d1 + j]] = v;
            }
            m
        }
        _ => return Err(LowRankError::BadMode(mode)),
    };
    Ok(out)
}

/// Inverse of [`unfold`] for the given full tensor dimensions.
pub fn fold(
    matrix: &Array2<f64>,
    mode: usize,
    dims: (usize, usize, usize),
) -> Result<Array3<f64>, LowRankError> {
    let (d0, d1, d2) = dims;
    let want = match mode {
        0 => (d0, d1 * d2),
        1 => (d1, d0 * d2),
        2 => (d2, d0 * d1),
        _ => return Err(LowRankError::BadMode(mode)),
    };
    if matrix.dim() != want {
        let (rows, cols) = matrix.dim();
        return Err(LowRankError::FoldShape {
            rows,
            cols,
            mode,
            dims,
        });
    }
    let mut tensor = Array3::zeros(dims);
    match mode {
        0 => {
            for ((i, j, k), v) in tensor.indexed_iter_mut() {
                *v = matrix[[i, j * d2 + k]];
            }
        }
        1 => {
            for ((i, j, k), v) in tensor.indexed_iter_mut() {
                *v = matrix[[j, i * d2 + k]];
            }
        }
        2 => {
            for ((i, j, k), v) in tensor.indexed_iter_mut() {
                *v = matrix[[k, i * d1 + j]];
            }
        }
        _ => unreachable!(),
    }
    Ok(tensor)
}

/// Soft-thresholds the singular values of a matrix: singular triplets stay,
/// singular values shrink by `tau` and clip at zero.
pub fn svt(matrix: &Array2<f64>, tau: f64) -> Result<Array2<f64>, LowRankError> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(LowRankError::NonFiniteTau(tau));
    }
    let (rows, cols) = matrix.dim();
    if rows > cols {
        let shrunk = svt(&matrix.t().to_owned(), tau)?;
        return Ok(shrunk.t().to_owned());
    }
    // Gram matrix of the short side, then a symmetric eigendecomposition.
    let gram = matrix.dot(&matrix.t());
    let mut sym = nalgebra::DMatrix::<f64>::zeros(rows, rows);
    for ((i, j), &v) in gram.indexed_iter() {
        sym[(i, j)] = v;
    }
    let eigen = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(LowRankError::EigenFailure)?;

    // Spectral filter U·diag(w)·Uᵀ with w = max(σ−τ, 0)/σ; zero modes get
    // weight zero, which also kills any negative eigenvalue noise.
    let mut filter = nalgebra::DMatrix::<f64>::zeros(rows, rows);
    for k in 0..rows {
        let sigma = eigen.eigenvalues[k].max(0.0).sqrt();
        let w = if sigma > 0.0 {
            (sigma - tau).max(0.0) / sigma
        } else {
            0.0
        };
        if w != 0.0 {
            let u = eigen.eigenvectors.column(k);
            for i in 0..rows {
                for j in 0..rows {
                    filter[(i, j)] += w * u[i] * u[j];
                }
            }
        }
    }
    let mut projector = Array2::<f64>::zeros((rows, rows));
    for i in 0..rows {
        for j in 0..rows {
            projector[[i, j]] = filter[(i, j)];
        }
    }
    Ok(projector.dot(matrix))
}

/// Runs the completion loop. `tensor` carries trusted values at observed
/// entries (unobserved entries are typically zero-initialized). Returns
/// the completed tensor and the per-iteration relative change of the
/// unobserved entries.
pub fn silrtc(
    tensor: &Array3<f64>,
    omega: &ObservationSet,
    params: &SiLRTCParams,
) -> Result<(Array3<f64>, Vec<f64>), LowRankError> {
    if tensor.dim() != omega.grid.dim() {
        return Err(LowRankError::ObservationShape {
            tensor: tensor.dim(),
            omega: omega.grid.dim(),
        });
    }
    if omega.observed_count() == 0 {
        return Err(LowRankError::EmptyObservation);
    }
    let dims = tensor.dim();
    let mut x = tensor.clone();
    let mut log = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        let shrink = |mode: usize| -> Result<Array3<f64>, LowRankError> {
            fold(&svt(&unfold(&x, mode)?, params.taus[mode])?, mode, dims)
        };
        // The three mode estimates are independent; compute them in
        // parallel and blend afterward.
        let (m0, (m1, m2)) = rayon::join(
            || shrink(0),
            || rayon::join(|| shrink(1), || shrink(2)),
        );
        let (m0, m1, m2) = (m0?, m1?, m2?);

        let mut delta_sq = 0.0;
        let mut old_sq = 0.0;
        for (((((slot, &obs), &v0), &v1), &v2), &pin) in x
            .iter_mut()
            .zip(omega.grid.iter())
            .zip(m0.iter())
            .zip(m1.iter())
            .zip(m2.iter())
            .zip(tensor.iter())
        {
            if obs {
                *slot = pin;
            } else {
                let blended =
                    params.alphas[0] * v0 + params.alphas[1] * v1 + params.alphas[2] * v2;
                let d = blended - *slot;
                delta_sq += d * d;
                old_sq += *slot * *slot;
                *slot = blended;
            }
        }
        let rel = delta_sq.sqrt() / (old_sq.sqrt() + 1e-12);
        log.push(rel);
        if rel < params.stop_tol {
            break;
        }
    }
    Ok((x, log))
}
