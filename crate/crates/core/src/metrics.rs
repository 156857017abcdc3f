//! Reconstruction quality metrics and curve comparison.
//!
//! PSNR is capped at 200 dB so identical grids yield a finite, comparable
//! number. [`average_gain`] integrates the gap between two metric curves
//! with the trapezoidal rule and normalizes by the probability range, so a
//! constant offset comes back unchanged.

use ndarray::Array2;
use thiserror::Error;

/// Ceiling applied to every PSNR value; returned outright when MSE is 0.
pub const PSNR_CAP_DB: f64 = 200.0;

/// Default loss-probability sweep, 5% to 30% in 5% steps.
pub const DEFAULT_SWEEP: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("grids are {a_rows}x{a_cols} and {b_rows}x{b_cols}")]
    DimensionMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("peak must be positive, got {0}")]
    NonPositivePeak(f64),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("curve needs at least 2 points, got {0}")]
    ShortCurve(usize),
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("probabilities must strictly increase, {prev} then {next}")]
    UnorderedProbabilities { prev: f64, next: f64 },
    #[error("curves are sampled on different probability grids")]
    GridMismatch,
}

fn check_dims(a: &Array2<f64>, b: &Array2<f64>) -> Result<(), MetricError> {
    if a.dim() != b.dim() {
        let (a_rows, a_cols) = a.dim();
        let (b_rows, b_cols) = b.dim();
        return Err(MetricError::DimensionMismatch {
            a_rows,
            a_cols,
            b_rows,
            b_cols,
        });
    }
    Ok(())
}

/// Mean squared error over all pixels.
pub fn mse(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let n = a.len() as f64;
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

fn psnr_from_mse(mse: f64, peak: f64) -> Result<f64, MetricError> {
    if peak <= 0.0 {
        return Err(MetricError::NonPositivePeak(peak));
    }
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>, peak: f64) -> Result<f64, MetricError> {
    psnr_from_mse(mse(a, b)?, peak)
}

/// PSNR restricted to mask-true pixels; pixels outside the mask cannot
/// influence the value.
pub fn masked_psnr(
    a: &Array2<f64>,
    b: &Array2<f64>,
    mask: &Array2<bool>,
    peak: f64,
) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    if a.dim() != mask.dim() {
        let (a_rows, a_cols) = a.dim();
        let (b_rows, b_cols) = mask.dim();
        return Err(MetricError::DimensionMismatch {
            a_rows,
            a_cols,
            b_rows,
            b_cols,
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((x, y), &m) in a.iter().zip(b.iter()).zip(mask.iter()) {
        if m {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricError::EmptyMask);
    }
    psnr_from_mse(sum / count as f64, peak)
}

/// A metric sampled over strictly increasing loss probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurve {
    points: Vec<(f64, f64)>,
}

impl MetricCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MetricError> {
        if points.len() < 2 {
            return Err(MetricError::ShortCurve(points.len()));
        }
        for &(p, _) in &points {
            if !(0.0..=1.0).contains(&p) {
                return Err(MetricError::ProbabilityOutOfRange(p));
            }
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(MetricError::UnorderedProbabilities {
                    prev: pair[0].0,
                    next: pair[1].0,
                });
            }
        }
        Ok(MetricCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(p, _)| p)
    }
}

/// Area between two curves by the trapezoidal rule, divided by the
/// probability range. Both curves must be sampled at the same
/// probabilities.
pub fn average_gain(method: &MetricCurve, baseline: &MetricCurve) -> Result<f64, MetricError> {
    if method.points.len() != baseline.points.len()
        || method
            .probabilities()
            .zip(baseline.probabilities())
            .any(|(a, b)| a != b)
    {
        return Err(MetricError::GridMismatch);
    }
    let diff: Vec<(f64, f64)> = method
        .points
        .iter()
        .zip(baseline.points.iter())
        .map(|(&(p, m), &(_, b))| (p, m - b))
        .collect();
    let mut area = 0.0;
    for pair in diff.windows(2) {
        let (p0, d0) = pair[0];
        let (p1, d1) = pair[1];
        area += 0.5 * (d0 + d1) * (p1 - p0);
    }
    let range = diff.last().unwrap().0 - diff.first().unwrap().0;
    Ok(area / range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn grid(mut f: impl FnMut(usize, usize) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((8, 8), |(r, c)| f(r, c))
    }

    #[test]
    fn identical_grids_hit_the_cap() {
        let a = grid(|r, c| (r + c) as f64);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn unit_offset_at_peak_255() {
        let a = grid(|_, _| 10.0);
        let b = grid(|_, _| 11.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let db = psnr(&a, &b, 255.0).unwrap();
        assert!((db - 48.1308036087).abs() < 1e-9, "got {db}");
    }

    #[test]
    fn mse_is_symmetric() {
        let mut rng = SplitMix64::new(8);
        let a = grid(|_, _| rng.next_in(0.0, 255.0));
        let b = grid(|_, _| rng.next_in(0.0, 255.0));
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
    }

    #[test]
    fn psnr_decreases_as_mse_grows() {
        let a = grid(|_, _| 0.0);
        let mut last = f64::INFINITY;
        for offset in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let b = grid(|_, _| offset);
            let db = psnr(&a, &b, 255.0).unwrap();
            assert!(db < last);
            last = db;
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            mse(&a, &b),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn masked_psnr_sees_only_the_mask() {
        let a = grid(|r, _| r as f64);
        let mut b = a.clone();
        let mut mask = Array2::from_elem((8, 8), false);
        for r in 0..2 {
            for c in 0..8 {
                mask[[r, c]] = true;
            }
        }
        b[[0, 0]] = a[[0, 0]] + 3.0;
        let before = masked_psnr(&a, &b, &mask, 255.0).unwrap();
        // Large perturbation outside the band leaves the value untouched.
        b[[5, 5]] = 1e6;
        let after = masked_psnr(&a, &b, &mask, 255.0).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn full_mask_reduces_to_psnr() {
        let mut rng = SplitMix64::new(2);
        let a = grid(|_, _| rng.next_in(0.0, 255.0));
        let b = grid(|_, _| rng.next_in(0.0, 255.0));
        let mask = Array2::from_elem((8, 8), true);
        assert_eq!(
            masked_psnr(&a, &b, &mask, 255.0).unwrap(),
            psnr(&a, &b, 255.0).unwrap()
        );
    }

    #[test]
    fn single_matching_pixel_hits_cap() {
        let a = grid(|_, _| 4.0);
        let b = grid(|r, c| if (r, c) == (3, 3) { 4.0 } else { 0.0 });
        let mut mask = Array2::from_elem((8, 8), false);
        mask[[3, 3]] = true;
        assert_eq!(masked_psnr(&a, &b, &mask, 255.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let a = grid(|_, _| 0.0);
        let mask = Array2::from_elem((8, 8), false);
        assert!(matches!(
            masked_psnr(&a, &a, &mask, 255.0),
            Err(MetricError::EmptyMask)
        ));
    }

    #[test]
    fn curve_validation() {
        assert!(matches!(
            MetricCurve::new(vec![(0.1, 5.0)]),
            Err(MetricError::ShortCurve(1))
        ));
        assert!(matches!(
            MetricCurve::new(vec![(0.1, 5.0), (0.1, 6.0)]),
            Err(MetricError::UnorderedProbabilities { .. })
        ));
        assert!(matches!(
            MetricCurve::new(vec![(0.1, 5.0), (1.5, 6.0)]),
            Err(MetricError::ProbabilityOutOfRange(_))
        ));
    }

    fn sweep_curve(f: impl Fn(f64) -> f64) -> MetricCurve {
        MetricCurve::new(DEFAULT_SWEEP.iter().map(|&p| (p, f(p))).collect()).unwrap()
    }

    #[test]
    fn constant_offset_gain_is_the_offset() {
        let base = sweep_curve(|p| 30.0 - 20.0 * p);
        let lifted = sweep_curve(|p| 30.0 - 20.0 * p + 0.38);
        let gain = average_gain(&lifted, &base).unwrap();
        assert!((gain - 0.38).abs() < 1e-12, "got {gain}");
        assert_eq!(average_gain(&base, &base).unwrap(), 0.0);
    }

    #[test]
    fn triangular_gap_halves() {
        // Difference grows linearly from 0 at p=0.05 to 0.3 at p=0.30; the
        // normalized trapezoid of that triangle is half its height.
        let base = sweep_curve(|_| 10.0);
        let method = sweep_curve(|p| 10.0 + (p - 0.05) * (0.3 / 0.25));
        let gain = average_gain(&method, &base).unwrap();
        assert!((gain - 0.15).abs() < 1e-12, "got {gain}");
    }

    #[test]
    fn gain_invariant_to_common_curve() {
        let mut rng = SplitMix64::new(15);
        let bumps: Vec<f64> = (0..6).map(|_| rng.next_in(-5.0, 5.0)).collect();
        let base = sweep_curve(|p| 20.0 * p);
        let method = sweep_curve(|p| 20.0 * p + 1.25);
        let g0 = average_gain(&method, &base).unwrap();
        let shift = |c: &MetricCurve| {
            MetricCurve::new(
                c.points()
                    .iter()
                    .enumerate()
                    .map(|(i, &(p, v))| (p, v + bumps[i]))
                    .collect(),
            )
            .unwrap()
        };
        let g1 = average_gain(&shift(&method), &shift(&base)).unwrap();
        assert!((g0 - g1).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = MetricCurve::new(vec![(0.05, 1.0), (0.10, 2.0)]).unwrap();
        let b = MetricCurve::new(vec![(0.05, 1.0), (0.15, 2.0)]).unwrap();
        assert!(matches!(
            average_gain(&a, &b),
            Err(MetricError::GridMismatch)
        ));
    }
}
