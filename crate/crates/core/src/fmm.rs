//! Fast-marching solution of the Eikonal equation |∇T| = 1 on a pixel grid.
//!
//! Known pixels sit at T = 0; T grows into the unknown region along the
//! upwind quadratic scheme, and pixels freeze in nondecreasing T order.
//! That order is exactly the fill order the fast-marching inpainting engine
//! wants: boundary first, hole center last.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;

/// Eikonal distance field plus the unknown pixels in freeze order.
///
/// `distance` is 0 on known pixels. If the mask is all-true there is
/// nothing to march from: `order` is empty and every distance stays
/// infinite.
#[derive(Debug, Clone)]
pub struct FmmResult {
    pub distance: Array2<f64>,
    pub order: Vec<(usize, usize)>,
}

/// Min-heap entry ordered by (T, linear index); the index tiebreak makes
/// the march order a pure function of the mask.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    t: f64,
    idx: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the smallest T first.
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves the upwind quadratic at one pixel given the best frozen neighbor
/// value per axis (infinity when an axis has none).
///
/// One usable axis gives T = a + 1. With both axes the discretized
/// |∇T| = 1 becomes (T−a)² + (T−b)² = 1, which has the larger root
/// (a + b + sqrt(2 − (a−b)²))/2 when |a−b| < 1 and degenerates to
/// min(a,b) + 1 otherwise.
fn upwind_solve(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi.is_infinite() {
        return lo + 1.0;
    }
    let diff = hi - lo;
    if diff >= 1.0 {
        lo + 1.0
    } else {
        (lo + hi + (2.0 - diff * diff).sqrt()) / 2.0
    }
}

/// Computes the arrival time field for the unknown region of `mask`
/// (true = unknown). Returns distances and the freeze order.
pub fn fmm_distance(mask: &Array2<bool>) -> FmmResult {
    let (height, width) = mask.dim();
    let mut t = Array2::from_shape_fn((height, width), |p| {
        if mask[p] {
            f64::INFINITY
        } else {
            0.0
        }
    });
    let mut frozen = mask.mapv(|unknown| !unknown);
    let mut order = Vec::new();
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();

    let solve = |t: &Array2<f64>, frozen: &Array2<bool>, r: usize, c: usize| -> f64 {
        let axis_min = |p1: Option<(usize, usize)>, p2: Option<(usize, usize)>| {
            let val = |p: Option<(usize, usize)>| {
                p.filter(|&q| frozen[q]).map_or(f64::INFINITY, |q| t[q])
            };
            val(p1).min(val(p2))
        };
        let horiz = axis_min(
            (c > 0).then(|| (r, c - 1)),
            (c + 1 < width).then(|| (r, c + 1)),
        );
        let vert = axis_min(
            (r > 0).then(|| (r - 1, c)),
            (r + 1 < height).then(|| (r + 1, c)),
        );
        upwind_solve(horiz, vert)
    };

    for r in 0..height {
        for c in 0..width {
            if !mask[[r, c]] {
                continue;
            }
            let near_known = [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)]
                .iter()
                .any(|&(dr, dc)| {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    nr >= 0
                        && nc >= 0
                        && (nr as usize) < height
                        && (nc as usize) < width
                        && !mask[[nr as usize, nc as usize]]
                });
            if near_known {
                let cand = solve(&t, &frozen, r, c);
                t[[r, c]] = cand;
                heap.push(Candidate {
                    t: cand,
                    idx: r * width + c,
                });
            }
        }
    }

    while let Some(Candidate { idx, .. }) = heap.pop() {
        let p = (idx / width, idx % width);
        if frozen[p] {
            continue;
        }
        frozen[p] = true;
        order.push(p);
        let (r, c) = p;
        for (dr, dc) in [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr as usize >= height || nc as usize >= width {
                continue;
            }
            let q = (nr as usize, nc as usize);
            if frozen[q] {
                continue;
            }
            let cand = solve(&t, &frozen, q.0, q.1);
            if cand < t[q] {
                t[q] = cand;
                heap.push(Candidate {
                    t: cand,
                    idx: q.0 * width + q.1,
                });
            }
        }
    }

    FmmResult { distance: t, order }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_mask(height: usize, width: usize, rows: std::ops::Range<usize>) -> Array2<bool> {
        Array2::from_shape_fn((height, width), |(r, _)| rows.contains(&r))
    }

    #[test]
    fn all_known_means_nothing_to_march() {
        let mask = Array2::from_elem((5, 5), false);
        let out = fmm_distance(&mask);
        assert!(out.order.is_empty());
        assert!(out.distance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_unknown_has_no_seeds() {
        let mask = Array2::from_elem((4, 4), true);
        let out = fmm_distance(&mask);
        assert!(out.order.is_empty());
        assert!(out.distance.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn lone_pixel_solves_the_two_axis_quadratic() {
        let mut mask = Array2::from_elem((5, 5), false);
        mask[[2, 2]] = true;
        let out = fmm_distance(&mask);
        assert_eq!(out.order, vec![(2, 2)]);
        let expect = 2f64.sqrt() / 2.0;
        assert!((out.distance[[2, 2]] - expect).abs() < 1e-15);
    }

    #[test]
    fn band_distance_equals_row_depth() {
        // Known rows above and below an 8-row gap: T climbs 1,2,3,4 to the
        // band center and back down, exactly.
        let mask = band_mask(24, 16, 8..16);
        let out = fmm_distance(&mask);
        for r in 8..16 {
            let depth = (r - 7).min(16 - r) as f64;
            for c in 0..16 {
                assert_eq!(out.distance[[r, c]], depth, "row {r} col {c}");
            }
        }
        let max = out
            .distance
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert_eq!(max, 4.0);
    }

    #[test]
    fn order_is_nondecreasing_and_covers_the_hole() {
        let mut mask = band_mask(20, 11, 4..12);
        mask[[17, 3]] = true;
        let out = fmm_distance(&mask);
        let unknown = mask.iter().filter(|&&m| m).count();
        assert_eq!(out.order.len(), unknown);
        let mut seen = std::collections::HashSet::new();
        let mut last = 0.0;
        for &p in &out.order {
            assert!(mask[p]);
            assert!(seen.insert(p), "pixel {p:?} frozen twice");
            let tv = out.distance[p];
            assert!(tv >= last, "order regressed: {tv} after {last}");
            last = tv;
        }
    }

    #[test]
    fn march_is_deterministic() {
        let mask = band_mask(32, 9, 8..16);
        let a = fmm_distance(&mask);
        let b = fmm_distance(&mask);
        assert_eq!(a.order, b.order);
        assert_eq!(a.distance, b.distance);
    }

    #[test]
    fn upwind_solve_cases() {
        assert_eq!(upwind_solve(0.0, f64::INFINITY), 1.0);
        assert_eq!(upwind_solve(f64::INFINITY, 2.0), 3.0);
        assert_eq!(upwind_solve(0.0, 5.0), 1.0);
        assert!((upwind_solve(0.0, 0.0) - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }
}
