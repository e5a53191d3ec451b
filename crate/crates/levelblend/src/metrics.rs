//! Tile-based and distributional metrics: density, symmetry, novelty,
//! energy distance over (density, symmetry) points, and the two-sided
//! Wilcoxon rank-sum test.

use std::collections::BTreeSet;
use std::collections::HashSet;

use crate::tiles::TileGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPoint {
    pub density: f64,
    pub symmetry: f64,
}

impl MetricPoint {
    pub fn of(grid: &TileGrid, solid: &BTreeSet<char>) -> MetricPoint {
        MetricPoint { density: density(grid, solid), symmetry: symmetry(grid) }
    }

    fn distance(&self, other: &MetricPoint) -> f64 {
        let dd = self.density - other.density;
        let ds = self.symmetry - other.symmetry;
        (dd * dd + ds * ds).sqrt()
    }
}

/// Fraction of tiles belonging to the solid set.
pub fn density(grid: &TileGrid, solid: &BTreeSet<char>) -> f64 {
    let count = grid.tiles().iter().filter(|t| solid.contains(t)).count();
    count as f64 / grid.cells() as f64
}

/// Combined vertical and horizontal symmetry: mirrored row pairs and
/// mirrored column pairs are compared position by position moving outward
/// from the center; the middle row/column of odd dimensions is skipped.
/// Result is matches / compared positions, in [0, 1].
pub fn symmetry(grid: &TileGrid) -> f64 {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut matches = 0usize;
    let mut compared = 0usize;
    for r in 0..rows / 2 {
        for c in 0..cols {
            compared += 1;
            if grid.get(r, c) == grid.get(rows - 1 - r, c) {
                matches += 1;
            }
        }
    }
    for c in 0..cols / 2 {
        for r in 0..rows {
            compared += 1;
            if grid.get(r, c) == grid.get(r, cols - 1 - c) {
                matches += 1;
            }
        }
    }
    if compared == 0 {
        return 1.0;
    }
    matches as f64 / compared as f64
}

/// Share of generated grids with no exact tile-equal member in training.
pub fn novelty(generated: &[TileGrid], training: &[TileGrid]) -> f64 {
    if generated.is_empty() {
        return 0.0;
    }
    let training: HashSet<&TileGrid> = training.iter().collect();
    let novel = generated.iter().filter(|g| !training.contains(g)).count();
    novel as f64 / generated.len() as f64
}

/// Energy distance between two point sets:
/// 2 E||a-b|| - E||a-a'|| - E||b-b'||, expectations over all ordered pairs.
/// Zero on identical multisets, nonnegative.
pub fn e_distance(a: &[MetricPoint], b: &[MetricPoint]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mean_cross = {
        let mut sum = 0.0;
        for x in a {
            for y in b {
                sum += x.distance(y);
            }
        }
        sum / (a.len() * b.len()) as f64
    };
    let mean_within = |s: &[MetricPoint]| {
        let mut sum = 0.0;
        for x in s {
            for y in s {
                sum += x.distance(y);
            }
        }
        sum / (s.len() * s.len()) as f64
    };
    Some(2.0 * mean_cross - mean_within(a) - mean_within(b))
}

/// Two-sided Mann-Whitney/Wilcoxon rank-sum p-value via the normal
/// approximation with tie correction and continuity correction. Returns 1
/// when every value across both samples is identical.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0))
        .chain(b.iter().map(|&v| (v, 1)))
        .collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // midranks with tie groups
    let n = all.len();
    let mut ranks = vec![0.0f64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for r in ranks.iter_mut().take(j).skip(i) {
            *r = rank;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }

    let r1: f64 = ranks.iter().zip(&all).filter(|(_, (_, g))| *g == 0).map(|(r, _)| r).sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let nt = n1 + n2;
    let var = n1 * n2 / 12.0 * (nt + 1.0 - tie_term / (nt * (nt - 1.0)));
    if var <= 0.0 {
        return Some(1.0); // all values identical
    }
    let diff = u1 - mean;
    // continuity correction toward the mean
    let z = (diff.abs() - 0.5).max(0.0) / var.sqrt();
    Some((2.0 * normal_sf(z)).min(1.0))
}

/// Upper tail of the standard normal via the complementary error function
/// (Abramowitz & Stegun 7.1.26, |error| < 1.5e-7).
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let sign_negative = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let result = poly * (-x * x).exp();
    if sign_negative {
        2.0 - result
    } else {
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    fn solid(chars: &str) -> BTreeSet<char> {
        chars.chars().collect()
    }

    #[test]
    fn density_extremes() {
        let s = solid("W");
        assert_eq!(density(&TileGrid::filled(3, 4, 'W'), &s), 1.0);
        assert_eq!(density(&TileGrid::filled(3, 4, 'F'), &s), 0.0);
        let mut g = TileGrid::filled(2, 2, 'F');
        g.set(0, 0, 'W');
        assert_eq!(density(&g, &s), 0.25);
    }

    #[test]
    fn symmetry_uniform_grid_is_one() {
        assert_eq!(symmetry(&TileGrid::filled(5, 7, 'F')), 1.0);
    }

    #[test]
    fn symmetry_two_by_two_antidiagonal_is_zero() {
        // A B / B A: row pass 0/2, column pass 0/2
        let g = TileGrid::new(2, 2, vec!['A', 'B', 'B', 'A']).unwrap();
        assert_eq!(symmetry(&g), 0.0);
    }

    #[test]
    fn symmetry_invariant_under_flips() {
        let mut rng = rng_from(4, "sym", 0);
        for _ in 0..50 {
            let tiles: Vec<char> =
                (0..5 * 6).map(|_| if rng.gen::<bool>() { 'A' } else { 'B' }).collect();
            let g = TileGrid::new(5, 6, tiles).unwrap();
            let s = symmetry(&g);
            assert!((0.0..=1.0).contains(&s));
            assert!((symmetry(&g.flip_horizontal()) - s).abs() < 1e-12);
            assert!((symmetry(&g.flip_vertical()) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn novelty_extremes_and_monotonicity() {
        let a = TileGrid::filled(2, 2, 'A');
        let b = TileGrid::filled(2, 2, 'B');
        let c = TileGrid::filled(2, 2, 'C');
        assert_eq!(novelty(&[a.clone(), b.clone()], &[a.clone(), b.clone(), c.clone()]), 0.0);
        assert_eq!(novelty(&[a.clone(), b.clone()], &[c.clone()]), 1.0);
        // growing the training set never increases novelty
        let gen = [a.clone(), b.clone()];
        let mut train: Vec<TileGrid> = Vec::new();
        let mut last = f64::INFINITY;
        for t in [c, a, b] {
            train.push(t);
            let n = novelty(&gen, &train);
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn e_distance_identity_and_fixture() {
        let a = vec![MetricPoint { density: 0.2, symmetry: 0.7 }, MetricPoint { density: 0.5, symmetry: 0.1 }];
        assert!(e_distance(&a, &a).unwrap().abs() < 1e-12);

        let x = vec![MetricPoint { density: 0.0, symmetry: 0.0 }];
        let y = vec![MetricPoint { density: 1.0, symmetry: 0.0 }];
        assert!((e_distance(&x, &y).unwrap() - 2.0).abs() < 1e-12);

        assert!(e_distance(&[], &a).is_none());
    }

    #[test]
    fn e_distance_symmetric_and_nonnegative_randomized() {
        let mut rng = rng_from(8, "edist", 0);
        for _ in 0..10_000 {
            let na = rng.gen_range(1..6);
            let nb = rng.gen_range(1..6);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<MetricPoint> {
                (0..n)
                    .map(|_| MetricPoint { density: rng.gen(), symmetry: rng.gen() })
                    .collect()
            };
            let a = mk(&mut rng, na);
            let b = mk(&mut rng, nb);
            let ab = e_distance(&a, &b).unwrap();
            let ba = e_distance(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!(ab >= -1e-12);
        }
    }

    #[test]
    fn rank_sum_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        assert!(rank_sum_test(&a, &a).unwrap() > 1.0 - 1e-6);
        assert_eq!(rank_sum_test(&[5.0; 4], &[5.0; 6]).unwrap(), 1.0);
        assert!(rank_sum_test(&[], &a).is_none());
    }

    #[test]
    fn rank_sum_small_sample_bound() {
        // n=3 vs n=3 fully separated: exact two-sided p is 0.1; the
        // corrected normal approximation must stay at or below 0.11 and
        // must not claim significance at 0.05
        let p = rank_sum_test(&[1.0, 2.0, 3.0], &[101.0, 102.0, 103.0]).unwrap();
        assert!(p <= 0.11, "p = {p}");
        assert!(p > 0.05, "p = {p}");
    }

    #[test]
    fn rank_sum_symmetric_in_arguments() {
        let a = [1.0, 5.0, 3.0, 7.0];
        let b = [2.0, 2.0, 9.0];
        let p1 = rank_sum_test(&a, &b).unwrap();
        let p2 = rank_sum_test(&b, &a).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn rank_sum_null_rejection_rate_near_alpha() {
        let mut rng = rng_from(13, "null", 0);
        let mut rejections = 0;
        let trials = 1000;
        for _ in 0..trials {
            let a: Vec<f64> = (0..30).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..30).map(|_| rng.gen::<f64>()).collect();
            if rank_sum_test(&a, &b).unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!((0.02..=0.08).contains(&rate), "null rejection rate {rate}");
    }

    #[test]
    fn rank_sum_detects_a_clear_shift() {
        let a: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64 + 30.0).collect();
        assert!(rank_sum_test(&a, &b).unwrap() < 0.001);
    }
}
