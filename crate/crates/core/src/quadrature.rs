//! Trapezoid quadrature on uniform 1-D grids and its tensor-product
//! extensions used by the set-integral routines.

use serde::{Deserialize, Serialize};

/// Uniform grid on `[lower, upper]` with trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Grid1d {
    pub const DEFAULT_POINTS: usize = 400;

    pub fn new(lower: f64, upper: f64, points: usize) -> Self {
        assert!(points >= 2, "a trapezoid grid needs at least two points");
        assert!(lower < upper, "grid bounds must satisfy lower < upper");
        Self { lower, upper, points }
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.upper
        } else {
            self.lower + i as f64 * self.step()
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.points {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.point(i))
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.points().collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.weight(i)).collect()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        (0..self.points).map(|i| self.weight(i) * f(self.point(i))).sum()
    }
}

/// Tensor-grid trapezoid sum of a function of `n` grid indices.
pub fn tensor_sum(grid: &Grid1d, n: usize, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    let weights = grid.weights();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let w: f64 = idx.iter().map(|&i| weights[i]).product();
        total += w * f(&idx);
        if !advance(&mut idx, grid.points) {
            return total;
        }
    }
}

fn advance(idx: &mut [usize], points: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < points {
            return true;
        }
        *slot = 0;
    }
    false
}

/// `(1/n!)·Σ` over the full tensor grid of a function that is symmetric in
/// its `n` arguments, evaluated once per multiset of grid indices.
///
/// Each nondecreasing index tuple stands for `n!/∏ c_j!` ordered tuples, so
/// it enters with weight `1/∏ c_j!` where `c_j` are the multiplicities.
pub fn symmetric_tensor_sum_over_factorial(grid: &Grid1d, n: usize, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    if n == 0 {
        return f(&[]);
    }
    let weights = grid.weights();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let mut w: f64 = idx.iter().map(|&i| weights[i]).product();
        let mut run = 1usize;
        for k in 1..n {
            if idx[k] == idx[k - 1] {
                run += 1;
                w /= run as f64;
            } else {
                run = 1;
            }
        }
        total += w * f(&idx);
        if !advance_nondecreasing(&mut idx, grid.points) {
            return total;
        }
    }
}

fn advance_nondecreasing(idx: &mut [usize], points: usize) -> bool {
    let n = idx.len();
    for k in (0..n).rev() {
        if idx[k] + 1 < points {
            let v = idx[k] + 1;
            for slot in idx[k..].iter_mut() {
                *slot = v;
            }
            return true;
        }
    }
    false
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear_functions() {
        let g = Grid1d::new(-1.0, 3.0, 7);
        assert!((g.integrate(|x| 2.0 * x + 1.0) - 12.0).abs() < 1e-12);
        assert_eq!(g.point(6), 3.0);
    }

    #[test]
    fn symmetric_sum_matches_full_tensor_sum() {
        let g = Grid1d::new(0.0, 1.0, 9);
        let nodes = g.nodes();
        let f = |idx: &[usize]| {
            let s: f64 = idx.iter().map(|&i| nodes[i]).sum();
            let p: f64 = idx.iter().map(|&i| 1.0 + nodes[i] * nodes[i]).product();
            (s * 0.7).cos() * p
        };
        for n in 1..=3 {
            let full = tensor_sum(&g, n, f) / factorial(n);
            let sym = symmetric_tensor_sum_over_factorial(&g, n, f);
            assert!(
                (full - sym).abs() < 1e-13 * full.abs().max(1.0),
                "n={n}: {full} vs {sym}"
            );
        }
    }
}
