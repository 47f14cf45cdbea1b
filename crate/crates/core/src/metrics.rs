//! OSPA miss distance between finite sets of states.

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    cutoff: f64,
    order: f64,
}

impl OspaParams {
    pub fn new(cutoff: f64, order: f64) -> Result<Self> {
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "OSPA cutoff must be finite and positive, got {cutoff}"
            )));
        }
        if !(order.is_finite() && order >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "OSPA order must be finite and >= 1, got {order}"
            )));
        }
        Ok(Self { cutoff, order })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn order(&self) -> f64 {
        self.order
    }
}

const EXHAUSTIVE_ASSIGNMENT_LIMIT: usize = 6;

/// OSPA distance of order p with cutoff c. Either set may be empty and
/// the distance between two empty sets is 0.
pub fn ospa(x: &[DVector<f64>], y: &[DVector<f64>], params: &OspaParams) -> f64 {
    // Canonical argument order makes the result bit-for-bit symmetric.
    let (x, y) = (sorted(x), sorted(y));
    let swap = match x.len().cmp(&y.len()) {
        Ordering::Less => false,
        Ordering::Greater => true,
        Ordering::Equal => lex_cmp_sets(&x, &y) == Ordering::Greater,
    };
    let (small, large) = if swap { (&y, &x) } else { (&x, &y) };
    let (n, m) = (small.len(), large.len());
    if m == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| large.iter().map(|b| (a - b).norm().min(c).powf(p)).collect())
        .collect();
    let matched = if n <= EXHAUSTIVE_ASSIGNMENT_LIMIT {
        min_assignment_exhaustive(&cost, m)
    } else {
        min_assignment_hungarian(&cost, m)
    };
    let total = matched + c.powf(p) * (m - n) as f64;
    (total / m as f64).powf(1.0 / p).min(c)
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn lex_cmp_sets(a: &[DVector<f64>], b: &[DVector<f64>]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(p, q)| lex_cmp(p, q))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sorted(x: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut v = x.to_vec();
    v.sort_by(lex_cmp);
    v
}

/// Minimum over injections of rows into columns, by depth-first search.
fn min_assignment_exhaustive(cost: &[Vec<f64>], cols: usize) -> f64 {
    fn search(row: usize, cost: &[Vec<f64>], used: &mut [bool], acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if row == cost.len() {
            *best = acc;
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                search(row + 1, cost, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(0, cost, &mut vec![false; cols], 0.0, &mut best);
    if cost.is_empty() {
        0.0
    } else {
        best
    }
}

/// Minimum over injections of rows into columns (rows ≤ cols) by the
/// shortest augmenting path method with potentials.
fn min_assignment_hungarian(cost: &[Vec<f64>], cols: usize) -> f64 {
    let rows = cost.len();
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    // owner[j] = row (1-based) assigned to column j, 0 if free
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; cols + 1];
        let mut visited = vec![false; cols + 1];
        loop {
            visited[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !visited[j] {
                    let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if reduced < min_to[j] {
                        min_to[j] = reduced;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if visited[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=cols)
        .filter(|&j| owner[j] != 0)
        .map(|j| cost[owner[j] - 1][j - 1])
        .sum()
}

/// Pointwise OSPA over two equally long sequences of sets.
pub fn ospa_over_time(
    truth: &[Vec<DVector<f64>>],
    estimates: &[Vec<DVector<f64>>],
    params: &OspaParams,
) -> Result<Vec<f64>> {
    if truth.len() != estimates.len() {
        return Err(Error::Dimension(format!(
            "truth has {} steps but estimates have {}",
            truth.len(),
            estimates.len()
        )));
    }
    Ok(truth.iter().zip(estimates).map(|(t, e)| ospa(t, e, params)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaRow {
    pub k: usize,
    pub ospa: f64,
    pub cardinality_truth: usize,
    pub cardinality_est: usize,
}

pub fn write_ospa_csv(mut out: impl Write, rows: &[OspaRow]) -> std::io::Result<()> {
    writeln!(out, "k,ospa,cardinality_truth,cardinality_est")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.k, r.ospa, r.cardinality_truth, r.cardinality_est)?;
    }
    Ok(())
}
