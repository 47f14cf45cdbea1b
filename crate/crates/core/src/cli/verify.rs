//! Numerical verification suite: the RFS/MTA identity, the partition-sum
//! oracle, normalizations, permutation invariance and the no-clutter
//! permutation-product form.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::association::{enumerate_mtas, normalized_likelihood_integral, AssociationTable, TrackSet};
use crate::error::Result;
use crate::labeled::{labeled_set_integral, GlmbComponent, GlmbDistribution, Label};
use crate::models::{BoxRegion, GaussianDensity, SensorModel, UniformClutter};
use crate::quadrature::Grid1d;
use crate::rfs::{
    measurement_set_integral, multitarget_likelihood, multitarget_likelihood_ordered,
    multitarget_likelihood_partition_oracle, relative_gap, track_window, verify_mta_rfs_identity, MeasurementSet,
    StateSet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub seed: u64,
    pub instances: usize,
    pub grid_points: usize,
    pub tolerance: f64,
    pub clutter_lower: f64,
    pub clutter_upper: f64,
    /// Overrides the uniform clutter density 1/|region| (negative control).
    pub clutter_density: Option<f64>,
    pub noise_var: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 12,
            grid_points: Grid1d::DEFAULT_POINTS,
            tolerance: 1e-4,
            clutter_lower: -10.0,
            clutter_upper: 10.0,
            clutter_density: None,
            noise_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn new(check: &str, seed: u64, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let gap = relative_gap(lhs, rhs);
        Self {
            check: check.to_string(),
            seed,
            lhs,
            rhs,
            relative_gap: gap,
            tolerance,
            passed: gap <= tolerance,
        }
    }
}

impl VerifyParams {
    fn sensor(&self, pd: f64, rate: f64) -> Result<SensorModel> {
        let region = BoxRegion::new(vec![self.clutter_lower], vec![self.clutter_upper])?;
        let clutter = match self.clutter_density {
            Some(c) => UniformClutter::with_density(region, rate, c)?,
            None => UniformClutter::new(region, rate)?,
        };
        SensorModel::scalar(self.noise_var, pd, clutter)
    }

    fn span(&self) -> f64 {
        self.clutter_upper - self.clutter_lower
    }

    fn center(&self) -> f64 {
        0.5 * (self.clutter_upper + self.clutter_lower)
    }

    fn measurement_grid(&self) -> Grid1d {
        Grid1d::new(self.clutter_lower, self.clutter_upper, self.grid_points)
    }
}

fn points(xs: &[f64]) -> Vec<DVector<f64>> {
    xs.iter().map(|&x| DVector::from_element(1, x)).collect()
}

const RATES: [f64; 3] = [0.0, 0.5, 1.0];

/// Identity instances cycle through n ∈ {1,2,3} and λ ∈ {0, 0.5, 1}; with
/// λ = 0 at most n measurements are drawn so the likelihood is nonzero.
pub fn identity_checks(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for i in 0..p.instances {
        let seed = p.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + i % 3;
        let rate = RATES[(i / 3) % 3];
        let m = if rate == 0.0 {
            rng.random_range(0..=n)
        } else {
            rng.random_range(0..=4)
        };
        let s = p.sensor(rng.random_range(0.5..0.95), rate)?;
        let quarter = 0.2 * p.span();
        let ts = TrackSet::new(
            (0..n)
                .map(|_| {
                    GaussianDensity::scalar(
                        p.center() + rng.random_range(-quarter..quarter),
                        rng.random_range(0.3..1.5),
                    )
                })
                .collect::<Result<_>>()?,
        );
        let zs = MeasurementSet::new(points(
            &(0..m)
                .map(|_| p.center() + rng.random_range(-1.5 * quarter..1.5 * quarter))
                .collect::<Vec<_>>(),
        ))?;
        let grid = track_window(&ts, 9.0, p.grid_points)?;
        let r = verify_mta_rfs_identity(&zs, &ts, &s, &grid)?;
        out.push(CheckRecord::new("rfs_mta_identity", seed, r.lhs, r.rhs, p.tolerance));
    }
    Ok(out)
}

/// MTA sum against the ordered-partition sum on random n, m ≤ 3.
pub fn partition_checks(p: &VerifyParams, repetitions: usize) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for r in 0..repetitions {
        let seed = p.seed.wrapping_add(1000 + r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = p.sensor(rng.random_range(0.05..0.95), rng.random_range(0.1..2.0))?;
        let half = 0.4 * p.span();
        let n = rng.random_range(0..=3);
        let m = rng.random_range(0..=3);
        let xs = StateSet::new(points(
            &(0..n)
                .map(|_| p.center() + rng.random_range(-half..half))
                .collect::<Vec<_>>(),
        ))?;
        let zs = MeasurementSet::new(points(
            &(0..m)
                .map(|_| p.center() + rng.random_range(-half..half))
                .collect::<Vec<_>>(),
        ))?;
        let lhs = multitarget_likelihood(&zs, &xs, &s)?;
        let rhs = multitarget_likelihood_partition_oracle(&zs, &xs, &s)?.value;
        out.push(CheckRecord::new("partition_oracle", seed, lhs, rhs, 1e-10));
    }
    Ok(out)
}

/// ∫f(Z|X)δZ for |X| ≤ 2 and λ ≤ 1, truncated where the Poisson tail is
/// below 1e-12.
pub fn likelihood_normalization_checks(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let grid = p.measurement_grid();
    let c = p.center();
    let cases: [&[f64]; 3] = [&[], &[c + 0.5], &[c - 1.0, c + 2.0]];
    let mut out = Vec::new();
    for (i, xs) in cases.iter().enumerate() {
        for rate in [0.5, 1.0] {
            let s = p.sensor(0.8, rate)?;
            let x = StateSet::new(points(xs))?;
            let total = measurement_set_integral(&x, &s, &grid, xs.len() + 18, 2)?;
            out.push(CheckRecord::new(
                "likelihood_normalization",
                p.seed.wrapping_add(i as u64),
                total,
                1.0,
                1e-4,
            ));
        }
    }
    Ok(out)
}

/// ∫f(z₁..z_m|α)dz = 1 for every MTA of two tracks with m ≤ 2.
pub fn association_normalization_checks(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let s = p.sensor(0.7, 1.0)?;
    let c = p.center();
    let ts = TrackSet::new(vec![
        GaussianDensity::scalar(c - 1.0, 0.5)?,
        GaussianDensity::scalar(c + 2.0, 1.5)?,
    ]);
    let grid = p.measurement_grid();
    let mut out = Vec::new();
    for m in 0..=2 {
        for a in enumerate_mtas(2, m) {
            let total = normalized_likelihood_integral(&a, &ts, &s, &grid)?;
            out.push(CheckRecord::new("association_normalization", p.seed, total, 1.0, 1e-5));
        }
    }
    Ok(out)
}

/// Labeled set integral of a few hand-built GLMB distributions.
pub fn glmb_normalization_checks(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let l = |k, i| Label::new(k, i);
    let g = |m, v| GaussianDensity::scalar(m, v);
    let dists = [
        GlmbDistribution::new(vec![GlmbComponent::new(vec![(l(0, 1)?, g(0.0, 1.0)?)], 1.0)?])?,
        GlmbDistribution::new(vec![
            GlmbComponent::new(vec![], 0.2)?,
            GlmbComponent::new(vec![(l(0, 1)?, g(0.0, 1.0)?)], 0.3)?,
            GlmbComponent::new(vec![(l(0, 1)?, g(0.5, 0.7)?), (l(1, 1)?, g(3.0, 2.0)?)], 0.5)?,
        ])?,
        GlmbDistribution::new(vec![
            GlmbComponent::new(vec![(l(0, 1)?, g(-2.0, 0.4)?), (l(0, 2)?, g(2.0, 0.4)?)], 0.6)?,
            GlmbComponent::new(vec![(l(0, 1)?, g(-1.0, 0.9)?), (l(0, 2)?, g(1.0, 0.9)?)], 0.4)?,
        ])?,
    ];
    let grid = Grid1d::new(-20.0, 20.0, p.grid_points);
    dists
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let total = labeled_set_integral(d, &grid, 2)?;
            Ok(CheckRecord::new(
                "glmb_normalization",
                p.seed.wrapping_add(i as u64),
                total,
                1.0,
                1e-5,
            ))
        })
        .collect()
}

/// Largest relative deviation of f(Z|X) over 50 reorderings of Z and X.
pub fn permutation_invariance_check(p: &VerifyParams) -> Result<CheckRecord> {
    let seed = p.seed.wrapping_add(2000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = p.sensor(0.8, 1.0)?;
    let half = 0.3 * p.span();
    let mut xs = points(
        &(0..3)
            .map(|_| p.center() + rng.random_range(-half..half))
            .collect::<Vec<_>>(),
    );
    let mut zs = points(
        &(0..4)
            .map(|_| p.center() + rng.random_range(-half..half))
            .collect::<Vec<_>>(),
    );
    let base = multitarget_likelihood_ordered(&zs, &xs, &s)?;
    let mut worst = base;
    let mut worst_gap = 0.0;
    for _ in 0..50 {
        xs.shuffle(&mut rng);
        zs.shuffle(&mut rng);
        let f = multitarget_likelihood_ordered(&zs, &xs, &s)?;
        let gap = relative_gap(f, base);
        if gap > worst_gap {
            worst_gap = gap;
            worst = f;
        }
    }
    Ok(CheckRecord::new("permutation_invariance", seed, worst, base, 1e-12))
}

/// With λ = 0 and p_D = 1 the MTA likelihood sum is the permanent-like sum
/// over bijections of ∏ N(z_{π(i)}; H m_i, S_i).
pub fn specialization_checks(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for n in 1..=4 {
        let seed = p.seed.wrapping_add(3000 + n as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = p.sensor(1.0, 0.0)?;
        let half = 0.2 * p.span();
        let ts = TrackSet::new(
            (0..n)
                .map(|_| {
                    GaussianDensity::scalar(p.center() + rng.random_range(-half..half), rng.random_range(0.3..1.5))
                })
                .collect::<Result<_>>()?,
        );
        let zs = points(
            &(0..n)
                .map(|_| p.center() + rng.random_range(-half..half))
                .collect::<Vec<_>>(),
        );
        let table = AssociationTable::new(&zs, &ts, &s)?;
        let lhs: f64 = enumerate_mtas(n, n)
            .map(|a| table.likelihood(&a))
            .sum::<Result<f64>>()?;
        let mut rhs = 0.0;
        crate::rfs::for_each_permutation(n, |perm| {
            rhs += (0..n)
                .map(|i| {
                    let t = &ts.tracks[i];
                    let var = t.cov()[(0, 0)] + p.noise_var;
                    let d = zs[perm[i]][0] - t.mean()[0];
                    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
                })
                .product::<f64>();
        });
        out.push(CheckRecord::new("no_clutter_permutation_form", seed, lhs, rhs, 1e-12));
    }
    Ok(out)
}

pub fn run_suite(p: &VerifyParams) -> Result<Vec<CheckRecord>> {
    let mut records = identity_checks(p)?;
    records.extend(partition_checks(p, 20)?);
    records.extend(likelihood_normalization_checks(p)?);
    records.extend(association_normalization_checks(p)?);
    records.extend(glmb_normalization_checks(p)?);
    records.push(permutation_invariance_check(p)?);
    records.extend(specialization_checks(p)?);
    Ok(records)
}
