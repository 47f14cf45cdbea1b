//! The multitarget likelihood f(Z|X), its partition-sum form, set
//! integrals, the multitarget posterior, and the relation between the
//! RFS likelihood and MTA likelihoods.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::association::{check_exhaustive, enumerate_mtas, mta_count, AssociationTable, Mta, TrackSet};
use crate::error::{Error, Result};
use crate::models::{log_single_likelihood, Measurement, SensorModel, StateVector};
use crate::quadrature::{factorial, symmetric_tensor_sum_over_factorial, Grid1d};

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn canonical(mut elements: Vec<DVector<f64>>, what: &str) -> Result<Vec<DVector<f64>>> {
    if let Some(d) = elements.first().map(|e| e.len()) {
        if elements.iter().any(|e| e.len() != d) {
            return Err(Error::Dimension(format!("{what} elements have mixed dimensions")));
        }
    }
    if elements.iter().any(|e| e.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    elements.sort_by(lex_cmp);
    if elements.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!("{what} contains duplicate elements")));
    }
    Ok(elements)
}

macro_rules! finite_set {
    ($name:ident, $elem:ty, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name {
            elements: Vec<$elem>,
        }

        impl $name {
            /// Builds the set, storing elements in lexicographic order.
            /// Exact duplicates are rejected.
            pub fn new(elements: Vec<$elem>) -> Result<Self> {
                Ok(Self {
                    elements: canonical(elements, $what)?,
                })
            }

            pub fn empty() -> Self {
                Self { elements: Vec::new() }
            }

            pub fn len(&self) -> usize {
                self.elements.len()
            }

            pub fn is_empty(&self) -> bool {
                self.elements.is_empty()
            }

            pub fn as_slice(&self) -> &[$elem] {
                &self.elements
            }

            pub fn iter(&self) -> std::slice::Iter<'_, $elem> {
                self.elements.iter()
            }
        }
    };
}

finite_set!(StateSet, StateVector, "state set");
finite_set!(MeasurementSet, Measurement, "measurement set");

/// Point-target local values for one scan: `g[0][i] = 1 − p_D` and
/// `g[j][i] = p_D·f(z_j|x_i)`, plus the clutter factors.
struct PointTable {
    miss: f64,
    detect: Vec<Vec<f64>>,
    log_detect: Vec<Vec<f64>>,
    kappa: Vec<f64>,
    rate: f64,
}

impl PointTable {
    fn new(zs: &[Measurement], xs: &[StateVector], s: &SensorModel) -> Result<Self> {
        let pd = s.detection();
        let log_detect = xs
            .iter()
            .map(|x| {
                zs.iter()
                    .map(|z| Ok(pd.ln() + log_single_likelihood(z, x, s)?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for x in xs {
            s.check_state(x)?;
        }
        for z in zs {
            s.check_measurement(z)?;
        }
        Ok(Self {
            miss: 1.0 - pd,
            detect: log_detect.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect(),
            log_detect,
            kappa: zs.iter().map(|z| s.clutter_intensity(z)).collect(),
            rate: s.clutter().rate,
        })
    }

    /// e^{−λ}κ^{Z−Z_α}·∏_{α(i)=0}(1−p_D)·∏_{α(i)>0} p_D f(z_{α(i)}|x_i)
    fn term(&self, a: &Mta) -> f64 {
        let used = a.used_mask();
        let mut v = (-self.rate).exp();
        for (j, k) in self.kappa.iter().enumerate() {
            if !used[j] {
                v *= k;
            }
        }
        for (i, &aj) in a.assignments().iter().enumerate() {
            v *= if aj == 0 { self.miss } else { self.detect[i][aj - 1] };
        }
        v
    }

    fn log_term(&self, a: &Mta) -> f64 {
        let used = a.used_mask();
        let mut v = -self.rate;
        for (j, k) in self.kappa.iter().enumerate() {
            if !used[j] {
                v += k.ln();
            }
        }
        for (i, &aj) in a.assignments().iter().enumerate() {
            v += if aj == 0 {
                self.miss.ln()
            } else {
                self.log_detect[i][aj - 1]
            };
        }
        v
    }
}

/// f(Z|X) for an explicit ordering of the elements of Z and X.
///
/// Each MTA term is grouped as ∏_miss(1−p_D)·∏_det p_D f(z|x)·κ^{Z−Z_α}·e^{−λ},
/// which equals κ(Z)(1−p_D)^X ∏ p_D f/(κ(1−p_D)) without dividing by
/// (1−p_D) or κ(z), so p_D = 1 and κ(z) = 0 are both well defined.
pub fn multitarget_likelihood_ordered(zs: &[Measurement], xs: &[StateVector], s: &SensorModel) -> Result<f64> {
    check_exhaustive(xs.len(), zs.len())?;
    let table = PointTable::new(zs, xs, s)?;
    Ok(enumerate_mtas(xs.len(), zs.len()).map(|a| table.term(&a)).sum())
}

/// log f(Z|X) for an explicit ordering; log-sum-exp over MTA terms.
pub fn log_multitarget_likelihood_ordered(zs: &[Measurement], xs: &[StateVector], s: &SensorModel) -> Result<f64> {
    check_exhaustive(xs.len(), zs.len())?;
    let table = PointTable::new(zs, xs, s)?;
    let logs: Vec<f64> = enumerate_mtas(xs.len(), zs.len()).map(|a| table.log_term(&a)).collect();
    Ok(log_sum_exp(&logs))
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// The multitarget likelihood f(Z|X) as a sum over all MTAs.
pub fn multitarget_likelihood(zs: &MeasurementSet, xs: &StateSet, s: &SensorModel) -> Result<f64> {
    multitarget_likelihood_ordered(zs.as_slice(), xs.as_slice(), s)
}

pub fn log_multitarget_likelihood(zs: &MeasurementSet, xs: &StateSet, s: &SensorModel) -> Result<f64> {
    log_multitarget_likelihood_ordered(zs.as_slice(), xs.as_slice(), s)
}

/// Result of the ordered-partition evaluation of f(Z|X).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSum {
    pub value: f64,
    /// Partitions whose cells W₁..Wₙ are all empty or singletons.
    pub nonzero_partitions: u64,
    pub total_partitions: u64,
}

/// f(Z|X) as a sum over ordered partitions W₀⊎W₁⊎…⊎Wₙ = Z.
///
/// Every measurement is placed in one of the n+1 cells; cell i ≥ 1
/// contributes 1 when empty, p_D f(z|x_i)/(1−p_D) when it holds one
/// measurement and 0 otherwise; W₀ contributes κ^{W₀}. The sum is scaled
/// by e^{−λ}(1−p_D)^X. Requires p_D < 1.
pub fn multitarget_likelihood_partition_oracle(
    zs: &MeasurementSet,
    xs: &StateSet,
    s: &SensorModel,
) -> Result<PartitionSum> {
    let (n, m) = (xs.len(), zs.len());
    check_exhaustive(n, m)?;
    let pd = s.detection();
    if pd >= 1.0 {
        return Err(Error::InvalidParameter(
            "partition form divides by 1 − p_D; needs p_D < 1".into(),
        ));
    }
    let mut lik = vec![vec![0.0; m]; n];
    for (i, x) in xs.iter().enumerate() {
        for (j, z) in zs.iter().enumerate() {
            lik[i][j] = log_single_likelihood(z, x, s)?.exp();
        }
    }
    let kappa: Vec<f64> = zs.iter().map(|z| s.clutter_intensity(z)).collect();
    let prefactor = (-s.clutter().rate).exp() * (1.0 - pd).powi(n as i32);

    let mut cell = vec![0usize; m];
    let mut total = 0.0;
    let mut nonzero = 0u64;
    let mut count = 0u64;
    loop {
        count += 1;
        let mut sizes = vec![0usize; n + 1];
        for &c in &cell {
            sizes[c] += 1;
        }
        if sizes[1..].iter().all(|&k| k <= 1) {
            nonzero += 1;
            let mut term = prefactor;
            for (j, &c) in cell.iter().enumerate() {
                term *= if c == 0 {
                    kappa[j]
                } else {
                    pd * lik[c - 1][j] / (1.0 - pd)
                };
            }
            total += term;
        }
        // next assignment of measurements to cells, base n+1
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(PartitionSum {
                    value: total,
                    nonzero_partitions: nonzero,
                    total_partitions: count,
                });
            }
            pos -= 1;
            cell[pos] += 1;
            if cell[pos] <= n {
                break;
            }
            cell[pos] = 0;
        }
    }
}

type Evaluator = dyn Fn(&[StateVector]) -> f64 + Send + Sync;

/// A multitarget density f(X) evaluated on any listing of the elements of
/// X. The evaluator must not depend on the listing order. Coincident
/// points are allowed so tensor-grid quadrature can visit diagonals.
#[derive(Clone)]
pub struct MultitargetDensity {
    evaluator: Arc<Evaluator>,
    max_cardinality: usize,
}

impl std::fmt::Debug for MultitargetDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultitargetDensity")
            .field("max_cardinality", &self.max_cardinality)
            .finish_non_exhaustive()
    }
}

impl MultitargetDensity {
    pub fn new(max_cardinality: usize, evaluator: impl Fn(&[StateVector]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(evaluator),
            max_cardinality,
        }
    }

    pub fn max_cardinality(&self) -> usize {
        self.max_cardinality
    }

    pub fn evaluate(&self, xs: &StateSet) -> f64 {
        self.evaluate_points(xs.as_slice())
    }

    pub fn evaluate_points(&self, xs: &[StateVector]) -> f64 {
        if xs.len() > self.max_cardinality {
            0.0
        } else {
            (self.evaluator)(xs)
        }
    }
}

/// Visits every permutation of `0..n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// f₀(X) = δ_{|X|,n}·Σ_π ∏ f(x_{π(i)}|i) for n independent tracks that
/// certainly exist.
pub fn independent_prior(ts: &TrackSet) -> Result<MultitargetDensity> {
    let n = ts.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "independent prior needs at least one track".into(),
        ));
    }
    check_exhaustive(n, 0)?;
    let tracks = ts.tracks.clone();
    Ok(MultitargetDensity::new(n, move |xs: &[StateVector]| {
        if xs.len() != n {
            return 0.0;
        }
        let table: Vec<Vec<f64>> = tracks.iter().map(|t| xs.iter().map(|x| t.pdf(x)).collect()).collect();
        let mut total = 0.0;
        for_each_permutation(n, |perm| {
            total += (0..n).map(|i| table[i][perm[i]]).product::<f64>();
        });
        total
    }))
}

fn check_set_integral(n_max: usize) -> Result<()> {
    if n_max > 4 {
        return Err(Error::InvalidParameter(format!(
            "set integral supports n_max <= 4, got {n_max}"
        )));
    }
    Ok(())
}

/// Set integral f(∅) + Σ_{n=1}^{n_max} (1/n!)∫f({x₁..xₙ})dx₁..dxₙ over a
/// 1-D state space by tensor-grid trapezoid quadrature.
pub fn set_integral(f: &MultitargetDensity, grid: &Grid1d, n_max: usize) -> Result<f64> {
    check_set_integral(n_max)?;
    let nodes: Vec<StateVector> = grid.nodes().into_iter().map(|x| DVector::from_element(1, x)).collect();
    let mut total = f.evaluate_points(&[]);
    let mut buf: Vec<StateVector> = Vec::with_capacity(n_max);
    for n in 1..=n_max.min(f.max_cardinality()) {
        total += symmetric_tensor_sum_over_factorial(grid, n, |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| nodes[i].clone()));
            f.evaluate_points(&buf)
        });
    }
    Ok(total)
}

/// Multitarget posterior together with its normalizing constant ∫f(Z|Y)f₀(Y)δY.
#[derive(Debug, Clone)]
pub struct MultitargetPosterior {
    pub density: MultitargetDensity,
    pub normalizer: f64,
}

/// f(X|Z) = f(Z|X)·f₀(X)/∫f(Z|Y)f₀(Y)δY with the normalizer computed by
/// [`set_integral`].
pub fn multitarget_posterior(
    zs: &MeasurementSet,
    prior: &MultitargetDensity,
    s: &SensorModel,
    grid: &Grid1d,
    n_max: usize,
) -> Result<MultitargetPosterior> {
    check_set_integral(n_max)?;
    check_exhaustive(n_max.min(prior.max_cardinality()), zs.len())?;
    let z = zs.as_slice().to_vec();
    let sensor = s.clone();
    let p = prior.clone();
    let joint = MultitargetDensity::new(prior.max_cardinality().min(n_max), move |xs: &[StateVector]| {
        let f0 = p.evaluate_points(xs);
        if f0 == 0.0 {
            return 0.0;
        }
        multitarget_likelihood_ordered(&z, xs, &sensor).unwrap_or(0.0) * f0
    });
    let normalizer = set_integral(&joint, grid, n_max)?;
    if !(normalizer > 0.0 && normalizer.is_finite()) {
        return Err(Error::Degenerate(format!("posterior normalizer is {normalizer}")));
    }
    let density = MultitargetDensity::new(joint.max_cardinality(), move |xs: &[StateVector]| {
        joint.evaluate_points(xs) / normalizer
    });
    Ok(MultitargetPosterior { density, normalizer })
}

/// One check of ∫f(Z|X)f₀(X)δX = Σ_α ℓ_{Z|X}(α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

pub(crate) fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        0.0
    } else {
        (lhs - rhs).abs() / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Grid covering ±`sigmas` standard deviations of every 1-D track.
pub fn track_window(ts: &TrackSet, sigmas: f64, points: usize) -> Result<Grid1d> {
    if ts.tracks.iter().any(|t| t.dim() != 1) {
        return Err(Error::Dimension("track window needs 1-D tracks".into()));
    }
    let lo = ts
        .tracks
        .iter()
        .map(|t| t.mean()[0] - sigmas * t.cov()[(0, 0)].sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = ts
        .tracks
        .iter()
        .map(|t| t.mean()[0] + sigmas * t.cov()[(0, 0)].sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Grid1d::new(lo, hi, points))
}

/// Checks the RFS/MTA identity on a 1-D instance.
///
/// The left side is the tensor-grid set integral of f(Z|X)·f₀(X), with
/// f₀ the independent-track prior and f(Z|X) evaluated pointwise at every
/// grid node; the right side sums closed-form association likelihoods.
pub fn verify_mta_rfs_identity(
    zs: &MeasurementSet,
    ts: &TrackSet,
    s: &SensorModel,
    grid: &Grid1d,
) -> Result<IdentityReport> {
    let (n, m) = (ts.len(), zs.len());
    if n > 3 || m > 4 {
        return Err(Error::GuardExceeded {
            tracks: n,
            measurements: m,
            limit: 4,
        });
    }
    if s.state_dim() != 1 || s.measurement_dim() != 1 || ts.tracks.iter().any(|t| t.dim() != 1) {
        return Err(Error::Dimension("identity check runs on 1-D state spaces".into()));
    }
    let table = AssociationTable::new(zs.as_slice(), ts, s)?;
    let mtas: Vec<Mta> = enumerate_mtas(n, m).collect();
    let rhs: f64 = mtas.iter().map(|a| table.likelihood(a)).sum::<Result<f64>>()?;

    let lhs = if n == 0 {
        multitarget_likelihood(zs, &StateSet::empty(), s)?
    } else {
        let nodes: Vec<StateVector> = grid.nodes().into_iter().map(|x| DVector::from_element(1, x)).collect();
        // Per-node factors of f(Z|X): row 0 is 1 − p_D, row j is p_D f(z_j|x).
        let pd = s.detection();
        let mut point_factors = vec![vec![1.0 - pd; nodes.len()]];
        for z in zs.iter() {
            point_factors.push(
                nodes
                    .iter()
                    .map(|x| Ok(pd * log_single_likelihood(z, x, s)?.exp()))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        let prior_at: Vec<Vec<f64>> = ts
            .tracks
            .iter()
            .map(|t| nodes.iter().map(|x| t.pdf(x)).collect())
            .collect();
        let kappa: Vec<f64> = zs.iter().map(|z| s.clutter_intensity(z)).collect();
        let terms: Vec<(Vec<usize>, f64)> = mtas
            .iter()
            .map(|a| {
                let used = a.used_mask();
                let clutter = kappa
                    .iter()
                    .zip(&used)
                    .filter(|(_, &u)| !u)
                    .fold((-s.clutter().rate).exp(), |acc, (k, _)| acc * k);
                (a.assignments().to_vec(), clutter)
            })
            .collect();
        let mut perms = Vec::new();
        for_each_permutation(n, |p| perms.push(p.to_vec()));

        symmetric_tensor_sum_over_factorial(grid, n, |idx| {
            let likelihood: f64 = terms
                .iter()
                .map(|(alpha, clutter)| {
                    alpha
                        .iter()
                        .zip(idx)
                        .fold(*clutter, |acc, (&aj, &g)| acc * point_factors[aj][g])
                })
                .sum();
            let prior: f64 = perms
                .iter()
                .map(|p| (0..n).map(|i| prior_at[i][idx[p[i]]]).product::<f64>())
                .sum();
            likelihood * prior
        })
    };
    Ok(IdentityReport {
        lhs,
        rhs,
        relative_gap: relative_gap(lhs, rhs),
    })
}

/// ∫f(Z|X)δZ over a 1-D measurement space, truncated at `max_cardinality`.
///
/// Cardinalities up to `brute_force_max` are integrated by evaluating
/// f(Z|X) at every multiset of grid nodes. Larger cardinalities use the
/// fact that each MTA term is a product of one-dimensional factors, so its
/// tensor-grid sum is the product of 1-D grid sums; by symmetry the terms
/// with ν detections among tracks D contribute m!/(m−ν)! identical copies.
pub fn measurement_set_integral(
    xs: &StateSet,
    s: &SensorModel,
    grid: &Grid1d,
    max_cardinality: usize,
    brute_force_max: usize,
) -> Result<f64> {
    if s.measurement_dim() != 1 {
        return Err(Error::Dimension(
            "measurement set integral runs on 1-D measurement spaces".into(),
        ));
    }
    let n = xs.len();
    let nodes: Vec<Measurement> = grid.nodes().into_iter().map(|z| DVector::from_element(1, z)).collect();
    let mut total = multitarget_likelihood_ordered(&[], xs.as_slice(), s)?;
    let mut buf: Vec<Measurement> = Vec::new();
    let brute = brute_force_max.min(max_cardinality);
    for m in 1..=brute {
        let mut err = None;
        total += symmetric_tensor_sum_over_factorial(grid, m, |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| nodes[i].clone()));
            multitarget_likelihood_ordered(&buf, xs.as_slice(), s).unwrap_or_else(|e| {
                err = Some(e);
                0.0
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    if max_cardinality > brute {
        let pd = s.detection();
        let clutter_mass = grid.integrate(|z| s.clutter_intensity(&DVector::from_element(1, z)));
        let detect_mass: Vec<f64> = xs
            .iter()
            .map(|x| {
                Ok(grid.integrate(|z| {
                    log_single_likelihood(&DVector::from_element(1, z), x, s)
                        .unwrap_or(f64::NEG_INFINITY)
                        .exp()
                }))
            })
            .collect::<Result<_>>()?;
        for x in xs.iter() {
            s.check_state(x)?;
        }
        for m in brute + 1..=max_cardinality {
            let mut sum_m = 0.0;
            for subset in 0u32..(1 << n) {
                let nu = subset.count_ones() as usize;
                if nu > m {
                    continue;
                }
                let mut term = (-s.clutter().rate).exp() * clutter_mass.powi((m - nu) as i32);
                for (i, mass) in detect_mass.iter().enumerate() {
                    term *= if subset & (1 << i) != 0 { pd * mass } else { 1.0 - pd };
                }
                let arrangements = factorial(m) / factorial(m - nu);
                sum_m += arrangements * term;
            }
            total += sum_m / factorial(m);
        }
    }
    Ok(total)
}

/// Monte-Carlo estimate of the multitarget Bayes risk E[C(X̂(Z), X)] over
/// joint draws (X, Z) from `sampler`.
///
/// Only the risk value is computed; whether an estimator should minimize
/// or maximize it is left to the caller.
pub fn multitarget_bayes_risk<R: Rng + ?Sized>(
    estimator: impl Fn(&MeasurementSet) -> StateSet,
    cost: impl Fn(&StateSet, &StateSet) -> f64,
    mut sampler: impl FnMut(&mut R) -> (StateSet, MeasurementSet),
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("risk estimate needs at least one trial".into()));
    }
    let mut total = 0.0;
    for _ in 0..trials {
        let (truth, zs) = sampler(rng);
        total += cost(&estimator(&zs), &truth);
    }
    Ok(total / trials as f64)
}

/// Total number of MTAs contributing to f(Z|X).
pub fn likelihood_term_count(zs: &MeasurementSet, xs: &StateSet) -> u128 {
    mta_count(xs.len(), zs.len())
}
