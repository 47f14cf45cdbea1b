//! Measurement-to-track associations (MTAs): representation, enumeration,
//! association likelihoods and the Bayesian posterior over MTAs.
//!
//! An MTA over `n` tracks and `m` measurements is a map from track indices
//! to `{0, 1, ..., m}` that is injective on its positive values. Value `0`
//! is a missed detection and value `j > 0` names the `j`-th measurement
//! (`Z[j - 1]`). Measurements outside the image are clutter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{bayes_update_density, GaussianDensity, Measurement, SensorModel};
use crate::quadrature::{tensor_sum, Grid1d};

/// Largest `n` or `m` accepted by exhaustive enumeration paths.
pub const EXHAUSTIVE_LIMIT: usize = 8;

pub(crate) fn check_exhaustive(tracks: usize, measurements: usize) -> Result<()> {
    if tracks > EXHAUSTIVE_LIMIT || measurements > EXHAUSTIVE_LIMIT {
        return Err(Error::GuardExceeded {
            tracks,
            measurements,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    Ok(())
}

/// A measurement-to-track association α.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mta {
    assignments: Vec<usize>,
    measurements: usize,
}

impl Mta {
    pub fn new(assignments: Vec<usize>, measurements: usize) -> Result<Self> {
        let mut seen = vec![false; measurements + 1];
        for &a in &assignments {
            if a > measurements {
                return Err(Error::InvalidParameter(format!(
                    "assignment {a} exceeds measurement count {measurements}"
                )));
            }
            if a > 0 {
                if seen[a] {
                    return Err(Error::InvalidParameter(format!("measurement {a} assigned twice")));
                }
                seen[a] = true;
            }
        }
        Ok(Self {
            assignments,
            measurements,
        })
    }

    /// The all-missed association.
    pub fn null(tracks: usize, measurements: usize) -> Self {
        Self {
            assignments: vec![0; tracks],
            measurements,
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn tracks(&self) -> usize {
        self.assignments.len()
    }

    pub fn measurements(&self) -> usize {
        self.measurements
    }

    /// α(i) for a 0-based track index.
    pub fn get(&self, track: usize) -> usize {
        self.assignments[track]
    }

    pub fn detections(&self) -> usize {
        self.assignments.iter().filter(|&&a| a > 0).count()
    }

    /// Which measurements (0-based) are claimed by some track.
    pub fn used_mask(&self) -> Vec<bool> {
        let mut used = vec![false; self.measurements];
        for &a in &self.assignments {
            if a > 0 {
                used[a - 1] = true;
            }
        }
        used
    }

    pub fn components(&self) -> MtaComponents {
        mta_components(self)
    }
}

/// The 4-tuple form (ν, X′, Z′, γ) of an MTA.
///
/// Track indices are 0-based; measurement indices use the 1-based values of α.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MtaComponents {
    pub nu: usize,
    pub detected_tracks: Vec<usize>,
    pub used_measurements: Vec<usize>,
    pub bijection: BTreeMap<usize, usize>,
}

pub fn mta_components(a: &Mta) -> MtaComponents {
    let bijection: BTreeMap<usize, usize> = a
        .assignments
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .map(|(i, &v)| (i, v))
        .collect();
    let detected_tracks: Vec<usize> = bijection.keys().copied().collect();
    let mut used_measurements: Vec<usize> = bijection.values().copied().collect();
    used_measurements.sort_unstable();
    MtaComponents {
        nu: bijection.len(),
        detected_tracks,
        used_measurements,
        bijection,
    }
}

impl MtaComponents {
    /// Rebuilds the functional form of the association.
    pub fn to_mta(&self, tracks: usize, measurements: usize) -> Result<Mta> {
        if self.detected_tracks.len() != self.nu || self.used_measurements.len() != self.nu {
            return Err(Error::InvalidParameter("|X′| and |Z′| must both equal ν".into()));
        }
        let mut assignments = vec![0; tracks];
        for (&i, &j) in &self.bijection {
            if i >= tracks {
                return Err(Error::InvalidParameter(format!("track {i} out of range")));
            }
            assignments[i] = j;
        }
        Mta::new(assignments, measurements)
    }
}

/// Number of MTAs between `n` tracks and `m` measurements:
/// Σ_ν C(n,ν)·C(m,ν)·ν!.
pub fn mta_count(n: usize, m: usize) -> u128 {
    let choose = |a: usize, b: usize| -> u128 { (0..b).fold(1u128, |acc, k| acc * (a - k) as u128 / (k + 1) as u128) };
    (0..=n.min(m))
        .map(|nu| choose(n, nu) * choose(m, nu) * (1..=nu as u128).product::<u128>())
        .sum()
}

/// Lazily enumerates all MTAs for `n` tracks and `m` measurements in
/// lexicographic order of the assignment sequence.
pub fn enumerate_mtas(n: usize, m: usize) -> MtaIter {
    MtaIter {
        current: vec![0; n],
        used: vec![false; m + 1],
        measurements: m,
        started: false,
        done: false,
    }
}

#[derive(Debug, Clone)]
pub struct MtaIter {
    current: Vec<usize>,
    used: Vec<bool>,
    measurements: usize,
    started: bool,
    done: bool,
}

impl Iterator for MtaIter {
    type Item = Mta;

    fn next(&mut self) -> Option<Mta> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(Mta {
                assignments: self.current.clone(),
                measurements: self.measurements,
            });
        }
        // Bump the rightmost position that has a larger free value; every
        // later position resets to 0, which is always admissible.
        for pos in (0..self.current.len()).rev() {
            let old = self.current[pos];
            if old > 0 {
                self.used[old] = false;
            }
            if let Some(v) = (old + 1..=self.measurements).find(|&v| !self.used[v]) {
                self.current[pos] = v;
                self.used[v] = true;
                return Some(Mta {
                    assignments: self.current.clone(),
                    measurements: self.measurements,
                });
            }
            self.current[pos] = 0;
        }
        self.done = true;
        None
    }
}

/// Ordered track densities f(x|1), ..., f(x|n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    pub tracks: Vec<GaussianDensity>,
}

impl TrackSet {
    pub fn new(tracks: Vec<GaussianDensity>) -> Self {
        Self { tracks }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    fn get(&self, i: usize) -> Result<&GaussianDensity> {
        self.tracks
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("track index {i} out of range (n={})", self.len())))
    }
}

/// log ℓ(z|i) = log p_D + log N(z; H·mean_i, H·cov_i·Hᵀ + R).
pub fn log_local_detection_likelihood(i: usize, z: &Measurement, ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    s.check_measurement(z)?;
    let pred = s.predicted_measurement(ts.get(i)?)?;
    Ok(s.detection().ln() + pred.log_pdf(z))
}

/// ℓ(z|i) = ∫p_D·f(z|x)·f(x|i)dx in closed form.
pub fn local_detection_likelihood(i: usize, z: &Measurement, ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    log_local_detection_likelihood(i, z, ts, s).map(f64::exp)
}

/// ℓ(∅|i) = ∫(1−p_D)·f(x|i)dx = 1 − p_D.
pub fn local_miss_probability(i: usize, ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    ts.get(i)?;
    Ok(1.0 - s.detection())
}

fn check_scalar_track(track: &GaussianDensity, s: &SensorModel) -> Result<()> {
    if track.dim() != 1 || s.state_dim() != 1 || s.measurement_dim() != 1 {
        return Err(Error::Dimension(
            "quadrature path supports 1-D states and measurements only".into(),
        ));
    }
    Ok(())
}

/// ℓ(z|i) for a state-dependent detection profile, by trapezoid quadrature
/// over a 1-D state grid.
pub fn local_detection_likelihood_quadrature(
    track: &GaussianDensity,
    z: f64,
    s: &SensorModel,
    detection: impl Fn(f64) -> f64,
    grid: &Grid1d,
) -> Result<f64> {
    check_scalar_track(track, s)?;
    let h = s.observation()[(0, 0)];
    let r = s.noise()[(0, 0)];
    let lik = GaussianDensity::scalar(0.0, r)?;
    Ok(grid.integrate(|x| detection(x) * lik.pdf_scalar(z - h * x) * track.pdf_scalar(x)))
}

/// ℓ(∅|i) for a state-dependent detection profile, by quadrature.
pub fn local_miss_probability_quadrature(
    track: &GaussianDensity,
    s: &SensorModel,
    detection: impl Fn(f64) -> f64,
    grid: &Grid1d,
) -> Result<f64> {
    check_scalar_track(track, s)?;
    Ok(grid.integrate(|x| (1.0 - detection(x)) * track.pdf_scalar(x)))
}

/// Precomputed local likelihoods for one scan, shared by every MTA.
#[derive(Debug, Clone)]
pub struct AssociationTable {
    /// `log_detect[i][j]` = log ℓ(z_{j+1}|i).
    pub log_detect: Vec<Vec<f64>>,
    pub detect: Vec<Vec<f64>>,
    pub miss: Vec<f64>,
    pub kappa: Vec<f64>,
    pub spatial: Vec<f64>,
    pub rate: f64,
}

impl AssociationTable {
    pub fn new(zs: &[Measurement], ts: &TrackSet, s: &SensorModel) -> Result<Self> {
        let mut log_detect = Vec::with_capacity(ts.len());
        for track in &ts.tracks {
            let pred = s.predicted_measurement(track)?;
            let row = zs
                .iter()
                .map(|z| {
                    s.check_measurement(z)?;
                    Ok(s.detection().ln() + pred.log_pdf(z))
                })
                .collect::<Result<Vec<f64>>>()?;
            log_detect.push(row);
        }
        for z in zs {
            s.check_measurement(z)?;
        }
        let detect = log_detect
            .iter()
            .map(|row| row.iter().map(|v| v.exp()).collect())
            .collect();
        Ok(Self {
            log_detect,
            detect,
            miss: vec![1.0 - s.detection(); ts.len()],
            kappa: zs.iter().map(|z| s.clutter_intensity(z)).collect(),
            spatial: zs.iter().map(|z| s.clutter().spatial_density(z)).collect(),
            rate: s.clutter().rate,
        })
    }

    pub fn tracks(&self) -> usize {
        self.miss.len()
    }

    pub fn measurements(&self) -> usize {
        self.kappa.len()
    }

    fn check(&self, a: &Mta) -> Result<()> {
        if a.tracks() != self.tracks() || a.measurements() != self.measurements() {
            return Err(Error::Dimension(format!(
                "MTA is over {}x{} but the scan has {} tracks and {} measurements",
                a.tracks(),
                a.measurements(),
                self.tracks(),
                self.measurements()
            )));
        }
        Ok(())
    }

    /// ℓ_{Z|X}(α) = e^{−λ}·κ^{Z−Z_α}·∏_{α(i)=0} ℓ(∅|i)·∏_{α(i)>0} ℓ(z_{α(i)}|i).
    pub fn likelihood(&self, a: &Mta) -> Result<f64> {
        self.check(a)?;
        let used = a.used_mask();
        let mut value = (-self.rate).exp();
        for (j, k) in self.kappa.iter().enumerate() {
            if !used[j] {
                value *= k;
            }
        }
        for (i, &v) in a.assignments().iter().enumerate() {
            value *= if v == 0 { self.miss[i] } else { self.detect[i][v - 1] };
        }
        Ok(value)
    }

    pub fn log_likelihood(&self, a: &Mta) -> Result<f64> {
        self.check(a)?;
        let used = a.used_mask();
        let mut value = -self.rate;
        for (j, k) in self.kappa.iter().enumerate() {
            if !used[j] {
                value += k.ln();
            }
        }
        for (i, &v) in a.assignments().iter().enumerate() {
            value += if v == 0 {
                self.miss[i].ln()
            } else {
                self.log_detect[i][v - 1]
            };
        }
        Ok(value)
    }

    /// log f(Z|α) = log c^{Z−Z_α} + Σ_{α(i)>0} [log ℓ(z_{α(i)}|i) − log(1−ℓ(∅|i))].
    ///
    /// This is c^Z·∏ ℓ(z_{α(i)}|i)/(c(z_{α(i)})·(1−ℓ(∅|i))) with the c(z_{α(i)})
    /// factors cancelled against c^Z.
    pub fn log_normalized_likelihood(&self, a: &Mta) -> Result<f64> {
        self.check(a)?;
        let used = a.used_mask();
        let mut value = 0.0;
        for (j, c) in self.spatial.iter().enumerate() {
            if !used[j] {
                value += c.ln();
            }
        }
        for (i, &v) in a.assignments().iter().enumerate() {
            if v > 0 {
                let detectable = 1.0 - self.miss[i];
                if detectable <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "track {i} has zero detection probability but is assigned measurement {v}"
                    )));
                }
                value += self.log_detect[i][v - 1] - detectable.ln();
            }
        }
        Ok(value)
    }
}

/// Global association likelihood ℓ_{Z|X}(α).
pub fn association_likelihood(a: &Mta, zs: &[Measurement], ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    AssociationTable::new(zs, ts, s)?.likelihood(a)
}

/// log ℓ_{Z|X}(α).
pub fn log_association_likelihood(a: &Mta, zs: &[Measurement], ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    AssociationTable::new(zs, ts, s)?.log_likelihood(a)
}

/// Normalized association likelihood f(Z|α).
pub fn normalized_association_likelihood(a: &Mta, zs: &[Measurement], ts: &TrackSet, s: &SensorModel) -> Result<f64> {
    AssociationTable::new(zs, ts, s)?
        .log_normalized_likelihood(a)
        .map(f64::exp)
}

/// ∫ f(z₁..z_m | α) dz₁…dz_m over a 1-D measurement space by tensor-grid
/// trapezoid quadrature. The integral runs over the ordered measurement
/// list, so no 1/m! factor appears.
pub fn normalized_likelihood_integral(a: &Mta, ts: &TrackSet, s: &SensorModel, grid: &Grid1d) -> Result<f64> {
    let m = a.measurements();
    if m > 3 {
        return Err(Error::GuardExceeded {
            tracks: a.tracks(),
            measurements: m,
            limit: 3,
        });
    }
    if s.measurement_dim() != 1 {
        return Err(Error::Dimension(
            "normalization check runs on 1-D measurement spaces".into(),
        ));
    }
    let nodes: Vec<Measurement> = grid
        .nodes()
        .into_iter()
        .map(|z| Measurement::from_element(1, z))
        .collect();
    let mut zs: Vec<Measurement> = Vec::with_capacity(m);
    let mut err = None;
    let total = tensor_sum(grid, m, |idx| {
        zs.clear();
        zs.extend(idx.iter().map(|&i| nodes[i].clone()));
        normalized_association_likelihood(a, &zs, ts, s).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Posterior over MTAs for the observed measurement count.
#[derive(Debug, Clone, PartialEq)]
pub struct MtaPosterior {
    pub measurements: usize,
    pub support: Vec<(Mta, f64)>,
}

impl MtaPosterior {
    pub fn total_weight(&self) -> f64 {
        self.support.iter().map(|(_, w)| w).sum()
    }
}

/// Prior p₀(m, ᾰ) over MTAs.
pub type MtaPrior<'a> = &'a dyn Fn(usize, &Mta) -> f64;

/// p(m, ᾰ | Z) ∝ δ_{|Z|,m}·f(Z|ᾰ)·p₀(m, ᾰ).
///
/// With no prior supplied the prior is uniform over MTAs, which makes the
/// MAP association the maximum-likelihood association.
pub fn mta_posterior(
    zs: &[Measurement],
    ts: &TrackSet,
    s: &SensorModel,
    prior: Option<MtaPrior<'_>>,
) -> Result<MtaPosterior> {
    let m = zs.len();
    check_exhaustive(ts.len(), m)?;
    let table = AssociationTable::new(zs, ts, s)?;
    let mut support = Vec::new();
    let mut log_weights = Vec::new();
    for a in enumerate_mtas(ts.len(), m) {
        let p0 = match prior {
            Some(p) => p(m, &a),
            None => 1.0,
        };
        if !(p0 >= 0.0 && p0.is_finite()) {
            return Err(Error::InvalidParameter(
                "MTA prior must be finite and nonnegative".into(),
            ));
        }
        let lw = if p0 == 0.0 {
            f64::NEG_INFINITY
        } else {
            table.log_normalized_likelihood(&a)? + p0.ln()
        };
        log_weights.push(lw);
        support.push(a);
    }
    let weights = normalize_log_weights(&log_weights)
        .ok_or_else(|| Error::Degenerate("every MTA has zero posterior weight".into()))?;
    Ok(MtaPosterior {
        measurements: m,
        support: support.into_iter().zip(weights).collect(),
    })
}

/// Exponentiates and normalizes log weights; `None` when all are `-inf`.
pub(crate) fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let raw: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Some(raw.into_iter().map(|w| w / total).collect())
}

/// The most probable MTA. Equal weights resolve to the lexicographically
/// smaller assignment sequence.
pub fn map_mta(p: &MtaPosterior) -> Result<(usize, Mta)> {
    let mut best: Option<&(Mta, f64)> = None;
    for entry in &p.support {
        best = match best {
            None => Some(entry),
            Some(b) if entry.1 > b.1 || (entry.1 == b.1 && entry.0 < b.0) => Some(entry),
            keep => keep,
        };
    }
    best.map(|(a, _)| (p.measurements, a.clone()))
        .ok_or_else(|| Error::Degenerate("empty MTA posterior".into()))
}

/// Kalman-updates each detected track with its assigned measurement.
pub fn mta_state_estimate(
    best: &Mta,
    zs: &[Measurement],
    ts: &TrackSet,
    s: &SensorModel,
) -> Result<Vec<(usize, GaussianDensity)>> {
    if best.tracks() != ts.len() || best.measurements() != zs.len() {
        return Err(Error::Dimension(
            "MTA does not match the tracks and measurements".into(),
        ));
    }
    best.assignments()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .map(|(i, &v)| Ok((i, bayes_update_density(&ts.tracks[i], &zs[v - 1], s)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BoxRegion, UniformClutter};
    use nalgebra::DVector;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn sensor(pd: f64, rate: f64, lo: f64, hi: f64) -> SensorModel {
        let c = UniformClutter::new(BoxRegion::new(vec![lo], vec![hi]).unwrap(), rate).unwrap();
        SensorModel::scalar(1.0, pd, c).unwrap()
    }

    /// Brute force: every sequence in {0..m}^n, keep the injective-on-positives ones.
    fn brute_force(n: usize, m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let total = (m + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut seq = vec![0; n];
            for slot in seq.iter_mut().rev() {
                *slot = c % (m + 1);
                c /= m + 1;
            }
            let pos: Vec<_> = seq.iter().filter(|&&x| x > 0).collect();
            let uniq: HashSet<_> = pos.iter().collect();
            if pos.len() == uniq.len() {
                out.push(seq);
            }
        }
        out
    }

    #[test]
    fn enumeration_small_cases() {
        let none: Vec<_> = enumerate_mtas(0, 3).collect();
        assert_eq!(none.len(), 1);
        assert!(none[0].assignments().is_empty());
        let one: Vec<_> = enumerate_mtas(1, 1).map(|a| a.assignments().to_vec()).collect();
        assert_eq!(one, vec![vec![0], vec![1]]);
        assert_eq!(enumerate_mtas(2, 2).count(), 7);
    }

    #[test]
    fn enumeration_matches_brute_force_and_count_formula() {
        for n in 0..=5 {
            for m in 0..=5 {
                let got: Vec<Vec<usize>> = enumerate_mtas(n, m).map(|a| a.assignments().to_vec()).collect();
                let expected = brute_force(n, m);
                assert_eq!(got, expected, "n={n} m={m}");
                assert_eq!(got.len() as u128, mta_count(n, m));
            }
        }
    }

    #[test]
    fn components_and_round_trip() {
        let a = Mta::new(vec![0, 0], 2).unwrap();
        let c = mta_components(&a);
        assert_eq!(c.nu, 0);
        assert!(c.detected_tracks.is_empty() && c.used_measurements.is_empty() && c.bijection.is_empty());

        let a = Mta::new(vec![2, 0], 2).unwrap();
        let c = mta_components(&a);
        assert_eq!(c.nu, 1);
        assert_eq!(c.detected_tracks, vec![0]);
        assert_eq!(c.used_measurements, vec![2]);
        assert_eq!(c.bijection.get(&0), Some(&2));

        for a in enumerate_mtas(2, 2) {
            assert_eq!(a.components().to_mta(2, 2).unwrap(), a);
        }
    }

    #[test]
    fn invalid_mtas_are_rejected() {
        assert!(Mta::new(vec![1, 1], 2).is_err());
        assert!(Mta::new(vec![3], 2).is_err());
    }

    #[test]
    fn local_likelihood_values() {
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap()]);
        assert_eq!(
            local_detection_likelihood(0, &v(0.3), &ts, &sensor(0.0, 1.0, -5.0, 5.0)).unwrap(),
            0.0
        );
        let l = local_detection_likelihood(0, &v(0.0), &ts, &sensor(1.0, 1.0, -5.0, 5.0)).unwrap();
        assert!((l - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(
            local_miss_probability(0, &ts, &sensor(1.0, 1.0, -5.0, 5.0)).unwrap(),
            0.0
        );
        let miss = local_miss_probability(0, &ts, &sensor(0.9, 1.0, -5.0, 5.0)).unwrap();
        assert!((miss - 0.1).abs() < 1e-15);
        assert!(local_miss_probability(3, &ts, &sensor(0.9, 1.0, -5.0, 5.0)).is_err());
    }

    #[test]
    fn local_likelihood_matches_quadrature() {
        let track = GaussianDensity::scalar(0.4, 1.7).unwrap();
        let ts = TrackSet::new(vec![track.clone()]);
        let s = sensor(0.8, 1.0, -5.0, 5.0);
        let grid = Grid1d::new(-20.0, 20.0, 4001);
        for z in [-1.0, 0.4, 2.5] {
            let closed = local_detection_likelihood(0, &v(z), &ts, &s).unwrap();
            let quad = local_detection_likelihood_quadrature(&track, z, &s, |_| 0.8, &grid).unwrap();
            assert!((closed - quad).abs() < 1e-6, "z={z}");
        }
    }

    #[test]
    fn miss_probability_with_state_dependent_detection() {
        // Φ(5) − Φ(−5) = erf(5/√2)
        let track = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let s = sensor(0.9, 1.0, -5.0, 5.0);
        let grid = Grid1d::new(-5.0, 5.0, 20001);
        let quad = local_miss_probability_quadrature(
            &track,
            &s,
            |x| if x.abs() < 5.0 { 0.9 } else { 0.0 },
            &Grid1d::new(-12.0, 12.0, 24001),
        )
        .unwrap();
        let inside = grid.integrate(|x| track.pdf_scalar(x));
        let erf5 = statrs::function::erf::erf(5.0 / 2f64.sqrt());
        assert!((inside - erf5).abs() < 1e-8);
        let expected = 1.0 - 0.9 * erf5;
        assert!((quad - expected).abs() < 1e-6, "{quad} vs {expected}");
    }

    #[test]
    fn association_likelihood_no_tracks_is_clutter_density() {
        let s = sensor(0.9, 2.0, 0.0, 10.0 / 1.5);
        let zs = vec![v(1.0)];
        let ts = TrackSet::new(vec![]);
        let a = Mta::null(0, 1);
        let l = association_likelihood(&a, &zs, &ts, &s).unwrap();
        // κ(z) = 2·(1.5/10) = 0.3
        assert!((l - (-2.0f64).exp() * 0.3).abs() < 1e-15);
    }

    #[test]
    fn association_likelihood_single_detection_without_clutter() {
        let s = sensor(1.0, 0.0, -5.0, 5.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.2, 0.5).unwrap()]);
        let zs = vec![v(0.9)];
        let a = Mta::new(vec![1], 1).unwrap();
        let l = association_likelihood(&a, &zs, &ts, &s).unwrap();
        assert_eq!(l, local_detection_likelihood(0, &zs[0], &ts, &s).unwrap());
    }

    #[test]
    fn association_likelihood_missed_detection_hand_product() {
        // λ=2, c=1/10 → κ=0.2; p_D=0.9 → ℓ(∅|1)=0.1
        let s = sensor(0.9, 2.0, 0.0, 10.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(5.0, 1.0).unwrap()]);
        let zs = vec![v(3.0)];
        let l = association_likelihood(&Mta::new(vec![0], 1).unwrap(), &zs, &ts, &s).unwrap();
        assert!((l - (-2.0f64).exp() * 0.2 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn permutation_specialization() {
        // λ=0, p_D=1: only permutations survive and each equals ∏ ℓ(z_π(i)|i).
        let s = sensor(1.0, 0.0, -10.0, 10.0);
        for n in 1..=4usize {
            let ts = TrackSet::new(
                (0..n)
                    .map(|i| GaussianDensity::scalar(i as f64 * 1.3 - 2.0, 0.5 + 0.2 * i as f64).unwrap())
                    .collect(),
            );
            let zs: Vec<_> = (0..n).map(|j| v(j as f64 * 1.1 - 1.5)).collect();
            let table = AssociationTable::new(&zs, &ts, &s).unwrap();
            for a in enumerate_mtas(n, n) {
                let l = table.likelihood(&a).unwrap();
                if a.detections() < n {
                    assert_eq!(l, 0.0);
                } else {
                    let prod: f64 = (0..n)
                        .map(|i| local_detection_likelihood(i, &zs[a.get(i) - 1], &ts, &s).unwrap())
                        .product();
                    assert!((l - prod).abs() <= 1e-14 * prod);
                }
            }
        }
    }

    #[test]
    fn log_and_linear_agree() {
        let s = sensor(0.85, 1.5, -10.0, 10.0);
        let ts = TrackSet::new(vec![
            GaussianDensity::scalar(0.0, 1.0).unwrap(),
            GaussianDensity::scalar(2.0, 0.7).unwrap(),
        ]);
        let zs = vec![v(0.1), v(2.2), v(-4.0)];
        let table = AssociationTable::new(&zs, &ts, &s).unwrap();
        for a in enumerate_mtas(2, 3) {
            let lin = table.likelihood(&a).unwrap();
            let log = table.log_likelihood(&a).unwrap();
            assert!((lin - log.exp()).abs() <= 1e-10 * lin);
        }
    }

    #[test]
    fn normalized_likelihood_cases() {
        let s = sensor(0.9, 2.0, 0.0, 10.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(5.0, 1.0).unwrap()]);
        let zs = vec![v(2.0), v(7.0)];
        let all_clutter = Mta::null(1, 2);
        let f = normalized_association_likelihood(&all_clutter, &zs, &ts, &s).unwrap();
        assert!((f - 0.01).abs() < 1e-15);
        // ratio normalized/unnormalized is constant across z for the all-clutter MTA
        let ratio = |zs: &[Measurement]| {
            normalized_association_likelihood(&all_clutter, zs, &ts, &s).unwrap()
                / association_likelihood(&all_clutter, zs, &ts, &s).unwrap()
        };
        let r1 = ratio(&zs);
        let r2 = ratio(&[v(0.5), v(9.5)]);
        assert!((r1 - r2).abs() < 1e-12 * r1);

        let blind = sensor(0.0, 2.0, 0.0, 10.0);
        let det = Mta::new(vec![1], 2).unwrap();
        assert!(matches!(
            normalized_association_likelihood(&det, &zs, &ts, &blind),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalized_likelihood_integrates_to_one_single_detection() {
        let s = sensor(0.7, 1.0, -15.0, 25.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(5.0, 1.0).unwrap()]);
        let a = Mta::new(vec![1], 1).unwrap();
        let grid = Grid1d::new(-15.0, 25.0, 400);
        let total = grid.integrate(|z| normalized_association_likelihood(&a, &[v(z)], &ts, &s).unwrap());
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn posterior_basics() {
        let s = sensor(0.99, 0.1, -50.0, 50.0);
        let post = mta_posterior(&[v(1.0)], &TrackSet::new(vec![]), &s, None).unwrap();
        assert_eq!(post.support.len(), 1);
        assert_eq!(post.support[0].1, 1.0);

        // Detection weight N(z;0,2)/(N(z;0,2)+c) with c=1/100: at z=0.1,
        // N≈0.28072 so the detection weight is ≈0.9656.
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap()]);
        let post = mta_posterior(&[v(0.1)], &ts, &s, None).unwrap();
        let n = (-(0.01) / 4.0f64).exp() / (4.0 * PI).sqrt();
        let expected = n / (n + 0.01);
        assert!(expected > 0.9);
        assert!((post.support[1].1 - expected).abs() < 1e-12);
        assert!(post.support[1].1 > 0.9);

        let ts2 = TrackSet::new(vec![
            GaussianDensity::scalar(0.0, 1.0).unwrap(),
            GaussianDensity::scalar(3.0, 1.0).unwrap(),
        ]);
        let post = mta_posterior(&[v(0.2), v(2.7)], &ts2, &s, None).unwrap();
        assert_eq!(post.support.len(), 7);
        assert!((post.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_with_zero_prior_everywhere_is_degenerate() {
        let s = sensor(0.9, 1.0, -5.0, 5.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap()]);
        let zero = |_: usize, _: &Mta| 0.0;
        assert!(matches!(
            mta_posterior(&[v(0.0)], &ts, &s, Some(&zero)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn guard_rejects_large_instances() {
        let s = sensor(0.9, 1.0, -5.0, 5.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap(); 9]);
        assert!(matches!(
            mta_posterior(&[], &ts, &s, None),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn map_mta_tie_breaks_and_argmax() {
        let single = MtaPosterior {
            measurements: 1,
            support: vec![(Mta::new(vec![1], 1).unwrap(), 1.0)],
        };
        assert_eq!(map_mta(&single).unwrap().1.assignments(), &[1]);

        let tie = MtaPosterior {
            measurements: 1,
            support: vec![
                (Mta::new(vec![1], 1).unwrap(), 0.5),
                (Mta::new(vec![0], 1).unwrap(), 0.5),
            ],
        };
        assert_eq!(map_mta(&tie).unwrap().1.assignments(), &[0]);

        let s = sensor(0.8, 1.0, -10.0, 10.0);
        let ts = TrackSet::new(vec![
            GaussianDensity::scalar(-0.4, 1.2).unwrap(),
            GaussianDensity::scalar(1.1, 0.8).unwrap(),
        ]);
        let zs = vec![v(0.9), v(-0.2)];
        let post = mta_posterior(&zs, &ts, &s, None).unwrap();
        let table = AssociationTable::new(&zs, &ts, &s).unwrap();
        let brute = enumerate_mtas(2, 2)
            .max_by(|a, b| {
                table
                    .log_normalized_likelihood(a)
                    .unwrap()
                    .total_cmp(&table.log_normalized_likelihood(b).unwrap())
            })
            .unwrap();
        assert_eq!(map_mta(&post).unwrap(), (2, brute));
    }

    #[test]
    fn state_estimates_follow_the_mta() {
        let s = sensor(0.9, 1.0, -10.0, 10.0);
        let ts = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap()]);
        let zs = vec![v(2.0)];
        assert!(mta_state_estimate(&Mta::null(1, 1), &zs, &ts, &s).unwrap().is_empty());
        let est = mta_state_estimate(&Mta::new(vec![1], 1).unwrap(), &zs, &ts, &s).unwrap();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].1, bayes_update_density(&ts.tracks[0], &zs[0], &s).unwrap());

        let ts2 = TrackSet::new(vec![GaussianDensity::scalar(0.0, 1.0).unwrap(); 3]);
        let zs2 = vec![v(0.0), v(1.0)];
        for a in enumerate_mtas(3, 2) {
            let est = mta_state_estimate(&a, &zs2, &ts2, &s).unwrap();
            assert_eq!(est.len(), a.components().nu);
        }
    }

    #[test]
    fn normalized_likelihood_integrates_to_one() {
        let s = sensor(0.7, 1.0, -10.0, 10.0);
        let ts = TrackSet::new(vec![
            GaussianDensity::scalar(-1.0, 0.5).unwrap(),
            GaussianDensity::scalar(2.0, 1.5).unwrap(),
        ]);
        let grid = Grid1d::new(-10.0, 10.0, 400);
        for m in 0..=2 {
            for a in enumerate_mtas(2, m) {
                let total = normalized_likelihood_integral(&a, &ts, &s, &grid).unwrap();
                assert!((total - 1.0).abs() < 1e-5, "{a:?}: {total}");
            }
        }
    }
}
