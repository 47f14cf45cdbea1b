//! GLMB filter recursion: prediction, exhaustive measurement update,
//! Gibbs-sampled joint prediction/update and state extraction.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::association::{check_exhaustive, enumerate_mtas, AssociationTable, TrackSet};
use crate::error::{Error, Result};
use crate::labeled::{
    glmb_cardinality, prune_glmb, prune_indices, GlmbComponent, GlmbDistribution, Label, LabeledState, LabeledStateSet,
    PruneReport,
};
use crate::models::{
    bayes_update_density, map_estimate, predict_density, GaussianDensity, Measurement, MotionModel, SensorModel,
};

/// Densities closer than this (entrywise) are treated as identical when
/// merging components.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// Largest |L| + births for which prediction enumerates survival subsets.
pub const PREDICT_SUBSET_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BirthTrack {
    pub existence: f64,
    pub density: GaussianDensity,
}

/// Labeled multi-Bernoulli birth model, identical at every step. The i-th
/// birth at time k carries label (k, i).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BirthModel {
    tracks: Vec<BirthTrack>,
}

impl BirthModel {
    pub fn new(tracks: Vec<BirthTrack>) -> Result<Self> {
        for t in &tracks {
            if !(0.0..=1.0).contains(&t.existence) {
                return Err(Error::InvalidParameter(format!(
                    "birth existence {} outside [0, 1]",
                    t.existence
                )));
            }
        }
        Ok(Self { tracks })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[BirthTrack] {
        &self.tracks
    }

    pub fn labels_at(&self, k: u64) -> Vec<Label> {
        (1..=self.tracks.len() as u64)
            .map(|i| Label::new(k, i).expect("birth index starts at 1"))
            .collect()
    }
}

/// Audit tag of one component: a digest of its association history and
/// the assignment each label received at the last measurement update
/// (0 for a miss, j for measurement j).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct HistoryTag {
    pub digest: u64,
    pub last_assignment: Vec<(Label, usize)>,
}

/// A weighted hypothesis of the filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<'a> {
    pub labels: &'a [Label],
    pub densities: &'a [GaussianDensity],
    pub weight: f64,
    pub last_assignment: &'a [(Label, usize)],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmbFilterState {
    k: u64,
    distribution: GlmbDistribution,
    tags: Vec<HistoryTag>,
}

impl GlmbFilterState {
    pub fn new(k: u64, distribution: GlmbDistribution) -> Self {
        let tags = (0..distribution.len())
            .map(|i| HistoryTag {
                digest: mix(FNV_OFFSET, &[i as u64]),
                last_assignment: Vec::new(),
            })
            .collect();
        Self { k, distribution, tags }
    }

    /// No targets at time 0.
    pub fn initial() -> Self {
        Self::new(0, GlmbDistribution::empty_set())
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn distribution(&self) -> &GlmbDistribution {
        &self.distribution
    }

    pub fn tags(&self) -> &[HistoryTag] {
        &self.tags
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = Hypothesis<'_>> {
        self.distribution
            .components()
            .iter()
            .zip(&self.tags)
            .map(|(c, t)| Hypothesis {
                labels: &c.labels,
                densities: &c.densities,
                weight: c.weight,
                last_assignment: &t.last_assignment,
            })
    }
}

/// Caps applied after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub max_components: usize,
    pub weight_floor: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            max_components: 100,
            weight_floor: 0.0,
        }
    }
}

impl Truncation {
    pub fn unlimited() -> Self {
        Self {
            max_components: usize::MAX,
            weight_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepReport {
    /// Components before merging and truncation.
    pub raw_components: usize,
    pub merged_components: usize,
    pub pruned: PruneReport,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn mix(mut h: u64, words: &[u64]) -> u64 {
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// An unnormalized child component in log weight.
struct Child {
    labels: Vec<Label>,
    densities: Vec<GaussianDensity>,
    log_weight: f64,
    tag: HistoryTag,
}

/// Normalizes, merges identical (L, densities) components and truncates.
fn finish(k: u64, children: Vec<Child>, caps: Truncation) -> Result<(GlmbFilterState, StepReport)> {
    let raw = children.len();
    let max = children.iter().map(|c| c.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("every hypothesis has zero weight".into()));
    }

    let mut merged: Vec<(GlmbComponent, HistoryTag, f64)> = Vec::new();
    let mut by_labels: BTreeMap<Vec<Label>, Vec<usize>> = BTreeMap::new();
    for c in children {
        let w = (c.log_weight - max).exp();
        if w == 0.0 {
            continue;
        }
        let slots = by_labels.entry(c.labels.clone()).or_default();
        let existing = slots.iter().copied().find(|&i| {
            merged[i]
                .0
                .densities
                .iter()
                .zip(&c.densities)
                .all(|(a, b)| a.approx_eq(b, MERGE_TOLERANCE))
        });
        match existing {
            Some(i) => {
                let entry = &mut merged[i];
                entry.0.weight += w;
                if w > entry.2 {
                    entry.1 = c.tag;
                    entry.2 = w;
                }
            }
            None => {
                slots.push(merged.len());
                merged.push((
                    GlmbComponent {
                        labels: c.labels,
                        densities: c.densities,
                        weight: w,
                    },
                    c.tag,
                    w,
                ));
            }
        }
    }
    let merged_count = merged.len();
    let (components, tags): (Vec<_>, Vec<_>) = merged.into_iter().map(|(c, t, _)| (c, t)).unzip();
    let full = GlmbDistribution::from_unnormalized(components)?;

    let kept = prune_indices(&full, caps.weight_floor, caps.max_components)?;
    let (pruned, report) = prune_glmb(&full, caps.weight_floor, caps.max_components)?;
    let kept_tags = kept.into_iter().map(|i| tags[i].clone()).collect();
    Ok((
        GlmbFilterState {
            k,
            distribution: pruned,
            tags: kept_tags,
        },
        StepReport {
            raw_components: raw,
            merged_components: merged_count,
            pruned: report,
        },
    ))
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Prediction to time k+1: each label survives with probability p_S or
/// dies, and each birth track appears with its existence probability.
pub fn predict(
    st: &GlmbFilterState,
    mm: &MotionModel,
    birth: &BirthModel,
    caps: Truncation,
) -> Result<(GlmbFilterState, StepReport)> {
    let k = st.k + 1;
    let ps = mm.survival();
    let birth_labels = birth.labels_at(k);
    let mut children = Vec::new();
    for (c, tag) in st.distribution.components().iter().zip(&st.tags) {
        let n = c.labels.len();
        let b = birth_labels.len();
        if n + b > PREDICT_SUBSET_LIMIT {
            return Err(Error::GuardExceeded {
                tracks: n + b,
                measurements: 0,
                limit: PREDICT_SUBSET_LIMIT,
            });
        }
        let predicted: Vec<GaussianDensity> = c
            .densities
            .iter()
            .map(|d| predict_density(d, mm))
            .collect::<Result<_>>()?;
        for mask in 0u32..(1 << (n + b)) {
            let mut log_weight = ln(c.weight);
            let mut tracks: Vec<(Label, GaussianDensity)> = Vec::new();
            for (i, (l, d)) in c.labels.iter().zip(&predicted).enumerate() {
                if mask & (1 << i) != 0 {
                    log_weight += ln(ps);
                    tracks.push((*l, d.clone()));
                } else {
                    log_weight += ln(1.0 - ps);
                }
            }
            for (j, bt) in birth.tracks().iter().enumerate() {
                if mask & (1 << (n + j)) != 0 {
                    log_weight += ln(bt.existence);
                    tracks.push((birth_labels[j], bt.density.clone()));
                } else {
                    log_weight += ln(1.0 - bt.existence);
                }
            }
            if log_weight == f64::NEG_INFINITY {
                continue;
            }
            tracks.sort_by_key(|(l, _)| *l);
            let (labels, densities) = tracks.into_iter().unzip();
            children.push(Child {
                labels,
                densities,
                log_weight,
                tag: HistoryTag {
                    digest: mix(tag.digest, &[k, mask as u64]),
                    last_assignment: tag.last_assignment.clone(),
                },
            });
        }
    }
    finish(k, children, caps)
}

/// Measurement update: every component is split over all MTAs of its
/// labels into Z with weight ω·ℓ_{Z|X}(α); detected labels are
/// Kalman-updated and missed labels keep their density.
pub fn update(
    st: &GlmbFilterState,
    zs: &[Measurement],
    s: &SensorModel,
    caps: Truncation,
) -> Result<(GlmbFilterState, StepReport)> {
    let m = zs.len();
    let mut children = Vec::new();
    for (c, tag) in st.distribution.components().iter().zip(&st.tags) {
        let n = c.labels.len();
        check_exhaustive(n, m)?;
        let ts = TrackSet::new(c.densities.clone());
        let table = AssociationTable::new(zs, &ts, s)?;
        let mut posterior: Vec<Vec<Option<GaussianDensity>>> = vec![vec![None; m]; n];
        for a in enumerate_mtas(n, m) {
            let log_weight = ln(c.weight) + table.log_likelihood(&a)?;
            if log_weight == f64::NEG_INFINITY {
                continue;
            }
            let mut densities = Vec::with_capacity(n);
            for (i, &j) in a.assignments().iter().enumerate() {
                if j == 0 {
                    densities.push(c.densities[i].clone());
                } else {
                    if posterior[i][j - 1].is_none() {
                        posterior[i][j - 1] = Some(bayes_update_density(&c.densities[i], &zs[j - 1], s)?);
                    }
                    densities.push(posterior[i][j - 1].clone().expect("just filled"));
                }
            }
            let words: Vec<u64> = std::iter::once(st.k)
                .chain(a.assignments().iter().map(|&j| j as u64))
                .collect();
            children.push(Child {
                labels: c.labels.clone(),
                densities,
                log_weight,
                tag: HistoryTag {
                    digest: mix(tag.digest, &words),
                    last_assignment: c.labels.iter().copied().zip(a.assignments().iter().copied()).collect(),
                },
            });
        }
    }
    finish(st.k, children, caps)
}

/// Summary of one Gibbs joint update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GibbsReport {
    pub step: StepReport,
    /// Distinct assignments found, summed over prior components.
    pub distinct_solutions: usize,
}

const DEAD: i64 = -1;

/// One candidate track of the joint update: a surviving label or a birth.
struct Candidate {
    label: Label,
    density: GaussianDensity,
    /// log η for "does not exist", "exists and missed", then one per measurement.
    log_dead: f64,
    log_missed: f64,
    log_detect: Vec<f64>,
}

/// Joint prediction and update with assignments sampled by single-site
/// Gibbs sweeps.
///
/// Each candidate (surviving label or birth) takes γ ∈ {−1 absent, 0
/// missed, j detected by z_j}, injective on the detections. For every
/// prior component the sampler runs `sweeps` sweeps after a burn-in of
/// 10% of `sweeps`, recording the chain state after each site update.
/// Distinct states become components with their exact weights.
#[allow(clippy::too_many_arguments)]
pub fn joint_update_gibbs(
    st: &GlmbFilterState,
    zs: &[Measurement],
    mm: &MotionModel,
    birth: &BirthModel,
    s: &SensorModel,
    sweeps: usize,
    seed: u64,
    caps: Truncation,
) -> Result<(GlmbFilterState, GibbsReport)> {
    if sweeps == 0 {
        return Err(Error::InvalidParameter("Gibbs update needs at least one sweep".into()));
    }
    let k = st.k + 1;
    let m = zs.len();
    let ps = mm.survival();
    let pd = s.detection();
    let log_kappa: Vec<f64> = zs.iter().map(|z| ln(s.clutter_intensity(z))).collect();
    let birth_labels = birth.labels_at(k);
    let burn_in = sweeps / 10;

    let mut children = Vec::new();
    let mut distinct_total = 0;
    for (ci, (c, tag)) in st.distribution.components().iter().zip(&st.tags).enumerate() {
        let mut candidates = Vec::new();
        for (l, d) in c.labels.iter().zip(&c.densities) {
            candidates.push((*l, predict_density(d, mm)?, ps));
        }
        for (l, bt) in birth_labels.iter().zip(birth.tracks()) {
            candidates.push((*l, bt.density.clone(), bt.existence));
        }
        let candidates: Vec<Candidate> = candidates
            .into_iter()
            .map(|(label, density, r)| {
                let pred = s.predicted_measurement(&density)?;
                let log_detect = zs
                    .iter()
                    .map(|z| {
                        s.check_measurement(z)?;
                        Ok(ln(r) + ln(pd) + pred.log_pdf(z))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Candidate {
                    label,
                    density,
                    log_dead: ln(1.0 - r),
                    log_missed: ln(r) + ln(1.0 - pd),
                    log_detect,
                })
            })
            .collect::<Result<_>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let samples = gibbs_chain(&candidates, &log_kappa, sweeps, burn_in, &mut rng);
        distinct_total += samples.len();

        let mut posterior: Vec<Vec<Option<GaussianDensity>>> = vec![vec![None; m]; candidates.len()];
        for gamma in samples {
            let log_weight = ln(c.weight) + solution_log_weight(&candidates, &log_kappa, &gamma);
            if log_weight == f64::NEG_INFINITY {
                continue;
            }
            let mut labels = Vec::new();
            let mut densities = Vec::new();
            let mut last = Vec::new();
            for (i, &g) in gamma.iter().enumerate() {
                if g == DEAD {
                    continue;
                }
                labels.push(candidates[i].label);
                last.push((candidates[i].label, g as usize));
                if g == 0 {
                    densities.push(candidates[i].density.clone());
                } else {
                    let j = g as usize - 1;
                    if posterior[i][j].is_none() {
                        posterior[i][j] = Some(bayes_update_density(&candidates[i].density, &zs[j], s)?);
                    }
                    densities.push(posterior[i][j].clone().expect("just filled"));
                }
            }
            let words: Vec<u64> = std::iter::once(k).chain(gamma.iter().map(|&g| g as u64)).collect();
            children.push(Child {
                labels,
                densities,
                log_weight,
                tag: HistoryTag {
                    digest: mix(tag.digest, &words),
                    last_assignment: last,
                },
            });
        }
    }
    if children.is_empty() {
        return Err(Error::Degenerate(
            "Gibbs sampler found no hypothesis with positive weight".into(),
        ));
    }
    let (state, step) = finish(k, children, caps)?;
    Ok((
        state,
        GibbsReport {
            step,
            distinct_solutions: distinct_total,
        },
    ))
}

/// log ∏_i η_i(γ_i) + Σ_{unclaimed j} log κ(z_j).
fn solution_log_weight(candidates: &[Candidate], log_kappa: &[f64], gamma: &[i64]) -> f64 {
    let mut claimed = vec![false; log_kappa.len()];
    let mut total = 0.0;
    for (c, &g) in candidates.iter().zip(gamma) {
        total += match g {
            DEAD => c.log_dead,
            0 => c.log_missed,
            j => {
                claimed[j as usize - 1] = true;
                c.log_detect[j as usize - 1]
            }
        };
    }
    total
        + log_kappa
            .iter()
            .zip(&claimed)
            .filter(|(_, &u)| !u)
            .map(|(k, _)| k)
            .sum::<f64>()
}

fn gibbs_chain(
    candidates: &[Candidate],
    log_kappa: &[f64],
    sweeps: usize,
    burn_in: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<i64>> {
    let n = candidates.len();
    let m = log_kappa.len();
    // Surviving tracks start as missed, births as absent.
    let mut gamma: Vec<i64> = candidates
        .iter()
        .map(|c| if c.log_missed > c.log_dead { 0 } else { DEAD })
        .collect();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut order = Vec::new();
    let mut record = |g: &Vec<i64>| {
        if seen.insert(g.clone()) {
            order.push(g.clone());
        }
    };
    if n == 0 {
        record(&gamma);
        return order;
    }
    let mut claimed_by = vec![usize::MAX; m];
    let mut options: Vec<(i64, usize, f64)> = Vec::with_capacity(m + 2);
    for sweep in 0..burn_in + sweeps {
        for i in 0..n {
            if gamma[i] > 0 {
                claimed_by[gamma[i] as usize - 1] = usize::MAX;
            }
            // Options scored by (number of zero-intensity measurements left
            // unclaimed, finite log weight); fewer zeros dominates.
            let free_zero = (0..m)
                .filter(|&j| claimed_by[j] == usize::MAX && log_kappa[j] == f64::NEG_INFINITY)
                .count();
            options.clear();
            let c = &candidates[i];
            options.push((DEAD, free_zero, c.log_dead));
            options.push((0, free_zero, c.log_missed));
            for j in 0..m {
                if claimed_by[j] == usize::MAX {
                    let (zeros, adjust) = if log_kappa[j] == f64::NEG_INFINITY {
                        (free_zero - 1, 0.0)
                    } else {
                        (free_zero, -log_kappa[j])
                    };
                    options.push((j as i64 + 1, zeros, c.log_detect[j] + adjust));
                }
            }
            options.retain(|o| o.2 > f64::NEG_INFINITY);
            if let Some(min_zeros) = options.iter().map(|o| o.1).min() {
                options.retain(|o| o.1 == min_zeros);
                let max = options.iter().map(|o| o.2).fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = options.iter().map(|o| (o.2 - max).exp()).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = options[options.len() - 1].0;
                for o in &options {
                    u -= (o.2 - max).exp();
                    if u <= 0.0 {
                        pick = o.0;
                        break;
                    }
                }
                gamma[i] = pick;
            }
            if gamma[i] > 0 {
                claimed_by[gamma[i] as usize - 1] = i;
            }
            if sweep >= burn_in {
                record(&gamma);
            }
        }
    }
    order
}

/// Marginal multitarget estimate: the most probable cardinality n*, then
/// the heaviest component with n* labels and the means of its densities.
/// Ties go to the smaller cardinality and then to the smaller label set.
pub fn estimate_states(st: &GlmbFilterState) -> LabeledStateSet {
    let card = glmb_cardinality(&st.distribution);
    let mut best_n = 0;
    for (n, &p) in card.iter().enumerate() {
        if p > card[best_n] {
            best_n = n;
        }
    }
    let best = st
        .distribution
        .components()
        .iter()
        .filter(|c| c.cardinality() == best_n)
        .fold(None::<&GlmbComponent>, |acc, c| match acc {
            Some(b) if b.weight > c.weight || (b.weight == c.weight && b.labels <= c.labels) => Some(b),
            _ => Some(c),
        });
    match best {
        Some(c) => LabeledStateSet::new(
            c.labels
                .iter()
                .zip(&c.densities)
                .map(|(l, d)| LabeledState::new(map_estimate(d), *l))
                .collect(),
        )
        .expect("component labels are distinct"),
        None => LabeledStateSet::empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{mta_posterior, Mta};
    use crate::labeled::{labeled_set_integral, WEIGHT_TOLERANCE};
    use crate::models::{BoxRegion, UniformClutter};
    use crate::quadrature::Grid1d;
    use nalgebra::{DMatrix, DVector};

    fn l(k: u64, i: u64) -> Label {
        Label::new(k, i).unwrap()
    }

    fn g1(m: f64, v: f64) -> GaussianDensity {
        GaussianDensity::scalar(m, v).unwrap()
    }

    fn z(x: f64) -> Measurement {
        DVector::from_element(1, x)
    }

    fn motion(ps: f64, q: f64) -> MotionModel {
        MotionModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, q), ps).unwrap()
    }

    fn sensor(pd: f64, rate: f64) -> SensorModel {
        let c = UniformClutter::new(BoxRegion::new(vec![-20.0], vec![20.0]).unwrap(), rate).unwrap();
        SensorModel::scalar(1.0, pd, c).unwrap()
    }

    fn single(label: Label, d: GaussianDensity) -> GlmbFilterState {
        let g = GlmbDistribution::new(vec![GlmbComponent::new(vec![(label, d)], 1.0).unwrap()]).unwrap();
        GlmbFilterState::new(0, g)
    }

    fn weight_of(st: &GlmbFilterState, labels: &[Label]) -> f64 {
        st.distribution()
            .components()
            .iter()
            .filter(|c| c.labels == labels)
            .map(|c| c.weight)
            .sum()
    }

    #[test]
    fn identity_dynamics_leave_state_unchanged() {
        let st = single(l(0, 1), g1(1.0, 2.0));
        let (p, _) = predict(&st, &motion(1.0, 0.0), &BirthModel::none(), Truncation::default()).unwrap();
        assert_eq!(p.distribution(), st.distribution());
        assert_eq!(p.k(), 1);
    }

    #[test]
    fn survival_expansion() {
        let st = single(l(0, 1), g1(1.0, 2.0));
        let (p, _) = predict(&st, &motion(0.9, 0.5), &BirthModel::none(), Truncation::default()).unwrap();
        assert_eq!(p.distribution().len(), 2);
        assert!((weight_of(&p, &[l(0, 1)]) - 0.9).abs() < 1e-15);
        assert!((weight_of(&p, &[]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn birth_from_empty() {
        let birth = BirthModel::new(vec![BirthTrack {
            existence: 0.3,
            density: g1(0.0, 4.0),
        }])
        .unwrap();
        let (p, _) = predict(
            &GlmbFilterState::initial(),
            &motion(0.9, 0.5),
            &birth,
            Truncation::default(),
        )
        .unwrap();
        assert!((weight_of(&p, &[l(1, 1)]) - 0.3).abs() < 1e-15);
        assert!((weight_of(&p, &[]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn update_without_measurements() {
        let st = single(l(0, 1), g1(0.0, 1.0));
        let (u, _) = update(&st, &[], &sensor(0.7, 1.0), Truncation::default()).unwrap();
        assert_eq!(u.distribution().len(), 1);
        assert_eq!(u.distribution().components()[0].densities[0], g1(0.0, 1.0));
        assert_eq!(u.tags()[0].last_assignment, vec![(l(0, 1), 0)]);
    }

    #[test]
    fn empty_prior_stays_empty() {
        let (u, _) = update(
            &GlmbFilterState::initial(),
            &[z(1.0), z(2.0)],
            &sensor(0.9, 2.0),
            Truncation::default(),
        )
        .unwrap();
        assert_eq!(u.distribution(), &GlmbDistribution::empty_set());
    }

    #[test]
    fn single_label_matches_mta_posterior() {
        let s = sensor(0.8, 1.5);
        let track = g1(0.5, 1.2);
        let st = single(l(0, 1), track.clone());
        let zs = [z(0.9)];
        let (u, _) = update(&st, &zs, &s, Truncation::unlimited()).unwrap();
        let comps = u.distribution().components();
        assert_eq!(comps.len(), 2);
        let missed = comps.iter().find(|c| c.densities[0] == track).unwrap().weight;
        let detected = 1.0 - missed;

        let kappa = s.clutter_intensity(&zs[0]);
        let pred = s.predicted_measurement(&track).unwrap();
        let ratio = kappa * 0.2 / (0.8 * pred.pdf(&zs[0]));
        assert!((missed / detected - ratio).abs() < 1e-12 * ratio);

        // The matching MTA prior carries the detection and clutter-count
        // probabilities: e^{−λ}λ^{m−ν}(1−p_D)^{n−ν}p_D^ν.
        let prior = |m: usize, a: &Mta| {
            let nu = a.detections();
            (-1.5f64).exp() * 1.5f64.powi((m - nu) as i32) * 0.2f64.powi((1 - nu) as i32) * 0.8f64.powi(nu as i32)
        };
        let p = mta_posterior(&zs, &TrackSet::new(vec![track]), &s, Some(&prior)).unwrap();
        let w_miss = p.support.iter().find(|(a, _)| a == &Mta::null(1, 1)).unwrap().1;
        assert!((w_miss - missed).abs() < 1e-12);
    }

    #[test]
    fn gibbs_recovers_both_hypotheses_and_is_deterministic() {
        let s = sensor(0.8, 1.0);
        let mm = motion(1.0, 0.1);
        let st = single(l(0, 1), g1(0.0, 1.0));
        let zs = [z(0.4)];
        let (p, _) = predict(&st, &mm, &BirthModel::none(), Truncation::unlimited()).unwrap();
        let (exhaustive, _) = update(&p, &zs, &s, Truncation::unlimited()).unwrap();
        let (a, rep) =
            joint_update_gibbs(&st, &zs, &mm, &BirthModel::none(), &s, 200, 7, Truncation::unlimited()).unwrap();
        assert_eq!(rep.distinct_solutions, 2);
        assert_eq!(a.distribution().len(), exhaustive.distribution().len());
        for c in exhaustive.distribution().components() {
            let w = a
                .distribution()
                .components()
                .iter()
                .find(|d| d.labels == c.labels && d.densities[0].approx_eq(&c.densities[0], 1e-12))
                .unwrap()
                .weight;
            assert!((w - c.weight).abs() < 1e-12);
        }
        let (b, _) =
            joint_update_gibbs(&st, &zs, &mm, &BirthModel::none(), &s, 200, 7, Truncation::unlimited()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gibbs_with_births_matches_exhaustive_mass() {
        let s = sensor(0.9, 0.5);
        let mm = motion(0.95, 0.2);
        let birth = BirthModel::new(vec![BirthTrack {
            existence: 0.2,
            density: g1(5.0, 2.0),
        }])
        .unwrap();
        let g = GlmbDistribution::new(vec![
            GlmbComponent::new(vec![(l(0, 1), g1(-2.0, 0.5)), (l(0, 2), g1(1.0, 0.5))], 0.7).unwrap(),
            GlmbComponent::new(vec![(l(0, 1), g1(-2.0, 0.5))], 0.3).unwrap(),
        ])
        .unwrap();
        let st = GlmbFilterState::new(0, g);
        let zs = [z(-1.8), z(1.1), z(5.5)];
        let (p, _) = predict(&st, &mm, &birth, Truncation::unlimited()).unwrap();
        let (ex, _) = update(&p, &zs, &s, Truncation::unlimited()).unwrap();
        let (gb, _) = joint_update_gibbs(&st, &zs, &mm, &birth, &s, 500, 3, Truncation::unlimited()).unwrap();
        let covered: f64 = ex
            .distribution()
            .components()
            .iter()
            .filter(|c| {
                gb.distribution().components().iter().any(|d| {
                    d.labels == c.labels && d.densities.iter().zip(&c.densities).all(|(a, b)| a.approx_eq(b, 1e-9))
                })
            })
            .map(|c| c.weight)
            .sum();
        assert!(covered >= 0.99, "{covered}");
        let top_ex = estimate_states(&ex);
        let top_gb = estimate_states(&gb);
        assert_eq!(top_ex, top_gb);
    }

    #[test]
    fn estimates() {
        assert!(estimate_states(&GlmbFilterState::initial()).is_empty());
        let st = single(l(0, 1), g1(2.5, 1.0));
        let e = estimate_states(&st);
        assert_eq!(e.as_slice()[0].x[0], 2.5);
        let g = GlmbDistribution::new(vec![
            GlmbComponent::new(vec![], 0.6).unwrap(),
            GlmbComponent::new(vec![(l(0, 1), g1(0.0, 1.0))], 0.4).unwrap(),
        ])
        .unwrap();
        assert!(estimate_states(&GlmbFilterState::new(0, g)).is_empty());
    }

    #[test]
    fn closure_and_label_persistence_over_steps() {
        let s = sensor(0.9, 0.5);
        let mm = motion(0.97, 0.1);
        let birth = BirthModel::new(vec![BirthTrack {
            existence: 0.1,
            density: g1(0.0, 9.0),
        }])
        .unwrap();
        let mut st = GlmbFilterState::initial();
        let grid = Grid1d::new(-40.0, 40.0, 400);
        for k in 1..=6 {
            let before: HashSet<Label> = st.distribution().label_universe().into_iter().collect();
            let (p, _) = predict(&st, &mm, &birth, Truncation::default()).unwrap();
            let zs = vec![z(0.3 * k as f64), z(-5.0)];
            let (u, _) = update(&p, &zs, &s, Truncation::default()).unwrap();
            assert!((u.distribution().total_weight() - 1.0).abs() < WEIGHT_TOLERANCE);
            for lab in u.distribution().label_universe() {
                assert!(before.contains(&lab) || lab.birth_time() == k);
            }
            let digests: HashSet<u64> = u.tags().iter().map(|t| t.digest).collect();
            assert_eq!(digests.len(), u.tags().len());
            if u.distribution().components().iter().all(|c| c.cardinality() <= 2) {
                let total = labeled_set_integral(u.distribution(), &grid, 2).unwrap();
                assert!((total - 1.0).abs() < 1e-5, "{total}");
            }
            st = u;
        }
    }

    #[test]
    fn immortal_label_reproduces_kalman() {
        let s = sensor(1.0, 0.0);
        let mm = motion(1.0, 0.3);
        let mut st = single(l(0, 1), g1(0.0, 2.0));
        let mut kf = g1(0.0, 2.0);
        for k in 0..20 {
            let zs = [z(0.1 * k as f64)];
            let (p, _) = predict(&st, &mm, &BirthModel::none(), Truncation::default()).unwrap();
            let (u, _) = update(&p, &zs, &s, Truncation::default()).unwrap();
            kf = bayes_update_density(&predict_density(&kf, &mm).unwrap(), &zs[0], &s).unwrap();
            assert_eq!(u.distribution().len(), 1);
            assert!(u.distribution().components()[0].densities[0].approx_eq(&kf, 1e-12));
            st = u;
        }
    }
}
