//! Labeled states and generalized labeled multi-Bernoulli (GLMB)
//! distributions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{GaussianDensity, StateVector};
use crate::quadrature::{factorial, tensor_sum, Grid1d};

/// Track label (birth time k, birth index i ≥ 1), ordered by k then i.
/// Serialized as the pair `[k, i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct Label {
    birth_time: u64,
    birth_index: u64,
}

impl Label {
    pub fn new(birth_time: u64, birth_index: u64) -> Result<Self> {
        if birth_index == 0 {
            return Err(Error::InvalidParameter("label birth index starts at 1".into()));
        }
        Ok(Self {
            birth_time,
            birth_index,
        })
    }

    pub fn birth_time(&self) -> u64 {
        self.birth_time
    }

    pub fn birth_index(&self) -> u64 {
        self.birth_index
    }
}

impl TryFrom<(u64, u64)> for Label {
    type Error = Error;
    fn try_from((k, i): (u64, u64)) -> Result<Self> {
        Label::new(k, i)
    }
}

impl From<Label> for (u64, u64) {
    fn from(l: Label) -> Self {
        (l.birth_time, l.birth_index)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.birth_time, self.birth_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    pub x: StateVector,
    pub label: Label,
}

impl LabeledState {
    pub fn new(x: StateVector, label: Label) -> Self {
        Self { x, label }
    }
}

/// Finite set of labeled states with pairwise distinct labels, stored in
/// label order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledStateSet {
    elements: Vec<LabeledState>,
}

impl LabeledStateSet {
    pub fn new(mut elements: Vec<LabeledState>) -> Result<Self> {
        elements.sort_by_key(|e| e.label);
        if let Some(w) = elements.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::DuplicateLabel(w[0].label.to_string()));
        }
        Ok(Self { elements })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn as_slice(&self) -> &[LabeledState] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledState> {
        self.elements.iter()
    }

    /// The states with labels dropped.
    pub fn states(&self) -> Vec<StateVector> {
        self.elements.iter().map(|e| e.x.clone()).collect()
    }
}

pub fn labels_of(xs: &LabeledStateSet) -> BTreeSet<Label> {
    xs.iter().map(|e| e.label).collect()
}

/// One (o, L) term: label set L in increasing order, a Gaussian per label
/// and the weight ω_o(L).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmbComponent {
    pub labels: Vec<Label>,
    pub densities: Vec<GaussianDensity>,
    pub weight: f64,
}

impl GlmbComponent {
    /// Builds a component from (label, density) pairs in any order.
    pub fn new(tracks: Vec<(Label, GaussianDensity)>, weight: f64) -> Result<Self> {
        let mut tracks = tracks;
        tracks.sort_by_key(|(l, _)| *l);
        let (labels, densities) = tracks.into_iter().unzip();
        let c = Self {
            labels,
            densities,
            weight,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "component weight {} is not a finite nonnegative number",
                self.weight
            )));
        }
        if self.labels.len() != self.densities.len() {
            return Err(Error::Dimension(format!(
                "{} labels but {} densities",
                self.labels.len(),
                self.densities.len()
            )));
        }
        for w in self.labels.windows(2) {
            match w[0].cmp(&w[1]) {
                std::cmp::Ordering::Equal => return Err(Error::DuplicateLabel(w[0].to_string())),
                std::cmp::Ordering::Greater => {
                    return Err(Error::InvalidParameter(
                        "component labels must be in increasing order".into(),
                    ))
                }
                std::cmp::Ordering::Less => {}
            }
        }
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn density_of(&self, label: Label) -> Option<&GaussianDensity> {
        self.labels.binary_search(&label).ok().map(|i| &self.densities[i])
    }
}

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A GLMB distribution with the (o, L) double sum flattened into one list
/// of components. Weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GlmbRepr")]
pub struct GlmbDistribution {
    components: Vec<GlmbComponent>,
}

#[derive(Deserialize)]
struct GlmbRepr {
    components: Vec<GlmbComponent>,
}

impl TryFrom<GlmbRepr> for GlmbDistribution {
    type Error = Error;
    fn try_from(r: GlmbRepr) -> Result<Self> {
        GlmbDistribution::new(r.components)
    }
}

impl GlmbDistribution {
    /// Validates the components; weights must already sum to 1 within
    /// 1e-9 and are renormalized exactly.
    pub fn new(components: Vec<GlmbComponent>) -> Result<Self> {
        let total = Self::check(&components)?;
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "GLMB weights sum to {total}, expected 1"
            )));
        }
        Ok(Self::normalized(components, total))
    }

    /// Validates and normalizes arbitrary positive weights. Components of
    /// zero weight are dropped.
    pub fn from_unnormalized(components: Vec<GlmbComponent>) -> Result<Self> {
        let total = Self::check(&components)?;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate(format!("GLMB total weight is {total}")));
        }
        Ok(Self::normalized(components, total))
    }

    fn check(components: &[GlmbComponent]) -> Result<f64> {
        let dim = components
            .iter()
            .flat_map(|c| c.densities.first())
            .map(|d| d.dim())
            .next();
        for c in components {
            c.validate()?;
            if c.densities.iter().any(|d| Some(d.dim()) != dim) {
                return Err(Error::Dimension("GLMB densities have mixed state dimensions".into()));
            }
        }
        Ok(components.iter().map(|c| c.weight).sum())
    }

    fn normalized(components: Vec<GlmbComponent>, total: f64) -> Self {
        let components = components
            .into_iter()
            .filter(|c| c.weight > 0.0)
            .map(|mut c| {
                c.weight /= total;
                c
            })
            .collect();
        Self { components }
    }

    /// The distribution concentrated on the empty labeled set.
    pub fn empty_set() -> Self {
        Self {
            components: vec![GlmbComponent {
                labels: vec![],
                densities: vec![],
                weight: 1.0,
            }],
        }
    }

    pub fn components(&self) -> &[GlmbComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Every label carried by some component, in increasing order.
    pub fn label_universe(&self) -> Vec<Label> {
        let set: BTreeSet<Label> = self.components.iter().flat_map(|c| c.labels.iter().copied()).collect();
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// f̊(X̊) = δ_{|X̊_𝔏|,|X̊|} Σ_{o} ω_o(X̊_𝔏) ∏ s_{o,ℓ}(x).
pub fn glmb_density(xs: &LabeledStateSet, g: &GlmbDistribution) -> f64 {
    glmb_density_points(xs.as_slice(), g)
}

/// [`glmb_density`] on an arbitrary listing; repeated labels give 0.
pub fn glmb_density_points(xs: &[LabeledState], g: &GlmbDistribution) -> f64 {
    let mut sorted: Vec<&LabeledState> = xs.iter().collect();
    sorted.sort_by_key(|e| e.label);
    if sorted.windows(2).any(|w| w[0].label == w[1].label) {
        return 0.0;
    }
    g.components
        .iter()
        .filter(|c| c.labels.len() == sorted.len() && c.labels.iter().zip(&sorted).all(|(l, e)| *l == e.label))
        .map(|c| {
            c.weight
                * c.densities
                    .iter()
                    .zip(&sorted)
                    .map(|(d, e)| d.pdf(&e.x))
                    .product::<f64>()
        })
        .sum()
}

/// Labeled set integral over a 1-D state space:
/// Σ_n (1/n!) Σ_{(ℓ₁..ℓₙ)} ∫ f̊({(x₁,ℓ₁),…,(xₙ,ℓₙ)}) dx₁…dxₙ, where the
/// label tuples range over all n-tuples of labels carried by `g`
/// (including tuples with repeats, which contribute 0).
pub fn labeled_set_integral(g: &GlmbDistribution, grid: &Grid1d, n_max: usize) -> Result<f64> {
    if g.components.iter().any(|c| c.densities.iter().any(|d| d.dim() != 1)) {
        return Err(Error::Dimension("labeled set integral runs on 1-D states".into()));
    }
    if n_max > 3 {
        return Err(Error::InvalidParameter(format!(
            "labeled set integral supports n_max <= 3, got {n_max}"
        )));
    }
    let universe = g.label_universe();
    let nodes: Vec<StateVector> = grid
        .nodes()
        .into_iter()
        .map(|x| StateVector::from_element(1, x))
        .collect();
    // pdf[c][position in L][grid index]
    let pdf: Vec<Vec<Vec<f64>>> = g
        .components
        .iter()
        .map(|c| {
            c.densities
                .iter()
                .map(|d| nodes.iter().map(|x| d.pdf(x)).collect())
                .collect()
        })
        .collect();

    let mut total = 0.0;
    for n in 0..=n_max {
        let mut tuple = vec![0usize; n];
        let mut sum_n = 0.0;
        loop {
            let labels: Vec<Label> = tuple.iter().map(|&t| universe[t]).collect();
            let mut sorted = labels.clone();
            sorted.sort();
            let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
            if distinct {
                // each matching component with its per-slot pdf rows
                let matching: Vec<(f64, Vec<&Vec<f64>>)> = g
                    .components
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.labels == sorted)
                    .map(|(ci, c)| {
                        let rows = labels
                            .iter()
                            .map(|l| &pdf[ci][c.labels.binary_search(l).expect("label present")])
                            .collect();
                        (c.weight, rows)
                    })
                    .collect();
                if !matching.is_empty() {
                    sum_n += tensor_sum(grid, n, |idx| {
                        matching
                            .iter()
                            .map(|(w, rows)| w * rows.iter().zip(idx).map(|(r, &i)| r[i]).product::<f64>())
                            .sum()
                    });
                }
            }
            if !advance(&mut tuple, universe.len()) {
                break;
            }
        }
        total += sum_n / factorial(n);
    }
    Ok(total)
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Cardinality distribution p(n) = Σ_{|L|=n} ω_o(L), indexed by n.
pub fn glmb_cardinality(g: &GlmbDistribution) -> Vec<f64> {
    let max = g.components.iter().map(|c| c.cardinality()).max().unwrap_or(0);
    let mut p = vec![0.0; max + 1];
    for c in &g.components {
        p[c.cardinality()] += c.weight;
    }
    p
}

pub fn expected_cardinality(g: &GlmbDistribution) -> f64 {
    g.components.iter().map(|c| c.weight * c.cardinality() as f64).sum()
}

/// PHD D(x, ℓ) = Σ_{o,L∋ℓ} ω_o(L) s_{o,ℓ}(x).
pub fn glmb_phd(x: &StateVector, label: Label, g: &GlmbDistribution) -> f64 {
    g.components
        .iter()
        .filter_map(|c| c.density_of(label).map(|d| c.weight * d.pdf(x)))
        .sum()
}

/// Existence probability of each label, Σ_{L∋ℓ} ω(L).
pub fn label_existence(g: &GlmbDistribution) -> Vec<(Label, f64)> {
    g.label_universe()
        .into_iter()
        .map(|l| {
            let r = g
                .components
                .iter()
                .filter(|c| c.density_of(l).is_some())
                .map(|c| c.weight)
                .sum();
            (l, r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PruneReport {
    /// Weight removed, measured before renormalization.
    pub dropped_mass: f64,
    pub dropped_components: usize,
}

/// Indices kept by [`prune_glmb`], in their original order.
pub(crate) fn prune_indices(g: &GlmbDistribution, weight_floor: f64, max_components: usize) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&weight_floor) {
        return Err(Error::InvalidParameter(format!(
            "weight floor must lie in [0, 1), got {weight_floor}"
        )));
    }
    let mut order: Vec<usize> = (0..g.components.len())
        .filter(|&i| g.components[i].weight >= weight_floor)
        .collect();
    order.sort_by(|&a, &b| {
        g.components[b]
            .weight
            .total_cmp(&g.components[a].weight)
            .then(a.cmp(&b))
    });
    order.truncate(max_components);
    if order.is_empty() {
        return Err(Error::Degenerate("pruning removed every GLMB component".into()));
    }
    order.sort_unstable();
    Ok(order)
}

/// Drops components below `weight_floor`, keeps the `max_components`
/// heaviest (ties keep the earlier component) and renormalizes.
pub fn prune_glmb(
    g: &GlmbDistribution,
    weight_floor: f64,
    max_components: usize,
) -> Result<(GlmbDistribution, PruneReport)> {
    let order = prune_indices(g, weight_floor, max_components)?;
    if order.len() == g.components.len() {
        return Ok((g.clone(), PruneReport::default()));
    }
    let kept: Vec<GlmbComponent> = order.iter().map(|&i| g.components[i].clone()).collect();
    let kept_mass: f64 = kept.iter().map(|c| c.weight).sum();
    let report = PruneReport {
        dropped_mass: (g.total_weight() - kept_mass).max(0.0),
        dropped_components: g.components.len() - kept.len(),
    };
    Ok((GlmbDistribution::from_unnormalized(kept)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(k: u64, i: u64) -> Label {
        Label::new(k, i).unwrap()
    }

    fn g1(mean: f64, var: f64) -> GaussianDensity {
        GaussianDensity::scalar(mean, var).unwrap()
    }

    fn v(x: f64) -> StateVector {
        StateVector::from_element(1, x)
    }

    fn comp(tracks: &[(Label, f64, f64)], w: f64) -> GlmbComponent {
        GlmbComponent::new(tracks.iter().map(|&(lab, m, s)| (lab, g1(m, s))).collect(), w).unwrap()
    }

    fn three_component() -> GlmbDistribution {
        GlmbDistribution::new(vec![
            comp(&[], 0.2),
            comp(&[(l(0, 1), 0.0, 1.0)], 0.3),
            comp(&[(l(0, 1), 0.5, 0.7), (l(1, 1), 3.0, 2.0)], 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn labels_and_sets() {
        assert!(Label::new(0, 0).is_err());
        assert!(l(0, 2) < l(1, 1));
        assert!(l(0, 1) < l(0, 2));
        assert!(labels_of(&LabeledStateSet::empty()).is_empty());
        let s = LabeledStateSet::new(vec![
            LabeledState::new(v(1.0), l(0, 2)),
            LabeledState::new(v(0.0), l(0, 1)),
        ])
        .unwrap();
        assert_eq!(labels_of(&s).into_iter().collect::<Vec<_>>(), vec![l(0, 1), l(0, 2)]);
        assert!(matches!(
            LabeledStateSet::new(vec![
                LabeledState::new(v(1.0), l(0, 1)),
                LabeledState::new(v(2.0), l(0, 1))
            ]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn density_values() {
        let g = three_component();
        assert!((glmb_density(&LabeledStateSet::empty(), &g) - 0.2).abs() < 1e-15);
        let single = GlmbDistribution::new(vec![comp(&[(l(0, 1), 1.0, 2.0)], 1.0)]).unwrap();
        let x = LabeledStateSet::new(vec![LabeledState::new(v(0.3), l(0, 1))]).unwrap();
        assert_eq!(glmb_density(&x, &single), g1(1.0, 2.0).pdf(&v(0.3)));
        let wrong = LabeledStateSet::new(vec![LabeledState::new(v(0.3), l(0, 2))]).unwrap();
        assert_eq!(glmb_density(&wrong, &single), 0.0);
    }

    #[test]
    fn set_integral_is_one() {
        let grid = Grid1d::new(-15.0, 15.0, 400);
        let total = labeled_set_integral(&three_component(), &grid, 2).unwrap();
        assert!((total - 1.0).abs() < 1e-5, "{total}");
    }

    #[test]
    fn cardinality_and_phd() {
        let g = GlmbDistribution::new(vec![comp(&[], 0.3), comp(&[(l(0, 1), 0.0, 1.0)], 0.7)]).unwrap();
        assert_eq!(glmb_cardinality(&g), vec![0.3, 0.7]);
        let g3 = three_component();
        let p = glmb_cardinality(&g3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(glmb_phd(&v(0.0), l(5, 1), &g3), 0.0);

        // ∫Σ_ℓ D = Σ|L|ω with closed-form Gaussian integrals: each s integrates to 1.
        let closed: f64 = g3
            .label_universe()
            .into_iter()
            .map(|lab| {
                g3.components()
                    .iter()
                    .filter(|c| c.density_of(lab).is_some())
                    .map(|c| c.weight)
                    .sum::<f64>()
            })
            .sum();
        assert!((closed - expected_cardinality(&g3)).abs() < 1e-12);
        let grid = Grid1d::new(-20.0, 20.0, 400);
        let numeric: f64 = g3
            .label_universe()
            .into_iter()
            .map(|lab| grid.integrate(|x| glmb_phd(&v(x), lab, &g3)))
            .sum();
        assert!((numeric - expected_cardinality(&g3)).abs() < 1e-6);
    }

    #[test]
    fn cardinality_matches_quadrature_per_n() {
        let g = three_component();
        let grid = Grid1d::new(-15.0, 15.0, 300);
        let p = glmb_cardinality(&g);
        let mut prev = 0.0;
        for (n, pn) in p.iter().enumerate().take(3) {
            let cum = labeled_set_integral(&g, &grid, n).unwrap();
            assert!((cum - prev - pn).abs() < 1e-5, "n={n}");
            prev = cum;
        }
    }

    #[test]
    fn pruning() {
        let g = GlmbDistribution::new(vec![
            comp(&[(l(0, 1), 0.0, 1.0)], 0.6),
            comp(&[(l(0, 2), 0.0, 1.0)], 0.3),
            comp(&[], 0.1),
        ])
        .unwrap();
        let (same, r) = prune_glmb(&g, 0.0, usize::MAX).unwrap();
        assert_eq!(same, g);
        assert_eq!(r.dropped_mass, 0.0);
        let (p, r) = prune_glmb(&g, 0.2, usize::MAX).unwrap();
        let w: Vec<f64> = p.components().iter().map(|c| c.weight).collect();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.dropped_mass - 0.1).abs() < 1e-15);
        let (top, _) = prune_glmb(&g, 0.0, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert!(prune_glmb(&g, 0.9, 10).is_err());
        assert!(prune_glmb(&g, 1.0, 10).is_err());
    }

    #[test]
    fn constructor_rejects_bad_weights() {
        assert!(GlmbDistribution::new(vec![comp(&[], 0.5)]).is_err());
        assert!(GlmbDistribution::from_unnormalized(vec![comp(&[], 0.0)]).is_err());
        let g = GlmbDistribution::new(vec![comp(&[], 0.5 + 1e-10), comp(&[(l(0, 1), 0.0, 1.0)], 0.5)]).unwrap();
        assert!((g.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = GlmbDistribution::from_unnormalized(vec![
            comp(&[(l(0, 1), 0.1, 1.0 / 3.0)], 1.0 / 7.0),
            comp(&[(l(0, 1), 0.2, 2.0), (l(3, 4), -1.0, 0.5)], std::f64::consts::PI),
        ])
        .unwrap();
        let text = g.to_json().unwrap();
        assert!(text.contains("[3,4]"));
        assert_eq!(GlmbDistribution::from_json(&text).unwrap(), g);
        let bad = text.replace("[3,4]", "[0,1]");
        assert!(GlmbDistribution::from_json(&bad).is_err());
    }

    proptest! {
        // A label-ignoring (Poisson-style) construction puts mass on sets
        // whose labels repeat; such components cannot be built.
        #[test]
        fn repeated_labels_are_unrepresentable(ids in prop::collection::vec((0u64..3, 1u64..3), 0..5), w in 0.01f64..1.0) {
            let tracks: Vec<(Label, GaussianDensity)> = ids.iter().map(|&(k, i)| (l(k, i), g1(0.0, 1.0))).collect();
            let distinct = ids.iter().collect::<BTreeSet<_>>().len() == ids.len();
            let built = GlmbComponent::new(tracks, w);
            prop_assert_eq!(built.is_ok(), distinct);
            if let Ok(c) = built {
                let g = GlmbDistribution::from_unnormalized(vec![c.clone()]).unwrap();
                if let Some(&first) = c.labels.first() {
                    let dup = vec![LabeledState::new(v(0.0), first), LabeledState::new(v(0.1), first)];
                    prop_assert_eq!(glmb_density_points(&dup, &g), 0.0);
                }
            }
        }
    }
}
