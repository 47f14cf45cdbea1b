//! Single-target models: Gaussian densities, linear-Gaussian motion and
//! measurement models, the Poisson clutter model, and the single-target
//! Bayes recursion (predict, update, MAP estimate).

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinematic state of a single target.
pub type StateVector = DVector<f64>;

/// A single point detection.
pub type Measurement = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-12;

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} has non-finite entries")))
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Returns the symmetric part of `m` after checking it is symmetric to
/// within `SYMMETRY_TOL` relative to its largest entry.
fn symmetrized(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what} must be square")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * max_abs(m).max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Log-density of N(x; mean, LLᵀ) given the lower Cholesky factor `l`.
pub(crate) fn gaussian_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, l: &DMatrix<f64>) -> f64 {
    let d = x.len();
    let diff = x - mean;
    let y = l
        .solve_lower_triangular(&diff)
        .expect("cholesky factor has a nonzero diagonal");
    let log_det: f64 = l.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (y.norm_squared() + log_det + d as f64 * (2.0 * PI).ln())
}

fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::<f64, Dyn>::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// A Gaussian density N(mean, covariance) with a cached Cholesky factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl PartialEq for GaussianDensity {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianDensity {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        let d = r.mean.len();
        if r.cov.len() != d || r.cov.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension("covariance rows must match mean length".into()));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| r.cov[i][j]);
        GaussianDensity::new(DVector::from_vec(r.mean), cov)
    }
}

impl From<GaussianDensity> for GaussianRepr {
    fn from(g: GaussianDensity) -> Self {
        let d = g.dim();
        GaussianRepr {
            mean: g.mean.iter().copied().collect(),
            cov: (0..d).map(|i| (0..d).map(|j| g.cov[(i, j)]).collect()).collect(),
        }
    }
}

impl GaussianDensity {
    /// Builds a density, rejecting non-symmetric or non-positive-definite
    /// covariances. The stored covariance is the exact symmetric part.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Dimension("state dimension must be at least 1".into()));
        }
        check_finite(&mean, "mean")?;
        if cov.nrows() != mean.len() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{} but mean has length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        let cov = symmetrized(&cov, "covariance")?;
        let chol = cholesky_lower(&cov, "covariance")?;
        Ok(Self { mean, cov, chol })
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        gaussian_log_pdf(x, &self.mean, &self.chol)
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Density of a 1-D Gaussian at a scalar point (fast path for quadrature).
    pub fn pdf_scalar(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        let var = self.cov[(0, 0)];
        let d = x - self.mean[0];
        (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
    }

    /// Draws a sample using the cached Cholesky factor.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        &self.mean + &self.chol * n
    }

    /// True when both moments agree entrywise within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && (&self.mean - &other.mean).amax() <= tol && (&self.cov - &other.cov).amax() <= tol
    }
}

/// Axis-aligned box in measurement or state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Dimension(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::InvalidParameter(
                "box bounds must be finite with lower < upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| rng.random_range(*l..*u)),
        )
    }
}

/// Poisson clutter with rate λ and a uniform spatial density on a box.
///
/// `density` is 1/volume for a properly normalized model. The
/// [`UniformClutter::with_density`] constructor allows any other value so
/// verification suites can build negative controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformClutter {
    pub region: BoxRegion,
    pub rate: f64,
    pub density: f64,
}

impl UniformClutter {
    pub fn new(region: BoxRegion, rate: f64) -> Result<Self> {
        let density = 1.0 / region.volume();
        Self::with_density(region, rate, density)
    }

    pub fn with_density(region: BoxRegion, rate: f64, density: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clutter rate must be >= 0, got {rate}"
            )));
        }
        if !(density.is_finite() && density >= 0.0) {
            return Err(Error::InvalidParameter(
                "clutter density must be finite and >= 0".into(),
            ));
        }
        Ok(Self { region, rate, density })
    }

    /// Whether the spatial density integrates to one over the region.
    pub fn is_normalized(&self) -> bool {
        (self.density * self.region.volume() - 1.0).abs() <= 1e-12
    }

    /// Spatial density c(z).
    pub fn spatial_density(&self, z: &DVector<f64>) -> f64 {
        if self.region.contains(z) {
            self.density
        } else {
            0.0
        }
    }

    /// Intensity κ(z) = λ·c(z).
    pub fn intensity(&self, z: &DVector<f64>) -> f64 {
        self.rate * self.spatial_density(z)
    }
}

/// Linear-Gaussian Markov motion model with survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    survival: f64,
}

impl MotionModel {
    pub fn new(transition: DMatrix<f64>, process_noise: DMatrix<f64>, survival: f64) -> Result<Self> {
        if !transition.is_square() {
            return Err(Error::Dimension("transition matrix must be square".into()));
        }
        if process_noise.shape() != transition.shape() {
            return Err(Error::Dimension("process noise must match transition matrix".into()));
        }
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::InvalidParameter(format!(
                "survival probability {survival} not in [0,1]"
            )));
        }
        let process_noise = symmetrized(&process_noise, "process noise")?;
        let min_eig = process_noise.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * max_abs(&process_noise).max(1.0) {
            return Err(Error::InvalidParameter(
                "process noise is not positive semidefinite".into(),
            ));
        }
        Ok(Self {
            transition,
            process_noise,
            survival,
        })
    }

    /// Nearly-constant-velocity model on `[p_1, v_1, p_2, v_2, ...]` with
    /// white-noise acceleration of spectral density `q`.
    pub fn constant_velocity(spatial_dims: usize, dt: f64, q: f64, survival: f64) -> Result<Self> {
        let d = 2 * spatial_dims;
        let mut f = DMatrix::identity(d, d);
        let mut qm = DMatrix::zeros(d, d);
        for s in 0..spatial_dims {
            let p = 2 * s;
            f[(p, p + 1)] = dt;
            qm[(p, p)] = q * dt.powi(3) / 3.0;
            qm[(p, p + 1)] = q * dt.powi(2) / 2.0;
            qm[(p + 1, p)] = q * dt.powi(2) / 2.0;
            qm[(p + 1, p + 1)] = q * dt;
        }
        Self::new(f, qm, survival)
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn survival(&self) -> f64 {
        self.survival
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    /// Propagates a point state with an explicit noise draw.
    pub fn propagate<R: rand::Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> StateVector {
        let eig = self.process_noise.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let n = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let w = &eig.eigenvectors * n.component_mul(&sqrt_vals);
        &self.transition * x + w
    }
}

/// Linear-Gaussian sensor with constant detection probability and uniform
/// Poisson clutter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    observation: DMatrix<f64>,
    noise: DMatrix<f64>,
    noise_chol: DMatrix<f64>,
    detection: f64,
    clutter: UniformClutter,
}

impl SensorModel {
    pub fn new(
        observation: DMatrix<f64>,
        noise: DMatrix<f64>,
        detection: f64,
        clutter: UniformClutter,
    ) -> Result<Self> {
        if noise.nrows() != observation.nrows() {
            return Err(Error::Dimension("measurement noise must be d_z x d_z".into()));
        }
        if clutter.region.dim() != observation.nrows() {
            return Err(Error::Dimension("clutter region dimension must equal d_z".into()));
        }
        if !(0.0..=1.0).contains(&detection) {
            return Err(Error::InvalidParameter(format!(
                "detection probability {detection} not in [0,1]"
            )));
        }
        let noise = symmetrized(&noise, "measurement noise")?;
        let noise_chol = cholesky_lower(&noise, "measurement noise")?;
        Ok(Self {
            observation,
            noise,
            noise_chol,
            detection,
            clutter,
        })
    }

    /// Scalar sensor observing a scalar state: H=[1], R=[r].
    pub fn scalar(noise_var: f64, detection: f64, clutter: UniformClutter) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, noise_var),
            detection,
            clutter,
        )
    }

    pub fn observation(&self) -> &DMatrix<f64> {
        &self.observation
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    pub fn detection(&self) -> f64 {
        self.detection
    }

    pub fn clutter(&self) -> &UniformClutter {
        &self.clutter
    }

    pub fn state_dim(&self) -> usize {
        self.observation.ncols()
    }

    pub fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    /// Copy of this sensor with a different detection probability.
    pub fn with_detection(&self, detection: f64) -> Result<Self> {
        Self::new(
            self.observation.clone(),
            self.noise.clone(),
            detection,
            self.clutter.clone(),
        )
    }

    /// Copy of this sensor with a different clutter model.
    pub fn with_clutter(&self, clutter: UniformClutter) -> Result<Self> {
        Self::new(self.observation.clone(), self.noise.clone(), self.detection, clutter)
    }

    pub fn clutter_intensity(&self, z: &Measurement) -> f64 {
        self.clutter.intensity(z)
    }

    pub(crate) fn check_measurement(&self, z: &Measurement) -> Result<()> {
        if z.len() != self.measurement_dim() {
            return Err(Error::Dimension(format!(
                "measurement has dimension {}, sensor expects {}",
                z.len(),
                self.measurement_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, x: &StateVector) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, sensor expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// Predicted measurement density N(H·mean, H·cov·Hᵀ + R) of a track.
    pub fn predicted_measurement(&self, track: &GaussianDensity) -> Result<GaussianDensity> {
        if track.dim() != self.state_dim() {
            return Err(Error::Dimension("track dimension does not match sensor".into()));
        }
        let h = &self.observation;
        let s = h * track.cov() * h.transpose() + &self.noise;
        GaussianDensity::new(h * track.mean(), (&s + s.transpose()) * 0.5)
    }
}

/// log N(z; Hx, R).
pub fn log_single_likelihood(z: &Measurement, x: &StateVector, s: &SensorModel) -> Result<f64> {
    s.check_measurement(z)?;
    s.check_state(x)?;
    Ok(gaussian_log_pdf(z, &(s.observation() * x), &s.noise_chol))
}

/// Single-target likelihood f(z|x) = N(z; Hx, R).
pub fn single_likelihood(z: &Measurement, x: &StateVector, s: &SensorModel) -> Result<f64> {
    log_single_likelihood(z, x, s).map(f64::exp)
}

/// Chapman-Kolmogorov prediction of a Gaussian through the motion model.
pub fn predict_density(prior: &GaussianDensity, mm: &MotionModel) -> Result<GaussianDensity> {
    if prior.dim() != mm.dim() {
        return Err(Error::Dimension("prior dimension does not match motion model".into()));
    }
    let f = mm.transition();
    let cov = f * prior.cov() * f.transpose() + mm.process_noise();
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianDensity::new(f * prior.mean(), cov)
}

/// Kalman measurement update (Joseph form) of a Gaussian prior.
pub fn bayes_update_density(prior: &GaussianDensity, z: &Measurement, s: &SensorModel) -> Result<GaussianDensity> {
    s.check_measurement(z)?;
    if prior.dim() != s.state_dim() {
        return Err(Error::Dimension("prior dimension does not match sensor".into()));
    }
    let h = s.observation();
    let p = prior.cov();
    let innov_cov = h * p * h.transpose() + s.noise();
    let innov_chol = Cholesky::<f64, Dyn>::new((&innov_cov + innov_cov.transpose()) * 0.5)
        .ok_or_else(|| Error::NotPositiveDefinite("innovation covariance".into()))?;
    // K = P Hᵀ S⁻¹ computed as (S⁻¹ H P)ᵀ.
    let gain = innov_chol.solve(&(h * p)).transpose();
    let mean = prior.mean() + &gain * (z - h * prior.mean());
    let i_kh = DMatrix::identity(prior.dim(), prior.dim()) - &gain * h;
    let cov = &i_kh * p * i_kh.transpose() + &gain * s.noise() * gain.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianDensity::new(mean, cov)
}

/// MAP estimate of a Gaussian: its mean.
pub fn map_estimate(d: &GaussianDensity) -> StateVector {
    d.mean().clone()
}

/// log of e^{−λ}·∏ κ(z); `-inf` when some κ(z) vanishes.
pub fn log_clutter_set_density(zs: &[Measurement], s: &SensorModel) -> f64 {
    -s.clutter().rate + zs.iter().map(|z| s.clutter_intensity(z).ln()).sum::<f64>()
}

/// Poisson clutter set density κ(Z) = e^{−λ}·∏_{z∈Z} κ(z).
pub fn clutter_set_density(zs: &[Measurement], s: &SensorModel) -> f64 {
    zs.iter()
        .fold((-s.clutter().rate).exp(), |acc, z| acc * s.clutter_intensity(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Grid1d;

    fn clutter_1d(lo: f64, hi: f64, rate: f64) -> UniformClutter {
        UniformClutter::new(BoxRegion::new(vec![lo], vec![hi]).unwrap(), rate).unwrap()
    }

    fn unit_sensor() -> SensorModel {
        SensorModel::scalar(1.0, 0.9, clutter_1d(-50.0, 50.0, 1.0)).unwrap()
    }

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn single_likelihood_at_mode_and_one_sigma() {
        let s = unit_sensor();
        let at_mode = single_likelihood(&v(0.0), &v(0.0), &s).unwrap();
        assert!((at_mode - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let at_one = single_likelihood(&v(1.0), &v(0.0), &s).unwrap();
        assert!((at_one - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_likelihood_integrates_to_one() {
        let s = unit_sensor();
        let x = v(0.7);
        let grid = Grid1d::new(-15.0, 15.0, 2001);
        let total = grid.integrate(|z| single_likelihood(&v(z), &x, &s).unwrap());
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn single_likelihood_integrates_to_one_in_2d() {
        let clutter = UniformClutter::new(BoxRegion::new(vec![-1.0; 2], vec![1.0; 2]).unwrap(), 1.0).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let s = SensorModel::new(DMatrix::identity(2, 2), r, 1.0, clutter).unwrap();
        let x = DVector::from_vec(vec![0.2, -0.4]);
        let grid = Grid1d::new(-9.0, 9.0, 301);
        let total =
            grid.integrate(|a| grid.integrate(|b| single_likelihood(&DVector::from_vec(vec![a, b]), &x, &s).unwrap()));
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = unit_sensor();
        let z2 = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(single_likelihood(&z2, &v(0.0), &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn predict_identity_and_additive_variance() {
        let prior = GaussianDensity::scalar(0.3, 2.0).unwrap();
        let mm = MotionModel::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), 1.0).unwrap();
        let out = predict_density(&prior, &mm).unwrap();
        assert_eq!(out, prior);

        let prior = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let mm = MotionModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, 0.5), 1.0).unwrap();
        let out = predict_density(&prior, &mm).unwrap();
        assert_eq!(out.mean()[0], 0.0);
        assert_eq!(out.cov()[(0, 0)], 1.5);
    }

    #[test]
    fn predict_matches_monte_carlo() {
        use rand::SeedableRng;
        let prior = GaussianDensity::new(
            DVector::from_vec(vec![1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 0.5]),
        )
        .unwrap();
        let mm = MotionModel::constant_velocity(1, 1.0, 0.3, 1.0).unwrap();
        let out = predict_density(&prior, &mm).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let samples: Vec<DVector<f64>> = (0..draws)
            .map(|_| mm.propagate(&prior.sample(&mut rng), &mut rng))
            .collect();
        let mean = samples.iter().fold(DVector::zeros(2), |acc, x| acc + x) / draws as f64;
        let cov = samples.iter().fold(DMatrix::zeros(2, 2), |acc, x| {
            acc + (x - &mean) * (x - &mean).transpose()
        }) / (draws as f64 - 1.0);
        for i in 0..2 {
            let se = (out.cov()[(i, i)] / draws as f64).sqrt();
            assert!((mean[i] - out.mean()[i]).abs() < 3.0 * se);
            for j in 0..2 {
                // var of a sample covariance entry: (Σii Σjj + Σij²)/N
                let c = out.cov();
                let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / draws as f64).sqrt();
                assert!((cov[(i, j)] - c[(i, j)]).abs() < 3.0 * se, "cov[{i},{j}]");
            }
        }
    }

    #[test]
    fn update_equal_precision_fusion() {
        let prior = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let s = unit_sensor();
        let post = bayes_update_density(&prior, &v(2.0), &s).unwrap();
        assert!((post.mean()[0] - 1.0).abs() < 1e-15);
        assert!((post.cov()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn update_with_uninformative_measurement_keeps_prior() {
        let prior = GaussianDensity::scalar(0.4, 1.3).unwrap();
        let s = SensorModel::scalar(1e12, 0.9, clutter_1d(-5.0, 5.0, 1.0)).unwrap();
        let post = bayes_update_density(&prior, &v(3.0), &s).unwrap();
        assert!((post.mean()[0] - 0.4).abs() <= 1e-4 * 0.4);
        assert!((post.cov()[(0, 0)] - 1.3).abs() <= 1e-4 * 1.3);
    }

    #[test]
    fn update_with_exact_measurement_snaps_to_it() {
        let prior = GaussianDensity::scalar(0.0, 1.0).unwrap();
        let mm = MotionModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, 0.5), 1.0).unwrap();
        let pred = predict_density(&prior, &mm).unwrap();
        let s = SensorModel::scalar(1e-12, 0.9, clutter_1d(-5.0, 5.0, 1.0)).unwrap();
        let post = bayes_update_density(&pred, &v(2.5), &s).unwrap();
        assert!((post.mean()[0] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn update_matches_grid_posterior() {
        let prior = GaussianDensity::scalar(0.5, 2.0).unwrap();
        let s = SensorModel::scalar(0.7, 0.9, clutter_1d(-5.0, 5.0, 1.0)).unwrap();
        let z = v(1.7);
        let post = bayes_update_density(&prior, &z, &s).unwrap();
        let grid = Grid1d::new(-15.0, 15.0, 3001);
        let unnorm = |x: f64| single_likelihood(&z, &v(x), &s).unwrap() * prior.pdf_scalar(x);
        let norm = grid.integrate(unnorm);
        let sup = grid
            .points()
            .map(|x| (unnorm(x) / norm - post.pdf_scalar(x)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
    }

    #[test]
    fn posterior_covariance_shrinks() {
        let prior = GaussianDensity::new(
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        let clutter = clutter_1d(-10.0, 10.0, 1.0);
        let s = SensorModel::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_element(1, 1, 0.8),
            0.9,
            clutter,
        )
        .unwrap();
        let post = bayes_update_density(&prior, &v(0.4), &s).unwrap();
        let diff = prior.cov() - post.cov();
        assert!(diff.symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        // R=0 with a degenerate direction cannot be built: R must be PD.
        let clutter = clutter_1d(-1.0, 1.0, 1.0);
        assert!(SensorModel::scalar(0.0, 0.9, clutter).is_err());
    }

    #[test]
    fn map_estimate_is_mean_and_grid_argmax() {
        let d = GaussianDensity::scalar(1.234, 0.6).unwrap();
        assert_eq!(map_estimate(&d)[0], 1.234);
        let zero = GaussianDensity::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        assert_eq!(map_estimate(&zero), DVector::zeros(3));
        let grid = Grid1d::new(-5.0, 5.0, 1001);
        let arg = grid
            .points()
            .max_by(|a, b| d.pdf_scalar(*a).total_cmp(&d.pdf_scalar(*b)))
            .unwrap();
        assert!((arg - 1.234).abs() <= grid.step());
    }

    #[test]
    fn clutter_set_density_values() {
        let s = SensorModel::scalar(1.0, 0.9, clutter_1d(0.0, 10.0, 2.0)).unwrap();
        assert!((clutter_set_density(&[], &s) - (-2.0f64).exp()).abs() < 1e-15);
        let s0 = SensorModel::scalar(1.0, 0.9, clutter_1d(0.0, 10.0, 0.0)).unwrap();
        assert_eq!(clutter_set_density(&[], &s0), 1.0);
        let s3 = SensorModel::scalar(1.0, 0.9, clutter_1d(0.0, 10.0, 3.0)).unwrap();
        let zs = [v(1.0), v(7.5)];
        let expected = (-3.0f64).exp() * 0.3 * 0.3;
        assert!((clutter_set_density(&zs, &s3) - expected).abs() < 1e-15);
        assert!((log_clutter_set_density(&zs, &s3) - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn clutter_set_density_set_integrates_to_one() {
        // The n-fold integrand factorizes over elements, so each cardinality
        // term is (∫κ)^n·e^{−λ}/n! with ∫κ from the grid.
        let set_integral = |rate: f64, max_card: usize| {
            let s = SensorModel::scalar(1.0, 0.9, clutter_1d(0.0, 4.0, rate)).unwrap();
            let grid = Grid1d::new(0.0, 4.0, 41);
            let one = grid.integrate(|z| s.clutter_intensity(&v(z)));
            let mut total = clutter_set_density(&[], &s);
            let mut fact = 1.0;
            for n in 1..=max_card {
                fact *= n as f64;
                total += (-rate).exp() * one.powi(n as i32) / fact;
            }
            total
        };
        assert!((set_integral(0.5, 8) - 1.0).abs() < 1e-6);
        // λ=2 leaves a Poisson tail of 2.4e-4 beyond |Z|=8; 16 terms suffice.
        for &rate in &[0.5, 1.0, 2.0] {
            let total = set_integral(rate, 16);
            assert!((total - 1.0).abs() < 1e-6, "rate {rate}: {total}");
        }
    }

    #[test]
    fn covariance_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianDensity::new(DVector::zeros(2), bad).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianDensity::new(DVector::zeros(2), indefinite),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(MotionModel::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0), 0.9).is_err());
        assert!(MotionModel::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), 1.2).is_err());
    }

    #[test]
    fn gaussian_json_roundtrip() {
        let g = GaussianDensity::new(
            DVector::from_vec(vec![0.1, 1.0 / 3.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0 / 7.0]),
        )
        .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: GaussianDensity = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }
}
