//! Multitarget posterior from an independent-track prior, its
//! normalizer, and a Monte-Carlo Bayes risk of a simple estimator.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfstrack::association::TrackSet;
use rfstrack::metrics::{ospa, OspaParams};
use rfstrack::models::{BoxRegion, GaussianDensity, SensorModel, UniformClutter};
use rfstrack::quadrature::Grid1d;
use rfstrack::rfs::{independent_prior, multitarget_bayes_risk, multitarget_posterior, MeasurementSet, StateSet};

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn main() -> rfstrack::Result<()> {
    let clutter = UniformClutter::new(BoxRegion::new(vec![-10.0], vec![10.0])?, 0.5)?;
    let sensor = SensorModel::scalar(1.0, 0.9, clutter)?;
    let ts = TrackSet::new(vec![
        GaussianDensity::scalar(-2.0, 1.0)?,
        GaussianDensity::scalar(2.0, 1.0)?,
    ]);
    let prior = independent_prior(&ts)?;
    let zs = MeasurementSet::new(vec![v(-1.6), v(2.5)])?;
    let grid = Grid1d::new(-10.0, 10.0, 200);

    let post = multitarget_posterior(&zs, &prior, &sensor, &grid, 2)?;
    println!("normalizer f(Z) = {:.6e}", post.normalizer);
    for xs in [
        vec![v(-1.8), v(2.3)],
        vec![v(2.3), v(-1.8)],
        vec![v(-1.8), v(-1.8)],
        vec![v(0.0), v(5.0)],
    ] {
        println!(
            "f(X|Z) at {:?} = {:.6e}",
            xs.iter().map(|x| x[0]).collect::<Vec<_>>(),
            post.density.evaluate_points(&xs)
        );
    }

    // Estimator: report the measurements themselves as target states.
    let params = OspaParams::new(5.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let risk = multitarget_bayes_risk(
        |z: &MeasurementSet| StateSet::new(z.as_slice().to_vec()).expect("measurements are distinct"),
        |a: &StateSet, b: &StateSet| ospa(a.as_slice(), b.as_slice(), &params),
        |rng: &mut ChaCha8Rng| {
            let truth: Vec<DVector<f64>> = ts.tracks.iter().map(|t| t.sample(rng)).collect();
            let mut z = Vec::new();
            for x in &truth {
                if rng.random_bool(0.9) {
                    z.push(v(x[0] + rng.sample::<f64, _>(rand_distr::StandardNormal)));
                }
            }
            if rng.random_bool(0.4) {
                z.push(v(rng.random_range(-10.0..10.0)));
            }
            (StateSet::new(truth).unwrap(), MeasurementSet::new(z).unwrap())
        },
        2000,
        &mut rng,
    )?;
    println!("Bayes risk (OSPA, c = 5) of the measurements-as-states estimator: {risk:.4}");
    Ok(())
}
