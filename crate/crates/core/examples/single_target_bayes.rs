//! Kalman recursion for one target with a certain detection: predict,
//! update with each measurement, report the MAP estimate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfstrack::models::{
    bayes_update_density, map_estimate, predict_density, BoxRegion, GaussianDensity, MotionModel, SensorModel,
    UniformClutter,
};

fn main() -> rfstrack::Result<()> {
    let motion = MotionModel::constant_velocity(1, 1.0, 0.05, 1.0)?;
    let clutter = UniformClutter::new(BoxRegion::new(vec![-100.0], vec![100.0])?, 0.0)?;
    let sensor = SensorModel::new(
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_element(1, 1, 0.5),
        1.0,
        clutter,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut truth = DVector::from_vec(vec![0.0, 1.0]);
    let mut track = GaussianDensity::new(DVector::zeros(2), DMatrix::identity(2, 2) * 10.0)?;
    let noise = GaussianDensity::new(DVector::zeros(1), sensor.noise().clone())?;
    println!("{:>2} {:>9} {:>9} {:>9} {:>9}", "k", "z", "truth", "estimate", "std");
    for k in 1..=10 {
        truth = motion.propagate(&truth, &mut rng);
        let z = sensor.observation() * &truth + noise.sample(&mut rng);
        track = bayes_update_density(&predict_density(&track, &motion)?, &z, &sensor)?;
        let x = map_estimate(&track);
        println!(
            "{k:>2} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            z[0],
            truth[0],
            x[0],
            track.cov()[(0, 0)].sqrt()
        );
    }
    Ok(())
}
