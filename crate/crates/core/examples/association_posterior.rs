//! Posterior over associations for two tracks and three measurements,
//! the MAP association and the resulting track updates.

use nalgebra::DVector;
use rfstrack::association::{map_mta, mta_posterior, mta_state_estimate, TrackSet};
use rfstrack::models::{BoxRegion, GaussianDensity, SensorModel, UniformClutter};

fn main() -> rfstrack::Result<()> {
    let clutter = UniformClutter::new(BoxRegion::new(vec![-10.0], vec![10.0])?, 1.0)?;
    let sensor = SensorModel::scalar(0.5, 0.9, clutter)?;
    let tracks = TrackSet::new(vec![
        GaussianDensity::scalar(-1.0, 1.0)?,
        GaussianDensity::scalar(1.5, 1.0)?,
    ]);
    let zs: Vec<DVector<f64>> = [-0.8, 1.1, 6.0].iter().map(|&z| DVector::from_element(1, z)).collect();

    let posterior = mta_posterior(&zs, &tracks, &sensor, None)?;
    let total = posterior.total_weight();
    let mut support = posterior.support.clone();
    support.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("{} associations, top five:", support.len());
    for (a, w) in support.iter().take(5) {
        println!("  {:?}  p = {:.4}", a.assignments(), w / total);
    }
    let (_, best) = map_mta(&posterior)?;
    for (i, d) in mta_state_estimate(&best, &zs, &tracks, &sensor)? {
        println!("track {i}: mean {:.3}, variance {:.3}", d.mean()[0], d.cov()[(0, 0)]);
    }
    Ok(())
}
