//! The set integral of f(Z|X)·f₀(X) over X equals the sum of association
//! likelihoods. Both sides are computed for a few small instances.

use nalgebra::DVector;
use rfstrack::association::TrackSet;
use rfstrack::models::{BoxRegion, GaussianDensity, SensorModel, UniformClutter};
use rfstrack::rfs::{track_window, verify_mta_rfs_identity, MeasurementSet};

fn main() -> rfstrack::Result<()> {
    // (track mean and variance pairs, measurements, clutter rate)
    type Case<'a> = (&'a [(f64, f64)], &'a [f64], f64);
    let cases: [Case; 3] = [
        (&[(0.0, 1.0)], &[0.4], 0.5),
        (&[(-1.5, 0.8), (2.0, 1.2)], &[-1.0, 1.7, 5.0], 1.0),
        (&[(-3.0, 0.5), (0.0, 1.0), (3.0, 1.5)], &[-2.8, 3.3], 0.5),
    ];
    println!(
        "{:>2} {:>2} {:>14} {:>14} {:>10}",
        "n", "m", "set integral", "MTA sum", "gap"
    );
    for (tracks, zs, rate) in cases {
        let clutter = UniformClutter::new(BoxRegion::new(vec![-10.0], vec![10.0])?, rate)?;
        let sensor = SensorModel::scalar(1.0, 0.9, clutter)?;
        let ts = TrackSet::new(
            tracks
                .iter()
                .map(|&(m, v)| GaussianDensity::scalar(m, v))
                .collect::<Result<_, _>>()?,
        );
        let z = MeasurementSet::new(zs.iter().map(|&z| DVector::from_element(1, z)).collect())?;
        let grid = track_window(&ts, 9.0, 300)?;
        let r = verify_mta_rfs_identity(&z, &ts, &sensor, &grid)?;
        println!(
            "{:>2} {:>2} {:>14.6e} {:>14.6e} {:>10.2e}",
            tracks.len(),
            zs.len(),
            r.lhs,
            r.rhs,
            r.relative_gap
        );
    }
    Ok(())
}
