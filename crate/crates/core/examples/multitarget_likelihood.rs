//! Multitarget likelihood f(Z|X): the association sum, the ordered
//! partition sum it must equal, and its normalization over measurement sets.

use nalgebra::DVector;
use rfstrack::models::{BoxRegion, SensorModel, UniformClutter};
use rfstrack::quadrature::Grid1d;
use rfstrack::rfs::{
    likelihood_term_count, measurement_set_integral, multitarget_likelihood, multitarget_likelihood_partition_oracle,
    MeasurementSet, StateSet,
};

fn main() -> rfstrack::Result<()> {
    let clutter = UniformClutter::new(BoxRegion::new(vec![-10.0], vec![10.0])?, 1.0)?;
    let sensor = SensorModel::scalar(1.0, 0.8, clutter)?;
    let xs = StateSet::new(vec![DVector::from_element(1, -2.0), DVector::from_element(1, 3.0)])?;
    let zs = MeasurementSet::new([-1.7, 2.6, 8.0].iter().map(|&z| DVector::from_element(1, z)).collect())?;

    let direct = multitarget_likelihood(&zs, &xs, &sensor)?;
    let partitions = multitarget_likelihood_partition_oracle(&zs, &xs, &sensor)?;
    println!(
        "f(Z|X) over {} associations:  {direct:.6e}",
        likelihood_term_count(&zs, &xs)
    );
    println!(
        "f(Z|X) over {} partitions ({} nonzero): {:.6e}",
        partitions.total_partitions, partitions.nonzero_partitions, partitions.value
    );

    let grid = Grid1d::new(-10.0, 10.0, 400);
    let total = measurement_set_integral(&xs, &sensor, &grid, 20, 2)?;
    println!("set integral of f(Z|X) over Z: {total:.8}");
    Ok(())
}
