//! Gibbs-sampled joint prediction and update against the exhaustive
//! update on the same prior: components found and posterior mass covered.

use nalgebra::{DMatrix, DVector};
use rfstrack::glmb_filter::{joint_update_gibbs, predict, update, BirthModel, BirthTrack, GlmbFilterState, Truncation};
use rfstrack::labeled::{GlmbComponent, GlmbDistribution, Label};
use rfstrack::models::{BoxRegion, GaussianDensity, MotionModel, SensorModel, UniformClutter};

fn main() -> rfstrack::Result<()> {
    let motion = MotionModel::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.2), 0.95)?;
    let sensor = SensorModel::scalar(
        1.0,
        0.9,
        UniformClutter::new(BoxRegion::new(vec![-20.0], vec![20.0])?, 1.0)?,
    )?;
    let birth = BirthModel::new(vec![BirthTrack {
        existence: 0.1,
        density: GaussianDensity::scalar(0.0, 25.0)?,
    }])?;
    let prior = GlmbDistribution::new(vec![GlmbComponent::new(
        vec![
            (Label::new(0, 1)?, GaussianDensity::scalar(-4.0, 1.0)?),
            (Label::new(0, 2)?, GaussianDensity::scalar(4.0, 1.0)?),
        ],
        1.0,
    )?])?;
    let st = GlmbFilterState::new(0, prior);
    let zs: Vec<DVector<f64>> = [-3.6, 4.5, 11.0].iter().map(|&z| DVector::from_element(1, z)).collect();

    let (predicted, _) = predict(&st, &motion, &birth, Truncation::unlimited())?;
    let (exact, _) = update(&predicted, &zs, &sensor, Truncation::unlimited())?;
    println!("exhaustive: {} components", exact.distribution().len());
    for sweeps in [10, 50, 500] {
        let (gibbs, report) =
            joint_update_gibbs(&st, &zs, &motion, &birth, &sensor, sweeps, 2, Truncation::unlimited())?;
        let covered: f64 = exact
            .distribution()
            .components()
            .iter()
            .filter(|c| {
                gibbs.distribution().components().iter().any(|g| {
                    g.labels == c.labels && g.densities.iter().zip(&c.densities).all(|(a, b)| a.approx_eq(b, 1e-9))
                })
            })
            .map(|c| c.weight)
            .sum();
        println!(
            "gibbs {sweeps:>3} sweeps: {:>2} distinct solutions, exhaustive mass covered {covered:.4}",
            report.distinct_solutions
        );
    }
    let top = exact
        .hypotheses()
        .max_by(|a, b| a.weight.total_cmp(&b.weight))
        .expect("nonempty posterior");
    let assignment: Vec<String> = top
        .last_assignment
        .iter()
        .map(|(l, j)| {
            if *j == 0 {
                format!("{l} missed")
            } else {
                format!("{l} <- z{j}")
            }
        })
        .collect();
    println!("top hypothesis (weight {:.3}): {}", top.weight, assignment.join(", "));
    Ok(())
}
