//! A hand-built GLMB distribution: cardinality distribution, label
//! existence, density of a labeled set, and its labeled set integral.

use nalgebra::DVector;
use rfstrack::labeled::{
    expected_cardinality, glmb_cardinality, glmb_density, label_existence, labeled_set_integral, GlmbComponent,
    GlmbDistribution, Label, LabeledState, LabeledStateSet,
};
use rfstrack::models::GaussianDensity;
use rfstrack::quadrature::Grid1d;

fn main() -> rfstrack::Result<()> {
    let a = Label::new(0, 1)?;
    let b = Label::new(0, 2)?;
    let g = GlmbDistribution::new(vec![
        GlmbComponent::new(vec![], 0.1)?,
        GlmbComponent::new(vec![(a, GaussianDensity::scalar(-2.0, 1.0)?)], 0.3)?,
        GlmbComponent::new(
            vec![
                (a, GaussianDensity::scalar(-2.0, 1.0)?),
                (b, GaussianDensity::scalar(3.0, 0.5)?),
            ],
            0.6,
        )?,
    ])?;

    for (n, p) in glmb_cardinality(&g).iter().enumerate() {
        println!("P(|X| = {n}) = {p:.3}");
    }
    println!("E|X| = {:.3}", expected_cardinality(&g));
    for (l, r) in label_existence(&g) {
        println!("label {l} exists with probability {r:.3}");
    }
    let x = LabeledStateSet::new(vec![
        LabeledState::new(DVector::from_element(1, -1.8), a),
        LabeledState::new(DVector::from_element(1, 3.1), b),
    ])?;
    println!("density at {{(-1.8, {a}), (3.1, {b})}}: {:.5}", glmb_density(&x, &g));
    println!(
        "labeled set integral: {:.8}",
        labeled_set_integral(&g, &Grid1d::new(-15.0, 15.0, 400), 2)?
    );
    println!("{}", g.to_json()?);
    Ok(())
}
