//! GLMB filter on a simulated two-target crossing: per-step cardinality,
//! number of components and OSPA error.

use nalgebra::{DMatrix, DVector};
use rfstrack::glmb_filter::{estimate_states, joint_update_gibbs, BirthModel, BirthTrack, GlmbFilterState, Truncation};
use rfstrack::labeled::{expected_cardinality, Label};
use rfstrack::metrics::{ospa, OspaParams};
use rfstrack::models::{BoxRegion, GaussianDensity, MotionModel, SensorModel, UniformClutter};
use rfstrack::sim::{simulate, Scenario, ScheduledBirth};

fn position(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[0], x[2]])
}

fn main() -> rfstrack::Result<()> {
    let region = BoxRegion::new(vec![-100.0, -100.0], vec![100.0, 100.0])?;
    let motion = MotionModel::constant_velocity(2, 1.0, 0.05, 0.99)?;
    let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let sensor = SensorModel::new(
        h,
        DMatrix::identity(2, 2),
        0.95,
        UniformClutter::new(region.clone(), 1.0)?,
    )?;
    let starts = [[-40.0, 1.6, -20.0, 0.8], [-40.0, 1.6, 20.0, -0.8]];
    let births = starts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(ScheduledBirth {
                time: 1,
                state: DVector::from_row_slice(s),
                label: Label::new(1, i as u64 + 1)?,
            })
        })
        .collect::<rfstrack::Result<Vec<_>>>()?;
    let scenario = Scenario::new(50, births, motion.clone(), sensor.clone(), region, 7)?;
    let frames = simulate(&scenario)?;

    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 4.0, 9.0, 4.0]));
    let birth = BirthModel::new(
        starts
            .iter()
            .map(|s| {
                Ok(BirthTrack {
                    existence: 0.05,
                    density: GaussianDensity::new(DVector::from_vec(vec![s[0], 0.0, s[2], 0.0]), cov.clone())?,
                })
            })
            .collect::<rfstrack::Result<Vec<_>>>()?,
    )?;
    let caps = Truncation {
        max_components: 100,
        weight_floor: 1e-10,
    };
    let params = OspaParams::new(10.0, 1.0)?;

    let mut st = GlmbFilterState::initial();
    for f in &frames {
        let (next, _) = joint_update_gibbs(
            &st,
            f.measurements.as_slice(),
            &motion,
            &birth,
            &sensor,
            200,
            f.k as u64,
            caps,
        )?;
        st = next;
        let est = estimate_states(&st);
        let truth: Vec<_> = f.truth.iter().map(|t| position(&t.x)).collect();
        let est_pos: Vec<_> = est.iter().map(|e| position(&e.x)).collect();
        if f.k % 5 == 0 || f.k <= 3 {
            println!(
                "k={:>2} E|X| {:.2} components {:>3} labels {:?} OSPA {:.3}",
                f.k,
                expected_cardinality(st.distribution()),
                st.distribution().len(),
                est.iter().map(|e| e.label.to_string()).collect::<Vec<_>>(),
                ospa(&truth, &est_pos, &params)
            );
        }
    }
    Ok(())
}
