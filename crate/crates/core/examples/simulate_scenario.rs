//! Simulates two crossing targets under clutter and prints each frame's
//! truth and measurement origins.

use nalgebra::{DMatrix, DVector};
use rfstrack::labeled::Label;
use rfstrack::models::{BoxRegion, MotionModel, SensorModel, UniformClutter};
use rfstrack::sim::{simulate, Origin, Scenario, ScheduledBirth};

fn main() -> rfstrack::Result<()> {
    let region = BoxRegion::new(vec![-100.0, -100.0], vec![100.0, 100.0])?;
    let motion = MotionModel::constant_velocity(2, 1.0, 0.05, 0.99)?;
    let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let sensor = SensorModel::new(
        h,
        DMatrix::identity(2, 2),
        0.9,
        UniformClutter::new(region.clone(), 2.0)?,
    )?;
    let births = vec![
        ScheduledBirth {
            time: 1,
            state: DVector::from_vec(vec![-20.0, 2.0, -10.0, 1.0]),
            label: Label::new(1, 1)?,
        },
        ScheduledBirth {
            time: 3,
            state: DVector::from_vec(vec![-20.0, 2.0, 10.0, -1.0]),
            label: Label::new(3, 1)?,
        },
    ];
    let scenario = Scenario::new(15, births, motion, sensor, region, 42)?;
    for f in simulate(&scenario)? {
        let detected: Vec<String> = f
            .provenance
            .iter()
            .filter_map(|o| match o {
                Origin::Target(l) => Some(l.to_string()),
                Origin::Clutter => None,
            })
            .collect();
        let clutter = f.provenance.iter().filter(|o| matches!(o, Origin::Clutter)).count();
        println!(
            "k={:>2} targets {} measurements {} detected {:?} clutter {clutter}",
            f.k,
            f.truth.len(),
            f.measurements.len(),
            detected
        );
    }
    Ok(())
}
