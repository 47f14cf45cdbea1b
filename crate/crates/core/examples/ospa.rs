//! OSPA distances between small point sets, including the cardinality
//! penalty and the effect of the cutoff.

use nalgebra::DVector;
use rfstrack::metrics::{ospa, OspaParams};

fn p(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

fn main() -> rfstrack::Result<()> {
    let truth = vec![p(0.0, 0.0), p(10.0, 0.0)];
    let cases = [
        ("exact", vec![p(10.0, 0.0), p(0.0, 0.0)]),
        ("small error", vec![p(0.5, 0.0), p(10.0, 1.0)]),
        ("one missed", vec![p(0.2, 0.1)]),
        ("one false", vec![p(0.0, 0.0), p(10.0, 0.0), p(50.0, 50.0)]),
        ("empty", vec![]),
    ];
    for c in [2.0, 10.0] {
        let params = OspaParams::new(c, 1.0)?;
        println!("cutoff {c}, order 1");
        for (name, est) in &cases {
            println!("  {name:<12} {:.4}", ospa(&truth, est, &params));
        }
    }
    Ok(())
}
