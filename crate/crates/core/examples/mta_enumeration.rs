//! Enumerates measurement-to-track associations and checks their number
//! against the closed-form count.

use rfstrack::association::{enumerate_mtas, mta_count};

fn main() {
    println!("all MTAs for 2 tracks and 2 measurements (0 = missed):");
    for a in enumerate_mtas(2, 2) {
        println!("  {:?}  detections {}", a.assignments(), a.detections());
    }
    println!();
    println!("n\\m {}", (0..=5).map(|m| format!("{m:>6}")).collect::<String>());
    for n in 0..=5 {
        let row: String = (0..=5)
            .map(|m| {
                let count = mta_count(n, m);
                assert_eq!(count, enumerate_mtas(n, m).count() as u128);
                format!("{count:>6}")
            })
            .collect();
        println!("{n:>3} {row}");
    }
}
