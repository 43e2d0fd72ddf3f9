//! Runs every acceptance criterion and prints one PASS/FAIL line each.

mod common;

use std::time::Instant;

use common::Check;

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradients", common::criterion_1),
        ("prox operators", common::criterion_2),
        ("optimizer", common::criterion_3),
        ("loss consistency", common::criterion_4),
        ("evaluation identities", common::criterion_5),
        ("diagnostics", common::criterion_6),
        ("regression rate", common::criterion_7),
        ("classification rate", common::criterion_8),
        ("rate tables", common::criterion_9),
        ("determinism", common::criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS [{secs:.1}s] {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {} {name}: FAIL [{secs:.1}s] {reason}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
