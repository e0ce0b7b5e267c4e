//! Acceptance table: one PASS/FAIL line per criterion, with every check
//! underneath. Exits non-zero when any criterion fails.

use std::time::Instant;

use gpcm_design::reproduce::{run_criterion, TITLES};

fn main() {
    let mut failed = Vec::new();
    for id in 1..=TITLES.len() as u8 {
        let start = Instant::now();
        match run_criterion(id) {
            Ok(outcome) => {
                println!(
                    "{} criterion {:>2}: {} ({:.1}s)",
                    if outcome.passed { "PASS" } else { "FAIL" },
                    id,
                    outcome.title,
                    start.elapsed().as_secs_f64()
                );
                for c in &outcome.checks {
                    println!("       {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
                }
                if !outcome.passed {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("FAIL criterion {:>2}: {} (error: {e})", id, TITLES[id as usize - 1]);
                failed.push(id);
            }
        }
    }
    let total = TITLES.len();
    println!("\n{}/{total} acceptance criteria passed", total - failed.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
