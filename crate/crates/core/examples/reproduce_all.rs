//! Runs every reproduction check and prints one line per criterion.
use gpcm_design::reproduce::run_criterion;

fn main() -> gpcm_design::Result<()> {
    for id in 1..=10 {
        let start = std::time::Instant::now();
        let outcome = run_criterion(id)?;
        println!("{}  ({:.1}s)", outcome.summary(), start.elapsed().as_secs_f64());
    }
    Ok(())
}
