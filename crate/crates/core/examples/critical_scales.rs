//! Critical weight scales and the necessary-condition report.
use gpcm_design::criteria::check_necessary_conditions;
use gpcm_design::solvers::critical_scales;
use gpcm_design::weights::{Family, WeightDistribution};

fn main() -> gpcm_design::Result<()> {
    for family in Family::ALL {
        let s = critical_scales(family, 1.0)?;
        println!("{family:>8}: s_-1 = {:.6}  s_0 = {:.6}", s.s_minus1, s.s_0);
    }
    // Between the two critical scales only the psi0 condition holds.
    let w = WeightDistribution::normal(0.0, 1.4)?;
    let r = check_necessary_conditions(1.0, &w)?;
    println!(
        "\n{w}: psi0 integral {:.4} ({}), psi-1 integral {:.4} ({})",
        r.psi0_integral,
        if r.psi0_satisfied { "holds" } else { "violated" },
        r.psi_minus1_integral,
        if r.psi_minus1_satisfied { "holds" } else { "violated" }
    );
    Ok(())
}
