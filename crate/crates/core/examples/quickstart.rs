//! The library example from the README.
use gpcm_design::criteria::{CriterionKind, DesignMeasure, DesignRegion, sup_sensitivity};
use gpcm_design::solvers::{critical_scale, optimal_alpha};
use gpcm_design::weights::{Family, WeightDistribution};

fn main() -> gpcm_design::Result<()> {
    // Largest normal prior sd for which a one-point design can be psi0-optimal.
    let s0 = critical_scale(Family::Normal, CriterionKind::Psi0, 1.0)?;

    // Best discrimination for a one-point design under a logistic prior.
    let w = WeightDistribution::logistic(0.0, 1.0)?;
    let alpha = optimal_alpha(&w, CriterionKind::Psi0)?;

    // Certify the locally optimal two-step design over a threshold grid.
    let design = DesignMeasure::locally_optimal(&[1.0, 1.0], 0.0)?;
    let region = DesignRegion::thresholds(&[1.0, 1.0], 12.0)?;
    let w = WeightDistribution::normal(0.0, s0 / 2.0)?;
    let sup = sup_sensitivity(&design, &w, CriterionKind::Psi0, &region, 201)?;
    println!("s0 = {s0:.4}, alpha* = {:.4}, sup phi = {:.2e}", alpha.value, sup.value);
    Ok(())
}
