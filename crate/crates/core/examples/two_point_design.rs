//! A wide uniform weight makes the one-point design sub-optimal; the
//! multiplicative algorithm finds a symmetric two-point design instead.
use gpcm_design::criteria::{criterion_value, sup_sensitivity, CriterionKind, DesignMeasure, DesignRegion};
use gpcm_design::search::{optimize_design, support_clusters, CandidateSet};
use gpcm_design::solvers::critical_scale;
use gpcm_design::weights::{Family, WeightDistribution};

fn main() -> gpcm_design::Result<()> {
    let kind = CriterionKind::Psi0;
    let s = 1.5 * critical_scale(Family::Uniform, kind, 1.0)?;
    let w = WeightDistribution::uniform(0.0, s)?;
    let region = DesignRegion::new(vec![(-8.0, 8.0)], vec![(1.0, 1.0)])?;

    let one_point = DesignMeasure::locally_optimal(&[1.0], 0.0)?;
    let sup = sup_sensitivity(&one_point, &w, kind, &region, 161)?;
    println!("one-point design: psi0 = {:.6}, sup phi = {:.4}", criterion_value(&one_point, &w, kind)?, sup.value);

    let candidates = CandidateSet::grid(&region, 161)?;
    let r = optimize_design(&candidates, &w, kind, 50_000, 2e-4)?;
    println!(
        "optimised over {} candidates: psi0 = {:.6}, sup phi = {:.2e} after {} iterations",
        candidates.len(),
        r.criterion,
        r.sup_sensitivity,
        r.iterations
    );
    for c in support_clusters(&r.design, 0.2, 1e-2) {
        println!("  tau = {:+.4}  weight = {:.4}  ({} grid points)", c.thresholds[0], c.weight, c.points);
    }
    Ok(())
}
