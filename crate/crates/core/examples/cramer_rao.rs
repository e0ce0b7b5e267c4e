//! Empirical MLE variance against the inverse Fisher information.
use gpcm_design::criteria::DesignMeasure;
use gpcm_design::gpcm::{approx_locally_optimal_item, Ability, ItemParams};
use gpcm_design::sim::{cramer_rao_check, SimConfig};

fn main() -> gpcm_design::Result<()> {
    let standard = ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3])?;
    for theta in [0.0, -1.0] {
        let optimal = approx_locally_optimal_item(40.0, &[1.0; 3])?.shifted(theta)?;
        let mut variances = Vec::new();
        for (name, item) in [("standard", standard.clone()), ("optimal", optimal)] {
            let cfg = SimConfig::new(42, 200, 2000, Ability::new(theta)?, DesignMeasure::one_point(item))?;
            let r = cramer_rao_check(&cfg)?;
            println!(
                "theta = {theta:>4} {name:>8}: var = {:.5}  bound = {:.5}  ratio = {:.3}  failed = {}",
                r.empirical_variance,
                r.predicted_variance,
                r.ratio,
                r.n_total - r.n_converged
            );
            variances.push(r.empirical_variance);
        }
        println!("                 improvement factor {:.3}", variances[0] / variances[1]);
    }
    Ok(())
}
