//! The large-`c` family of thresholds approaches the information bound A^2/4.
use gpcm_design::gpcm::{
    approx_locally_optimal_item, fisher_information, is_in_symmetry_class, max_fisher_information, Ability,
};

fn main() -> gpcm_design::Result<()> {
    let alphas = [1.0, 0.5, 1.5];
    let bound = max_fisher_information(alphas.iter().sum())?;
    for c in [0.5, 1.0, 2.0, 5.0, 10.0, 40.0] {
        let item = approx_locally_optimal_item(c, &alphas)?;
        let m = fisher_information(Ability::new(0.0)?, &item);
        println!(
            "c = {c:>4}: tau = {:?}  M(0) = {m:.10}  gap = {:.2e}  symmetric: {}",
            item.thresholds(),
            bound - m,
            is_in_symmetry_class(&item)
        );
    }
    Ok(())
}
