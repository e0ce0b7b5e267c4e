//! Optimal one-point discrimination against the necessary-condition bound.
use gpcm_design::criteria::CriterionKind;
use gpcm_design::solvers::{alpha_plus, critical_scale, one_point_never_bayes_optimal, optimal_alpha, AlphaBound};
use gpcm_design::weights::{Family, WeightDistribution};

fn main() -> gpcm_design::Result<()> {
    for family in Family::ALL {
        for kind in CriterionKind::ALL {
            let s = critical_scale(family, kind, 1.0)?;
            let w = WeightDistribution::new(family, 0.0, s)?;
            let star = optimal_alpha(&w, kind)?;
            let plus = alpha_plus(&w, kind)?;
            println!("{family:>8} {kind:>5} at s = {s:.4}: alpha* = {:.4}, alpha+ = {:.4}", star.value, plus.value);
        }
    }

    let table = one_point_never_bayes_optimal(Family::Uniform, CriterionKind::PsiMinus1, &[0.05, 1.5, 2.1773, 3.0])?;
    println!("\nuniform psi-1 evidence:");
    for row in &table.rows {
        let bound = match &row.alpha_plus {
            Some(AlphaBound::Value { value }) => format!("{value:.4}"),
            Some(AlphaBound::AtCap { cap }) => format!("beyond {cap}"),
            None => "-".into(),
        };
        println!("  s = {:<6} alpha* = {:?} alpha+ = {bound}  {:?}", row.scale, row.alpha_star, row.verdict);
    }
    Ok(())
}
