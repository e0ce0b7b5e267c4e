//! Category probabilities and Fisher information of a three-step item.
use gpcm_design::gpcm::{category_probabilities, fisher_information, max_fisher_information, Ability, ItemParams};

fn main() -> gpcm_design::Result<()> {
    let item = ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3])?;
    let best = max_fisher_information(item.a_total())?;
    println!("theta  probabilities                 M(theta)  efficiency loss");
    for t in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let theta = Ability::new(t)?;
        let p = category_probabilities(theta, &item);
        let m = fisher_information(theta, &item);
        println!("{t:>5}  {:.3?}  {m:.4}    {:.2}", p.as_slice(), best / m);
    }
    Ok(())
}
