//! Design measures serialise to JSON and can be read back by the CLI.
use gpcm_design::criteria::{criterion_value, CriterionKind, DesignMeasure, LimitItem};
use gpcm_design::gpcm::ItemParams;
use gpcm_design::weights::WeightDistribution;

fn main() -> gpcm_design::Result<()> {
    let design = DesignMeasure::normalized(vec![
        (ItemParams::new(vec![-1.5, 0.5], vec![1.0, 1.0])?.into(), 1.0),
        (LimitItem::new(vec![1.0, 1.0], 0.8)?.into(), 2.0),
    ])?;
    let text = serde_json::to_string_pretty(&design)?;
    println!("{text}");
    let back: DesignMeasure = serde_json::from_str(&text)?;
    let w: WeightDistribution = "logistic:0:0.7".parse()?;
    for kind in CriterionKind::ALL {
        println!("{kind} under {w}: {:.8}", criterion_value(&back, &w, kind)?);
    }
    Ok(())
}
