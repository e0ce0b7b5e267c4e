//! Writes sensitivity grids of the one-point design as CSV for contour plots.
//!
//! `cargo run --release --example sensitivity_contours -- OUTDIR`
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use gpcm_design::criteria::{CriterionKind, DesignMeasure, DesignRegion};
use gpcm_design::search::sensitivity_grid;
use gpcm_design::solvers::critical_scale;
use gpcm_design::weights::{Family, WeightDistribution};

fn main() -> gpcm_design::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let design = DesignMeasure::locally_optimal(&[1.0, 1.0], 0.0)?;
    let region = DesignRegion::thresholds(&[1.0, 1.0], 12.0)?;
    let kind = CriterionKind::Psi0;
    let s0 = critical_scale(Family::Uniform, kind, 2.0)?;
    for (label, s) in [("at", s0), ("above", 1.5 * s0)] {
        let w = WeightDistribution::uniform(0.0, s)?;
        let grid = sensitivity_grid(&design, &w, kind, &region, 101)?;
        let path = dir.join(format!("uniform_psi0_{label}.csv"));
        grid.write_csv(BufWriter::new(File::create(&path)?))?;
        let m = &grid.metadata;
        println!(
            "{}: s = {s:.4}, sup = {:.3e} at {:?}{}",
            path.display(),
            m.sup,
            m.argmax,
            if m.argmax_on_boundary { " (boundary)" } else { "" }
        );
    }
    Ok(())
}
