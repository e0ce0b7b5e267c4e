//! Sensitivity grids over two free thresholds, and a multiplicative
//! algorithm for design measures on a finite candidate set.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    evaluate_criterion, grid_values, CriterionKind, DesignMeasure, DesignPoint, DesignRegion,
    SensitivityContext,
};
use crate::error::{Error, Result};
use crate::gpcm::ItemParams;
use crate::numeric::format_sig17;
use crate::weights::{self, WeightDistribution};

/// Smallest resolution accepted by [`sensitivity_grid`].
pub const MIN_GRID_RESOLUTION: usize = 11;
/// Candidate weights below this are dropped from the returned design.
pub const PRUNE_THRESHOLD: f64 = 1e-6;

/// `phi_v` over a rectangular grid of `(tau_1, tau_2)` with fixed discriminations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub tau1_axis: Vec<f64>,
    pub tau2_axis: Vec<f64>,
    /// `values[i][k]` is the sensitivity at `(tau1_axis[i], tau2_axis[k])`.
    pub values: Vec<Vec<f64>>,
    pub metadata: GridMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub weight: WeightDistribution,
    pub kind: CriterionKind,
    pub alpha: Vec<f64>,
    pub design: DesignMeasure,
    pub resolution: usize,
    pub sup: f64,
    pub argmax: (f64, f64),
    /// Whether the grid maximum sits on the edge of the region.
    pub argmax_on_boundary: bool,
    pub boundary_max: f64,
    /// Whether every node met the quadrature tolerance.
    pub converged: bool,
}

impl SensitivityGrid {
    pub fn sup(&self) -> f64 {
        self.metadata.sup
    }

    /// Writes `tau1,tau2,phi` rows, `tau1` outermost, at 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "tau1,tau2,phi")?;
        let fmt = |x: f64| format_sig17(x).unwrap_or_else(|| "nan".into());
        for (t1, row) in self.tau1_axis.iter().zip(&self.values) {
            for (t2, v) in self.tau2_axis.iter().zip(row) {
                writeln!(out, "{},{},{}", fmt(*t1), fmt(*t2), fmt(*v))?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

pub fn sensitivity_grid(
    design: &DesignMeasure,
    w: &WeightDistribution,
    kind: CriterionKind,
    region: &DesignRegion,
    resolution: usize,
) -> Result<SensitivityGrid> {
    if region.steps() != 2 || design.steps() != 2 {
        return Err(Error::invalid("sensitivity grids need two-step items"));
    }
    let alpha = region
        .fixed_alphas()
        .ok_or_else(|| Error::invalid("sensitivity grids need fixed discriminations"))?;
    if region.tau_bounds().iter().any(|(lo, hi)| lo >= hi) {
        return Err(Error::invalid("both thresholds must be free in a sensitivity grid"));
    }
    if resolution < MIN_GRID_RESOLUTION {
        return Err(Error::invalid(format!(
            "grid resolution must be at least {MIN_GRID_RESOLUTION}, got {resolution}"
        )));
    }
    let ctx = SensitivityContext::new(design, w, kind)?;
    let (axes, flat) = grid_values(&ctx, region, resolution)?;
    if let Some(bad) = flat.iter().find(|s| !s.value.is_finite()) {
        return Err(Error::Solver(format!("non-finite sensitivity {} on the grid", bad.value)));
    }
    let n = axes[1].len();
    let values: Vec<Vec<f64>> = flat.chunks(n).map(|r| r.iter().map(|s| s.value).collect()).collect();
    let (mut bi, mut bk) = (0, 0);
    let mut boundary_max = f64::NEG_INFINITY;
    for (i, row) in values.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            if *v > values[bi][bk] {
                bi = i;
                bk = k;
            }
            if i == 0 || k == 0 || i + 1 == values.len() || k + 1 == n {
                boundary_max = boundary_max.max(*v);
            }
        }
    }
    let metadata = GridMetadata {
        weight: *w,
        kind,
        alpha,
        design: design.clone(),
        resolution,
        sup: values[bi][bk],
        argmax: (axes[0][bi], axes[1][bk]),
        argmax_on_boundary: bi == 0 || bk == 0 || bi + 1 == values.len() || bk + 1 == n,
        boundary_max,
        converged: flat.iter().all(|s| s.converged),
    };
    let mut axes = axes.into_iter();
    Ok(SensitivityGrid {
        tau1_axis: axes.next().expect("two axes"),
        tau2_axis: axes.next().expect("two axes"),
        values,
        metadata,
    })
}

/// A finite set of candidate items sharing one step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    items: Vec<ItemParams>,
}

impl CandidateSet {
    pub fn new(items: Vec<ItemParams>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("candidate set is empty"))?;
        if items.iter().any(|i| i.steps() != first.steps()) {
            return Err(Error::invalid("candidates must share one step count"));
        }
        Ok(CandidateSet { items })
    }

    /// Every node of a `resolution`-per-axis grid over the region's free coordinates.
    pub fn grid(region: &DesignRegion, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid("candidate grid resolution must be at least 2"));
        }
        let j = region.steps();
        let bounds: Vec<(f64, f64)> = region
            .tau_bounds()
            .iter()
            .chain(region.alpha_bounds())
            .copied()
            .collect();
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|(lo, hi)| {
                if lo < hi {
                    crate::criteria::axis(*lo, *hi, resolution)
                } else {
                    vec![*lo]
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        if total > 1_000_000 {
            return Err(Error::invalid("candidate grid is too large"));
        }
        let items = (0..total)
            .map(|flat| {
                let mut rest = flat;
                let mut coords = vec![0.0; axes.len()];
                for d in (0..axes.len()).rev() {
                    coords[d] = axes[d][rest % axes[d].len()];
                    rest /= axes[d].len();
                }
                ItemParams::new(coords[..j].to_vec(), coords[j..].to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        CandidateSet::new(items)
    }

    pub fn items(&self) -> &[ItemParams] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub design: DesignMeasure,
    /// Sup of `phi_v` over the candidates for the returned (pruned) design.
    pub sup_sensitivity: f64,
    /// Whether `sup_sensitivity <= tol`.
    pub optimal: bool,
    pub iterations: usize,
    pub criterion: f64,
    /// Criterion after each accepted iteration, starting from uniform weights.
    pub history: Vec<f64>,
    /// Quadrature nodes used by the fixed kernel.
    pub nodes: usize,
}

/// Multiplicative weight algorithm `w <- w (1 + phi)` on a fixed candidate
/// set, halving the step whenever the criterion would decrease.
pub fn optimize_design(
    candidates: &CandidateSet,
    w: &WeightDistribution,
    kind: CriterionKind,
    max_iter: usize,
    tol: f64,
) -> Result<OptimizationResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let c = candidates.len();
    let uniform = DesignMeasure::normalized(
        candidates
            .items()
            .iter()
            .map(|i| (DesignPoint::Item(i.clone()), 1.0))
            .collect(),
    )?;
    let start = evaluate_criterion(&uniform, w, kind).map_err(|e| match e {
        Error::DegenerateDesign { theta } => Error::DegeneratePool(format!(
            "no candidate carries information at theta = {theta}"
        )),
        other => other,
    })?;
    let rule = weights::quadrature(w, start.nodes)?;
    let (nodes, q): (Vec<f64>, Vec<f64>) = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .filter(|(_, q)| **q > 0.0)
        .map(|(x, q)| (*x, *q))
        .unzip();
    let kernel: Vec<Vec<f64>> = candidates
        .items()
        .par_iter()
        .map(|item| nodes.iter().map(|t| item.information(*t)).collect())
        .collect();

    let info = |wts: &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; nodes.len()];
        for (wc, row) in wts.iter().zip(&kernel) {
            if *wc > 0.0 {
                for (mi, k) in m.iter_mut().zip(row) {
                    *mi += wc * k;
                }
            }
        }
        m
    };
    let value = |m: &[f64]| -> f64 {
        q.iter()
            .zip(m)
            .map(|(q, m)| match kind {
                CriterionKind::Psi0 => q * m.ln(),
                CriterionKind::PsiMinus1 => -q / m,
            })
            .sum()
    };
    let phis = |m: &[f64]| -> Vec<f64> {
        let a: Vec<f64> = q
            .iter()
            .zip(m)
            .map(|(q, m)| match kind {
                CriterionKind::Psi0 => q / m,
                CriterionKind::PsiMinus1 => q / (m * m),
            })
            .collect();
        let denom: f64 = match kind {
            CriterionKind::Psi0 => q.iter().sum(),
            CriterionKind::PsiMinus1 => q.iter().zip(m).map(|(q, m)| q / m).sum(),
        };
        kernel
            .par_iter()
            .map(|row| row.iter().zip(&a).map(|(k, a)| k * a).sum::<f64>() / denom - 1.0)
            .collect()
    };

    let mut wts = vec![1.0 / c as f64; c];
    let mut m = info(&wts);
    let mut current = value(&m);
    let mut history = vec![current];
    let mut iterations = 0;
    while iterations < max_iter {
        let phi = phis(&m);
        let sup = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if sup <= tol {
            break;
        }
        let target: Vec<f64> = wts.iter().zip(&phi).map(|(w, p)| w * (1.0 + p).max(0.0)).collect();
        let total: f64 = target.iter().sum();
        let target: Vec<f64> = target.iter().map(|t| t / total).collect();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = wts.iter().zip(&target).map(|(w, t)| w + step * (t - w)).collect();
            let m_trial = info(&trial);
            let v = value(&m_trial);
            if v >= current {
                accepted = Some((trial, m_trial, v));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, m_trial, v)) = accepted else {
            break;
        };
        wts = trial;
        m = m_trial;
        current = v;
        history.push(v);
        iterations += 1;
    }

    let kept: Vec<(DesignPoint, f64)> = candidates
        .items()
        .iter()
        .zip(&wts)
        .filter(|(_, w)| **w >= PRUNE_THRESHOLD)
        .map(|(i, w)| (DesignPoint::Item(i.clone()), *w))
        .collect();
    let design = DesignMeasure::normalized(kept)?;
    let ctx = SensitivityContext::new(&design, w, kind)?;
    let sup = candidates
        .items()
        .par_iter()
        .map(|i| ctx.evaluate(i).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OptimizationResult {
        criterion: evaluate_criterion(&design, w, kind)?.value,
        design,
        sup_sensitivity: sup,
        optimal: sup <= tol,
        iterations,
        history,
        nodes: start.nodes,
    })
}

/// Group of nearby support points of a design, summarised by their total
/// weight and weighted-mean thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCluster {
    pub thresholds: Vec<f64>,
    pub weight: f64,
    pub points: usize,
}

/// Groups the item support points of `design` into modes.
///
/// Points carrying at least `min_relative_weight` times the largest weight
/// seed the modes: seeds within `gap` (max-norm on thresholds) of each other,
/// in lexicographic order, share a mode. Every other point joins the nearest
/// mode. Multiplicative algorithms stop with mass smeared over neighbouring
/// grid nodes; this recovers the underlying support.
pub fn support_clusters(design: &DesignMeasure, gap: f64, min_relative_weight: f64) -> Vec<SupportCluster> {
    let mut pts: Vec<(Vec<f64>, f64)> = design
        .points()
        .iter()
        .filter_map(|p| match &p.point {
            DesignPoint::Item(i) => Some((i.thresholds().to_vec(), p.weight)),
            DesignPoint::Limit(_) => None,
        })
        .collect();
    if pts.is_empty() {
        return Vec::new();
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite thresholds"));
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let peak = pts.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    let mut label = vec![usize::MAX; pts.len()];
    let mut n_modes = 0;
    let mut last_seed: Option<usize> = None;
    for k in 0..pts.len() {
        if pts[k].1 < min_relative_weight * peak {
            continue;
        }
        match last_seed {
            Some(j) if dist(&pts[j].0, &pts[k].0) <= gap => label[k] = label[j],
            _ => {
                label[k] = n_modes;
                n_modes += 1;
            }
        }
        last_seed = Some(k);
    }
    let seeds: Vec<usize> = (0..pts.len()).filter(|k| label[*k] != usize::MAX).collect();
    for k in 0..pts.len() {
        if label[k] == usize::MAX {
            let nearest = seeds
                .iter()
                .min_by(|a, b| {
                    dist(&pts[**a].0, &pts[k].0).total_cmp(&dist(&pts[**b].0, &pts[k].0))
                })
                .expect("the heaviest point is a seed");
            label[k] = label[*nearest];
        }
    }
    let dim = pts[0].0.len();
    (0..n_modes)
        .map(|m| {
            let members: Vec<&(Vec<f64>, f64)> =
                pts.iter().zip(&label).filter(|(_, l)| **l == m).map(|(p, _)| p).collect();
            let weight: f64 = members.iter().map(|(_, w)| w).sum();
            SupportCluster {
                thresholds: (0..dim)
                    .map(|d| members.iter().map(|(t, w)| t[d] * w).sum::<f64>() / weight)
                    .collect(),
                weight,
                points: members.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::criterion_value;
    use crate::solvers::critical_scale;
    use crate::weights::Family;

    fn limit_design() -> DesignMeasure {
        DesignMeasure::locally_optimal(&[1.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn grid_shape_and_csv() {
        let w = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let region = DesignRegion::thresholds(&[1.0, 1.0], 12.0).unwrap();
        let g = sensitivity_grid(&limit_design(), &w, CriterionKind::Psi0, &region, 11).unwrap();
        assert_eq!(g.values.len(), 11);
        assert!(g.values.iter().all(|r| r.len() == 11));
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "tau1,tau2,phi");
        assert_eq!(lines.len(), 1 + 121);
        assert!(lines[1].starts_with("-12.000000000000000,-12.000000000000000,"));
        let second: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(second[0], -12.0);
        assert!((second[1] + 9.6).abs() < 1e-14);
        assert_eq!(second[2], g.values[0][1]);
        assert!(sensitivity_grid(&limit_design(), &w, CriterionKind::Psi0, &region, 10).is_err());
    }

    #[test]
    fn grid_is_symmetric_under_reflection() {
        let region = DesignRegion::thresholds(&[1.0, 1.0], 12.0).unwrap();
        for family in Family::ALL {
            let w = WeightDistribution::new(family, 0.0, 0.6).unwrap();
            let g = sensitivity_grid(&limit_design(), &w, CriterionKind::Psi0, &region, 21).unwrap();
            let n = g.values.len();
            for i in 0..n {
                for k in 0..n {
                    // (tau1, tau2) -> (-tau2, -tau1)
                    let mirrored = g.values[n - 1 - k][n - 1 - i];
                    assert!((g.values[i][k] - mirrored).abs() < 1e-8, "{family}");
                }
            }
        }
    }

    #[test]
    fn own_point_is_approximately_zero() {
        let w = WeightDistribution::normal(0.0, 0.4).unwrap();
        let item = ItemParams::new(vec![1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let d = DesignMeasure::one_point(item);
        let region = DesignRegion::thresholds(&[1.0, 1.0], 2.0).unwrap();
        let g = sensitivity_grid(&d, &w, CriterionKind::Psi0, &region, 21).unwrap();
        // (1, -1) is a grid node: index 15 on [-2, 2] with 21 nodes.
        assert_eq!(g.values[15][5], 0.0);
    }

    #[test]
    fn candidate_grid() {
        let region = DesignRegion::new(vec![(-1.0, 1.0)], vec![(1.0, 1.0)]).unwrap();
        let c = CandidateSet::grid(&region, 5).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.items()[2].thresholds(), &[0.0]);
        assert!(CandidateSet::new(vec![]).is_err());
    }

    #[test]
    fn small_scale_recovers_one_point_design() {
        let w = WeightDistribution::normal(0.0, 0.4).unwrap();
        let region = DesignRegion::new(vec![(-3.0, 3.0)], vec![(1.0, 1.0)]).unwrap();
        let c = CandidateSet::grid(&region, 61).unwrap();
        let r = optimize_design(&c, &w, CriterionKind::Psi0, 5000, 1e-4).unwrap();
        assert!(r.optimal, "{r:?}");
        let clusters = support_clusters(&r.design, 0.11, 1e-2);
        assert_eq!(clusters.len(), 1, "{clusters:?}");
        assert!(clusters[0].thresholds[0].abs() < 0.05);
        assert!(r.history.windows(2).all(|p| p[1] >= p[0] - 1e-12));
    }

    #[test]
    fn wide_uniform_gives_two_points() {
        let s0 = critical_scale(Family::Uniform, CriterionKind::Psi0, 1.0).unwrap();
        let w = WeightDistribution::uniform(0.0, 1.5 * s0).unwrap();
        let region = DesignRegion::new(vec![(-8.0, 8.0)], vec![(1.0, 1.0)]).unwrap();
        let c = CandidateSet::grid(&region, 161).unwrap();
        let r = optimize_design(&c, &w, CriterionKind::Psi0, 20_000, 1e-3).unwrap();
        assert!(r.optimal, "sup {}", r.sup_sensitivity);
        let clusters = support_clusters(&r.design, 0.21, 1e-2);
        assert_eq!(clusters.len(), 2, "{clusters:?}");
        let (a, b) = (&clusters[0], &clusters[1]);
        assert!((a.thresholds[0] + b.thresholds[0]).abs() < 0.05);
        assert!((a.weight - 0.5).abs() < 0.02);
        let one_point = DesignMeasure::one_point(ItemParams::two_pl(0.0, 1.0).unwrap());
        assert!(r.criterion > criterion_value(&one_point, &w, CriterionKind::Psi0).unwrap());
    }

    #[test]
    fn dominated_candidate_gets_no_weight() {
        let w = WeightDistribution::normal(0.0, 0.5).unwrap();
        let mut items: Vec<ItemParams> = (-10..=10)
            .map(|k| ItemParams::two_pl(k as f64 * 0.2, 1.0).unwrap())
            .collect();
        items.push(ItemParams::two_pl(40.0, 1.0).unwrap());
        let c = CandidateSet::new(items).unwrap();
        let r = optimize_design(&c, &w, CriterionKind::PsiMinus1, 5000, 1e-4).unwrap();
        assert!(r.design.points().iter().all(|p| match &p.point {
            DesignPoint::Item(i) => i.thresholds()[0] < 39.0,
            DesignPoint::Limit(_) => true,
        }));
    }

    #[test]
    fn degenerate_pool() {
        let w = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let c = CandidateSet::new(vec![ItemParams::two_pl(1e4, 1.0).unwrap()]).unwrap();
        assert!(matches!(
            optimize_design(&c, &w, CriterionKind::Psi0, 10, 1e-3),
            Err(Error::DegeneratePool(_))
        ));
    }
}
