//! Bayesian design criteria, sensitivity functions and the necessary
//! conditions for one-point designs.
//!
//! For a design measure `xi` the information is `M(theta, xi) = sum_i w_i M(theta, x_i)`.
//! The two criteria are `psi_0 = E[log M]` and `psi_-1 = -E[1 / M]`, with the
//! expectation taken under a [`WeightDistribution`]. Their sensitivity
//! function in direction of a candidate item `x` is
//!
//! ```text
//! phi_v(x, xi) = E[M(xi)^v M(x) / M(xi)] / E[M(xi)^v] - 1
//! ```
//!
//! and `xi` is Bayes optimal iff `phi_v <= 0` over the whole design region.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpcm::{Ability, Buf, CumulativeDiscriminations, ItemParams};
use crate::numeric::{inverse_logistic_variance, logistic, logistic_variance};
use crate::weights::{self, Expectation, QuadratureRule, WeightDistribution, EXPECT_RTOL};

/// Tolerance on the weight total of a design measure.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A design whose sup sensitivity does not exceed this is reported optimal.
pub const OPTIMALITY_TOL: f64 = 1e-3;

/// Default half-width of the threshold box searched by sensitivity grids.
pub const DEFAULT_TAU_HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    #[serde(rename = "psi0")]
    Psi0,
    #[serde(rename = "psi-1")]
    PsiMinus1,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 2] = [CriterionKind::PsiMinus1, CriterionKind::Psi0];

    /// The exponent `v` in `phi_v`.
    pub fn v(self) -> i32 {
        match self {
            CriterionKind::Psi0 => 0,
            CriterionKind::PsiMinus1 => -1,
        }
    }

    /// Bound in the one-point necessary condition: `E[pi_J pi_0] >= 1/6` for
    /// `psi_0`, `E[1 / (pi_J pi_0)] <= 6` for `psi_-1`.
    pub fn condition_threshold(self) -> f64 {
        match self {
            CriterionKind::Psi0 => 1.0 / 6.0,
            CriterionKind::PsiMinus1 => 6.0,
        }
    }

    /// Whether a necessary-condition integral value satisfies the bound.
    pub fn condition_holds(self, integral: f64) -> bool {
        match self {
            CriterionKind::Psi0 => integral >= 1.0 / 6.0,
            CriterionKind::PsiMinus1 => integral <= 6.0,
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            CriterionKind::Psi0 => "psi0",
            CriterionKind::PsiMinus1 => "psi-1",
        })
    }
}

impl FromStr for CriterionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psi0" | "0" => Ok(CriterionKind::Psi0),
            "psi-1" | "psim1" | "psi_minus1" | "-1" => Ok(CriterionKind::PsiMinus1),
            other => Err(Error::invalid(format!(
                "unknown criterion '{other}' (expected psi0 or psi-1)"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimit {
    alpha: Vec<f64>,
    limit_at: f64,
}

/// The locally optimal item for ability `location`, taken at the limit of
/// [`crate::gpcm::approx_locally_optimal_item`] as `c` grows: all mass sits on
/// the two extreme categories, `pi_J = logistic(A_J (theta - location))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLimit", into = "RawLimit")]
pub struct LimitItem {
    discriminations: Vec<f64>,
    cumulative: CumulativeDiscriminations,
    location: f64,
}

impl TryFrom<RawLimit> for LimitItem {
    type Error = Error;
    fn try_from(raw: RawLimit) -> Result<Self> {
        LimitItem::new(raw.alpha, raw.limit_at)
    }
}

impl From<LimitItem> for RawLimit {
    fn from(l: LimitItem) -> Self {
        RawLimit {
            alpha: l.discriminations,
            limit_at: l.location,
        }
    }
}

impl LimitItem {
    pub fn new(discriminations: Vec<f64>, location: f64) -> Result<Self> {
        // Validation is shared with ordinary items.
        let probe = ItemParams::new(vec![0.0; discriminations.len()], discriminations)?;
        if !location.is_finite() {
            return Err(Error::invalid(format!("location must be finite, got {location}")));
        }
        Ok(LimitItem {
            cumulative: probe.cumulative().clone(),
            discriminations: probe.discriminations().to_vec(),
            location,
        })
    }

    pub fn discriminations(&self) -> &[f64] {
        &self.discriminations
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn a_total(&self) -> f64 {
        self.cumulative.total()
    }

    /// A finite item with the limit's symmetry, thresholds `(alpha_J c, 0, ..., -alpha_1 c) + location`.
    pub fn approximate(&self, c: f64) -> Result<ItemParams> {
        crate::gpcm::approx_locally_optimal_item(c, &self.discriminations)?.shifted(self.location)
    }
}

/// A support point of a design measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignPoint {
    Item(ItemParams),
    Limit(LimitItem),
}

impl From<ItemParams> for DesignPoint {
    fn from(item: ItemParams) -> Self {
        DesignPoint::Item(item)
    }
}

impl From<LimitItem> for DesignPoint {
    fn from(l: LimitItem) -> Self {
        DesignPoint::Limit(l)
    }
}

impl DesignPoint {
    pub fn steps(&self) -> usize {
        self.discriminations().len()
    }

    pub fn discriminations(&self) -> &[f64] {
        match self {
            DesignPoint::Item(i) => i.discriminations(),
            DesignPoint::Limit(l) => &l.discriminations,
        }
    }

    pub fn cumulative(&self) -> &CumulativeDiscriminations {
        match self {
            DesignPoint::Item(i) => i.cumulative(),
            DesignPoint::Limit(l) => &l.cumulative,
        }
    }

    pub fn a_total(&self) -> f64 {
        self.cumulative().total()
    }

    pub(crate) fn probs(&self, theta: f64) -> Buf {
        match self {
            DesignPoint::Item(i) => i.probs(theta),
            DesignPoint::Limit(l) => {
                let x = l.a_total() * (theta - l.location);
                let mut p = Buf::from_elem(0.0, l.discriminations.len() + 1);
                p[0] = logistic(-x);
                p[l.discriminations.len()] = logistic(x);
                p
            }
        }
    }

    pub(crate) fn information(&self, theta: f64) -> f64 {
        match self {
            DesignPoint::Item(i) => i.information(theta),
            DesignPoint::Limit(l) => {
                let a = l.a_total();
                a * a * logistic_variance(a * (theta - l.location))
            }
        }
    }

    /// The same point moved by `delta` on the ability scale.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Ok(match self {
            DesignPoint::Item(i) => DesignPoint::Item(i.shifted(delta)?),
            DesignPoint::Limit(l) => {
                DesignPoint::Limit(LimitItem::new(l.discriminations.clone(), l.location + delta)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: DesignPoint,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    points: Vec<WeightedPoint>,
}

/// An approximate design: finitely many items with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DesignMeasure {
    points: Vec<WeightedPoint>,
}

impl TryFrom<RawMeasure> for DesignMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DesignMeasure::new(raw.points)
    }
}

impl From<DesignMeasure> for RawMeasure {
    fn from(d: DesignMeasure) -> Self {
        RawMeasure { points: d.points }
    }
}

impl DesignMeasure {
    pub fn new(points: Vec<WeightedPoint>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("a design measure needs at least one point"))?;
        let j = first.point.steps();
        let mut total = 0.0;
        for p in &points {
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(Error::invalid(format!(
                    "design weights must be positive, got {}",
                    p.weight
                )));
            }
            if p.point.steps() != j {
                return Err(Error::invalid(format!(
                    "mixed step counts in one design ({} and {})",
                    j,
                    p.point.steps()
                )));
            }
            total += p.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("design weights sum to {total}, not 1")));
        }
        Ok(DesignMeasure { points })
    }

    /// Builds a measure after dividing the weights by their sum.
    pub fn normalized(points: Vec<(DesignPoint, f64)>) -> Result<Self> {
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("design weights must have a positive finite sum"));
        }
        DesignMeasure::new(
            points
                .into_iter()
                .map(|(point, w)| WeightedPoint {
                    point,
                    weight: w / total,
                })
                .collect(),
        )
    }

    pub fn one_point(point: impl Into<DesignPoint>) -> Self {
        DesignMeasure {
            points: vec![WeightedPoint {
                point: point.into(),
                weight: 1.0,
            }],
        }
    }

    /// One-point design at the limiting locally optimal item for `location`.
    pub fn locally_optimal(alphas: &[f64], location: f64) -> Result<Self> {
        Ok(Self::one_point(LimitItem::new(alphas.to_vec(), location)?))
    }

    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.points[0].point.steps()
    }

    /// `lambda * self + (1 - lambda) * other`, keeping every point of both.
    pub fn mix(&self, other: &DesignMeasure, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid(format!("mixing weight must lie in (0, 1), got {lambda}")));
        }
        let scaled = |d: &DesignMeasure, f: f64| {
            d.points
                .iter()
                .map(move |p| (p.point.clone(), p.weight * f))
                .collect::<Vec<_>>()
        };
        let mut points = scaled(self, lambda);
        points.extend(scaled(other, 1.0 - lambda));
        DesignMeasure::normalized(points)
    }

    pub(crate) fn information(&self, theta: f64) -> f64 {
        self.points
            .iter()
            .map(|p| p.weight * p.point.information(theta))
            .sum()
    }
}

/// `sum_i w_i M(theta, x_i)`.
pub fn fisher_information_design(theta: Ability, design: &DesignMeasure) -> f64 {
    design.information(theta.value())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    tau: Vec<(f64, f64)>,
    alpha: Vec<(f64, f64)>,
}

/// Box of candidate items. A coordinate with equal bounds is held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion", into = "RawRegion")]
pub struct DesignRegion {
    tau: Vec<(f64, f64)>,
    alpha: Vec<(f64, f64)>,
}

impl TryFrom<RawRegion> for DesignRegion {
    type Error = Error;
    fn try_from(r: RawRegion) -> Result<Self> {
        DesignRegion::new(r.tau, r.alpha)
    }
}

impl From<DesignRegion> for RawRegion {
    fn from(r: DesignRegion) -> Self {
        RawRegion {
            tau: r.tau,
            alpha: r.alpha,
        }
    }
}

impl DesignRegion {
    pub fn new(tau: Vec<(f64, f64)>, alpha: Vec<(f64, f64)>) -> Result<Self> {
        if tau.is_empty() || tau.len() != alpha.len() {
            return Err(Error::invalid(format!(
                "region needs matching non-empty bounds, got {} tau and {} alpha",
                tau.len(),
                alpha.len()
            )));
        }
        for (lo, hi) in tau.iter().chain(&alpha) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bad region interval [{lo}, {hi}]")));
            }
        }
        if let Some((lo, _)) = alpha.iter().find(|(lo, _)| *lo <= 0.0) {
            return Err(Error::invalid(format!("discrimination bounds must be positive, got {lo}")));
        }
        Ok(DesignRegion { tau, alpha })
    }

    /// Thresholds free in `[-half_width, half_width]`, discriminations fixed.
    pub fn thresholds(alphas: &[f64], half_width: f64) -> Result<Self> {
        DesignRegion::new(
            vec![(-half_width, half_width); alphas.len()],
            alphas.iter().map(|a| (*a, *a)).collect(),
        )
    }

    pub fn steps(&self) -> usize {
        self.tau.len()
    }

    pub fn tau_bounds(&self) -> &[(f64, f64)] {
        &self.tau
    }

    pub fn alpha_bounds(&self) -> &[(f64, f64)] {
        &self.alpha
    }

    /// The region's discriminations when all of them are fixed.
    pub fn fixed_alphas(&self) -> Option<Vec<f64>> {
        self.alpha
            .iter()
            .map(|(lo, hi)| (lo == hi).then_some(*lo))
            .collect()
    }

    /// Indices into the concatenated `(tau, alpha)` vector that are free.
    fn free(&self) -> Vec<usize> {
        self.tau
            .iter()
            .chain(&self.alpha)
            .enumerate()
            .filter(|(_, (lo, hi))| lo < hi)
            .map(|(k, _)| k)
            .collect()
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        let j = self.steps();
        if k < j {
            self.tau[k]
        } else {
            self.alpha[k - j]
        }
    }

    fn base(&self) -> Vec<f64> {
        self.tau.iter().chain(&self.alpha).map(|(lo, _)| *lo).collect()
    }

    fn item(&self, coords: &[f64]) -> Result<ItemParams> {
        let j = self.steps();
        ItemParams::new(coords[..j].to_vec(), coords[j..].to_vec())
    }
}

/// Evenly spaced axis with `n` nodes including both ends.
pub(crate) fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// `psi_v(design)` with its quadrature diagnostics.
pub fn evaluate_criterion(
    design: &DesignMeasure,
    w: &WeightDistribution,
    kind: CriterionKind,
) -> Result<Expectation> {
    weights::try_expect(w, |theta| {
        let m = design.information(theta);
        if m <= 0.0 {
            return Err(Error::DegenerateDesign { theta });
        }
        Ok(match kind {
            CriterionKind::Psi0 => m.ln(),
            CriterionKind::PsiMinus1 => -1.0 / m,
        })
    })
}

pub fn criterion_value(
    design: &DesignMeasure,
    w: &WeightDistribution,
    kind: CriterionKind,
) -> Result<f64> {
    evaluate_criterion(design, w, kind).map(|e| e.value)
}

struct Level {
    nodes: Vec<f64>,
    /// `q_i M(xi, theta_i)^v`
    a: Vec<f64>,
    /// `M(xi, theta_i)`
    m: Vec<f64>,
    denominator: f64,
}

/// Precomputed design-side quantities for evaluating `phi_v` at many candidates.
pub struct SensitivityContext {
    levels: Vec<Level>,
    kind: CriterionKind,
    steps: usize,
}

/// Sensitivity at one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub value: f64,
    pub nodes: usize,
    pub converged: bool,
}

impl SensitivityContext {
    pub fn new(design: &DesignMeasure, w: &WeightDistribution, kind: CriterionKind) -> Result<Self> {
        let levels = weights::adaptive_levels(w)
            .map(|rule| Self::level(design, &rule, kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(SensitivityContext {
            levels,
            kind,
            steps: design.steps(),
        })
    }

    fn level(design: &DesignMeasure, rule: &QuadratureRule, kind: CriterionKind) -> Result<Level> {
        let mut level = Level {
            nodes: Vec::with_capacity(rule.len()),
            a: Vec::with_capacity(rule.len()),
            m: Vec::with_capacity(rule.len()),
            denominator: 0.0,
        };
        for (theta, q) in rule.nodes.iter().zip(&rule.weights) {
            if *q == 0.0 {
                continue;
            }
            let m = design.information(*theta);
            if m <= 0.0 {
                return Err(Error::DegenerateDesign { theta: *theta });
            }
            let a = match kind {
                CriterionKind::Psi0 => *q,
                CriterionKind::PsiMinus1 => q / m,
            };
            level.nodes.push(*theta);
            level.a.push(a);
            level.m.push(m);
        }
        // Accumulated in the same order as the numerator so that a candidate
        // equal to a one-point design gives a ratio of exactly one.
        level.denominator = level.a.iter().fold(0.0, |s, a| s + a);
        Ok(level)
    }

    pub fn kind(&self) -> CriterionKind {
        self.kind
    }

    /// `phi_v` for a candidate whose information function is `info`.
    pub fn evaluate_with(&self, info: impl Fn(f64) -> f64) -> Sensitivity {
        let mut previous: Option<f64> = None;
        let mut out = Sensitivity {
            value: f64::NAN,
            nodes: 0,
            converged: false,
        };
        for level in &self.levels {
            let mut num = 0.0;
            for ((theta, a), m) in level.nodes.iter().zip(&level.a).zip(&level.m) {
                num += a * (info(*theta) / m);
            }
            let ratio = num / level.denominator;
            out = Sensitivity {
                value: ratio - 1.0,
                nodes: level.nodes.len(),
                converged: false,
            };
            if !ratio.is_finite() {
                return out;
            }
            if let Some(prev) = previous {
                if (ratio - prev).abs() <= EXPECT_RTOL * ratio.abs() {
                    out.converged = true;
                    return out;
                }
            }
            previous = Some(ratio);
        }
        out
    }

    pub fn evaluate(&self, candidate: &ItemParams) -> Result<Sensitivity> {
        self.check_steps(candidate.steps())?;
        Ok(self.evaluate_with(|t| candidate.information(t)))
    }

    pub fn evaluate_point(&self, candidate: &DesignPoint) -> Result<Sensitivity> {
        self.check_steps(candidate.steps())?;
        Ok(self.evaluate_with(|t| candidate.information(t)))
    }

    fn check_steps(&self, steps: usize) -> Result<()> {
        if steps != self.steps {
            return Err(Error::invalid(format!(
                "candidate has {steps} steps but the design has {}",
                self.steps
            )));
        }
        Ok(())
    }
}

/// `phi_v(candidate, design)`.
pub fn sensitivity(
    candidate: &ItemParams,
    design: &DesignMeasure,
    w: &WeightDistribution,
    kind: CriterionKind,
) -> Result<f64> {
    SensitivityContext::new(design, w, kind)?
        .evaluate(candidate)
        .map(|s| s.value)
}

/// Result of maximising the sensitivity over a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupSensitivity {
    /// Largest value found, after refinement.
    pub value: f64,
    pub argmax: ItemParams,
    /// Largest value on the grid itself.
    pub grid_max: f64,
    /// Largest value over grid nodes on the boundary of the region.
    pub boundary_max: f64,
    /// Whether the final argmax lies on the region boundary.
    pub on_boundary: bool,
    pub resolution: usize,
    /// Whether every evaluation met the quadrature tolerance.
    pub converged: bool,
}

impl SupSensitivity {
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.value <= tol
    }
}

/// Evaluates `phi_v` over the region grid. Returns the grid coordinates of
/// the free axes (first free coordinate outermost) and the values.
pub(crate) fn grid_values(
    ctx: &SensitivityContext,
    region: &DesignRegion,
    resolution: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Sensitivity>)> {
    let free = region.free();
    let axes: Vec<Vec<f64>> = free
        .iter()
        .map(|k| {
            let (lo, hi) = region.bounds(*k);
            axis(lo, hi, resolution)
        })
        .collect();
    let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    match total {
        Some(n) if n <= 20_000_000 => {}
        _ => return Err(Error::invalid("sensitivity grid is too large")),
    }
    let n = total.unwrap_or(1);
    let base = region.base();
    let values = (0..n)
        .into_par_iter()
        .map(|flat| {
            let mut coords = base.clone();
            let mut rest = flat;
            for (d, k) in free.iter().enumerate().rev() {
                let len = axes[d].len();
                coords[*k] = axes[d][rest % len];
                rest /= len;
            }
            let item = region.item(&coords)?;
            ctx.evaluate(&item)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((axes, values))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if (b - a).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximum of `phi_v` over a `resolution`-per-axis grid of the region, then
/// one coordinate-wise golden-section pass around the best node.
pub fn sup_sensitivity(
    design: &DesignMeasure,
    w: &WeightDistribution,
    kind: CriterionKind,
    region: &DesignRegion,
    resolution: usize,
) -> Result<SupSensitivity> {
    if region.steps() != design.steps() {
        return Err(Error::invalid(format!(
            "region has {} steps but the design has {}",
            region.steps(),
            design.steps()
        )));
    }
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    let ctx = SensitivityContext::new(design, w, kind)?;
    sup_over_grid(&ctx, region, resolution)
}

pub(crate) fn sup_over_grid(
    ctx: &SensitivityContext,
    region: &DesignRegion,
    resolution: usize,
) -> Result<SupSensitivity> {
    let free = region.free();
    let (axes, values) = grid_values(ctx, region, resolution)?;
    let mut converged = values.iter().all(|s| s.converged);
    let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
    let unflatten = |flat: usize| {
        let mut idx = vec![0; dims.len()];
        let mut rest = flat;
        for d in (0..dims.len()).rev() {
            idx[d] = rest % dims[d];
            rest /= dims[d];
        }
        idx
    };
    let (mut best, mut boundary_max) = (0usize, f64::NEG_INFINITY);
    for (flat, s) in values.iter().enumerate() {
        if s.value > values[best].value || values[best].value.is_nan() {
            best = flat;
        }
        let idx = unflatten(flat);
        if idx.iter().zip(&dims).any(|(i, n)| *i == 0 || *i + 1 == *n) {
            boundary_max = boundary_max.max(s.value);
        }
    }
    let grid_max = values[best].value;

    let mut coords = region.base();
    let best_idx = unflatten(best);
    for (d, k) in free.iter().enumerate() {
        coords[*k] = axes[d][best_idx[d]];
    }
    let mut value = grid_max;
    for (d, k) in free.iter().enumerate() {
        let (lo, hi) = region.bounds(*k);
        let h = if axes[d].len() > 1 { axes[d][1] - axes[d][0] } else { 0.0 };
        let (a, b) = ((coords[*k] - h).max(lo), (coords[*k] + h).min(hi));
        if b <= a {
            continue;
        }
        let eval = |x: f64| {
            let mut c = coords.clone();
            c[*k] = x;
            region
                .item(&c)
                .map(|item| ctx.evaluate_with(|t| item.information(t)))
                .map(|s| s.value)
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (x, fx) = golden_max(eval, a, b);
        if fx > value {
            value = fx;
            coords[*k] = x;
        }
    }
    let argmax = region.item(&coords)?;
    let recheck = ctx.evaluate(&argmax)?;
    converged &= recheck.converged;
    let on_boundary = free.iter().any(|k| {
        let (lo, hi) = region.bounds(*k);
        coords[*k] <= lo || coords[*k] >= hi
    });
    Ok(SupSensitivity {
        value: value.max(grid_max),
        argmax,
        grid_max,
        boundary_max,
        on_boundary,
        resolution,
        converged,
    })
}

/// `E[pi_J pi_0]` (for `psi_0`) or `E[1 / (pi_J pi_0)]` (for `psi_-1`) for the
/// limiting two-category item of slope `a_total` centred at the weight's location.
pub fn necessary_condition_integral(
    a_total: f64,
    w: &WeightDistribution,
    kind: CriterionKind,
) -> Result<Expectation> {
    if !(a_total.is_finite() && a_total > 0.0) {
        return Err(Error::invalid(format!(
            "total discrimination must be positive, got {a_total}"
        )));
    }
    let loc = w.location();
    Ok(match kind {
        CriterionKind::Psi0 => weights::expect(w, |t| logistic_variance(a_total * (t - loc))),
        CriterionKind::PsiMinus1 => {
            weights::expect(w, |t| inverse_logistic_variance(a_total * (t - loc)))
        }
    })
}

/// Both one-point necessary conditions for a weight and total discrimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub a_total: f64,
    pub psi0_integral: f64,
    pub psi0_satisfied: bool,
    pub psi_minus1_integral: f64,
    pub psi_minus1_satisfied: bool,
    pub warnings: Vec<String>,
}

pub fn check_necessary_conditions(a_total: f64, w: &WeightDistribution) -> Result<ConditionReport> {
    let i0 = necessary_condition_integral(a_total, w, CriterionKind::Psi0)?;
    let i1 = necessary_condition_integral(a_total, w, CriterionKind::PsiMinus1)?;
    Ok(ConditionReport {
        a_total,
        psi0_integral: i0.value,
        psi0_satisfied: CriterionKind::Psi0.condition_holds(i0.value),
        psi_minus1_integral: i1.value,
        psi_minus1_satisfied: CriterionKind::PsiMinus1.condition_holds(i1.value),
        warnings: [i0.warning(), i1.warning()].into_iter().flatten().collect(),
    })
}
