//! Symmetric location-scale weight distributions over ability, and the
//! quadrature used to take expectations against them.

mod rules;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpcm::Ability;

pub use rules::{gauss_hermite, gauss_legendre};

/// First node count tried by [`expect`].
pub const MIN_NODES: usize = 64;
/// Node count at which [`expect`] gives up doubling.
pub const MAX_NODES: usize = 1024;
/// Relative agreement required between successive estimates.
pub const EXPECT_RTOL: f64 = 1e-9;
/// Logistic weights are integrated over `location +- LOGISTIC_HALF_WIDTH * scale`.
pub const LOGISTIC_HALF_WIDTH: f64 = 40.0;

/// Panel edges (in scale units, one side) for the logistic rule. The inner
/// edges sit at upper-tail probabilities 1/2, 1e-1, 1e-2, 1e-4, 1e-6, 1e-9, 1e-12.
const LOGISTIC_EDGES: [f64; 8] = [
    0.0,
    2.197_224_577_336_219_6, // ln 9
    4.595_119_850_134_59,    // ln 99
    9.210_240_366_975_85,    // ln 9999
    13.815_509_557_963_773,  // ln 999999
    20.723_265_836_946_41,   // ln (1e9 - 1)
    27.631_021_115_927_547,  // ln (1e12 - 1)
    LOGISTIC_HALF_WIDTH,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Normal,
    Logistic,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Uniform, Family::Normal, Family::Logistic];

    /// Density of the member with location 0 and scale 1.
    pub fn standard_density(self, z: f64) -> f64 {
        match self {
            Family::Uniform => {
                if z.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Family::Normal => (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Family::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Family::Uniform => "uniform",
            Family::Normal => "normal",
            Family::Logistic => "logistic",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Family::Uniform),
            "normal" => Ok(Family::Normal),
            "logistic" => Ok(Family::Logistic),
            other => Err(Error::invalid(format!(
                "unknown weight family '{other}' (expected uniform, normal or logistic)"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawWeight {
    family: Family,
    location: f64,
    scale: f64,
}

/// A symmetric weight over ability. For the uniform family `scale` is the
/// half-width of the support; for the normal it is the standard deviation;
/// for the logistic it is the usual scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeight", into = "RawWeight")]
pub struct WeightDistribution {
    family: Family,
    location: f64,
    scale: f64,
}

impl TryFrom<RawWeight> for WeightDistribution {
    type Error = Error;
    fn try_from(r: RawWeight) -> Result<Self> {
        WeightDistribution::new(r.family, r.location, r.scale)
    }
}

impl From<WeightDistribution> for RawWeight {
    fn from(w: WeightDistribution) -> Self {
        RawWeight {
            family: w.family,
            location: w.location,
            scale: w.scale,
        }
    }
}

impl WeightDistribution {
    pub fn new(family: Family, location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::invalid(format!("location must be finite, got {location}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(WeightDistribution {
            family,
            location,
            scale,
        })
    }

    pub fn uniform(location: f64, half_width: f64) -> Result<Self> {
        Self::new(Family::Uniform, location, half_width)
    }

    pub fn normal(location: f64, sd: f64) -> Result<Self> {
        Self::new(Family::Normal, location, sd)
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Logistic, location, scale)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same family and location, different scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.family, self.location, scale)
    }

    pub(crate) fn density_at(&self, theta: f64) -> f64 {
        self.family
            .standard_density((theta - self.location) / self.scale)
            / self.scale
    }

    /// Bounds of the region the quadrature integrates over.
    pub fn effective_support(&self) -> (f64, f64) {
        let half = match self.family {
            Family::Uniform => 1.0,
            Family::Logistic => LOGISTIC_HALF_WIDTH,
            Family::Normal => f64::INFINITY,
        };
        (
            self.location - half * self.scale,
            self.location + half * self.scale,
        )
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.family, self.location, self.scale)
    }
}

/// Parses `family:location:scale`, e.g. `normal:0:1.177`.
impl FromStr for WeightDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!(
                "weight '{s}' is not of the form family:location:scale"
            )));
        }
        let family = parts[0].parse()?;
        let num = |p: &str, what: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {what} '{p}' in weight '{s}'")))
        };
        WeightDistribution::new(family, num(parts[1], "location")?, num(parts[2], "scale")?)
    }
}

/// Nodes and weights of a discrete approximation to a probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    fn mapped(&self, location: f64, scale: f64) -> QuadratureRule {
        QuadratureRule {
            nodes: self.nodes.iter().map(|z| location + scale * z).collect(),
            weights: self.weights.clone(),
        }
    }
}

fn build_standard_rule(family: Family, n: usize) -> QuadratureRule {
    match family {
        Family::Uniform => {
            let (x, w) = gauss_legendre(n);
            QuadratureRule {
                nodes: x,
                weights: w.into_iter().map(|w| 0.5 * w).collect(),
            }
        }
        Family::Normal => {
            let (x, w) = gauss_hermite(n);
            let norm = std::f64::consts::PI.sqrt();
            QuadratureRule {
                nodes: x.into_iter().map(|x| std::f64::consts::SQRT_2 * x).collect(),
                weights: w.into_iter().map(|w| w / norm).collect(),
            }
        }
        Family::Logistic => {
            // Gauss-Legendre in theta on panels bounded by tail quantiles;
            // the density is folded into the weights.
            let panels = 2 * (LOGISTIC_EDGES.len() - 1);
            let per_panel = n.div_ceil(panels).max(2);
            let (gx, gw) = gauss_legendre(per_panel);
            let mut edges: Vec<f64> = LOGISTIC_EDGES.iter().rev().map(|e| -e).collect();
            edges.extend_from_slice(&LOGISTIC_EDGES[1..]);
            let mut nodes = Vec::with_capacity(per_panel * panels);
            let mut weights = Vec::with_capacity(per_panel * panels);
            for pair in edges.windows(2) {
                let half = 0.5 * (pair[1] - pair[0]);
                let mid = 0.5 * (pair[0] + pair[1]);
                for (x, w) in gx.iter().zip(&gw) {
                    let z = mid + half * x;
                    nodes.push(z);
                    weights.push(w * half * Family::Logistic.standard_density(z));
                }
            }
            QuadratureRule { nodes, weights }
        }
    }
}

type RuleCache = Mutex<HashMap<(Family, usize), Arc<QuadratureRule>>>;

/// Rule for location 0, scale 1. Rules are built once per process.
pub(crate) fn standard_rule(family: Family, n: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache").get(&(family, n)) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build_standard_rule(family, n));
    cache
        .lock()
        .expect("rule cache")
        .entry((family, n))
        .or_insert(rule)
        .clone()
}

pub fn density(w: &WeightDistribution, theta: Ability) -> f64 {
    w.density_at(theta.value())
}

/// Quadrature rule with (about) `n` nodes for `w`. Logistic rules round the
/// node count up to a multiple of the panel count.
pub fn quadrature(w: &WeightDistribution, n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::invalid(format!("quadrature needs at least 2 nodes, got {n}")));
    }
    Ok(standard_rule(w.family, n).mapped(w.location, w.scale))
}

/// The sequence of rules tried by the adaptive expectation: 64, 128, ..., 1024 nodes.
pub(crate) fn adaptive_levels(w: &WeightDistribution) -> impl Iterator<Item = QuadratureRule> + '_ {
    std::iter::successors(Some(MIN_NODES), |n| (*n < MAX_NODES).then_some(n * 2))
        .map(move |n| standard_rule(w.family, n).mapped(w.location, w.scale))
}

/// Result of an adaptive expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    /// Node count of the rule that produced `value`.
    pub nodes: usize,
    /// False when successive estimates still disagreed at the largest rule.
    pub converged: bool,
}

impl Expectation {
    /// Accuracy warning for unconverged estimates.
    pub fn warning(&self) -> Option<String> {
        (!self.converged).then(|| {
            format!(
                "quadrature did not reach relative accuracy {EXPECT_RTOL:e} with {} nodes",
                self.nodes
            )
        })
    }
}

/// `E[f(theta)]` under `w`, doubling the node count until two successive
/// estimates agree to relative `1e-9` (measured against `E|f|`).
pub fn expect(w: &WeightDistribution, f: impl Fn(f64) -> f64) -> Expectation {
    try_expect(w, |theta| Ok(f(theta))).expect("infallible integrand")
}

/// Fallible variant of [`expect`]; the first error from `f` aborts.
pub fn try_expect(
    w: &WeightDistribution,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<Expectation> {
    let mut previous: Option<f64> = None;
    let mut last = Expectation {
        value: f64::NAN,
        nodes: 0,
        converged: false,
    };
    for rule in adaptive_levels(w) {
        let (mut value, mut magnitude) = (0.0, 0.0);
        for (x, q) in rule.nodes.iter().zip(&rule.weights) {
            if *q == 0.0 {
                continue;
            }
            let v = f(*x)?;
            value += q * v;
            magnitude += q * v.abs();
        }
        last = Expectation {
            value,
            nodes: rule.len(),
            converged: false,
        };
        if !value.is_finite() {
            return Ok(last);
        }
        if let Some(prev) = previous {
            if (value - prev).abs() <= EXPECT_RTOL * magnitude.max(f64::MIN_POSITIVE) {
                last.converged = true;
                return Ok(last);
            }
        }
        previous = Some(value);
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab(x: f64) -> Ability {
        Ability::new(x).unwrap()
    }

    #[test]
    fn densities() {
        let u = WeightDistribution::uniform(0.0, 2.0).unwrap();
        assert_eq!(density(&u, ab(1.0)), 0.25);
        assert_eq!(density(&u, ab(3.0)), 0.0);
        let l = WeightDistribution::logistic(0.0, 1.0).unwrap();
        assert_eq!(density(&l, ab(0.0)), 0.25);
        let n = WeightDistribution::normal(1.0, 2.0).unwrap();
        let want = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((density(&n, ab(1.0)) - want).abs() < 1e-16);
    }

    #[test]
    fn parse_weight_strings() {
        let w: WeightDistribution = "normal:0:1.177".parse().unwrap();
        assert_eq!(w.family(), Family::Normal);
        assert_eq!(w.scale(), 1.177);
        assert!("normal:0".parse::<WeightDistribution>().is_err());
        assert!("cauchy:0:1".parse::<WeightDistribution>().is_err());
        assert!("uniform:0:-1".parse::<WeightDistribution>().is_err());
        assert!("uniform:x:1".parse::<WeightDistribution>().is_err());
        assert_eq!(w.to_string().parse::<WeightDistribution>().unwrap(), w);
    }

    #[test]
    fn rules_are_probability_measures() {
        for family in Family::ALL {
            for n in [2, 7, 64, 128, 1024] {
                let w = WeightDistribution::new(family, 0.3, 1.7).unwrap();
                let rule = quadrature(&w, n).unwrap();
                let total: f64 = rule.weights.iter().sum();
                // Panelled logistic rules need a few nodes per panel.
                let tol = match (family, n) {
                    (Family::Logistic, n) if n < 64 => 1e-2,
                    (Family::Logistic, 64) => 1e-6,
                    _ => 1e-10,
                };
                assert!((total - 1.0).abs() < tol, "{family} n={n} total={total}");
                assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
            }
        }
        let w = WeightDistribution::normal(0.0, 1.0).unwrap();
        assert!(quadrature(&w, 1).is_err());
    }

    #[test]
    fn low_moments() {
        let u = WeightDistribution::uniform(0.0, 1.0).unwrap();
        assert!((quadrature(&u, 8).unwrap().integrate(|t| t * t) - 1.0 / 3.0).abs() < 1e-14);
        let n = WeightDistribution::normal(0.0, 2.0).unwrap();
        assert!((quadrature(&n, 64).unwrap().integrate(|t| t * t) - 4.0).abs() < 1e-10);
        let l = WeightDistribution::logistic(0.0, 1.0).unwrap();
        let v = expect(&l, |t| t * t);
        let want = std::f64::consts::PI.powi(2) / 3.0;
        assert!((v.value - want).abs() < 1e-8, "{}", v.value);
        assert!(v.converged);
    }

    #[test]
    fn expectation_basics() {
        for family in Family::ALL {
            let w = WeightDistribution::new(family, 0.7, 1.3).unwrap();
            assert!((expect(&w, |_| 1.0).value - 1.0).abs() < 1e-12, "{family}");
            assert!((expect(&w, |t| t).value - 0.7).abs() < 1e-10, "{family}");
        }
    }

    #[test]
    fn cosh_identity_under_normal() {
        let s = (2.0 * 2f64.ln()).sqrt();
        let w = WeightDistribution::normal(0.0, s).unwrap();
        let v = expect(&w, |t| 2.0 + 2.0 * t.cosh());
        assert!((v.value - 6.0).abs() < 1e-9, "{}", v.value);
        let w = WeightDistribution::normal(0.0, 1.1774).unwrap();
        assert!((expect(&w, |t| 2.0 + 2.0 * t.cosh()).value - 6.0).abs() < 1e-3);
    }

    #[test]
    fn scale_family_consistency() {
        for family in Family::ALL {
            let base = quadrature(&WeightDistribution::new(family, 0.0, 1.0).unwrap(), 64).unwrap();
            let w = WeightDistribution::new(family, -0.4, 2.5).unwrap();
            let rule = quadrature(&w, 64).unwrap();
            for (a, b) in rule.nodes.iter().zip(&base.nodes) {
                assert!((a - (-0.4 + 2.5 * b)).abs() < 1e-12);
            }
            assert_eq!(rule.weights, base.weights);
        }
    }

    #[test]
    fn logistic_density_is_two_pl_variance() {
        let w = WeightDistribution::logistic(0.0, 1.0).unwrap();
        for i in -200..=200 {
            let t = i as f64 * 0.1;
            let p = crate::numeric::logistic(t);
            assert!((density(&w, ab(t)) - p * (1.0 - p)).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_non_convergence() {
        // An integrand with a kink that no polynomial rule resolves to 1e-9.
        let w = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let e = expect(&w, |t| (t - 0.123_456).abs().sqrt());
        assert!(!e.converged);
        assert_eq!(e.nodes, MAX_NODES);
        assert!(e.warning().is_some());
    }
}
