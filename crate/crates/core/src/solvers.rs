//! Root finders for the critical scales, the optimal one-point
//! discriminations and the discrimination bounds implied by the necessary
//! conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    necessary_condition_integral, sup_sensitivity, CriterionKind, DesignMeasure, DesignRegion,
    OPTIMALITY_TOL,
};
use crate::error::{Error, Result};
use crate::numeric::{inverse_logistic_variance, logistic};
use crate::weights::{self, Family, WeightDistribution};

/// Search interval for discriminations, widened once by [`ALPHA_EXPANSION`].
pub const ALPHA_BRACKET: (f64, f64) = (1e-4, 100.0);
pub const ALPHA_EXPANSION: f64 = 10.0;
/// Search interval for critical scales at unit total discrimination.
pub const SCALE_BRACKET: (f64, f64) = (0.01, 10.0);
/// Points used to confirm monotonicity before bisecting on scale.
pub const MONOTONE_CHECK_POINTS: usize = 20;

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`. Returns the midpoint of the final bracket.
pub fn bisect(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64, what: &str) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::BracketNotFound {
            what: what.to_string(),
            lo,
            hi,
        });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm.is_nan() {
            return Err(Error::Solver(format!("{what}: function is NaN at {m}")));
        }
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalScales {
    pub s_minus1: f64,
    pub s_0: f64,
}

/// Roots of `exp(s) - exp(-s) = 4s` and `(3 - s) exp(s) = 3 + s`: the
/// uniform-weight critical half-widths at unit total discrimination.
pub fn uniform_critical_scalars() -> Result<(f64, f64)> {
    let s1 = bisect(uniform_psi_minus1_residual, 0.5, 10.0, 1e-13, "uniform s_-1")?;
    let s0 = bisect(uniform_psi0_residual, 0.5, 10.0, 1e-13, "uniform s_0")?;
    Ok((s1, s0))
}

pub fn uniform_psi_minus1_residual(s: f64) -> f64 {
    s.exp() - (-s).exp() - 4.0 * s
}

pub fn uniform_psi0_residual(s: f64) -> f64 {
    (3.0 - s) * s.exp() - 3.0 - s
}

/// Largest scale of `family` at which the one-point necessary condition for
/// `kind` holds, for total discrimination `a_total`.
pub fn critical_scale(family: Family, kind: CriterionKind, a_total: f64) -> Result<f64> {
    if !(a_total.is_finite() && a_total > 0.0) {
        return Err(Error::invalid(format!(
            "total discrimination must be positive, got {a_total}"
        )));
    }
    Ok(unit_critical_scale(family, kind)? / a_total)
}

pub fn critical_scales(family: Family, a_total: f64) -> Result<CriticalScales> {
    Ok(CriticalScales {
        s_minus1: critical_scale(family, CriterionKind::PsiMinus1, a_total)?,
        s_0: critical_scale(family, CriterionKind::Psi0, a_total)?,
    })
}

fn unit_critical_scale(family: Family, kind: CriterionKind) -> Result<f64> {
    let what = format!("critical scale ({family}, {kind})");
    let excess = |s: f64| -> Result<f64> {
        let w = WeightDistribution::new(family, 0.0, s)?;
        Ok(necessary_condition_integral(1.0, &w, kind)?.value - kind.condition_threshold())
    };
    let (lo, hi) = SCALE_BRACKET;
    let ratio = (hi / lo).powf(1.0 / (MONOTONE_CHECK_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..MONOTONE_CHECK_POINTS)
        .map(|i| lo * ratio.powi(i as i32))
        .collect();
    let values = grid.iter().map(|s| excess(*s)).collect::<Result<Vec<_>>>()?;
    // psi_0's integral falls with the scale, psi_-1's rises.
    let sign = match kind {
        CriterionKind::Psi0 => -1.0,
        CriterionKind::PsiMinus1 => 1.0,
    };
    if let Some(k) = (1..values.len()).find(|k| !(sign * (values[*k] - values[k - 1]) > 0.0)) {
        return Err(Error::NotMonotone {
            what,
            lo,
            hi,
            detail: format!(
                "integral at s = {} is {} and at s = {} is {}",
                grid[k - 1],
                values[k - 1],
                grid[k],
                values[k]
            ),
        });
    }
    let k = (1..values.len())
        .find(|k| values[*k].signum() != values[k - 1].signum())
        .ok_or(Error::BracketNotFound {
            what: what.clone(),
            lo,
            hi,
        })?;
    let mut failure = None;
    let root = bisect(
        |s| {
            excess(s).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        grid[k - 1],
        grid[k],
        1e-14,
        &what,
    );
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalAlpha {
    pub value: f64,
    pub kind: CriterionKind,
    /// Value of the defining equation at `value`.
    pub residual: f64,
}

/// Left-hand side minus right-hand side of the optimality equation for the
/// discrimination of the one-point design `{tau = theta_0}` under `w`. The
/// function is increasing in `alpha` with its root at the optimum.
pub fn optimal_alpha_equation(w: &WeightDistribution, kind: CriterionKind, alpha: f64) -> f64 {
    let loc = w.location();
    match kind {
        // alpha E[x pi_1(alpha x)] = 1
        CriterionKind::Psi0 => {
            alpha * weights::expect(w, |t| (t - loc) * logistic(alpha * (t - loc))).value - 1.0
        }
        // alpha E[x / pi_0(alpha x)] = E[1 / (pi_1 pi_0)]
        CriterionKind::PsiMinus1 => weights::expect(w, |t| {
            let x = t - loc;
            alpha * x * (1.0 + (alpha * x).exp()) - inverse_logistic_variance(alpha * x)
        })
        .value,
    }
}

/// Finds the root of an increasing (`increasing = true`) or decreasing
/// function on the discrimination bracket, widening it once if needed.
fn alpha_root(mut f: impl FnMut(f64) -> f64, increasing: bool, what: &str) -> Result<f64> {
    let (lo, mut hi) = ALPHA_BRACKET;
    let below = |v: f64| if increasing { v < 0.0 } else { v > 0.0 };
    let mut f_hi = f(hi);
    if below(f_hi) {
        hi *= ALPHA_EXPANSION;
        f_hi = f(hi);
    }
    // Tails of the exponential integrands can overflow at large alpha.
    while !f_hi.is_finite() && hi > 2.0 * lo {
        hi *= 0.5;
        f_hi = f(hi);
    }
    if below(f_hi) || !f_hi.is_finite() {
        return Err(Error::BracketNotFound {
            what: what.to_string(),
            lo,
            hi,
        });
    }
    bisect(f, lo, hi, 1e-12 * hi.max(1.0), what)
}

/// Optimal discrimination of the one-point design `{tau = theta_0}` under `w`.
pub fn optimal_alpha(w: &WeightDistribution, kind: CriterionKind) -> Result<OptimalAlpha> {
    let what = format!("optimal discrimination ({kind}, {w})");
    let value = alpha_root(|a| optimal_alpha_equation(w, kind, a), true, &what)?;
    Ok(OptimalAlpha {
        value,
        kind,
        residual: optimal_alpha_equation(w, kind, value),
    })
}

/// Largest total discrimination for which the one-point necessary condition
/// of `kind` holds under `w`.
pub fn alpha_plus(w: &WeightDistribution, kind: CriterionKind) -> Result<OptimalAlpha> {
    let what = format!("discrimination bound ({kind}, {w})");
    let excess = |a: f64| {
        necessary_condition_integral(a, w, kind)
            .map(|e| e.value - kind.condition_threshold())
            .unwrap_or(f64::NAN)
    };
    let increasing = matches!(kind, CriterionKind::PsiMinus1);
    let value = alpha_root(excess, increasing, &what)?;
    Ok(OptimalAlpha {
        value,
        kind,
        residual: excess(value),
    })
}

/// Outcome for one discrimination bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AlphaBound {
    Value { value: f64 },
    /// The condition still holds at the largest discrimination searched.
    AtCap { cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `alpha* > alpha+`: the optimal one-point design violates the condition.
    Exceeds,
    DoesNotExceed,
    BoundAtCap,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub scale: f64,
    pub alpha_star: Option<f64>,
    pub alpha_plus: Option<AlphaBound>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub family: Family,
    pub kind: CriterionKind,
    pub rows: Vec<EvidenceRow>,
    /// True when every row with a finite bound has `alpha* > alpha+`.
    pub exceeds_everywhere: bool,
}

/// For each scale, compares the optimal one-point discrimination with the
/// largest discrimination allowed by the necessary condition.
pub fn one_point_never_bayes_optimal(
    family: Family,
    kind: CriterionKind,
    scales: &[f64],
) -> Result<EvidenceTable> {
    if scales.is_empty() {
        return Err(Error::invalid("evidence table needs at least one scale"));
    }
    let rows: Vec<EvidenceRow> = scales
        .par_iter()
        .map(|&s| {
            let w = match WeightDistribution::new(family, 0.0, s) {
                Ok(w) => w,
                Err(e) => {
                    return EvidenceRow {
                        scale: s,
                        alpha_star: None,
                        alpha_plus: None,
                        verdict: Verdict::Error(e.to_string()),
                    }
                }
            };
            let star = optimal_alpha(&w, kind).map(|a| a.value);
            let bound = match alpha_plus(&w, kind) {
                Ok(a) => Ok(AlphaBound::Value { value: a.value }),
                Err(Error::BracketNotFound { hi, .. }) => Ok(AlphaBound::AtCap { cap: hi }),
                Err(e) => Err(e),
            };
            let verdict = match (&star, &bound) {
                (_, Ok(AlphaBound::AtCap { .. })) => Verdict::BoundAtCap,
                (Err(e), _) | (_, Err(e)) => Verdict::Error(e.to_string()),
                (Ok(a), Ok(AlphaBound::Value { value })) if a > value => Verdict::Exceeds,
                _ => Verdict::DoesNotExceed,
            };
            EvidenceRow {
                scale: s,
                alpha_star: star.ok(),
                alpha_plus: bound.ok(),
                verdict,
            }
        })
        .collect();
    let exceeds_everywhere = rows
        .iter()
        .all(|r| matches!(r.verdict, Verdict::Exceeds | Verdict::BoundAtCap))
        && rows.iter().any(|r| r.verdict == Verdict::Exceeds);
    Ok(EvidenceTable {
        family,
        kind,
        rows,
        exceeds_everywhere,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct STilde {
    pub family: Family,
    pub kind: CriterionKind,
    pub a_total: f64,
    /// Estimated largest scale at which the one-point design is Bayes optimal.
    pub value: f64,
    pub critical_scale: f64,
    /// Set when the design is still optimal (within tolerance) at the critical scale.
    pub equals_critical: bool,
    /// Final bisection bracket `(optimal, not optimal)`.
    pub bracket: (f64, f64),
    pub sup_at_critical: f64,
    pub resolution: usize,
    pub tolerance: f64,
}

/// Bisection on the scale for the sign of the sup sensitivity of the optimal
/// one-point design (at the region's fixed discriminations) under `kind`.
pub fn estimate_s_tilde(
    family: Family,
    kind: CriterionKind,
    region: &DesignRegion,
    resolution: usize,
    tol: f64,
) -> Result<STilde> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let alphas = region
        .fixed_alphas()
        .ok_or_else(|| Error::invalid("s-tilde needs fixed discriminations in the region"))?;
    let design = DesignMeasure::locally_optimal(&alphas, 0.0)?;
    let a_total: f64 = alphas.iter().sum();
    let critical = critical_scale(family, kind, a_total)?;
    let sup = |s: f64| -> Result<f64> {
        let w = WeightDistribution::new(family, 0.0, s)?;
        Ok(sup_sensitivity(&design, &w, kind, region, resolution)?.value)
    };
    let at_critical = sup(critical)?;
    let mut out = STilde {
        family,
        kind,
        a_total,
        value: critical,
        critical_scale: critical,
        equals_critical: true,
        bracket: (critical, critical),
        sup_at_critical: at_critical,
        resolution,
        tolerance: tol,
    };
    if at_critical <= OPTIMALITY_TOL {
        return Ok(out);
    }
    out.equals_critical = false;
    let mut hi = critical;
    let mut lo = 0.5 * critical;
    let mut found = false;
    for _ in 0..8 {
        if sup(lo)? <= OPTIMALITY_TOL {
            found = true;
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    if !found {
        out.value = 0.0;
        out.bracket = (0.0, lo);
        return Ok(out);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sup(mid)? <= OPTIMALITY_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.value = 0.5 * (lo + hi);
    out.bracket = (lo, hi);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bisect_basics() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, "sqrt2").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(matches!(
            bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, "none"),
            Err(Error::BracketNotFound { .. })
        ));
    }

    #[test]
    fn uniform_scalars() {
        let (s1, s0) = uniform_critical_scalars().unwrap();
        assert!((s1 - 2.1773).abs() < 1e-4 && (s0 - 2.5757).abs() < 1e-4);
        assert!(uniform_psi_minus1_residual(s1).abs() < 1e-9);
        assert!(uniform_psi0_residual(s0).abs() < 1e-9);
        // Independent high-precision roots.
        assert!((s1 - 2.177_318_985_0).abs() < 1e-9);
        assert!((s0 - 2.575_678_909_9).abs() < 1e-9);
    }

    #[test]
    fn uniform_integral_roots_match_closed_form() {
        let (s1, s0) = uniform_critical_scalars().unwrap();
        let c1 = critical_scale(Family::Uniform, CriterionKind::PsiMinus1, 1.0).unwrap();
        let c0 = critical_scale(Family::Uniform, CriterionKind::Psi0, 1.0).unwrap();
        assert!((c1 - s1).abs() < 1e-9, "{c1} vs {s1}");
        assert!((c0 - s0).abs() < 1e-9, "{c0} vs {s0}");
    }

    #[test]
    fn analytic_scales() {
        let n1 = critical_scale(Family::Normal, CriterionKind::PsiMinus1, 1.0).unwrap();
        assert!((n1 - (2.0 * LN2).sqrt()).abs() < 1e-9, "{n1}");
        let l0 = critical_scale(Family::Logistic, CriterionKind::Psi0, 1.0).unwrap();
        assert!((l0 - 1.0).abs() < 1e-9, "{l0}");
        // Independent quadrature of the defining integrals.
        let n0 = critical_scale(Family::Normal, CriterionKind::Psi0, 1.0).unwrap();
        assert!((n0 - 1.686_834_797_9).abs() < 1e-8, "{n0}");
        // Logistic weights are truncated at 40 scale units, which shifts this
        // tail-driven root by about 6e-8 from its untruncated value 0.6033545644.
        let l1 = critical_scale(Family::Logistic, CriterionKind::PsiMinus1, 1.0).unwrap();
        assert!((l1 - 0.603_354_624_2).abs() < 1e-9, "{l1}");
    }

    #[test]
    fn scales_scale_with_total_discrimination() {
        for family in Family::ALL {
            let s = critical_scales(family, 1.0).unwrap();
            assert!(s.s_minus1 <= s.s_0);
            for a in [0.5, 2.0, 3.0] {
                let t = critical_scales(family, a).unwrap();
                assert!((t.s_0 * a - s.s_0).abs() < 1e-8);
                assert!((t.s_minus1 * a - s.s_minus1).abs() < 1e-8);
            }
        }
        assert!(critical_scale(Family::Normal, CriterionKind::Psi0, 0.0).is_err());
    }

    #[test]
    fn optimal_alpha_oracle_values() {
        let cases = [
            (Family::Uniform, 2.1773, CriterionKind::PsiMinus1, 1.578_028_289),
            (Family::Uniform, 2.5757, CriterionKind::Psi0, 1.809_282_303),
            (Family::Normal, 1.177, CriterionKind::PsiMinus1, 1.358_572_686),
            (Family::Normal, 1.683, CriterionKind::Psi0, 1.735_988_069),
            // Truncated-support value; untruncated it is 1.17524366.
            (Family::Logistic, 0.603, CriterionKind::PsiMinus1, 1.175_274_704),
            (Family::Logistic, 1.0, CriterionKind::Psi0, 1.682_775_380),
        ];
        for (family, s, kind, want) in cases {
            let w = WeightDistribution::new(family, 0.0, s).unwrap();
            let a = optimal_alpha(&w, kind).unwrap();
            assert!((a.value - want).abs() < 1e-7, "{family} {kind}: {} vs {want}", a.value);
            assert!(a.residual.abs() < 1e-7);
        }
    }

    #[test]
    fn optimal_alpha_scales_inversely() {
        for family in Family::ALL {
            for kind in CriterionKind::ALL {
                let a = optimal_alpha(&WeightDistribution::new(family, 0.0, 1.2).unwrap(), kind).unwrap();
                let b = optimal_alpha(&WeightDistribution::new(family, 0.0, 0.6).unwrap(), kind).unwrap();
                assert!((b.value - 2.0 * a.value).abs() < 1e-6, "{family} {kind}");
            }
        }
    }

    #[test]
    fn location_does_not_matter() {
        let a = optimal_alpha(&WeightDistribution::normal(0.0, 1.0).unwrap(), CriterionKind::Psi0).unwrap();
        let b = optimal_alpha(&WeightDistribution::normal(3.0, 1.0).unwrap(), CriterionKind::Psi0).unwrap();
        assert!((a.value - b.value).abs() < 1e-8);
    }

    #[test]
    fn alpha_plus_oracle_values() {
        let cases = [
            (Family::Uniform, 2.1773, CriterionKind::PsiMinus1, 1.000_008_7),
            (Family::Uniform, 2.5757, CriterionKind::Psi0, 0.999_991_8),
            (Family::Normal, 1.683, CriterionKind::Psi0, 1.002_28),
            (Family::Logistic, 1.0, CriterionKind::Psi0, 1.0),
        ];
        for (family, s, kind, want) in cases {
            let w = WeightDistribution::new(family, 0.0, s).unwrap();
            let a = alpha_plus(&w, kind).unwrap();
            assert!((a.value - want).abs() < 1e-5, "{family} {kind}: {} vs {want}", a.value);
        }
    }

    #[test]
    fn tiny_scale_bound_is_at_cap() {
        let t = one_point_never_bayes_optimal(Family::Uniform, CriterionKind::PsiMinus1, &[1e-4]).unwrap();
        assert_eq!(t.rows[0].verdict, Verdict::BoundAtCap);
        assert!(matches!(t.rows[0].alpha_plus, Some(AlphaBound::AtCap { .. })));
    }

    #[test]
    fn evidence_tables() {
        let t = one_point_never_bayes_optimal(Family::Uniform, CriterionKind::PsiMinus1, &[1.5, 2.1773, 3.0])
            .unwrap();
        assert!(t.exceeds_everywhere, "{t:?}");
        let t = one_point_never_bayes_optimal(Family::Normal, CriterionKind::Psi0, &[1.2, 1.683, 2.2]).unwrap();
        assert!(t.exceeds_everywhere, "{t:?}");
    }
}
