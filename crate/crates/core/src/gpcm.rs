//! Category probabilities, Fisher information and its analytic derivatives
//! for a single item of the generalized partial credit model.
//!
//! An item with `J` steps has thresholds `tau_1..tau_J` and positive
//! discriminations `alpha_1..alpha_J`. Category `j` (0..=J) has cumulative
//! logit `l_j = sum_{s<=j} alpha_s (theta - tau_s)` and probability
//! `exp(l_j) / sum_k exp(l_k)`. With `A_j = alpha_1 + ... + alpha_j` the item
//! information is the variance of `A_Y`.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::numeric::logistic;

/// Probabilities below this value are reported as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Default cap used to stand in for the unattainable locally optimal thresholds.
pub const DEFAULT_C_MAX: f64 = 40.0;

pub(crate) type Buf = SmallVec<[f64; 8]>;

/// Person ability on the logit scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Ability(f64);

impl Ability {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() {
            Ok(Ability(theta))
        } else {
            Err(Error::invalid(format!("ability must be finite, got {theta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Ability {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Ability::new(v)
    }
}

impl From<Ability> for f64 {
    fn from(a: Ability) -> f64 {
        a.0
    }
}

/// Running sums `A_j` of the discriminations.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeDiscriminations(Vec<f64>);

impl CumulativeDiscriminations {
    pub fn from_discriminations(alphas: &[f64]) -> Self {
        let mut acc = 0.0;
        CumulativeDiscriminations(
            alphas
                .iter()
                .map(|a| {
                    acc += a;
                    acc
                })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `A_J`, the total discrimination.
    pub fn total(&self) -> f64 {
        *self.0.last().expect("at least one step")
    }

    /// `A_j` for category `j` in `0..=J` (with `A_0 = 0`).
    #[inline]
    pub(crate) fn for_category(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.0[j - 1]
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    tau: Vec<f64>,
    alpha: Vec<f64>,
}

/// One item: thresholds and discriminations of equal length `J >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawItem", into = "RawItem")]
pub struct ItemParams {
    thresholds: Vec<f64>,
    discriminations: Vec<f64>,
    cumulative: CumulativeDiscriminations,
}

impl TryFrom<RawItem> for ItemParams {
    type Error = Error;
    fn try_from(raw: RawItem) -> Result<Self> {
        ItemParams::new(raw.tau, raw.alpha)
    }
}

impl From<ItemParams> for RawItem {
    fn from(item: ItemParams) -> RawItem {
        RawItem {
            tau: item.thresholds,
            alpha: item.discriminations,
        }
    }
}

impl ItemParams {
    pub fn new(thresholds: Vec<f64>, discriminations: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::invalid("an item needs at least one threshold"));
        }
        if thresholds.len() != discriminations.len() {
            return Err(Error::invalid(format!(
                "{} thresholds but {} discriminations",
                thresholds.len(),
                discriminations.len()
            )));
        }
        if let Some(t) = thresholds.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("threshold {t} is not finite")));
        }
        if let Some(a) = discriminations.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::invalid(format!(
                "discriminations must be positive and finite, got {a}"
            )));
        }
        let cumulative = CumulativeDiscriminations::from_discriminations(&discriminations);
        Ok(ItemParams {
            thresholds,
            discriminations,
            cumulative,
        })
    }

    /// Dichotomous 2PL item.
    pub fn two_pl(threshold: f64, discrimination: f64) -> Result<Self> {
        ItemParams::new(vec![threshold], vec![discrimination])
    }

    /// Number of steps `J` (the item has `J + 1` categories).
    pub fn steps(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn discriminations(&self) -> &[f64] {
        &self.discriminations
    }

    pub fn cumulative(&self) -> &CumulativeDiscriminations {
        &self.cumulative
    }

    pub fn a_total(&self) -> f64 {
        self.cumulative.total()
    }

    /// Same item with every threshold moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        ItemParams::new(
            self.thresholds.iter().map(|t| t + delta).collect(),
            self.discriminations.clone(),
        )
    }

    /// Cumulative logits `l_0..l_J`.
    #[inline]
    fn logits(&self, theta: f64) -> Buf {
        let mut l = Buf::with_capacity(self.steps() + 1);
        l.push(0.0);
        let mut acc = 0.0;
        for (a, t) in self.discriminations.iter().zip(&self.thresholds) {
            acc += a * (theta - t);
            l.push(acc);
        }
        l
    }

    /// Category probabilities by log-sum-exp over the cumulative logits.
    pub(crate) fn probs(&self, theta: f64) -> Buf {
        let mut p = self.logits(theta);
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in p.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in p.iter_mut() {
            *v /= z;
            if *v < PROBABILITY_FLOOR {
                *v = 0.0;
            }
        }
        p
    }

    /// Fisher information at `theta`.
    ///
    /// Computed as the variance of `A_Y` about the most likely category so that
    /// the tails, where one category carries almost all mass, keep full
    /// relative precision.
    pub(crate) fn information(&self, theta: f64) -> f64 {
        let p = self.probs(theta);
        let mode = p
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if *v > p[best] { j } else { best });
        let pivot = self.cumulative.for_category(mode);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (j, pj) in p.iter().enumerate() {
            let d = self.cumulative.for_category(j) - pivot;
            m1 += pj * d;
            m2 += pj * d * d;
        }
        (m2 - m1 * m1).max(0.0)
    }

    /// (probabilities, mean of A, tail sums S_i = sum_{k >= i} pi_k for i = 1..J)
    fn moments(&self, theta: f64) -> (Buf, f64, Buf) {
        let p = self.probs(theta);
        let j_max = self.steps();
        let mean: f64 = (0..=j_max)
            .map(|j| self.cumulative.for_category(j) * p[j])
            .sum();
        let mut tails = Buf::from_elem(0.0, j_max + 1);
        let mut acc = 0.0;
        for k in (1..=j_max).rev() {
            acc += p[k];
            tails[k] = acc;
        }
        (p, mean, tails)
    }
}

/// Probabilities of categories `0..=J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProbabilities {
    probs: Vec<f64>,
}

impl CategoryProbabilities {
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, category: usize) -> f64 {
        self.probs[category]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn category_probabilities(theta: Ability, item: &ItemParams) -> CategoryProbabilities {
    CategoryProbabilities {
        probs: item.probs(theta.value()).to_vec(),
    }
}

/// Derivative of the log-likelihood of `response` with respect to ability.
pub fn score(theta: Ability, item: &ItemParams, response: usize) -> Result<f64> {
    if response > item.steps() {
        return Err(Error::invalid(format!(
            "response {response} outside 0..={}",
            item.steps()
        )));
    }
    let (_, mean, _) = item.moments(theta.value());
    Ok(item.cumulative.for_category(response) - mean)
}

pub fn fisher_information(theta: Ability, item: &ItemParams) -> f64 {
    item.information(theta.value())
}

/// Largest information any item with total discrimination `a_total` can reach.
pub fn max_fisher_information(a_total: f64) -> Result<f64> {
    if !(a_total.is_finite() && a_total > 0.0) {
        return Err(Error::invalid(format!(
            "total discrimination must be positive, got {a_total}"
        )));
    }
    Ok(a_total * a_total / 4.0)
}

/// Thresholds `(alpha_J c, 0, ..., 0, -alpha_1 c)`: the large-`c` family whose
/// limit puts half the mass on each extreme category at ability zero.
pub fn approx_locally_optimal_item(c: f64, alphas: &[f64]) -> Result<ItemParams> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    let j = alphas.len();
    let mut tau = vec![0.0; j];
    if j >= 2 {
        tau[0] = alphas[j - 1] * c;
        tau[j - 1] = -alphas[0] * c;
    }
    ItemParams::new(tau, alphas.to_vec())
}

/// Tolerance used by [`is_in_symmetry_class`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Checks `alpha_k tau_k = -alpha_{J-k+1} tau_{J-k+1}` for every `k`.
pub fn is_in_symmetry_class(item: &ItemParams) -> bool {
    let (tau, alpha) = (item.thresholds(), item.discriminations());
    let j = tau.len();
    (0..j).all(|k| {
        let mirror = j - 1 - k;
        (alpha[k] * tau[k] + alpha[mirror] * tau[mirror]).abs() <= SYMMETRY_TOL
    })
}

/// Limits `(pi_0, pi_J)` of the extreme categories along the large-`c` family.
pub fn limit_probabilities(theta: Ability, a_total: f64) -> Result<(f64, f64)> {
    max_fisher_information(a_total)?;
    let rho = logistic(a_total * theta.value());
    Ok((1.0 - rho, rho))
}

/// `d pi_j / d tau_i`, rows are categories `0..=J`, columns thresholds.
pub fn d_pi_d_tau(theta: Ability, item: &ItemParams) -> Vec<Vec<f64>> {
    let (p, _, tails) = item.moments(theta.value());
    let j_max = item.steps();
    (0..=j_max)
        .map(|j| {
            (1..=j_max)
                .map(|i| {
                    let step = if j >= i { 1.0 } else { 0.0 };
                    item.discriminations[i - 1] * p[j] * (tails[i] - step)
                })
                .collect()
        })
        .collect()
}

/// Gradient of the information with respect to the thresholds.
pub fn d_m_d_tau(theta: Ability, item: &ItemParams) -> Vec<f64> {
    let (_, mean, _) = item.moments(theta.value());
    let dpi = d_pi_d_tau(theta, item);
    let j_max = item.steps();
    (0..j_max)
        .map(|i| {
            (0..=j_max)
                .map(|j| {
                    let d = item.cumulative.for_category(j) - mean;
                    d * d * dpi[j][i]
                })
                .sum()
        })
        .collect()
}

/// `d pi_j / d alpha_i`, rows are categories `0..=J`, columns discriminations.
pub fn d_pi_d_alpha(theta: Ability, item: &ItemParams) -> Vec<Vec<f64>> {
    let th = theta.value();
    let (p, _, tails) = item.moments(th);
    let j_max = item.steps();
    (0..=j_max)
        .map(|j| {
            (1..=j_max)
                .map(|i| {
                    let step = if j >= i { 1.0 } else { 0.0 };
                    -(th - item.thresholds[i - 1]) * p[j] * (tails[i] - step)
                })
                .collect()
        })
        .collect()
}

/// Gradient of the information with respect to the discriminations, including
/// the dependence of every `A_j` with `j >= i` on `alpha_i`.
pub fn d_m_d_alpha(theta: Ability, item: &ItemParams) -> Vec<f64> {
    let (p, mean, _) = item.moments(theta.value());
    let dpi = d_pi_d_alpha(theta, item);
    let j_max = item.steps();
    (1..=j_max)
        .map(|i| {
            let mut g = 0.0;
            for j in 0..=j_max {
                let d = item.cumulative.for_category(j) - mean;
                g += d * d * dpi[j][i - 1];
                if j >= i {
                    g += 2.0 * d * p[j];
                }
            }
            g
        })
        .collect()
}

/// Hessian of the information with respect to the thresholds.
pub fn hessian_m_tau(theta: Ability, item: &ItemParams) -> Vec<Vec<f64>> {
    let (p, mean, tails) = item.moments(theta.value());
    let j_max = item.steps();
    // dev[j][i] = d log pi_j / d tau_i
    let dev: Vec<Buf> = (0..=j_max)
        .map(|j| {
            (1..=j_max)
                .map(|i| {
                    let step = if j >= i { 1.0 } else { 0.0 };
                    item.discriminations[i - 1] * (tails[i] - step)
                })
                .collect()
        })
        .collect();
    // d mean / d tau_i
    let dmean: Buf = (0..j_max)
        .map(|i| {
            (0..=j_max)
                .map(|j| item.cumulative.for_category(j) * p[j] * dev[j][i])
                .sum()
        })
        .collect();
    let mut h = vec![vec![0.0; j_max]; j_max];
    for i in 0..j_max {
        for n in 0..=i {
            let cov: f64 = (0..=j_max).map(|k| p[k] * dev[k][i] * dev[k][n]).sum();
            let mut acc = 0.0;
            for j in 0..=j_max {
                let d = item.cumulative.for_category(j) - mean;
                acc += d * d * p[j] * (dev[j][i] * dev[j][n] - cov);
            }
            acc -= 2.0 * dmean[i] * dmean[n];
            h[i][n] = acc;
            h[n][i] = acc;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(x: f64) -> Ability {
        Ability::new(x).unwrap()
    }

    fn standard_item() -> ItemParams {
        ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap()
    }

    #[test]
    fn rejects_bad_items() {
        assert!(ItemParams::new(vec![], vec![]).is_err());
        assert!(ItemParams::new(vec![0.0], vec![0.0]).is_err());
        assert!(ItemParams::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ItemParams::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(Ability::new(f64::INFINITY).is_err());
    }

    #[test]
    fn reference_probabilities() {
        let e = std::f64::consts::E;
        let p = category_probabilities(th(0.0), &standard_item());
        let lo = 1.0 / (2.0 + 2.0 * e);
        let mid = e / (2.0 + 2.0 * e);
        for (got, want) in p.as_slice().iter().zip([lo, mid, mid, lo]) {
            assert!((got - want).abs() < 1e-15);
        }
        let p = category_probabilities(th(-1.0), &standard_item());
        let rounded: Vec<f64> = p.as_slice().iter().map(|v| (v * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, vec![0.41, 0.41, 0.15, 0.02]);
        let p = category_probabilities(th(0.0), &ItemParams::two_pl(0.0, 1.0).unwrap());
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let item = ItemParams::new(vec![-400.0, 400.0], vec![1.0, 1.0]).unwrap();
        let p = category_probabilities(th(300.0), &item);
        assert!(p.as_slice().iter().all(|v| v.is_finite()));
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_values() {
        let two_pl = ItemParams::two_pl(0.0, 1.0).unwrap();
        assert_eq!(score(th(0.0), &two_pl, 1).unwrap(), 0.5);
        assert_eq!(score(th(0.0), &two_pl, 0).unwrap(), -0.5);
        assert!((score(th(0.0), &standard_item(), 3).unwrap() - 1.5).abs() < 1e-14);
        assert!(score(th(0.0), &two_pl, 2).is_err());
    }

    #[test]
    fn information_values() {
        let m = fisher_information(th(0.0), &standard_item());
        assert!((2.25 / m - 2.86).abs() < 5e-3, "{m}");
        let m_low = fisher_information(th(-1.0), &standard_item());
        assert!((2.25 / m_low - 3.75).abs() < 5e-3, "{m_low}");
        assert_eq!(fisher_information(th(0.0), &ItemParams::two_pl(0.0, 1.0).unwrap()), 0.25);
    }

    #[test]
    fn max_information() {
        assert_eq!(max_fisher_information(3.0).unwrap(), 2.25);
        assert_eq!(max_fisher_information(1.0).unwrap(), 0.25);
        assert_eq!(max_fisher_information(2.0).unwrap(), 1.0);
        assert!(max_fisher_information(0.0).is_err());
    }

    #[test]
    fn approx_optimal_construction() {
        let item = approx_locally_optimal_item(5.0, &[1.0, 1.0]).unwrap();
        assert_eq!(item.thresholds(), &[5.0, -5.0]);
        let item = approx_locally_optimal_item(2.0, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(item.thresholds(), &[6.0, 0.0, -2.0]);
        assert!(is_in_symmetry_class(&item));
        assert_eq!(approx_locally_optimal_item(3.0, &[2.0]).unwrap().thresholds(), &[0.0]);
        assert!(approx_locally_optimal_item(0.0, &[1.0]).is_err());

        let p = category_probabilities(th(0.0), &approx_locally_optimal_item(40.0, &[1.0, 1.0]).unwrap());
        for (got, want) in p.as_slice().iter().zip([0.5, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetry_class_membership() {
        let yes = ItemParams::new(vec![5.0, -5.0], vec![1.0, 1.0]).unwrap();
        let also = ItemParams::new(vec![1.0, 0.0, -2.0], vec![2.0, 1.0, 1.0]).unwrap();
        let no = ItemParams::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(is_in_symmetry_class(&yes));
        assert!(is_in_symmetry_class(&also));
        assert!(!is_in_symmetry_class(&no));
    }

    #[test]
    fn limits() {
        assert_eq!(limit_probabilities(th(0.0), 3.0).unwrap(), (0.5, 0.5));
        let (_, rho) = limit_probabilities(th(1.0), 2.0).unwrap();
        let e2 = 2f64.exp();
        assert!((rho - e2 / (1.0 + e2)).abs() < 1e-15);
        assert!((rho - 0.8808).abs() < 1e-4);
        let (_, rho) = limit_probabilities(th(1e3), 1.0).unwrap();
        assert_eq!(rho, 1.0);
    }

    #[test]
    fn two_pl_derivatives() {
        let item = ItemParams::two_pl(0.0, 1.0).unwrap();
        assert!((d_pi_d_tau(th(0.0), &item)[1][0] + 0.25).abs() < 1e-15);
        assert_eq!(d_pi_d_alpha(th(0.0), &item)[1][0], 0.0);
        let e = std::f64::consts::E;
        let want = e / ((1.0 + e) * (1.0 + e));
        assert!((d_pi_d_alpha(th(1.0), &item)[1][0] - want).abs() < 1e-15);
        for alpha in [0.3, 1.0, 2.7] {
            let item = ItemParams::two_pl(0.0, alpha).unwrap();
            assert!((d_m_d_alpha(th(0.0), &item)[0] - alpha / 2.0).abs() < 1e-14);
        }
        let g = d_m_d_alpha(th(1.0), &item)[0];
        let pq = want;
        let diff = (1.0 / (1.0 + e)) * (e - 1.0);
        assert!((g - pq * (2.0 - diff)).abs() < 1e-14);
        assert!((g - 0.3023).abs() < 1e-4);
    }

    #[test]
    fn columns_sum_to_zero() {
        let item = standard_item();
        for m in [d_pi_d_tau(th(0.3), &item), d_pi_d_alpha(th(0.3), &item)] {
            for i in 0..3 {
                let s: f64 = m.iter().map(|row| row[i]).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_at_the_limit() {
        let item = approx_locally_optimal_item(40.0, &[1.0, 1.0]).unwrap();
        assert!(d_m_d_tau(th(0.0), &item).iter().all(|g| g.abs() < 1e-12));

        let (p0, pj) = limit_probabilities(th(0.5), 2.0).unwrap();
        for (i, g) in d_m_d_tau(th(0.5), &item).iter().enumerate() {
            let want = item.discriminations()[i] * 4.0 * pj * p0 * (pj - p0);
            assert!((g - want).abs() < 1e-8, "{g} vs {want}");
        }
        let h = hessian_m_tau(th(0.0), &item);
        for row in &h {
            for v in row {
                assert!((v + 0.5).abs() < 1e-8, "{v}");
            }
        }
    }
}
