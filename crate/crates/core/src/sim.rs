//! Response simulation and maximum-likelihood ability estimation, used to
//! check the Fisher information against the sampling variance of the MLE.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{DesignMeasure, DesignPoint};
use crate::error::{Error, Result};
use crate::gpcm::{Ability, ItemParams};
use crate::numeric::pairwise_sum;

/// Newton stops once the total score is below this.
pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_NEWTON_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_items: usize,
    pub n_replications: usize,
    pub theta_true: Ability,
    pub design: DesignMeasure,
}

impl SimConfig {
    pub fn new(
        seed: u64,
        n_items: usize,
        n_replications: usize,
        theta_true: Ability,
        design: DesignMeasure,
    ) -> Result<Self> {
        if n_items == 0 || n_replications == 0 {
            return Err(Error::invalid("item and replication counts must be positive"));
        }
        Ok(SimConfig {
            seed,
            n_items,
            n_replications,
            theta_true,
            design,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleFlag {
    Ok,
    /// Every response in the lowest category: the likelihood increases towards -inf.
    AllMin,
    /// Every response in the highest category.
    AllMax,
    MaxIter,
}

impl MleFlag {
    pub const ALL: [MleFlag; 4] = [MleFlag::Ok, MleFlag::AllMin, MleFlag::AllMax, MleFlag::MaxIter];

    pub fn name(self) -> &'static str {
        match self {
            MleFlag::Ok => "ok",
            MleFlag::AllMin => "all_min",
            MleFlag::AllMax => "all_max",
            MleFlag::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    /// `None` when the MLE does not exist.
    pub estimate: Option<Ability>,
    pub converged: bool,
    pub iterations: usize,
    pub flag: MleFlag,
    /// Total score at the estimate.
    pub score: f64,
}

/// Draws a category by inverting the cumulative distribution.
fn sample_from(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left u above the total: take the last category with mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

pub fn sample_response(rng: &mut impl Rng, theta: Ability, item: &ItemParams) -> usize {
    sample_from(rng, &item.probs(theta.value()))
}

pub fn sample_point_response(rng: &mut impl Rng, theta: Ability, point: &DesignPoint) -> usize {
    sample_from(rng, &point.probs(theta.value()))
}

fn log_likelihood(responses: &[(&DesignPoint, usize)], theta: f64) -> f64 {
    responses
        .iter()
        .map(|(p, y)| p.probs(theta)[*y].ln())
        .sum()
}

fn score_and_information(responses: &[(&DesignPoint, usize)], theta: f64) -> (f64, f64) {
    let (mut score, mut info) = (0.0, 0.0);
    for (p, y) in responses {
        let probs = p.probs(theta);
        let a = p.cumulative();
        let mean: f64 = probs
            .iter()
            .enumerate()
            .map(|(j, pj)| a.for_category(j) * pj)
            .sum();
        score += a.for_category(*y) - mean;
        info += p.information(theta);
    }
    (score, info)
}

pub(crate) fn mle_points(responses: &[(&DesignPoint, usize)]) -> Result<MleResult> {
    if responses.is_empty() {
        return Err(Error::invalid("no responses to estimate from"));
    }
    if let Some((p, y)) = responses.iter().find(|(p, y)| *y > p.steps()) {
        return Err(Error::invalid(format!("response {y} outside 0..={}", p.steps())));
    }
    let absent = |flag| MleResult {
        estimate: None,
        converged: false,
        iterations: 0,
        flag,
        score: f64::NAN,
    };
    if responses.iter().all(|(_, y)| *y == 0) {
        return Ok(absent(MleFlag::AllMin));
    }
    if responses.iter().all(|(p, y)| *y == p.steps()) {
        return Ok(absent(MleFlag::AllMax));
    }
    let mut theta = 0.0;
    let mut ll = log_likelihood(responses, theta);
    for iteration in 0..MAX_NEWTON_ITER {
        let (score, info) = score_and_information(responses, theta);
        if score.abs() < SCORE_TOL {
            return Ok(MleResult {
                estimate: Some(Ability::new(theta)?),
                converged: true,
                iterations: iteration,
                flag: MleFlag::Ok,
                score,
            });
        }
        let mut step = if info > 0.0 { score / info } else { score.signum() };
        loop {
            let next = theta + step;
            let ll_next = log_likelihood(responses, next);
            if ll_next >= ll || step.abs() < 1e-14 {
                theta = next;
                ll = ll_next;
                break;
            }
            step *= 0.5;
        }
    }
    let (score, _) = score_and_information(responses, theta);
    Ok(MleResult {
        estimate: Ability::new(theta).ok(),
        converged: false,
        iterations: MAX_NEWTON_ITER,
        flag: MleFlag::MaxIter,
        score,
    })
}

/// Maximum-likelihood ability from a set of scored items, by Newton's method
/// from zero with step halving on the log-likelihood.
pub fn mle_theta(responses: &[(ItemParams, usize)]) -> Result<MleResult> {
    let points: Vec<(DesignPoint, usize)> = responses
        .iter()
        .map(|(i, y)| (DesignPoint::Item(i.clone()), *y))
        .collect();
    let refs: Vec<(&DesignPoint, usize)> = points.iter().map(|(p, y)| (p, *y)).collect();
    mle_points(&refs)
}

/// Number of items given to each design point (largest-remainder rounding).
pub fn allocate_items(design: &DesignMeasure, n_items: usize) -> Vec<usize> {
    let exact: Vec<f64> = design
        .points()
        .iter()
        .map(|p| p.weight * n_items as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|a, b| {
        let (ra, rb) = (exact[*a] - exact[*a].floor(), exact[*b] - exact[*b].floor());
        rb.total_cmp(&ra).then(a.cmp(b))
    });
    let missing = n_items - counts.iter().sum::<usize>();
    for k in order.into_iter().take(missing) {
        counts[k] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CramerRaoReport {
    pub seed: u64,
    pub n_items: usize,
    pub theta_true: f64,
    pub empirical_variance: f64,
    /// `1 / (n_items M(theta_true, design))`
    pub predicted_variance: f64,
    pub ratio: f64,
    pub mean_estimate: f64,
    pub n_converged: usize,
    pub n_total: usize,
    pub non_convergence_rate: f64,
    pub flags_histogram: BTreeMap<String, usize>,
}

/// Simulates `n_replications` tests of `n_items` items at `theta_true` and
/// compares the variance of the converged MLEs with the inverse information.
pub fn cramer_rao_check(cfg: &SimConfig) -> Result<CramerRaoReport> {
    let counts = allocate_items(&cfg.design, cfg.n_items);
    let items: Vec<&DesignPoint> = cfg
        .design
        .points()
        .iter()
        .zip(&counts)
        .flat_map(|(p, n)| std::iter::repeat_n(&p.point, *n))
        .collect();
    let theta = cfg.theta_true;
    let results = (0..cfg.n_replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            let responses: Vec<(&DesignPoint, usize)> = items
                .iter()
                .map(|p| (*p, sample_point_response(&mut rng, theta, p)))
                .collect();
            mle_points(&responses)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut flags_histogram: BTreeMap<String, usize> =
        MleFlag::ALL.iter().map(|f| (f.name().to_string(), 0)).collect();
    for r in &results {
        *flags_histogram.get_mut(r.flag.name()).expect("all flags present") += 1;
    }
    let estimates: Vec<f64> = results
        .iter()
        .filter(|r| r.converged)
        .filter_map(|r| r.estimate.map(Ability::value))
        .collect();
    let n = estimates.len();
    let mean = pairwise_sum(&estimates) / n as f64;
    let squares: Vec<f64> = estimates.iter().map(|e| (e - mean) * (e - mean)).collect();
    let empirical_variance = if n > 1 {
        pairwise_sum(&squares) / (n - 1) as f64
    } else {
        f64::NAN
    };
    let predicted_variance =
        1.0 / (cfg.n_items as f64 * crate::criteria::fisher_information_design(theta, &cfg.design));
    Ok(CramerRaoReport {
        seed: cfg.seed,
        n_items: cfg.n_items,
        theta_true: theta.value(),
        empirical_variance,
        predicted_variance,
        ratio: empirical_variance / predicted_variance,
        mean_estimate: mean,
        n_converged: n,
        n_total: results.len(),
        non_convergence_rate: 1.0 - n as f64 / results.len() as f64,
        flags_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpcm::{approx_locally_optimal_item, category_probabilities, score};

    fn th(x: f64) -> Ability {
        Ability::new(x).unwrap()
    }

    #[test]
    fn nearly_certain_category() {
        let item = ItemParams::two_pl(-50.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ones = (0..100_000)
            .filter(|_| sample_response(&mut rng, th(0.0), &item) == 1)
            .count();
        assert!(ones as f64 / 1e5 > 0.9999);
    }

    #[test]
    fn draws_are_reproducible() {
        let item = ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..100).map(|_| sample_response(&mut rng, th(0.3), &item)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn frequencies_match_probabilities() {
        let item = ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let p = category_probabilities(th(0.0), &item);
        let n = 1_000_000;
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..n {
            counts[sample_response(&mut rng, th(0.0), &item)] += 1;
        }
        for (j, c) in counts.iter().enumerate() {
            let pj = p.get(j);
            let sd = (pj * (1.0 - pj) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - pj).abs() < 3.0 * sd, "category {j}");
        }
    }

    #[test]
    fn symmetric_pair_estimates_zero() {
        let item = ItemParams::two_pl(0.0, 1.0).unwrap();
        let r = mle_theta(&[(item.clone(), 0), (item, 1)]).unwrap();
        assert!(r.converged);
        assert!(r.estimate.unwrap().value().abs() < 1e-10);
    }

    #[test]
    fn extreme_patterns_are_flagged() {
        let item = ItemParams::new(vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let r = mle_theta(&[(item.clone(), 0), (item.clone(), 0)]).unwrap();
        assert_eq!(r.flag, MleFlag::AllMin);
        assert!(r.estimate.is_none());
        let r = mle_theta(&[(item.clone(), 2), (item.clone(), 2)]).unwrap();
        assert_eq!(r.flag, MleFlag::AllMax);
        assert!(mle_theta(&[]).is_err());
        assert!(mle_theta(&[(item, 3)]).is_err());
    }

    #[test]
    fn converged_estimate_zeroes_the_score() {
        let item = ItemParams::new(vec![-0.5, 0.8], vec![1.2, 0.6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let responses: Vec<(ItemParams, usize)> = (0..30)
            .map(|_| (item.clone(), sample_response(&mut rng, th(0.4), &item)))
            .collect();
        let r = mle_theta(&responses).unwrap();
        assert!(r.converged);
        let t = r.estimate.unwrap();
        let total: f64 = responses.iter().map(|(i, y)| score(t, i, *y).unwrap()).sum();
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn allocation_sums_to_total() {
        let a = DesignPoint::Item(ItemParams::two_pl(0.0, 1.0).unwrap());
        let b = DesignPoint::Item(ItemParams::two_pl(1.0, 1.0).unwrap());
        let d = DesignMeasure::normalized(vec![(a, 1.0), (b, 2.0)]).unwrap();
        assert_eq!(allocate_items(&d, 10), vec![3, 7]);
        assert_eq!(allocate_items(&d, 1).iter().sum::<usize>(), 1);
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let item = approx_locally_optimal_item(40.0, &[1.0, 1.0, 1.0]).unwrap().shifted(0.5).unwrap();
        let cfg = SimConfig::new(11, 200, 300, th(0.5), DesignMeasure::one_point(item)).unwrap();
        let a = cramer_rao_check(&cfg).unwrap();
        let b = cramer_rao_check(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.n_total, 300);
        let se = (a.empirical_variance / a.n_converged as f64).sqrt();
        assert!((a.mean_estimate - 0.5).abs() < 3.0 * se, "{a:?}");
    }
}
