//! Probability and advantage conversions, beta/Dirichlet posteriors,
//! generalized averages, population arithmetic and sample-size planning.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::tournament::BETA;

/// Grid size used by [`advantage_moments_numeric`] callers that have no preference.
pub const DEFAULT_NUMERIC_GRID: usize = 100;

/// Probability that a player rated `r_a` beats one rated `r_b`.
pub fn win_prob(r_a: f64, r_b: f64) -> Result<f64> {
    check_finite(r_a, "rating")?;
    check_finite(r_b, "rating")?;
    Ok(logistic(r_a - r_b))
}

/// Win probability for an Elo difference, without input checks.
#[inline]
pub fn logistic(diff: f64) -> f64 {
    1.0 / (1.0 + (-BETA * diff).exp())
}

/// Elo advantage implied by a win probability: `(1/BETA) ln(p / (1 - p))`.
pub fn advantage_from_prob(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange { p });
    }
    Ok((p / (1.0 - p)).ln() / BETA)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta_param: f64,
    pub prior_weight: f64,
}

impl BetaPosterior {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta_param)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta_param;
        self.alpha * self.beta_param / (s + 1.0) / (s * s)
    }

    pub fn stdev(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Beta posterior on the win probability. Counts may be fractional (draws
/// enter as half a win and half a loss).
pub fn beta_posterior(wins: f64, losses: f64, prior_weight: f64) -> Result<BetaPosterior> {
    if !(prior_weight > 0.0) || !prior_weight.is_finite() {
        return Err(Error::InvalidParameter {
            name: "prior_weight",
            reason: format!("must be > 0, got {prior_weight}"),
        });
    }
    if !(wins >= 0.0 && losses >= 0.0) || !wins.is_finite() || !losses.is_finite() {
        return Err(Error::InvalidParameter {
            name: "counts",
            reason: "win and loss counts must be finite and >= 0".into(),
        });
    }
    Ok(BetaPosterior {
        alpha: wins + prior_weight,
        beta_param: losses + prior_weight,
        prior_weight,
    })
}

/// Dirichlet posterior over win/draw/loss with a uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdlPosterior {
    pub w: f64,
    pub d: f64,
    pub l: f64,
    /// `ln(W / L)`
    pub alpha_ij: f64,
    /// `ln(D / (1 - D))`
    pub beta_ij: f64,
}

pub fn wdl_posterior(n_w: u64, n_d: u64, n_l: u64) -> WdlPosterior {
    let total = (n_w + n_d + n_l) as f64 + 3.0;
    let w = (n_w as f64 + 1.0) / total;
    let l = (n_l as f64 + 1.0) / total;
    // derive d from the others so the three sum to one exactly
    let d = 1.0 - w - l;
    WdlPosterior {
        w,
        d,
        l,
        alpha_ij: ((n_w as f64 + 1.0) / (n_l as f64 + 1.0)).ln(),
        beta_ij: (d / (1.0 - d)).ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    #[default]
    Approx,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageMoments {
    pub mean: f64,
    pub stdev: f64,
    pub method: MomentMethod,
}

/// Mean and spread of the advantage from the one-sigma band of the beta
/// posterior, mapped through [`advantage_from_prob`].
pub fn advantage_moments_approx(wins: f64, losses: f64) -> Result<AdvantageMoments> {
    advantage_moments_approx_weighted(wins, losses, 1.0)
}

pub fn advantage_moments_approx_weighted(
    wins: f64,
    losses: f64,
    prior_weight: f64,
) -> Result<AdvantageMoments> {
    let post = beta_posterior(wins, losses, prior_weight)?;
    let (mu, sd) = (post.mean(), post.stdev());
    let a0 = advantage_from_prob(mu - sd)?;
    let a1 = advantage_from_prob(mu + sd)?;
    Ok(AdvantageMoments {
        mean: 0.5 * (a0 + a1),
        stdev: 0.5 * (a1 - a0),
        method: MomentMethod::Approx,
    })
}

/// Moments of the advantage under the beta posterior by midpoint quadrature
/// on `grid` points of the open unit interval.
pub fn advantage_moments_numeric(wins: f64, losses: f64, grid: usize) -> Result<AdvantageMoments> {
    advantage_moments_numeric_weighted(wins, losses, 1.0, grid)
}

pub fn advantage_moments_numeric_weighted(
    wins: f64,
    losses: f64,
    prior_weight: f64,
    grid: usize,
) -> Result<AdvantageMoments> {
    if grid < 100 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need at least 100 points, got {grid}"),
        });
    }
    let post = beta_posterior(wins, losses, prior_weight)?;
    let (am1, bm1) = (post.alpha - 1.0, post.beta_param - 1.0);
    let n = grid as f64;
    let points: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let p = (i as f64 + 0.5) / n;
            let logd = am1 * p.ln() + bm1 * (1.0 - p).ln();
            (((p / (1.0 - p)).ln() / BETA), logd)
        })
        .collect();
    let peak = points.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1) = (0.0, 0.0);
    for &(a, logd) in &points {
        let w = (logd - peak).exp();
        z += w;
        m1 += w * a;
    }
    let mean = m1 / z;
    let var = points
        .iter()
        .map(|&(a, logd)| (logd - peak).exp() * (a - mean).powi(2))
        .sum::<f64>()
        / z;
    Ok(AdvantageMoments {
        mean,
        stdev: var.sqrt(),
        method: MomentMethod::Numeric,
    })
}

/// Weighted power mean `(sum w x^d / sum w)^(1/d)`; geometric mean near `d = 0`.
pub fn generalized_average(values: &[f64], weights: &[f64], d: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: "length differs from values".into(),
        });
    }
    check_finite(d, "exponent")?;
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: "weights must be positive and finite".into(),
        });
    }
    let any_nonpos = values.iter().any(|v| *v <= 0.0);
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("value"));
    }
    if any_nonpos && (d <= 0.0 || d.fract() != 0.0) {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: format!("non-positive values need a positive integer exponent, got d = {d}"),
        });
    }
    let wsum: f64 = weights.iter().sum();
    if d.abs() < 1e-9 {
        let s: f64 = values.iter().zip(weights).map(|(v, w)| w * v.ln()).sum();
        return Ok((s / wsum).exp());
    }
    let s: f64 = values.iter().zip(weights).map(|(v, w)| w * v.powf(d)).sum();
    Ok((s / wsum).powf(1.0 / d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EloAverage {
    pub rating: f64,
    pub mean_prob: f64,
}

/// Rating of a mixed player whose components each face `opponent` equally often.
pub fn elo_average(opponent: f64, components: &[f64]) -> Result<EloAverage> {
    if components.is_empty() {
        return Err(Error::EmptyInput("component ratings"));
    }
    let mut total = 0.0;
    for &c in components {
        total += win_prob(c, opponent)?;
    }
    let mean_prob = total / components.len() as f64;
    Ok(EloAverage {
        rating: opponent + advantage_from_prob(mean_prob)?,
        mean_prob,
    })
}

/// Average opponent rating of a player rated `x` who scores `p` against them.
pub fn population_mean_rating(x: f64, p: f64) -> Result<f64> {
    check_finite(x, "rating")?;
    Ok(x - advantage_from_prob(p)?)
}

/// Elo rise of a population between two observed win rates of a fixed probe player.
pub fn population_improvement(p1: f64, p2: f64) -> Result<f64> {
    Ok(advantage_from_prob(p1)? - advantage_from_prob(p2)?)
}

/// Smallest number of games at which an `advantage` stands `k_sigma` standard
/// deviations clear of an even match.
pub fn required_sample_size(advantage: f64, k_sigma: f64) -> Result<u64> {
    if !(advantage > 0.0) || !advantage.is_finite() {
        return Err(Error::InvalidParameter {
            name: "advantage",
            reason: "must be positive and finite".into(),
        });
    }
    if !(k_sigma > 0.0) || !k_sigma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "k_sigma",
            reason: "must be positive and finite".into(),
        });
    }
    let p = logistic(advantage);
    let gap = p - 0.5;
    let n = k_sigma * k_sigma * (0.25 + p * (1.0 - p)) / (gap * gap);
    // guard against n landing a hair above an integer through rounding
    let c = n.ceil();
    Ok(if c - n > 1.0 - 1e-9 { c - 1.0 } else { c } as u64)
}

/// Per-area probabilities that player `a` out-performs player `b`.
pub fn area_win_probs(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter {
            name: "areas",
            reason: "need equal, non-empty capability vectors".into(),
        });
    }
    a.iter().zip(b).map(|(&x, &y)| win_prob(x, y)).collect()
}

/// Probability of winning strictly more than half of independent contests.
pub fn majority_win_prob(probs: &[f64]) -> f64 {
    // dist[k] = P(k successes so far)
    let mut dist = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &q) in dist.iter().enumerate() {
            next[k] += q * (1.0 - p);
            next[k + 1] += q * p;
        }
        dist = next;
    }
    let need = probs.len() / 2 + 1;
    dist[need..].iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn win_prob_examples() {
        assert!((win_prob(1400.0, 1200.0).unwrap() - 0.7597).abs() < 5e-5);
        assert_eq!(win_prob(1200.0, 1200.0).unwrap(), 0.5);
        assert!((win_prob(1357.54, 1250.0).unwrap() - 0.65).abs() < 5e-5);
        assert!(win_prob(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn advantage_examples() {
        assert!((advantage_from_prob(0.675).unwrap() - 126.97).abs() < 0.01);
        assert_eq!(advantage_from_prob(0.5).unwrap(), 0.0);
        assert!((advantage_from_prob(0.75).unwrap() - 190.85).abs() < 0.01);
        assert!(advantage_from_prob(0.0).is_err());
        assert!(advantage_from_prob(1.0).is_err());
    }

    #[test]
    fn beta_examples() {
        assert!((beta_posterior(2.0, 3.0, 1.0).unwrap().mean() - 3.0 / 7.0).abs() < 1e-12);
        let b = beta_posterior(2.0, 1.0, 1.0).unwrap();
        assert!((b.mean() - 0.6).abs() < 1e-12);
        assert!((advantage_from_prob(b.mean()).unwrap() - 70.4).abs() < 0.1);
        let b = beta_posterior(2.0, 1.0, 0.1).unwrap();
        assert!((b.mean() - 0.65625).abs() < 1e-12);
        assert!((advantage_from_prob(b.mean()).unwrap() - 112.0).abs() < 0.5);
        assert!(beta_posterior(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn wdl_examples() {
        let u = wdl_posterior(0, 0, 0);
        assert!((u.w - 1.0 / 3.0).abs() < 1e-15 && (u.d - 1.0 / 3.0).abs() < 1e-15);
        let c = wdl_posterior(4, 10, 0);
        assert!((c.w - 5.0 / 17.0).abs() < 1e-12);
        assert!((c.d - 11.0 / 17.0).abs() < 1e-12);
        assert!((c.l - 1.0 / 17.0).abs() < 1e-12);
        assert!(c.alpha_ij.is_finite() && c.beta_ij.is_finite());
        let m = wdl_posterior(6, 21, 5);
        assert!((m.w - 7.0 / 35.0).abs() < 1e-12);
        assert!((m.d - 22.0 / 35.0).abs() < 1e-12);
        assert_eq!(m.w + m.d + m.l, 1.0);
    }

    #[test]
    fn moments_examples() {
        let a = advantage_moments_approx(1.0, 0.0).unwrap();
        assert!((a.mean - 169.0).abs() < 0.1 && (a.stdev - 217.3).abs() < 0.1);
        let a = advantage_moments_approx(1.0, 1.0).unwrap();
        assert!(a.mean.abs() < 1e-9 && (a.stdev - 167.2).abs() < 0.1);
        let a = advantage_moments_approx(40.0, 10.0).unwrap();
        assert!((a.mean - 234.4).abs() < 0.1 && (a.stdev - 59.6).abs() < 0.1);

        let n = advantage_moments_numeric(1.0, 0.0, DEFAULT_NUMERIC_GRID).unwrap();
        assert!((n.mean - 172.5).abs() < 1.0 && (n.stdev - 258.2).abs() < 1.0);
        let n = advantage_moments_numeric(25.0, 25.0, DEFAULT_NUMERIC_GRID).unwrap();
        assert!(n.mean.abs() < 1e-9 && (n.stdev - 48.6).abs() < 1.0);
        let n = advantage_moments_numeric(150.0, 50.0, DEFAULT_NUMERIC_GRID).unwrap();
        assert!((n.mean - 189.7).abs() < 1.0 && (n.stdev - 28.3).abs() < 1.0);
        assert!(advantage_moments_numeric(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn averages() {
        let h = generalized_average(&[1.0, 1e300], &[1.0, 1.0], -1.0).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
        let h = generalized_average(&[1.0, f64::INFINITY], &[1.0, 1.0], -1.0).unwrap();
        assert_eq!(h, 2.0);
        for d in [-2.0, -1.0, 0.0, 0.5, 1.0, 3.0] {
            let v = generalized_average(&[3.0; 3], &[1.0, 2.0, 5.0], d).unwrap();
            assert!((v - 3.0).abs() < 1e-12);
        }
        assert!((generalized_average(&[1.0, 9.0], &[1.0, 1.0], 0.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(generalized_average(&[-1.0, 2.0], &[1.0, 1.0], 0.5).is_err());
        assert!(generalized_average(&[-1.0, 2.0], &[1.0, 1.0], 1.0).is_ok());
    }

    #[test]
    fn elo_average_examples() {
        let e = elo_average(1200.0, &[1400.0, 1100.0]).unwrap();
        assert!((e.rating - 1241.8).abs() < 0.1);
        assert!((e.mean_prob - 0.5599).abs() < 1e-4);
        let e = elo_average(1200.0, &[2500.0, 1100.0]).unwrap();
        assert!((e.rating - 1330.7).abs() < 0.1);
        assert_eq!(elo_average(1200.0, &[1200.0, 1200.0]).unwrap().rating, 1200.0);
    }

    #[test]
    fn population_examples() {
        assert!((population_mean_rating(1320.0, 0.675).unwrap() - 1193.0).abs() < 0.5);
        let d = population_improvement(0.675, 0.423).unwrap();
        assert!((d - 181.0).abs() < 0.5);
        // the rounded "75% is 200 points" rule would say 400
        assert!((population_improvement(0.75, 0.25).unwrap() - 381.70).abs() < 0.01);
        assert_eq!(population_improvement(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn sample_sizes() {
        // tabulated: 6, 796, 55, 1546 (ceiling convention may differ by one)
        for (adv, k, table) in [(200.0, 1.0, 6), (34.9, 2.0, 796), (100.0, 1.5, 55), (25.0, 2.0, 1546)] {
            let n = required_sample_size(adv, k).unwrap() as i64;
            assert!((n - table).abs() <= 1, "{adv} {k}: {n}");
        }
        assert!(required_sample_size(0.0, 1.0).is_err());
    }

    #[test]
    fn circular_areas() {
        let alice = [300.0, 600.0, 900.0];
        let bob = [900.0, 300.0, 600.0];
        let p = area_win_probs(&alice, &bob).unwrap();
        assert!((p[0] - 0.031).abs() < 1e-3);
        assert!((p[1] - 0.849).abs() < 1e-3 && (p[2] - 0.849).abs() < 1e-3);
        let m = majority_win_prob(&p);
        assert!((m - 0.729).abs() < 1e-3);
        assert!((advantage_from_prob(m).unwrap() - 171.635).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn advantage_inverts_win_prob(a in -1000.0f64..1000.0, b in -1000.0f64..1000.0) {
            let p = win_prob(a, b).unwrap();
            prop_assert!((advantage_from_prob(p).unwrap() - (a - b)).abs() < 1e-9);
            prop_assert!((p + win_prob(b, a).unwrap() - 1.0).abs() < 1e-15);
        }

        #[test]
        fn beta_band_inside_unit(w in 0u32..5000, l in 0u32..5000) {
            let b = beta_posterior(w as f64, l as f64, 1.0).unwrap();
            prop_assert!(b.mean() - b.stdev() > 0.0);
            prop_assert!(b.mean() + b.stdev() < 1.0);
        }

        #[test]
        fn power_mean_monotone(
            v in prop::collection::vec(0.1f64..100.0, 1..6),
            bump in 0.0f64..10.0,
            idx in 0usize..6,
            d in -1.0f64..3.0,
        ) {
            let w = vec![1.0; v.len()];
            let mut v2 = v.clone();
            let k = idx % v.len();
            v2[k] += bump;
            let lo = generalized_average(&v, &w, d).unwrap();
            let hi = generalized_average(&v2, &w, d).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-12));
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((generalized_average(&v, &w, 1.0).unwrap() - mean).abs() < 1e-9 * mean);
        }

        #[test]
        fn sample_size_inverse_square(adv in 20.0f64..60.0) {
            let n1 = required_sample_size(adv, 2.0).unwrap() as f64;
            let n2 = required_sample_size(2.0 * adv, 2.0).unwrap() as f64;
            let ratio = n1 / n2;
            prop_assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {}", ratio);
        }
    }
}
