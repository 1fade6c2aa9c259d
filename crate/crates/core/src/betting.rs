//! Bet sizing for a risk-averse bettor with exponential utility.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Risk attitude, either directly or through the "pain" amount `D`: losing
/// `D` hurts twice as much as winning `D` helps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    Curvature(f64),
    Pain(f64),
}

impl Risk {
    /// Utility curvature `a`; `ln 2 / D` for a pain amount.
    pub fn curvature(self) -> f64 {
        match self {
            Risk::Curvature(a) => a,
            Risk::Pain(d) => std::f64::consts::LN_2 / d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetParams {
    /// Probability of the outcome bet on.
    pub p: f64,
    /// Payout ratio: a stake `b` returns `b r` on a win, so the profit is `b (r - 1)`.
    pub r: f64,
    pub risk: Risk,
}

impl BetParams {
    pub fn new(p: f64, r: f64, risk: Risk) -> Result<Self> {
        let params = BetParams { p, r, risk };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.p, "p")?;
        check_finite(self.r, "r")?;
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { p: self.p });
        }
        if !(self.r > 1.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("payout ratio must be > 1, got {}", self.r),
            });
        }
        let a = self.risk.curvature();
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "risk",
                reason: "curvature and pain amount must be finite and > 0".into(),
            });
        }
        Ok(())
    }

    /// Expected utility of staking `b`.
    pub fn expected_utility(&self, b: f64) -> f64 {
        let a = self.risk.curvature();
        self.p * utility(b * (self.r - 1.0), a) + (1.0 - self.p) * utility(-b, a)
    }
}

/// `u(x) = (1 - e^(-a x)) / a`: `u(0) = 0`, slope 1 at 0, bounded above by `1/a`.
/// Requires `a > 0`.
pub fn utility(x: f64, a: f64) -> f64 {
    -(-a * x).exp_m1() / a
}

/// Worth betting at all for a risk-neutral bettor: `p r >= 1`.
pub fn worthwhile(p: f64, r: f64) -> bool {
    p * r >= 1.0
}

/// Stake before clamping: `ln[p (r - 1) / (1 - p)] / (a r)`, negative when the
/// bet is unfavourable.
pub fn unclamped_bet(params: &BetParams) -> Result<f64> {
    params.validate()?;
    let BetParams { p, r, risk } = *params;
    Ok((p * (r - 1.0) / (1.0 - p)).ln() / (risk.curvature() * r))
}

/// Stake that maximises expected utility; zero when the bet is not worthwhile.
pub fn optimal_bet(params: &BetParams) -> Result<f64> {
    Ok(unclamped_bet(params)?.max(0.0))
}
