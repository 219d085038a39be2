//! Model primitives, the buyer's static decision rule and the action-based
//! Bayes map.
//!
//! Beliefs are carried both as a probability `λ` and as log-odds
//! `ℓ = log(λ / (1 − λ))`. Log-odds are authoritative for arithmetic: a
//! Bayes step is an exact `± log z` translation.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

/// Buyer's action at exact indifference (posterior odds equal to `K`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Buy,
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Pass = 0,
    Buy = 1,
}

impl Action {
    pub fn as_f64(self) -> f64 {
        match self {
            Action::Pass => 0.0,
            Action::Buy => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    DownCascade,
    Experimentation,
    UpCascade,
}

/// Primitive tuple of the game plus the buyer tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Buyer value of a high-quality good.
    pub v: f64,
    /// Posted price.
    pub p: f64,
    /// Private-signal precision.
    pub q: f64,
    /// Seller's cost of high quality.
    pub c: f64,
    /// Seller discount factor.
    pub delta: f64,
    #[serde(default)]
    pub buyer_tie_break: TieBreak,
}

impl ModelParams {
    pub fn new(v: f64, p: f64, q: f64, c: f64, delta: f64) -> Result<Self> {
        let params = Self {
            v,
            p,
            q,
            c,
            delta,
            buyer_tie_break: TieBreak::Buy,
        };
        params.validate()?;
        Ok(params)
    }

    /// Reference calibration: v = 1, p = 0.40, q = 0.75, c = 0.22, δ = 0.92.
    pub fn reference() -> Self {
        Self {
            v: 1.0,
            p: 0.40,
            q: 0.75,
            c: 0.22,
            delta: 0.92,
            buyer_tie_break: TieBreak::Buy,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.buyer_tie_break = tie_break;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(self.v.is_finite() && self.v > 0.0, "v", self.v, "v > 0")?;
        check(self.p > 0.0 && self.p < self.v, "p", self.p, "0 < p < v")?;
        check(self.q > 0.5 && self.q < 1.0, "q", self.q, "1/2 < q < 1")?;
        check(self.c.is_finite() && self.c > 0.0, "c", self.c, "c > 0")?;
        check(
            self.delta > 0.0 && self.delta < 1.0,
            "delta",
            self.delta,
            "0 < delta < 1",
        )?;
        Ok(())
    }

    /// Purchase probability `γ(θ) = (1 − q) + θ(2q − 1)` inside experimentation.
    pub fn purchase_prob(&self, theta: f64) -> f64 {
        (1.0 - self.q) + theta * (2.0 * self.q - 1.0)
    }
}

/// Constants derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statics {
    /// Signal likelihood ratio `q / (1 − q)`.
    pub z: f64,
    pub log_z: f64,
    /// Odds threshold `p / (v − p)`.
    pub k: f64,
    pub r_under: f64,
    pub r_over: f64,
    pub lambda_under: f64,
    pub lambda_over: f64,
    /// Myopic cost ratio `c / (p(2q − 1))`.
    pub eta: f64,
    pub ell_under: f64,
    pub ell_over: f64,
}

pub fn derive_statics(params: &ModelParams) -> Result<Statics> {
    params.validate()?;
    let z = params.q / (1.0 - params.q);
    let k = params.p / (params.v - params.p);
    let r_under = k / z;
    let r_over = k * z;
    let log_z = z.ln();
    let ell_under = r_under.ln();
    Ok(Statics {
        z,
        log_z,
        k,
        r_under,
        r_over,
        lambda_under: r_under / (1.0 + r_under),
        lambda_over: r_over / (1.0 + r_over),
        eta: params.c / (params.p * (2.0 * params.q - 1.0)),
        ell_under,
        ell_over: ell_under + 2.0 * log_z,
    })
}

/// Numerically stable `1 / (1 + e^{−ℓ})`.
pub fn logistic(ell: f64) -> f64 {
    if ell >= 0.0 {
        1.0 / (1.0 + (-ell).exp())
    } else {
        let e = ell.exp();
        e / (1.0 + e)
    }
}

pub fn logit(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        f64::NEG_INFINITY
    } else if lambda >= 1.0 {
        f64::INFINITY
    } else {
        (lambda / (1.0 - lambda)).ln()
    }
}

/// Public belief that current quality is high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub lambda: f64,
    pub ell: f64,
}

impl Belief {
    pub fn from_prob(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidBelief(lambda));
        }
        Ok(Self {
            lambda,
            ell: logit(lambda),
        })
    }

    pub fn from_log_odds(ell: f64) -> Self {
        Self {
            lambda: logistic(ell),
            ell,
        }
    }

    pub fn odds(&self) -> f64 {
        self.ell.exp()
    }

    /// λ ∈ {0, 1}: absorbing, updates are the identity.
    pub fn is_degenerate(&self) -> bool {
        self.ell.is_infinite()
    }
}

pub fn region_of(belief: Belief, statics: &Statics) -> Region {
    if belief.lambda <= statics.lambda_under {
        Region::DownCascade
    } else if belief.lambda >= statics.lambda_over {
        Region::UpCascade
    } else {
        Region::Experimentation
    }
}

/// Relative tolerance under which posterior odds count as equal to `K`.
const INDIFFERENCE_RTOL: f64 = 1e-12;

/// Buyer's best response given prior odds `r` and a private signal.
pub fn buyer_action(r: f64, signal: Signal, statics: &Statics, tie_break: TieBreak) -> Action {
    let posterior = match signal {
        Signal::High => r * statics.z,
        Signal::Low => r / statics.z,
    };
    if (posterior - statics.k).abs() <= INDIFFERENCE_RTOL * statics.k {
        match tie_break {
            TieBreak::Buy => Action::Buy,
            TieBreak::Pass => Action::Pass,
        }
    } else if posterior > statics.k {
        Action::Buy
    } else {
        Action::Pass
    }
}

/// `(Pr(buy | θ = 1), Pr(buy | θ = 0))` in a region.
pub fn action_likelihoods(region: Region, q: f64) -> (f64, f64) {
    match region {
        Region::UpCascade => (1.0, 1.0),
        Region::Experimentation => (q, 1.0 - q),
        Region::DownCascade => (0.0, 0.0),
    }
}

pub fn bayes_action_update(belief: Belief, action: Action, statics: &Statics) -> Belief {
    if belief.is_degenerate() || region_of(belief, statics) != Region::Experimentation {
        return belief;
    }
    match action {
        Action::Buy => Belief::from_log_odds(belief.ell + statics.log_z),
        Action::Pass => Belief::from_log_odds(belief.ell - statics.log_z),
    }
}

/// One-period best response; the seller picks θ = 0 at η = 1.
pub fn myopic_policy(region: Region, eta: f64) -> f64 {
    match region {
        Region::Experimentation if eta < 1.0 => 1.0,
        _ => 0.0,
    }
}
