//! Flexible pricing: the per-belief implementable price interval and a
//! value iteration where the seller may either price informatively or pool.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::model::{logistic, logit, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    pub p_low: f64,
    pub p_high: f64,
}

impl PriceSet {
    pub fn contains(&self, price: f64) -> bool {
        self.p_low < price && price < self.p_high
    }
}

/// Open interval of prices at which the buyer follows her signal at belief
/// `lambda`: `r/z < p/(v − p) < r·z`.
pub fn price_set(lambda: f64, v: f64, z: f64) -> Result<PriceSet> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidBelief(lambda));
    }
    let r = lambda / (1.0 - lambda);
    Ok(price_set_from_odds(r, v, z))
}

fn price_set_from_odds(r: f64, v: f64, z: f64) -> PriceSet {
    let lo = r / z;
    let hi = r * z;
    PriceSet {
        p_low: v * lo / (1.0 + lo),
        p_high: v * hi / (1.0 + hi),
    }
}

/// Model primitives without a posted price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexParams {
    pub v: f64,
    pub q: f64,
    pub c: f64,
    pub delta: f64,
}

impl FlexParams {
    pub fn from_model(p: &ModelParams) -> Self {
        Self {
            v: p.v,
            q: p.q,
            c: p.c,
            delta: p.delta,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(self.v > 0.0, "v", self.v, "v > 0")?;
        check(self.q > 0.5 && self.q < 1.0, "q", self.q, "1/2 < q < 1")?;
        check(self.c > 0.0, "c", self.c, "c > 0")?;
        check(
            self.delta > 0.0 && self.delta < 1.0,
            "delta",
            self.delta,
            "0 < delta < 1",
        )
    }

    pub fn z(&self) -> f64 {
        self.q / (1.0 - self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub m: usize,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for FlexOptions {
    fn default() -> Self {
        Self {
            lambda_min: 0.01,
            lambda_max: 0.99,
            m: 50,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl FlexOptions {
    pub fn validate(&self) -> Result<()> {
        check(
            self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max < 1.0,
            "lambda_min",
            self.lambda_min,
            "0 < lambda_min < lambda_max < 1",
        )?;
        check(self.m >= 1, "m", self.m as f64, "m >= 1")?;
        check(self.tol > 0.0, "tol", self.tol, "tol > 0")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexSolution {
    pub params: FlexParams,
    pub options: FlexOptions,
    /// Log-odds step, `log z / m`.
    pub h: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub theta: Vec<f64>,
    pub price: Vec<f64>,
    pub pooling: Vec<bool>,
    pub p_low: Vec<f64>,
    pub p_high: Vec<f64>,
    pub iterations: usize,
    pub sup_residual: f64,
}

impl FlexSolution {
    pub fn lambdas(&self) -> Vec<f64> {
        self.nodes.iter().map(|&l| logistic(l)).collect()
    }

    pub fn any_pooling(&self) -> bool {
        self.pooling.iter().any(|&p| p)
    }

    /// Log-odds after a purchase and after a pass at node `k`, or `None`
    /// where the seller pools and beliefs stay put.
    pub fn transitions(&self, k: usize) -> Option<(f64, f64)> {
        if self.pooling[k] {
            return None;
        }
        let log_z = self.params.z().ln();
        Some((self.nodes[k] + log_z, self.nodes[k] - log_z))
    }
}

struct FlexModel {
    params: FlexParams,
    m: usize,
    nodes: Vec<f64>,
    sets: Vec<PriceSet>,
    log_z: f64,
}

impl FlexModel {
    fn new(params: &FlexParams, opts: &FlexOptions) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        let (lo, hi) = (logit(opts.lambda_min), logit(opts.lambda_max));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain { lo, hi });
        }
        let log_z = params.z().ln();
        let h = log_z / opts.m as f64;
        let n = ((hi - lo) / h).round() as usize;
        if n < 1 {
            return Err(Error::Domain { lo, hi });
        }
        let nodes: Vec<f64> = (0..=n).map(|k| lo + k as f64 * h).collect();
        // the outermost updates must still be finite log-odds
        if !(nodes[n] + log_z).is_finite() || !(nodes[0] - log_z).is_finite() {
            return Err(Error::Domain { lo, hi });
        }
        let z = params.z();
        let sets = nodes
            .iter()
            .map(|&l| price_set_from_odds(l.exp(), params.v, z))
            .collect();
        Ok(Self {
            params: *params,
            m: opts.m,
            nodes,
            sets,
            log_z,
        })
    }

    fn pooling_value(&self, ell: f64) -> f64 {
        let set = price_set_from_odds(ell.exp(), self.params.v, self.params.z());
        set.p_low / (1.0 - self.params.delta)
    }

    /// Continuation after a purchase (`up`) or a pass; exits from
    /// the truncated domain are valued at pooling from the landed belief.
    fn continuation(&self, values: &[f64], k: usize, up: bool) -> f64 {
        let n = self.nodes.len() - 1;
        if up {
            if k + self.m <= n {
                values[k + self.m]
            } else {
                self.pooling_value(self.nodes[k] + self.log_z)
            }
        } else if k >= self.m {
            values[k - self.m]
        } else {
            self.pooling_value(self.nodes[k] - self.log_z)
        }
    }

    /// `(pool, informative, θ of the informative branch)` at node `k`.
    fn branches(&self, values: &[f64], k: usize) -> (f64, f64, f64) {
        let prm = &self.params;
        let set = self.sets[k];
        let pool = set.p_low / (1.0 - prm.delta);
        let up = self.continuation(values, k, true);
        let down = self.continuation(values, k, false);
        let branch = |gamma: f64, theta: f64| {
            set.p_high * gamma - prm.c * theta + prm.delta * (gamma * up + (1.0 - gamma) * down)
        };
        let invest = branch(prm.q, 1.0);
        let shirk = branch(1.0 - prm.q, 0.0);
        if invest > shirk {
            (pool, invest, 1.0)
        } else {
            (pool, shirk, 0.0)
        }
    }
}

pub fn solve_flexible(params: &FlexParams, opts: &FlexOptions) -> Result<FlexSolution> {
    let model = FlexModel::new(params, opts)?;
    let n = model.nodes.len();
    let cap = opts
        .max_iter
        .unwrap_or_else(|| 10 * (opts.tol.ln() / params.delta.ln()).ceil().max(1.0) as usize);
    let mut values = vec![0.0; n];
    let mut iterations = 0;
    let mut sup = f64::INFINITY;
    while iterations < cap {
        let next: Vec<f64> = (0..n)
            .map(|k| {
                let (pool, info, _) = model.branches(&values, k);
                pool.max(info)
            })
            .collect();
        sup = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
        if sup <= opts.tol {
            break;
        }
    }
    if sup > opts.tol {
        return Err(Error::NotConverged {
            iterations,
            sup_diff: sup,
            tol: opts.tol,
        });
    }

    let mut theta = vec![0.0; n];
    let mut price = vec![0.0; n];
    let mut pooling = vec![false; n];
    for k in 0..n {
        let (pool, info, th) = model.branches(&values, k);
        if pool > info {
            pooling[k] = true;
            price[k] = model.sets[k].p_low;
        } else {
            theta[k] = th;
            price[k] = model.sets[k].p_high;
        }
    }
    log::debug!(
        "flexible price: {} nodes, {} pooling, {} iterations",
        n,
        pooling.iter().filter(|&&p| p).count(),
        iterations
    );
    Ok(FlexSolution {
        params: *params,
        options: *opts,
        h: model.log_z / opts.m as f64,
        p_low: model.sets.iter().map(|s| s.p_low).collect(),
        p_high: model.sets.iter().map(|s| s.p_high).collect(),
        nodes: model.nodes,
        values,
        theta,
        price,
        pooling,
        iterations,
        sup_residual: sup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBar {
    /// Midpoint of the final bracket.
    pub estimate: f64,
    /// Largest δ seen with pooling somewhere on the domain.
    pub lo: f64,
    /// Smallest δ above `lo` seen with no pooling anywhere.
    pub hi: f64,
    pub bisection_steps: usize,
    /// Every `(δ, no pooling)` evaluation, in the order made.
    pub evaluations: Vec<(f64, bool)>,
    /// Pairs `δ_a < δ_b` where the predicate held at `δ_a` but failed at `δ_b`.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

fn no_pooling(params: &FlexParams, delta: f64, opts: &FlexOptions) -> Result<bool> {
    Ok(!solve_flexible(&params.with_delta(delta), opts)?.any_pooling())
}

/// Bisection for the discount factor above which the flexible-price seller
/// never pools on the domain.
pub fn delta_bar(params: &FlexParams, opts: &FlexOptions, tol_delta: f64) -> Result<DeltaBar> {
    check(
        tol_delta > 0.0 && tol_delta < 0.5,
        "tol_delta",
        tol_delta,
        "0 < tol_delta < 1/2",
    )?;
    let mut evaluations = Vec::new();
    let eval = |d: f64, evals: &mut Vec<(f64, bool)>| -> Result<bool> {
        let ok = no_pooling(params, d, opts)?;
        evals.push((d, ok));
        Ok(ok)
    };

    let (d_min, d_max) = (tol_delta, 1.0 - tol_delta);
    if eval(d_min, &mut evaluations)? {
        return Err(Error::NotFound(format!(
            "no pooling already at delta = {d_min}"
        )));
    }
    if !eval(d_max, &mut evaluations)? {
        return Err(Error::NotFound(format!(
            "pooling persists at delta = {d_max}"
        )));
    }
    // a coarse scan exposes non-monotone stretches that bisection alone would hide
    let scan = 8;
    for i in 1..scan {
        let d = d_min + (d_max - d_min) * i as f64 / scan as f64;
        eval(d, &mut evaluations)?;
    }
    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lo = sorted
        .iter()
        .filter(|e| !e.1)
        .map(|e| e.0)
        .fold(d_min, f64::max);
    let mut hi = sorted
        .iter()
        .filter(|e| e.1 && e.0 > lo)
        .map(|e| e.0)
        .fold(d_max, f64::min);

    let mut bisection_steps = 0;
    while hi - lo > tol_delta {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut evaluations)? {
            hi = mid;
        } else {
            lo = mid;
        }
        bisection_steps += 1;
    }

    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut monotonicity_violations = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if a.1 && !b.1 && b.0 > a.0 {
                monotonicity_violations.push((a.0, b.0));
            }
        }
    }
    if !monotonicity_violations.is_empty() {
        log::warn!(
            "no-pooling predicate is not monotone in delta: {} violating pairs",
            monotonicity_violations.len()
        );
    }
    Ok(DeltaBar {
        estimate: 0.5 * (lo + hi),
        lo,
        hi,
        bisection_steps,
        evaluations,
        monotonicity_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{buyer_action, derive_statics, Action, Signal, TieBreak};

    fn reference() -> FlexParams {
        FlexParams::from_model(&ModelParams::reference())
    }

    #[test]
    fn price_set_at_even_odds() {
        let s = price_set(0.5, 1.0, 3.0).unwrap();
        assert!((s.p_low - 0.25).abs() < 1e-12);
        assert!((s.p_high - 0.75).abs() < 1e-12);
    }

    #[test]
    fn price_set_collapses_upward() {
        let s = price_set(1.0 - 1e-12, 1.0, 3.0).unwrap();
        assert!(s.p_low > 1.0 - 1e-10 && s.p_high > 1.0 - 1e-10);
        assert!(price_set(0.0, 1.0, 3.0).is_err());
        assert!(price_set(1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn price_set_sandwich() {
        for i in 1..40 {
            let lambda = i as f64 / 40.0;
            let s = price_set(lambda, 1.0, 3.0).unwrap();
            assert!(0.0 < s.p_low && s.p_low < s.p_high && s.p_high < 1.0);
            for w in [0.05, 0.5, 0.95] {
                let price = s.p_low + w * (s.p_high - s.p_low);
                let prm = ModelParams::new(1.0, price, 0.75, 0.22, 0.92).unwrap();
                let st = derive_statics(&prm).unwrap();
                let r = lambda / (1.0 - lambda);
                assert_eq!(
                    buyer_action(r, Signal::High, &st, TieBreak::Pass),
                    Action::Buy
                );
                assert_eq!(
                    buyer_action(r, Signal::Low, &st, TieBreak::Buy),
                    Action::Pass
                );
            }
        }
    }

    #[test]
    fn myopic_limit_matches_direct_comparison() {
        let prm = reference().with_delta(1e-6);
        let sol = solve_flexible(&prm, &FlexOptions::default()).unwrap();
        for k in 0..sol.nodes.len() {
            let pool = sol.p_low[k];
            let info = (sol.p_high[k] * (1.0 - prm.q)).max(sol.p_high[k] * prm.q - prm.c);
            if (pool - info).abs() > 1e-4 {
                assert_eq!(sol.pooling[k], pool > info, "node {k}");
            }
        }
        assert!(sol.any_pooling());
    }

    #[test]
    fn informative_nodes_price_at_p_high_and_step_log_z() {
        let sol = solve_flexible(&reference(), &FlexOptions::default()).unwrap();
        let log_z = 3.0f64.ln();
        for k in 0..sol.nodes.len() {
            match sol.transitions(k) {
                Some((up, down)) => {
                    assert_eq!(sol.price[k], sol.p_high[k]);
                    assert!(sol.price[k] > sol.p_low[k]);
                    assert!(((up - sol.nodes[k]) - log_z).abs() < 1e-12);
                    assert!(((sol.nodes[k] - down) - log_z).abs() < 1e-12);
                }
                None => assert_eq!(sol.price[k], sol.p_low[k]),
            }
        }
    }

    #[test]
    fn bad_domain_is_rejected() {
        let opts = FlexOptions {
            lambda_min: 0.6,
            lambda_max: 0.4,
            ..FlexOptions::default()
        };
        assert!(solve_flexible(&reference(), &opts).is_err());
    }

    #[test]
    fn coarse_tolerance_bisects_at_most_once() {
        let opts = FlexOptions {
            lambda_min: 0.1,
            lambda_max: 0.9,
            m: 5,
            tol: 1e-8,
            max_iter: None,
        };
        let r = delta_bar(&reference(), &opts, 0.1).unwrap();
        assert!(r.bisection_steps <= 1);
        assert!(r.lo < r.hi && r.hi - r.lo <= 0.1);
        assert!(r.monotonicity_violations.is_empty());
    }
}
