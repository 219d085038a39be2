//! Infinite-horizon value iteration on the aligned log-odds grid.
//!
//! Node values are stored for all `2m + 1` nodes; entries `0` and `2m` hold
//! the closed-form cascade values. Only interior nodes are iterated.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::grid::{build_grid, Grid, Landing};
use crate::model::{derive_statics, ModelParams, Statics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub m: usize,
    /// Public tremble at the cascades, in `[0, 1/2)`.
    pub epsilon: f64,
    pub tol: f64,
    /// `None` means `10 · ⌈log(tol) / log(δ)⌉`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            m: 50,
            epsilon: 0.0,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(self.m >= 1, "m", self.m as f64, "m >= 1")?;
        check(
            self.tol > 0.0 && self.tol.is_finite(),
            "tol",
            self.tol,
            "tol > 0",
        )?;
        check(
            (0.0..0.5).contains(&self.epsilon),
            "epsilon",
            self.epsilon,
            "0 <= epsilon < 1/2",
        )?;
        if let Some(n) = self.max_iter {
            check(n >= 1, "max_iter", n as f64, "max_iter >= 1")?;
        }
        Ok(())
    }

    pub fn iteration_cap(&self, delta: f64) -> usize {
        self.max_iter
            .unwrap_or_else(|| 10 * (self.tol.ln() / delta.ln()).ceil().max(1.0) as usize)
    }
}

/// Continuation values of the two absorbing cascades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cascades {
    pub down: f64,
    pub up: f64,
}

/// Beliefs are frozen in a cascade and the seller never invests there, so
/// each value is a geometric series of `p · Pr(sale)`.
pub fn cascade_values(params: &ModelParams, epsilon: f64) -> Cascades {
    let annuity = params.p / (1.0 - params.delta);
    Cascades {
        down: annuity * epsilon,
        up: annuity * (1.0 - epsilon),
    }
}

#[inline]
pub(crate) fn lookup(values: &[f64], landing: Landing, cascades: &Cascades) -> f64 {
    match landing {
        Landing::Interior(j) => values[j],
        Landing::DownCascade => cascades.down,
        Landing::UpCascade => cascades.up,
    }
}

/// Values of the two quality choices at interior node `k`: `(θ = 0, θ = 1)`.
#[inline]
pub(crate) fn choice_values(
    values: &[f64],
    k: usize,
    grid: &Grid,
    params: &ModelParams,
    cascades: &Cascades,
) -> (f64, f64) {
    let up = lookup(values, grid.up(k), cascades);
    let down = lookup(values, grid.down(k), cascades);
    let ModelParams { p, q, c, delta, .. } = *params;
    let low = p * (1.0 - q) + delta * ((1.0 - q) * up + q * down);
    let high = p * q - c + delta * (q * up + (1.0 - q) * down);
    (low, high)
}

/// One application of the Bellman operator. Returns the new node vector and
/// the sup-norm change over interior nodes.
pub fn bellman_step(
    values: &[f64],
    grid: &Grid,
    params: &ModelParams,
    cascades: &Cascades,
) -> (Vec<f64>, f64) {
    let mut next = vec![0.0; grid.len()];
    next[0] = cascades.down;
    next[grid.last()] = cascades.up;
    let mut sup = 0.0f64;
    for k in grid.interior() {
        let (low, high) = choice_values(values, k, grid, params, cascades);
        next[k] = low.max(high);
        sup = sup.max((next[k] - values[k]).abs());
    }
    (next, sup)
}

/// One-shot gain from high quality at every node; `−c` at the cascades.
pub fn marginal_incentive(
    values: &[f64],
    grid: &Grid,
    params: &ModelParams,
    cascades: &Cascades,
) -> Vec<f64> {
    let ModelParams { p, q, c, delta, .. } = *params;
    (0..grid.len())
        .map(|k| {
            if grid.is_interior(k) {
                let gap =
                    lookup(values, grid.up(k), cascades) - lookup(values, grid.down(k), cascades);
                (2.0 * q - 1.0) * (p + delta * gap) - c
            } else {
                -c
            }
        })
        .collect()
}

/// Bang-bang policy; θ = 0 at exact indifference.
pub fn policy_from_value(delta: &[f64]) -> Vec<f64> {
    delta
        .iter()
        .map(|&d| if d > 0.0 { 1.0 } else { 0.0 })
        .collect()
}

/// `V(ℓ + log z) − V(ℓ − log z)` per node. The boundary entries of `values`
/// supply the cascade values; at the cascade nodes themselves the gradient
/// is zero since beliefs do not move.
pub fn finite_difference_gradient(values: &[f64], grid: &Grid) -> Vec<f64> {
    let cascades = Cascades {
        down: values[0],
        up: values[grid.last()],
    };
    (0..grid.len())
        .map(|k| {
            if grid.is_interior(k) {
                lookup(values, grid.up(k), &cascades) - lookup(values, grid.down(k), &cascades)
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub is_monotone: bool,
    pub is_concave_in_log_odds: bool,
    /// Largest violation of either check (0 when both pass exactly).
    pub max_violation: f64,
    pub max_monotone_violation: f64,
    pub max_concavity_violation: f64,
    /// Centre node of the worst second difference, if any triple exists.
    pub worst_concavity_node: Option<usize>,
}

/// Monotonicity over all nodes and concavity over interior triples
/// `(k − 1, k, k + 1)` of the uniformly spaced grid.
pub fn concavity_report(values: &[f64], grid: &Grid, tol_violation: f64) -> ConcavityReport {
    let max_monotone_violation = values
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max);
    let mut max_concavity_violation = 0.0f64;
    let mut worst = None;
    let last = grid.last();
    if last >= 4 {
        for k in 2..=last - 2 {
            let second = values[k + 1] - 2.0 * values[k] + values[k - 1];
            if second > max_concavity_violation {
                max_concavity_violation = second;
                worst = Some(k);
            }
        }
    }
    ConcavityReport {
        is_monotone: max_monotone_violation <= tol_violation,
        is_concave_in_log_odds: max_concavity_violation <= tol_violation,
        max_violation: max_monotone_violation.max(max_concavity_violation),
        max_monotone_violation,
        max_concavity_violation,
        worst_concavity_node: worst,
    }
}

/// Solved infinite-horizon problem on an aligned grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub params: ModelParams,
    pub options: SolveOptions,
    pub statics: Statics,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Probability of high quality per node. The solver only produces 0 or 1;
    /// simulation also accepts mixed policies.
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub fd_gradient: Vec<f64>,
    pub cascades: Cascades,
    pub iterations: usize,
    pub sup_residual: f64,
}

impl Solution {
    pub fn lambdas(&self) -> Vec<f64> {
        self.grid.lambdas()
    }

    pub fn investment_nodes(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| self.theta[k] > 0.0)
            .collect()
    }

    pub fn concavity(&self, tol_violation: f64) -> ConcavityReport {
        concavity_report(&self.values, &self.grid, tol_violation)
    }

    /// Replace the policy, e.g. to simulate a synthetic strategy.
    pub fn with_policy(mut self, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), self.grid.len());
        self.theta = theta;
        self
    }
}

pub fn solve(params: &ModelParams, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let statics = derive_statics(params)?;
    let grid = build_grid(&statics, opts.m)?;
    let cascades = cascade_values(params, opts.epsilon);
    let cap = opts.iteration_cap(params.delta);

    let mut values = vec![0.0; grid.len()];
    values[0] = cascades.down;
    values[grid.last()] = cascades.up;
    let mut iterations = 0;
    let mut sup = f64::INFINITY;
    while iterations < cap {
        let (next, diff) = bellman_step(&values, &grid, params, &cascades);
        values = next;
        sup = diff;
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
    log::debug!("value iteration converged in {iterations} iterations (sup diff {sup:e})");

    let delta = marginal_incentive(&values, &grid, params, &cascades);
    let theta = policy_from_value(&delta);
    let fd_gradient = finite_difference_gradient(&values, &grid);
    Ok(Solution {
        params: *params,
        options: *opts,
        statics,
        grid,
        values,
        theta,
        delta,
        fd_gradient,
        cascades,
        iterations,
        sup_residual: sup,
    })
}
