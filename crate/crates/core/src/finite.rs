//! Backward induction for the `T`-period game on the same grid as the
//! infinite-horizon solver.

use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::grid::{build_grid, Grid};
use crate::model::{buyer_action, derive_statics, logistic, Action, ModelParams, Signal, TieBreak};
use crate::solver::{
    choice_values, marginal_incentive, policy_from_value, solve, Cascades, SolveOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSolution {
    pub horizon: usize,
    pub params: ModelParams,
    pub options: SolveOptions,
    pub grid: Grid,
    /// `values[t - 1]` is `V_t`; the terminal `V_{T+1}` is identically zero.
    pub values: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    /// Cascade values per period.
    pub cascades: Vec<Cascades>,
    pub buyer_tie_break: TieBreak,
}

impl FiniteSolution {
    /// `V_1`, the value at the start of the game.
    pub fn first_period(&self) -> &[f64] {
        &self.values[0]
    }
}

pub fn solve_finite(
    params: &ModelParams,
    horizon: usize,
    opts: &SolveOptions,
) -> Result<FiniteSolution> {
    check(horizon >= 1, "horizon", horizon as f64, "T >= 1")?;
    opts.validate()?;
    let statics = derive_statics(params)?;
    let grid = build_grid(&statics, opts.m)?;
    let eps = opts.epsilon;

    let mut next = vec![0.0; grid.len()];
    let mut next_cascades = Cascades { down: 0.0, up: 0.0 };
    let mut values = Vec::with_capacity(horizon);
    let mut theta = Vec::with_capacity(horizon);
    let mut delta = Vec::with_capacity(horizon);
    let mut cascades = Vec::with_capacity(horizon);

    for _ in 0..horizon {
        let here = Cascades {
            down: params.p * eps + params.delta * next_cascades.down,
            up: params.p * (1.0 - eps) + params.delta * next_cascades.up,
        };
        let mut current = vec![0.0; grid.len()];
        current[0] = here.down;
        current[grid.last()] = here.up;
        for k in grid.interior() {
            let (low, high) = choice_values(&next, k, &grid, params, &next_cascades);
            current[k] = low.max(high);
        }
        let d = marginal_incentive(&next, &grid, params, &next_cascades);
        theta.push(policy_from_value(&d));
        delta.push(d);
        values.push(current.clone());
        cascades.push(here);
        next = current;
        next_cascades = here;
    }
    values.reverse();
    theta.reverse();
    delta.reverse();
    cascades.reverse();

    Ok(FiniteSolution {
        horizon,
        params: *params,
        options: *opts,
        grid,
        values,
        theta,
        delta,
        cascades,
        buyer_tie_break: params.buyer_tie_break,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonGap {
    pub horizon: usize,
    /// `sup_k |V_1^{(T)}_k − V_∞,k|`.
    pub gap: f64,
    /// `δ^T · p / (1 − δ)`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<HorizonGap>,
    pub gaps_nonincreasing: bool,
    pub values_nondecreasing: bool,
    pub within_tail_bound: bool,
}

pub fn convergence_to_infinite(
    params: &ModelParams,
    horizons: &[usize],
    opts: &SolveOptions,
) -> Result<ConvergenceReport> {
    check(
        !horizons.is_empty(),
        "horizons",
        0.0,
        "nonempty horizon list",
    )?;
    check(
        horizons.windows(2).all(|w| w[0] < w[1]),
        "horizons",
        horizons[0] as f64,
        "strictly increasing horizons",
    )?;
    let infinite = solve(params, opts)?;
    let mut rows = Vec::with_capacity(horizons.len());
    let mut previous: Option<Vec<f64>> = None;
    let mut values_nondecreasing = true;
    for &t in horizons {
        let fin = solve_finite(params, t, opts)?;
        let v1 = fin.first_period();
        let gap = v1
            .iter()
            .zip(&infinite.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(prev) = &previous {
            values_nondecreasing &= prev.iter().zip(v1).all(|(a, b)| *b >= *a - 1e-12);
        }
        previous = Some(v1.to_vec());
        rows.push(HorizonGap {
            horizon: t,
            gap,
            tail_bound: params.delta.powi(t as i32) * params.p / (1.0 - params.delta),
        });
    }
    let gaps_nonincreasing = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
    // the infinite solution itself carries up to ~δ/(1−δ)·tol error
    let slack = opts.tol * params.delta / (1.0 - params.delta);
    let within_tail_bound = rows.iter().all(|r| r.gap <= r.tail_bound + slack);
    Ok(ConvergenceReport {
        rows,
        gaps_nonincreasing,
        values_nondecreasing,
        within_tail_bound,
    })
}

/// Two-period configuration in which buyer 2 sits exactly at the up-cascade
/// threshold, evaluated under both buyer tie-breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPathology {
    /// Period-1 belief from which a purchase lands on the threshold.
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub odds_2: f64,
    /// Buyer 2's posterior odds after a low signal (equal to `K`).
    pub posterior_odds_after_low: f64,
    pub k: f64,
    pub action_after_low_buy_tie_break: Action,
    pub action_after_low_pass_tie_break: Action,
    pub actions_differ: bool,
    pub note: String,
}

pub fn boundary_pathology_demo(params: &ModelParams) -> Result<BoundaryPathology> {
    let statics = derive_statics(params)?;
    let odds_2 = statics.r_over;
    let buy = buyer_action(odds_2, Signal::Low, &statics, TieBreak::Buy);
    let pass = buyer_action(odds_2, Signal::Low, &statics, TieBreak::Pass);
    let actions_differ = buy != pass;
    Ok(BoundaryPathology {
        lambda_1: logistic(statics.k.ln()),
        lambda_2: statics.lambda_over,
        odds_2,
        posterior_odds_after_low: odds_2 / statics.z,
        k: statics.k,
        action_after_low_buy_tie_break: buy,
        action_after_low_pass_tie_break: pass,
        actions_differ,
        note: format!(
            "at lambda_2 = {:.6} a low-signal buyer is indifferent; the action is {:?} under the buy \
             tie-break and {:?} under the pass tie-break, so the same public belief maps to \
             different actions unless the tie-break is fixed",
            statics.lambda_over, buy, pass
        ),
    })
}
