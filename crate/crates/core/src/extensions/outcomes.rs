//! Public post-purchase outcomes. A purchase now moves log-odds by
//! `log z ± log w`; passes still move by `−log z`. Cascades stay absorbing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{path_rng, summarize_exits, Absorption, HittingStats};
use crate::error::{check, Error, Result};
use crate::exec::Exec;
use crate::grid::{build_grid, Grid};
use crate::model::{
    buyer_action, derive_statics, logit, region_of, Action, Belief, ModelParams, Region, Signal,
    Statics,
};
use crate::solver::{cascade_values, Cascades, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    G,
    B,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeParams {
    pub rho: f64,
    /// `ρ / (1 − ρ)`, infinite at `ρ = 1`.
    pub w: f64,
}

impl OutcomeParams {
    pub fn new(rho: f64) -> Result<Self> {
        check(rho > 0.5 && rho <= 1.0, "rho", rho, "1/2 < rho <= 1")?;
        let w = if rho == 1.0 {
            f64::INFINITY
        } else {
            rho / (1.0 - rho)
        };
        Ok(Self { rho, w })
    }

    pub fn log_w(&self) -> f64 {
        self.w.ln()
    }
}

/// Bayes map on `(action, outcome)`; identity in cascades and at λ ∈ {0, 1}.
pub fn outcome_update(
    belief: Belief,
    action: Action,
    outcome: Outcome,
    statics: &Statics,
    w: f64,
) -> Result<Belief> {
    match (action, outcome) {
        (Action::Pass, Outcome::None) | (Action::Buy, Outcome::G | Outcome::B) => {}
        _ => return Err(Error::InconsistentOutcome { action, outcome }),
    }
    if belief.is_degenerate() || region_of(belief, statics) != Region::Experimentation {
        return Ok(belief);
    }
    let ell = match outcome {
        Outcome::G => belief.ell + statics.log_z + w.ln(),
        Outcome::B => belief.ell + statics.log_z - w.ln(),
        Outcome::None => belief.ell - statics.log_z,
    };
    Ok(Belief::from_log_odds(ell))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSolution {
    pub params: ModelParams,
    pub outcome: OutcomeParams,
    pub options: SolveOptions,
    pub statics: Statics,
    pub grid: Grid,
    pub cascades: Cascades,
    pub values: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    /// Continuation values at `λ^{+G}`, `λ^{+B}` and `λ^−` per node.
    pub v_good: Vec<f64>,
    pub v_bad: Vec<f64>,
    pub v_pass: Vec<f64>,
    /// The incentive evaluated as `(2q−1)p + δ[(2q−1)V(λ^−) + (2q−1)(2ρ−1)(V_G − V_B)] − c`.
    pub delta_alt_form: Vec<f64>,
    pub iterations: usize,
    pub sup_residual: f64,
}

impl OutcomeSolution {
    pub fn lambdas(&self) -> Vec<f64> {
        self.grid.lambdas()
    }

    pub fn investment_nodes(&self) -> Vec<usize> {
        self.grid
            .interior()
            .filter(|&k| self.theta[k] > 0.5)
            .collect()
    }

    /// `max |delta − delta_alt_form|` over interior nodes.
    pub fn alt_form_gap(&self) -> f64 {
        self.grid
            .interior()
            .map(|k| (self.delta[k] - self.delta_alt_form[k]).abs())
            .fold(0.0, f64::max)
    }

    /// Policy at an arbitrary log-odds, read off the nearest interior node.
    pub fn theta_at(&self, ell: f64) -> f64 {
        self.theta[self.grid.nearest_interior(ell)]
    }
}

/// Piecewise-linear value in log-odds with cascade constants beyond the grid.
pub fn interpolate(values: &[f64], grid: &Grid, cascades: &Cascades, ell: f64) -> f64 {
    let x = grid.position(ell);
    let last = grid.last() as f64;
    if x <= 0.0 {
        return cascades.down;
    }
    if x >= last {
        return cascades.up;
    }
    let i = x.floor() as usize;
    let t = x - i as f64;
    if t == 0.0 {
        values[i]
    } else {
        (1.0 - t) * values[i] + t * values[i + 1]
    }
}

struct Continuations {
    good: f64,
    bad: f64,
    pass: f64,
}

fn continuations(
    values: &[f64],
    grid: &Grid,
    cascades: &Cascades,
    statics: &Statics,
    log_w: f64,
    k: usize,
) -> Continuations {
    let ell = grid.nodes[k];
    let up = ell + statics.log_z;
    let (good, bad) = if log_w.is_infinite() {
        (cascades.up, cascades.down)
    } else {
        (
            interpolate(values, grid, cascades, up + log_w),
            interpolate(values, grid, cascades, up - log_w),
        )
    };
    let pass = match grid.down(k) {
        crate::grid::Landing::Interior(j) => values[j],
        _ => cascades.down,
    };
    Continuations { good, bad, pass }
}

/// Expected continuation given θ: `(E[V′ | θ = 0], E[V′ | θ = 1])`.
fn expected(cont: &Continuations, q: f64, rho: f64) -> (f64, f64) {
    let e = |theta_high: bool| {
        let buy = if theta_high { q } else { 1.0 - q };
        let good = if theta_high { rho } else { 1.0 - rho };
        buy * good * cont.good + buy * (1.0 - good) * cont.bad + (1.0 - buy) * cont.pass
    };
    (e(false), e(true))
}

pub fn solve_outcomes(
    params: &ModelParams,
    rho: f64,
    opts: &SolveOptions,
) -> Result<OutcomeSolution> {
    let outcome = OutcomeParams::new(rho)?;
    opts.validate()?;
    let statics = derive_statics(params)?;
    let grid = build_grid(&statics, opts.m)?;
    let cascades = cascade_values(params, opts.epsilon);
    let log_w = outcome.log_w();
    let (p, q, c, dl) = (params.p, params.q, params.c, params.delta);
    let last = grid.last();

    let mut values = vec![0.0; grid.len()];
    values[0] = cascades.down;
    values[last] = cascades.up;
    let cap = opts.iteration_cap(dl);
    let mut iterations = 0;
    let mut sup = f64::INFINITY;
    while iterations < cap {
        let mut next = values.clone();
        for k in grid.interior() {
            let cont = continuations(&values, &grid, &cascades, &statics, log_w, k);
            let (e0, e1) = expected(&cont, q, rho);
            let low = p * (1.0 - q) + dl * e0;
            let high = p * q - c + dl * e1;
            next[k] = low.max(high);
        }
        sup = grid
            .interior()
            .map(|k| (next[k] - values[k]).abs())
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

    let n = grid.len();
    let mut delta = vec![-c; n];
    let mut theta = vec![0.0; n];
    let mut alt = vec![-c; n];
    let (mut v_good, mut v_bad, mut v_pass) =
        (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
    for k in grid.interior() {
        let cont = continuations(&values, &grid, &cascades, &statics, log_w, k);
        let s = 2.0 * q - 1.0;
        delta[k] =
            s * p + dl * ((q + rho - 1.0) * cont.good + (q - rho) * cont.bad - s * cont.pass) - c;
        alt[k] = s * p + dl * (s * cont.pass + s * (2.0 * rho - 1.0) * (cont.good - cont.bad)) - c;
        theta[k] = if delta[k] > 0.0 { 1.0 } else { 0.0 };
        v_good[k] = cont.good;
        v_bad[k] = cont.bad;
        v_pass[k] = cont.pass;
    }
    let solution = OutcomeSolution {
        params: *params,
        outcome,
        options: *opts,
        statics,
        grid,
        cascades,
        values,
        theta,
        delta,
        v_good,
        v_bad,
        v_pass,
        delta_alt_form: alt,
        iterations,
        sup_residual: sup,
    };
    log::info!(
        "outcome incentive at rho = {rho}: max |exact − alternative form| = {:.6e}",
        solution.alt_form_gap()
    );
    Ok(solution)
}

/// Log-odds tolerance for deciding that a path has reached a threshold.
const THRESHOLD_TOL: f64 = 1e-9;

fn region_with_tol(ell: f64, statics: &Statics) -> Region {
    if ell <= statics.ell_under + THRESHOLD_TOL {
        Region::DownCascade
    } else if ell >= statics.ell_over - THRESHOLD_TOL {
        Region::UpCascade
    } else {
        Region::Experimentation
    }
}

fn absorption_of(region: Region) -> Absorption {
    match region {
        Region::DownCascade => Absorption::Down,
        Region::UpCascade => Absorption::Up,
        Region::Experimentation => Absorption::None,
    }
}

fn outcome_exit_time(
    sol: &OutcomeSolution,
    lambda0: f64,
    t_max: usize,
    seed: u64,
    path_id: u64,
) -> Result<(Option<usize>, Absorption)> {
    if !(lambda0 > 0.0 && lambda0 < 1.0) {
        return Err(Error::InvalidBelief(lambda0));
    }
    let st = &sol.statics;
    let mut ell = logit(lambda0);
    let region = region_with_tol(ell, st);
    if region != Region::Experimentation {
        return Ok((Some(0), absorption_of(region)));
    }
    let (q, rho) = (sol.params.q, sol.outcome.rho);
    let mut rng = path_rng(seed, path_id);
    for t in 0..t_max {
        let high = rng.random::<f64>() < sol.theta_at(ell);
        let signal = if rng.random::<f64>() < if high { q } else { 1.0 - q } {
            Signal::High
        } else {
            Signal::Low
        };
        let good = rng.random::<f64>() < if high { rho } else { 1.0 - rho };
        let action = buyer_action(ell.exp(), signal, st, sol.params.buyer_tie_break);
        let outcome = match (action, good) {
            (Action::Pass, _) => Outcome::None,
            (Action::Buy, true) => Outcome::G,
            (Action::Buy, false) => Outcome::B,
        };
        ell = outcome_update(
            Belief::from_log_odds(ell),
            action,
            outcome,
            st,
            sol.outcome.w,
        )?
        .ell;
        let region = region_with_tol(ell, st);
        if region != Region::Experimentation {
            return Ok((Some(t + 1), absorption_of(region)));
        }
    }
    Ok((None, Absorption::None))
}

pub fn outcome_hitting_stats_with(
    exec: Exec,
    sol: &OutcomeSolution,
    lambda0: f64,
    n_paths: usize,
    t_max: usize,
    seed: u64,
) -> Result<HittingStats> {
    check(n_paths >= 1, "n_paths", n_paths as f64, "n_paths >= 1")?;
    check(t_max >= 1, "t_max", t_max as f64, "T_max >= 1")?;
    let exits = exec
        .map(n_paths, |i| {
            outcome_exit_time(sol, lambda0, t_max, seed, i as u64)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_exits(&exits, t_max))
}

pub fn outcome_hitting_stats(
    sol: &OutcomeSolution,
    lambda0: f64,
    n_paths: usize,
    t_max: usize,
    seed: u64,
) -> Result<HittingStats> {
    outcome_hitting_stats_with(Exec::default(), sol, lambda0, n_paths, t_max, seed)
}
