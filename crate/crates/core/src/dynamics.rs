//! Belief-path simulation under a solved policy, exit-time statistics,
//! investment-pattern classification and realized-surplus welfare.
//!
//! Every path draws from its own ChaCha8 stream `(seed, path_id)`, so
//! results are identical whether paths run sequentially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::exec::Exec;
use crate::grid::Landing;
use crate::model::{bayes_action_update, buyer_action, region_of, Action, Belief, Region, Signal};
use crate::solver::Solution;

/// Expected one-step change in log-odds inside experimentation.
pub fn drift(theta: f64, q: f64, z: f64) -> f64 {
    (2.0 * q - 1.0) * (2.0 * theta - 1.0) * z.ln()
}

pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Absorption {
    Up,
    Down,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Position {
    Node(usize),
    Absorbed { ell: f64, up: bool },
}

#[derive(Debug, Clone, Copy)]
struct Period {
    quality: f64,
    action: Action,
}

/// Walks the belief process on a solution's grid.
struct Walker<'a> {
    solution: &'a Solution,
    pos: Position,
}

impl<'a> Walker<'a> {
    /// Off-grid starts snap to the nearest interior node once.
    fn start(solution: &'a Solution, lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            return Err(Error::InvalidBelief(lambda0));
        }
        let belief = Belief::from_prob(lambda0)?;
        let pos = match region_of(belief, &solution.statics) {
            Region::DownCascade => Position::Absorbed {
                ell: belief.ell,
                up: false,
            },
            Region::UpCascade => Position::Absorbed {
                ell: belief.ell,
                up: true,
            },
            Region::Experimentation => Position::Node(solution.grid.nearest_interior(belief.ell)),
        };
        Ok(Self { solution, pos })
    }

    fn ell(&self) -> f64 {
        match self.pos {
            Position::Node(k) => self.solution.grid.nodes[k],
            Position::Absorbed { ell, .. } => ell,
        }
    }

    fn absorption(&self) -> Absorption {
        match self.pos {
            Position::Node(_) => Absorption::None,
            Position::Absorbed { up: true, .. } => Absorption::Up,
            Position::Absorbed { up: false, .. } => Absorption::Down,
        }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> Period {
        let k = match self.pos {
            Position::Absorbed { up, .. } => {
                return Period {
                    quality: 0.0,
                    action: if up { Action::Buy } else { Action::Pass },
                }
            }
            Position::Node(k) => k,
        };
        let sol = self.solution;
        let q = sol.params.q;
        let high = rng.random::<f64>() < sol.theta[k];
        let p_high_signal = if high { q } else { 1.0 - q };
        let signal = if rng.random::<f64>() < p_high_signal {
            Signal::High
        } else {
            Signal::Low
        };
        let ell = sol.grid.nodes[k];
        let action = buyer_action(ell.exp(), signal, &sol.statics, sol.params.buyer_tie_break);
        let landing = match action {
            Action::Buy => sol.grid.up(k),
            Action::Pass => sol.grid.down(k),
        };
        self.pos = match landing {
            Landing::Interior(j) => Position::Node(j),
            Landing::UpCascade | Landing::DownCascade => {
                let next = bayes_action_update(Belief::from_log_odds(ell), action, &sol.statics);
                Position::Absorbed {
                    ell: next.ell,
                    up: landing == Landing::UpCascade,
                }
            }
        };
        Period {
            quality: if high { 1.0 } else { 0.0 },
            action,
        }
    }
}

/// Simulated belief, quality and action trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub seed: u64,
    pub path_id: u64,
    /// Beliefs `λ_0 .. λ_T` (one more entry than the per-period series).
    pub lambda_series: Vec<f64>,
    pub ell_series: Vec<f64>,
    /// Realized quality per period.
    pub theta_series: Vec<f64>,
    pub action_series: Vec<Action>,
    /// First index of `lambda_series` that lies in a cascade.
    pub absorbed_at: Option<usize>,
    pub absorbed_to: Absorption,
}

impl Path {
    pub fn periods(&self) -> usize {
        self.action_series.len()
    }
}

/// Runs `t_max` periods; after absorption the belief stays frozen and the
/// cascade action repeats.
pub fn simulate_path_stream(
    solution: &Solution,
    lambda0: f64,
    t_max: usize,
    seed: u64,
    path_id: u64,
) -> Result<Path> {
    check(t_max >= 1, "t_max", t_max as f64, "T_max >= 1")?;
    let mut walker = Walker::start(solution, lambda0)?;
    let mut rng = path_rng(seed, path_id);
    let mut ell_series = Vec::with_capacity(t_max + 1);
    let mut theta_series = Vec::with_capacity(t_max);
    let mut action_series = Vec::with_capacity(t_max);
    let mut absorbed_at = (walker.absorption() != Absorption::None).then_some(0);
    ell_series.push(walker.ell());
    for t in 0..t_max {
        let period = walker.step(&mut rng);
        theta_series.push(period.quality);
        action_series.push(period.action);
        ell_series.push(walker.ell());
        if absorbed_at.is_none() && walker.absorption() != Absorption::None {
            absorbed_at = Some(t + 1);
        }
    }
    Ok(Path {
        seed,
        path_id,
        lambda_series: ell_series
            .iter()
            .map(|&l| crate::model::logistic(l))
            .collect(),
        ell_series,
        theta_series,
        action_series,
        absorbed_at,
        absorbed_to: walker.absorption(),
    })
}

pub fn simulate_path(solution: &Solution, lambda0: f64, t_max: usize, seed: u64) -> Result<Path> {
    simulate_path_stream(solution, lambda0, t_max, seed, 0)
}

/// Exit time from the experimentation region, `None` if censored at `t_max`.
fn exit_time(
    solution: &Solution,
    lambda0: f64,
    t_max: usize,
    seed: u64,
    path_id: u64,
) -> Result<(Option<usize>, Absorption)> {
    let mut walker = Walker::start(solution, lambda0)?;
    if walker.absorption() != Absorption::None {
        return Ok((Some(0), walker.absorption()));
    }
    let mut rng = path_rng(seed, path_id);
    for t in 0..t_max {
        walker.step(&mut rng);
        if walker.absorption() != Absorption::None {
            return Ok((Some(t + 1), walker.absorption()));
        }
    }
    Ok((None, Absorption::None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub n_paths: usize,
    pub t_max: usize,
    /// Mean exit time over paths that exited before `t_max`.
    pub mean_tau: f64,
    pub se_tau: f64,
    pub median_tau: f64,
    /// Mean exit time over paths absorbed in the up-cascade.
    pub mean_tau_up: Option<f64>,
    pub se_tau_up: Option<f64>,
    pub fraction_up: f64,
    pub fraction_down: f64,
    pub fraction_censored: f64,
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub(crate) fn summarize_exits(exits: &[(Option<usize>, Absorption)], t_max: usize) -> HittingStats {
    let n = exits.len();
    let mut taus: Vec<f64> = exits
        .iter()
        .filter_map(|(t, _)| t.map(|t| t as f64))
        .collect();
    let taus_up: Vec<f64> = exits
        .iter()
        .filter(|(_, a)| *a == Absorption::Up)
        .filter_map(|(t, _)| t.map(|t| t as f64))
        .collect();
    let count = |a: Absorption| exits.iter().filter(|(_, x)| *x == a).count() as f64 / n as f64;
    let (mean_tau, se_tau) = mean_se(&taus);
    let (up_mean, up_se) = mean_se(&taus_up);
    HittingStats {
        n_paths: n,
        t_max,
        mean_tau,
        se_tau,
        median_tau: median(&mut taus),
        mean_tau_up: (!taus_up.is_empty()).then_some(up_mean),
        se_tau_up: (!taus_up.is_empty()).then_some(up_se),
        fraction_up: count(Absorption::Up),
        fraction_down: count(Absorption::Down),
        fraction_censored: count(Absorption::None),
    }
}

pub fn hitting_stats_with(
    exec: Exec,
    solution: &Solution,
    lambda0: f64,
    n_paths: usize,
    t_max: usize,
    seed: u64,
) -> Result<HittingStats> {
    check(n_paths >= 1, "n_paths", n_paths as f64, "n_paths >= 1")?;
    check(t_max >= 1, "t_max", t_max as f64, "T_max >= 1")?;
    Walker::start(solution, lambda0)?;
    let exits = exec
        .map(n_paths, |i| {
            exit_time(solution, lambda0, t_max, seed, i as u64)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_exits(&exits, t_max))
}

pub fn hitting_stats(
    solution: &Solution,
    lambda0: f64,
    n_paths: usize,
    t_max: usize,
    seed: u64,
) -> Result<HittingStats> {
    hitting_stats_with(Exec::default(), solution, lambda0, n_paths, t_max, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternKind {
    EarlyResolution,
    DoubleHump,
    NoInvestment,
    Other,
}

/// Inclusive range of grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeInterval {
    pub first: usize,
    pub last: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl NodeInterval {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub components: Vec<NodeInterval>,
    pub gap_intervals: Vec<NodeInterval>,
    pub classification: PatternKind,
    /// θ ≥ 1/2 on every node of the investment set.
    pub active_theta_at_least_half: bool,
    /// θ < 1/2 on every gap node between components.
    pub gap_theta_below_half: bool,
}

/// Classifies the sign pattern of `delta` over the node range `interior`.
pub fn classify_incentive(
    delta: &[f64],
    theta: &[f64],
    lambdas: &[f64],
    interior: std::ops::Range<usize>,
) -> PatternReport {
    let interval = |first: usize, last: usize| NodeInterval {
        first,
        last,
        lambda_lo: lambdas[first],
        lambda_hi: lambdas[last],
    };
    let mut components = Vec::new();
    let mut open: Option<usize> = None;
    for k in interior.clone() {
        match (delta[k] > 0.0, open) {
            (true, None) => open = Some(k),
            (false, Some(s)) => {
                components.push(interval(s, k - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        components.push(interval(s, interior.end - 1));
    }
    let gap_intervals: Vec<NodeInterval> = components
        .windows(2)
        .map(|w| interval(w[0].last + 1, w[1].first - 1))
        .collect();
    let classification = match components.len() {
        0 => PatternKind::NoInvestment,
        1 => PatternKind::EarlyResolution,
        2 => PatternKind::DoubleHump,
        _ => PatternKind::Other,
    };
    let active_theta_at_least_half = components
        .iter()
        .all(|c| (c.first..=c.last).all(|k| theta[k] >= 0.5));
    let gap_theta_below_half = gap_intervals
        .iter()
        .all(|g| (g.first..=g.last).all(|k| theta[k] < 0.5));
    PatternReport {
        components,
        gap_intervals,
        classification,
        active_theta_at_least_half,
        gap_theta_below_half,
    }
}

pub fn classify(solution: &Solution) -> PatternReport {
    classify_incentive(
        &solution.delta,
        &solution.theta,
        &solution.lambdas(),
        solution.grid.interior(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub n_paths: usize,
    pub horizon: usize,
    pub buyer_surplus: MeanSe,
    pub seller_profit: MeanSe,
    pub total_surplus: MeanSe,
    /// `max |total − (buyer + seller)|` over paths.
    pub max_accounting_error: f64,
}

/// Discounted realized surplus of one path: `(buyer, seller, total)`.
pub fn path_surplus(path: &Path, v: f64, p: f64, c: f64, delta: f64) -> (f64, f64, f64) {
    let mut disc = 1.0;
    let (mut buyer, mut seller, mut total) = (0.0, 0.0, 0.0);
    for (theta, action) in path.theta_series.iter().zip(&path.action_series) {
        let a = action.as_f64();
        buyer += disc * a * (v * theta - p);
        seller += disc * (p * a - c * theta);
        total += disc * (a * v * theta - c * theta);
        disc *= delta;
    }
    (buyer, seller, total)
}

pub fn welfare_mc_with(
    exec: Exec,
    solution: &Solution,
    lambda0: f64,
    n_paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<WelfareReport> {
    check(n_paths >= 1, "n_paths", n_paths as f64, "n_paths >= 1")?;
    check(horizon >= 1, "horizon", horizon as f64, "horizon >= 1")?;
    let prm = solution.params;
    let per_path = exec
        .map(n_paths, |i| {
            simulate_path_stream(solution, lambda0, horizon, seed, i as u64)
                .map(|path| path_surplus(&path, prm.v, prm.p, prm.c, prm.delta))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&(f64, f64, f64)) -> f64| -> MeanSe {
        let xs: Vec<f64> = per_path.iter().map(f).collect();
        let (mean, se) = mean_se(&xs);
        MeanSe { mean, se }
    };
    let max_accounting_error = per_path
        .iter()
        .map(|(b, s, t)| (t - (b + s)).abs())
        .fold(0.0, f64::max);
    Ok(WelfareReport {
        n_paths,
        horizon,
        buyer_surplus: pick(|x| x.0),
        seller_profit: pick(|x| x.1),
        total_surplus: pick(|x| x.2),
        max_accounting_error,
    })
}

pub fn welfare_mc(
    solution: &Solution,
    lambda0: f64,
    n_paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<WelfareReport> {
    welfare_mc_with(Exec::default(), solution, lambda0, n_paths, horizon, seed)
}
