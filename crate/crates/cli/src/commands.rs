use std::path::PathBuf;

use repcascade::dynamics::{
    classify, drift, hitting_stats, simulate_path_stream, welfare_mc, HittingStats, Path,
};
use repcascade::extensions::{
    delta_bar, outcome_hitting_stats, solve_flexible, solve_outcomes, sweep, FlexParams,
};
use repcascade::finite::{convergence_to_infinite, solve_finite};
use repcascade::model::{logistic, region_of, Belief, Region};
use repcascade::{solve, Action, Solution};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_num, fmt_opt, Provenance, Sink, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Finite,
    Simulate,
    Classify,
    Welfare,
    Sweep,
    Price,
    Outcomes,
    Figures,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Finite => "finite",
            Command::Simulate => "simulate",
            Command::Classify => "classify",
            Command::Welfare => "welfare",
            Command::Sweep => "sweep",
            Command::Price => "price",
            Command::Outcomes => "outcomes",
            Command::Figures => "figures",
        }
    }
}

/// Runs one command and returns the files it wrote, in write order.
pub fn run_command(cfg: &RunConfig, cmd: Command) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let mut sink = Sink::new(&cfg.output.dir, Provenance::new(cmd.name(), cfg))?;
    log::info!("{} -> {}", cmd.name(), cfg.output.dir.display());
    match cmd {
        Command::Solve => cmd_solve(cfg, &mut sink)?,
        Command::Finite => cmd_finite(cfg, &mut sink)?,
        Command::Simulate => cmd_simulate(cfg, &mut sink)?,
        Command::Classify => cmd_classify(cfg, &mut sink)?,
        Command::Welfare => cmd_welfare(cfg, &mut sink)?,
        Command::Sweep => cmd_sweep(cfg, &mut sink)?,
        Command::Price => cmd_price(cfg, &mut sink)?,
        Command::Outcomes => cmd_outcomes(cfg, &mut sink)?,
        Command::Figures => cmd_figures(cfg, &mut sink)?,
    }
    Ok(sink.written)
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::DownCascade => "down_cascade",
        Region::Experimentation => "experimentation",
        Region::UpCascade => "up_cascade",
    }
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::Buy => "buy",
        Action::Pass => "pass",
    }
}

fn solve_cfg(cfg: &RunConfig) -> Result<Solution, CliError> {
    Ok(solve(&cfg.params(), &cfg.solve_options())?)
}

/// Drift at node `k`; zero in cascades, where beliefs do not move.
fn node_drift(sol: &Solution, k: usize) -> f64 {
    if sol.grid.is_interior(k) {
        drift(sol.theta[k], sol.params.q, sol.statics.z)
    } else {
        0.0
    }
}

fn solution_table(sol: &Solution) -> Table {
    let mut t = Table::new(&[
        "node",
        "ell",
        "lambda",
        "region",
        "value",
        "theta",
        "delta",
        "fd_gradient",
        "drift",
    ]);
    for k in 0..sol.grid.len() {
        let ell = sol.grid.nodes[k];
        t.push(vec![
            k.to_string(),
            fmt_num(ell),
            fmt_num(logistic(ell)),
            region_name(region_of(Belief::from_log_odds(ell), &sol.statics)).into(),
            fmt_num(sol.values[k]),
            fmt_num(sol.theta[k]),
            fmt_num(sol.delta[k]),
            fmt_num(sol.fd_gradient[k]),
            fmt_num(node_drift(sol, k)),
        ]);
    }
    t
}

fn cmd_solve(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let sol = solve_cfg(cfg)?;
    if cfg.output.format.csv() {
        sink.csv("solution.csv", &solution_table(&sol))?;
    }
    if cfg.output.format.json() {
        #[derive(Serialize)]
        struct Doc<'a> {
            solution: &'a Solution,
            concavity: repcascade::solver::ConcavityReport,
            investment_nodes: Vec<usize>,
        }
        sink.json(
            "solution.json",
            &Doc {
                solution: &sol,
                concavity: sol.concavity(1e-9),
                investment_nodes: sol.investment_nodes(),
            },
        )?;
    }
    Ok(())
}

fn cmd_finite(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params();
    let opts = cfg.solve_options();
    let fin = solve_finite(&params, cfg.finite.horizon, &opts)?;
    let conv = convergence_to_infinite(&params, &cfg.finite.horizons, &opts)?;
    if cfg.output.format.csv() {
        let mut t = Table::new(&["t", "node", "lambda", "value", "theta", "delta"]);
        for (i, values) in fin.values.iter().enumerate() {
            for (k, value) in values.iter().enumerate() {
                t.push(vec![
                    (i + 1).to_string(),
                    k.to_string(),
                    fmt_num(fin.grid.lambda(k)),
                    fmt_num(*value),
                    fmt_num(fin.theta[i][k]),
                    fmt_num(fin.delta[i][k]),
                ]);
            }
        }
        sink.csv("finite.csv", &t)?;
        let mut c = Table::new(&["horizon", "gap", "tail_bound"]);
        for r in &conv.rows {
            c.push(vec![
                r.horizon.to_string(),
                fmt_num(r.gap),
                fmt_num(r.tail_bound),
            ]);
        }
        sink.csv("convergence.csv", &c)?;
    }
    if cfg.output.format.json() {
        #[derive(Serialize)]
        struct Doc<'a> {
            horizon: usize,
            lambdas: Vec<f64>,
            first_period_values: &'a [f64],
            first_period_theta: &'a [f64],
            convergence: &'a repcascade::finite::ConvergenceReport,
        }
        sink.json(
            "finite.json",
            &Doc {
                horizon: fin.horizon,
                lambdas: fin.grid.lambdas(),
                first_period_values: fin.first_period(),
                first_period_theta: &fin.theta[0],
                convergence: &conv,
            },
        )?;
    }
    Ok(())
}

fn paths_table(paths: &[Path]) -> Table {
    let mut t = Table::new(&["path_id", "t", "lambda", "ell", "quality", "action"]);
    for p in paths {
        for i in 0..p.lambda_series.len() {
            let (quality, action) = if i < p.periods() {
                (
                    fmt_num(p.theta_series[i]),
                    action_name(p.action_series[i]).to_string(),
                )
            } else {
                (String::new(), String::new())
            };
            t.push(vec![
                p.path_id.to_string(),
                i.to_string(),
                fmt_num(p.lambda_series[i]),
                fmt_num(p.ell_series[i]),
                quality,
                action,
            ]);
        }
    }
    t
}

fn hitting_row(label: &str, h: &HittingStats) -> Vec<String> {
    vec![
        label.to_string(),
        h.n_paths.to_string(),
        h.t_max.to_string(),
        fmt_num(h.mean_tau),
        fmt_num(h.se_tau),
        fmt_num(h.median_tau),
        fmt_opt(h.mean_tau_up),
        fmt_opt(h.se_tau_up),
        fmt_num(h.fraction_up),
        fmt_num(h.fraction_down),
        fmt_num(h.fraction_censored),
    ]
}

const HITTING_HEADER: [&str; 11] = [
    "model",
    "n_paths",
    "t_max",
    "mean_tau",
    "se_tau",
    "median_tau",
    "mean_tau_up",
    "se_tau_up",
    "fraction_up",
    "fraction_down",
    "fraction_censored",
];

fn cmd_simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let sol = solve_cfg(cfg)?;
    let sim = &cfg.sim;
    let paths = (0..sim.sample_paths as u64)
        .map(|id| simulate_path_stream(&sol, sim.lambda0, sim.t_max, sim.seed, id))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = hitting_stats(&sol, sim.lambda0, sim.n_paths, sim.t_max, sim.seed)?;
    if cfg.output.format.csv() {
        sink.csv("paths.csv", &paths_table(&paths))?;
        let mut t = Table::new(&HITTING_HEADER);
        t.push(hitting_row("benchmark", &stats));
        sink.csv("hitting.csv", &t)?;
    }
    if cfg.output.format.json() {
        #[derive(Serialize)]
        struct Doc<'a> {
            lambda0: f64,
            hitting: &'a HittingStats,
            paths: &'a [Path],
        }
        sink.json(
            "simulate.json",
            &Doc {
                lambda0: sim.lambda0,
                hitting: &stats,
                paths: &paths,
            },
        )?;
    }
    Ok(())
}

fn cmd_classify(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let sol = solve_cfg(cfg)?;
    let report = classify(&sol);
    if cfg.output.format.csv() {
        let pattern = format!("{:?}", report.classification);
        let mut t = Table::new(&[
            "pattern",
            "kind",
            "first_node",
            "last_node",
            "lambda_lo",
            "lambda_hi",
        ]);
        let intervals = report
            .components
            .iter()
            .map(|c| ("investment", c))
            .chain(report.gap_intervals.iter().map(|g| ("gap", g)));
        for (kind, iv) in intervals {
            t.push(vec![
                pattern.clone(),
                kind.into(),
                iv.first.to_string(),
                iv.last.to_string(),
                fmt_num(iv.lambda_lo),
                fmt_num(iv.lambda_hi),
            ]);
        }
        if t.rows.is_empty() {
            t.push(vec![
                pattern,
                "none".into(),
                "".into(),
                "".into(),
                "".into(),
                "".into(),
            ]);
        }
        sink.csv("classification.csv", &t)?;
    }
    if cfg.output.format.json() {
        sink.json("classification.json", &report)?;
    }
    Ok(())
}

fn cmd_welfare(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let sol = solve_cfg(cfg)?;
    let sim = &cfg.sim;
    let w = welfare_mc(&sol, sim.lambda0, sim.n_paths, sim.horizon, sim.seed)?;
    if cfg.output.format.csv() {
        let mut t = Table::new(&["quantity", "mean", "se"]);
        for (name, m) in [
            ("buyer_surplus", w.buyer_surplus),
            ("seller_profit", w.seller_profit),
            ("total_surplus", w.total_surplus),
        ] {
            t.push(vec![name.into(), fmt_num(m.mean), fmt_num(m.se)]);
        }
        sink.csv("welfare.csv", &t)?;
    }
    if cfg.output.format.json() {
        sink.json("welfare.json", &w)?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let rows = sweep(
        &cfg.params(),
        cfg.sweep.param,
        &cfg.sweep.values,
        &cfg.solve_options(),
    )?;
    if cfg.output.format.csv() {
        let mut t = Table::new(&[
            "index",
            "param",
            "value",
            "z",
            "lambda_under",
            "lambda_over",
            "eta",
            "investment_nodes",
            "investment_lambda_lo",
            "investment_lambda_hi",
            "max_delta",
            "classification",
        ]);
        for r in &rows {
            t.push(vec![
                r.index.to_string(),
                r.param.name().into(),
                fmt_num(r.value),
                fmt_num(r.z),
                fmt_num(r.lambda_under),
                fmt_num(r.lambda_over),
                fmt_num(r.eta),
                r.investment_nodes.to_string(),
                fmt_opt(r.investment_lambda_lo),
                fmt_opt(r.investment_lambda_hi),
                fmt_num(r.max_delta),
                format!("{:?}", r.classification),
            ]);
        }
        sink.csv("sweep.csv", &t)?;
    }
    if cfg.output.format.json() {
        sink.json("sweep.json", &rows)?;
    }
    Ok(())
}

fn cmd_price(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let mut fp = FlexParams::from_model(&cfg.params());
    if let Some(d) = cfg.price.delta {
        fp = fp.with_delta(d);
    }
    let opts = cfg.flex_options();
    let flex = solve_flexible(&fp, &opts)?;
    let bar = delta_bar(&fp, &opts, cfg.price.tol_delta)?;
    if cfg.output.format.csv() {
        let mut t = Table::new(&[
            "node", "ell", "lambda", "p_low", "p_high", "price", "pooling", "theta", "value",
        ]);
        for k in 0..flex.nodes.len() {
            t.push(vec![
                k.to_string(),
                fmt_num(flex.nodes[k]),
                fmt_num(logistic(flex.nodes[k])),
                fmt_num(flex.p_low[k]),
                fmt_num(flex.p_high[k]),
                fmt_num(flex.price[k]),
                flex.pooling[k].to_string(),
                fmt_num(flex.theta[k]),
                fmt_num(flex.values[k]),
            ]);
        }
        sink.csv("price.csv", &t)?;
        let mut b = Table::new(&["delta", "no_pooling"]);
        for (d, ok) in &bar.evaluations {
            b.push(vec![fmt_num(*d), ok.to_string()]);
        }
        sink.csv("delta_bar.csv", &b)?;
    }
    if cfg.output.format.json() {
        #[derive(Serialize)]
        struct Doc<'a> {
            flexible: &'a repcascade::extensions::FlexSolution,
            delta_bar: &'a repcascade::extensions::DeltaBar,
        }
        sink.json(
            "price.json",
            &Doc {
                flexible: &flex,
                delta_bar: &bar,
            },
        )?;
    }
    Ok(())
}

fn cmd_outcomes(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params();
    let opts = cfg.solve_options();
    let out = solve_outcomes(&params, cfg.outcomes.rho, &opts)?;
    let base = solve(&params, &opts)?;
    let sim = &cfg.sim;
    let hb = hitting_stats(&base, sim.lambda0, sim.n_paths, sim.t_max, sim.seed)?;
    let ho = outcome_hitting_stats(&out, sim.lambda0, sim.n_paths, sim.t_max, sim.seed)?;
    if cfg.output.format.csv() {
        let mut t = Table::new(&[
            "node",
            "ell",
            "lambda",
            "value",
            "theta",
            "delta",
            "delta_alt_form",
            "v_good",
            "v_bad",
            "v_pass",
            "benchmark_value",
            "benchmark_delta",
        ]);
        for k in 0..out.grid.len() {
            t.push(vec![
                k.to_string(),
                fmt_num(out.grid.nodes[k]),
                fmt_num(out.grid.lambda(k)),
                fmt_num(out.values[k]),
                fmt_num(out.theta[k]),
                fmt_num(out.delta[k]),
                fmt_num(out.delta_alt_form[k]),
                fmt_num(out.v_good[k]),
                fmt_num(out.v_bad[k]),
                fmt_num(out.v_pass[k]),
                fmt_num(base.values[k]),
                fmt_num(base.delta[k]),
            ]);
        }
        sink.csv("outcomes.csv", &t)?;
        let mut h = Table::new(&HITTING_HEADER);
        h.push(hitting_row("benchmark", &hb));
        h.push(hitting_row("outcomes", &ho));
        sink.csv("outcomes_hitting.csv", &h)?;
    }
    if cfg.output.format.json() {
        #[derive(Serialize)]
        struct Doc<'a> {
            solution: &'a repcascade::extensions::OutcomeSolution,
            alt_form_gap: f64,
            hitting_benchmark: &'a HittingStats,
            hitting_outcomes: &'a HittingStats,
        }
        sink.json(
            "outcomes.json",
            &Doc {
                solution: &out,
                alt_form_gap: out.alt_form_gap(),
                hitting_benchmark: &hb,
                hitting_outcomes: &ho,
            },
        )?;
    }
    Ok(())
}

/// Sample-path count and length for the third figure dataset.
pub const FIGURE_PATHS: usize = 10;
pub const FIGURE_PERIODS: usize = 10;

fn cmd_figures(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let sol = solve_cfg(cfg)?;
    let g = &sol.grid;
    let m = g.m as i64;
    let last = g.last() as i64;

    // policy and drift on the grid extended one Bayes step into each cascade
    let mut fig1 = Table::new(&["node", "ell", "lambda", "region", "theta", "delta", "drift"]);
    for k in -m..=last + m {
        let (ell, theta, delta, dr) = if (0..=last).contains(&k) {
            let k = k as usize;
            (g.nodes[k], sol.theta[k], sol.delta[k], node_drift(&sol, k))
        } else {
            (g.nodes[0] + k as f64 * g.h, 0.0, -sol.params.c, 0.0)
        };
        fig1.push(vec![
            k.to_string(),
            fmt_num(ell),
            fmt_num(logistic(ell)),
            region_name(region_of(Belief::from_log_odds(ell), &sol.statics)).into(),
            fmt_num(theta),
            fmt_num(delta),
            fmt_num(dr),
        ]);
    }
    sink.csv("fig1_policy.csv", &fig1)?;

    let mut fig2 = Table::new(&["node", "lambda", "value", "fd_gradient"]);
    for k in 0..g.len() {
        fig2.push(vec![
            k.to_string(),
            fmt_num(g.lambda(k)),
            fmt_num(sol.values[k]),
            fmt_num(sol.fd_gradient[k]),
        ]);
    }
    sink.csv("fig2_value.csv", &fig2)?;

    // starts spread evenly over the interior nodes
    let n = g.last();
    let mut fig3 = Table::new(&["path_id", "lambda0", "t", "lambda", "action"]);
    for i in 1..=FIGURE_PATHS {
        let k = ((i * n) as f64 / (FIGURE_PATHS + 1) as f64).round() as usize;
        let k = k.clamp(1, n - 1);
        let lambda0 = g.lambda(k);
        let path = simulate_path_stream(&sol, lambda0, FIGURE_PERIODS, cfg.sim.seed, i as u64)?;
        for t in 0..=path.periods() {
            let action = if t < path.periods() {
                action_name(path.action_series[t])
            } else {
                ""
            };
            fig3.push(vec![
                i.to_string(),
                fmt_num(lambda0),
                t.to_string(),
                fmt_num(path.lambda_series[t]),
                action.into(),
            ]);
        }
    }
    sink.csv("fig3_paths.csv", &fig3)?;
    Ok(())
}
