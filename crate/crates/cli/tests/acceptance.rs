//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the report is
//! always printed.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use repcascade::dynamics::{drift, hitting_stats, path_rng};
use repcascade::extensions::{
    delta_bar, outcome_hitting_stats, precision_sweep, price_set, solve_flexible, solve_outcomes,
    FlexOptions, FlexParams, SweepParam,
};
use repcascade::finite::solve_finite;
use repcascade::grid::build_grid;
use repcascade::solver::{bellman_step, cascade_values};
use repcascade::{derive_statics, solve, ModelParams, Solution, SolveOptions};
use repcascade_cli::{parse_config, run_command, Command};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn reference() -> ModelParams {
    ModelParams::reference()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn unimodal(xs: &[f64], tol: f64) -> bool {
    let mut i = 1;
    while i < xs.len() && xs[i] >= xs[i - 1] - tol {
        i += 1;
    }
    while i < xs.len() && xs[i] <= xs[i - 1] + tol {
        i += 1;
    }
    i == xs.len()
}

fn c1_thresholds() -> Verdict {
    let (v, p, q, c) = (1.0f64, 0.40f64, 0.75f64, 0.22f64);
    let z = q / (1.0 - q);
    let k = p / (v - p);
    let lam_under = (k / z) / (1.0 + k / z);
    let lam_over = (k * z) / (1.0 + k * z);
    let eta = c / (p * (2.0 * q - 1.0));
    let s = derive_statics(&reference()).unwrap();
    let ok = [
        (s.z, z, 3.0),
        (s.k, k, 2.0 / 3.0),
        (s.lambda_under, lam_under, 2.0 / 11.0),
        (s.lambda_over, lam_over, 2.0 / 3.0),
        (s.eta, eta, 1.1),
    ]
    .iter()
    .all(|&(got, oracle, exact)| (got - oracle).abs() < 1e-12 && (got - exact).abs() < 1e-12);
    let reps = 1000;
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(derive_statics(std::hint::black_box(&reference())).unwrap());
    }
    let per_call = t.elapsed() / reps;
    verdict(
        ok && per_call < Duration::from_millis(1),
        format!(
            "z={} K={:.12} lambda_under={:.12} lambda_over={:.12} eta={:.12}; {:?} per call",
            s.z, s.k, s.lambda_under, s.lambda_over, s.eta, per_call
        ),
    )
}

fn c2_fixed_point_vs_finite() -> Verdict {
    let prm = reference();
    let opts = SolveOptions::default().with_m(50).with_tol(1e-10);
    let inf = solve(&prm, &opts).unwrap();
    let fin = solve_finite(&prm, 500, &opts).unwrap();
    let gap = sup_diff(fin.first_period(), &inf.values);
    let bound = 1e-10f64.max(prm.delta.powi(500) * prm.p / (1.0 - prm.delta));
    verdict(
        gap <= bound,
        format!(
            "sup gap {gap:.3e} <= {bound:.3e}; {} iterations",
            inf.iterations
        ),
    )
}

fn c3_structure() -> Verdict {
    let sol = solve(&reference(), &SolveOptions::default()).unwrap();
    let last = sol.grid.last();
    let c = sol.params.c;
    let cascades_ok = [0, last]
        .iter()
        .all(|&k| sol.theta[k] == 0.0 && (sol.delta[k] + c).abs() < 1e-12);
    let invest = sol.investment_nodes();
    let contiguous = invest.windows(2).all(|w| w[1] == w[0] + 1);
    let lambdas = sol.lambdas();
    let inside = invest
        .iter()
        .all(|&k| lambdas[k] > sol.statics.lambda_under && lambdas[k] < sol.statics.lambda_over);
    let rep = sol.concavity(1e-9);
    let pass = cascades_ok && contiguous && inside && rep.is_monotone && rep.is_concave_in_log_odds;
    verdict(
        pass,
        format!(
            "cascades theta=0, Delta=-c: {cascades_ok}; investment nodes {}..={} ({} nodes) \
             contiguous={contiguous} strictly inside={inside}; V nondecreasing={} \
             (max drop {:.2e}); V concave in log-odds={} (max second difference {:.4} at node {:?})",
            invest.first().copied().unwrap_or(0),
            invest.last().copied().unwrap_or(0),
            invest.len(),
            rep.is_monotone,
            rep.max_monotone_violation,
            rep.is_concave_in_log_odds,
            rep.max_concavity_violation,
            rep.worst_concavity_node,
        ),
    )
}

fn c4_contraction() -> Verdict {
    let prm = reference();
    let s = derive_statics(&prm).unwrap();
    let grid = build_grid(&s, 50).unwrap();
    let cas = cascade_values(&prm, 0.0);
    let mut rng = path_rng(2024, 0);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let t = Instant::now();
    for _ in 0..100 {
        let a: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        let b: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        let (ta, _) = bellman_step(&a, &grid, &prm, &cas);
        let (tb, _) = bellman_step(&b, &grid, &prm, &cas);
        let before = grid
            .interior()
            .map(|k| (a[k] - b[k]).abs())
            .fold(0.0, f64::max);
        let after = sup_diff(&ta, &tb);
        ok &= after <= (prm.delta + 1e-12) * before;
        worst = worst.max(after / before);
    }
    let elapsed = t.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(1),
        format!("worst ratio {worst:.6} vs delta {}", prm.delta),
    )
}

fn c5_drift() -> Verdict {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for q in [0.6f64, 0.75, 0.9] {
        let z = q / (1.0 - q);
        for theta in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
            let oracle = (2.0 * q - 1.0) * (2.0 * theta - 1.0) * (q / (1.0 - q)).ln();
            let got = drift(theta, q, z);
            worst = worst.max((got - oracle).abs());
            ok &= (got - oracle).abs() < 1e-12;
            let sign_ok = match theta.partial_cmp(&0.5).unwrap() {
                std::cmp::Ordering::Greater => got > 0.0,
                std::cmp::Ordering::Less => got < 0.0,
                std::cmp::Ordering::Equal => got == 0.0,
            };
            ok &= sign_ok;
        }
    }
    verdict(
        ok,
        format!("15 cases, max error {worst:.1e}, signs follow theta - 1/2"),
    )
}

fn c6_early_resolution() -> Verdict {
    let sol = solve(&reference(), &SolveOptions::default()).unwrap();
    let a = hitting_stats(&sol, 0.40, 10_000, 200, 1).unwrap();
    let b = hitting_stats(&sol, 0.40, 10_000, 200, 2).unwrap();
    let se = (a.se_tau.powi(2) + b.se_tau.powi(2)).sqrt();
    let stable = (a.mean_tau - b.mean_tau).abs() <= 3.0 * se;
    let pass = a.fraction_censored < 0.01
        && b.fraction_censored < 0.01
        && a.mean_tau.is_finite()
        && stable;
    verdict(
        pass,
        format!(
            "censored {:.4}/{:.4}; mean tau {:.4} (se {:.4}) vs {:.4} (se {:.4}); up fraction {:.4}",
            a.fraction_censored,
            b.fraction_censored,
            a.mean_tau,
            a.se_tau,
            b.mean_tau,
            b.se_tau,
            a.fraction_up
        ),
    )
}

fn c7_single_node_chain() -> Verdict {
    let sol = solve(&reference(), &SolveOptions::default().with_m(1)).unwrap();
    let q = sol.params.q;
    // from the single interior node both actions absorb: up w.p. γ(θ), in one step
    let theta = sol.theta[1];
    let p_up = q * theta + (1.0 - q) * (1.0 - theta);
    let tau = 1.0;
    let n = 100_000;
    let h = hitting_stats(&sol, sol.grid.lambda(1), n, 50, 99).unwrap();
    let se_up = (p_up * (1.0 - p_up) / n as f64).sqrt();
    let pass = (h.fraction_up - p_up).abs() <= 3.0 * se_up
        && (h.mean_tau - tau).abs() <= 3.0 * h.se_tau
        && h.fraction_censored == 0.0;
    verdict(
        pass,
        format!(
            "P(up) exact {p_up:.4} vs MC {:.4} (se {se_up:.4}); tau exact {tau} vs MC {:.4} (se {:.4})",
            h.fraction_up, h.mean_tau, h.se_tau
        ),
    )
}

fn c8_tremble() -> Verdict {
    let prm = reference();
    let base = solve(&prm, &SolveOptions::default()).unwrap();
    let d: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&e| {
            let s = solve(&prm, &SolveOptions::default().with_epsilon(e)).unwrap();
            sup_diff(&s.values, &base.values)
        })
        .collect();
    verdict(
        d[0] >= d[1] && d[1] >= d[2],
        format!("sup distances {:.4e}, {:.4e}, {:.4e}", d[0], d[1], d[2]),
    )
}

fn c9_finite_monotone() -> Verdict {
    let prm = reference();
    let opts = SolveOptions::default();
    let inf = solve(&prm, &opts).unwrap();
    let slack = opts.tol * prm.delta / (1.0 - prm.delta);
    let mut prev: Option<Vec<f64>> = None;
    let mut mono = true;
    let mut bounded = true;
    let mut gaps = Vec::new();
    for t in [1usize, 2, 5, 20, 100] {
        let v1 = solve_finite(&prm, t, &opts)
            .unwrap()
            .first_period()
            .to_vec();
        if let Some(p) = &prev {
            mono &= p.iter().zip(&v1).all(|(a, b)| *b >= *a);
        }
        let gap = sup_diff(&v1, &inf.values);
        let bound = prm.delta.powi(t as i32) * prm.p / (1.0 - prm.delta);
        bounded &= gap <= bound + slack;
        gaps.push(format!("T={t}: {gap:.3e}<={bound:.3e}"));
        prev = Some(v1);
    }
    verdict(
        mono && bounded,
        format!("nondecreasing={mono}; {}", gaps.join(", ")),
    )
}

fn c10_comparative_statics() -> Verdict {
    let rows = precision_sweep(
        &reference(),
        SweepParam::Q,
        &[0.6, 0.75, 0.9],
        &SolveOptions::default(),
    )
    .unwrap();
    let widening = rows
        .windows(2)
        .all(|w| w[1].lambda_under < w[0].lambda_under && w[1].lambda_over > w[0].lambda_over);
    let report: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "q={} ({:.4}, {:.4}) invest={}",
                r.value, r.lambda_under, r.lambda_over, r.investment_nodes
            )
        })
        .collect();
    verdict(widening && rows.len() == 3, report.join("; "))
}

fn c11_price() -> Verdict {
    let s = price_set(0.5, 1.0, 3.0).unwrap();
    let (lo, hi) = (
        1.0 * (1.0 / 3.0) / (1.0 + 1.0 / 3.0),
        1.0 * 3.0 / (1.0 + 3.0),
    );
    let set_ok = (s.p_low - lo).abs() < 1e-12 && (s.p_high - hi).abs() < 1e-12;

    let fp = FlexParams::from_model(&reference());
    let opts = FlexOptions::default();
    let flex = solve_flexible(&fp.with_delta(0.95), &opts).unwrap();
    let log_z = fp.z().ln();
    let pooling: Vec<usize> = (0..flex.nodes.len()).filter(|&k| flex.pooling[k]).collect();
    let steps_ok = (0..flex.nodes.len()).all(|k| match flex.transitions(k) {
        Some((u, d)) => {
            ((u - flex.nodes[k]) - log_z).abs() < 1e-12
                && ((flex.nodes[k] - d) - log_z).abs() < 1e-12
        }
        None => false,
    });
    let lambdas = flex.lambdas();
    let bar = delta_bar(&fp, &opts, 1e-3).unwrap();
    let bracket_ok = 0.0 < bar.lo && bar.hi < 1.0 && bar.hi - bar.lo <= 1e-3;
    let pooling_note = if pooling.is_empty() {
        "none".to_string()
    } else {
        format!(
            "{} of {} nodes, lambda in [{:.4}, {:.4}]",
            pooling.len(),
            flex.nodes.len(),
            lambdas[pooling[0]],
            lambdas[*pooling.last().unwrap()]
        )
    };
    verdict(
        set_ok && pooling.is_empty() && steps_ok && bracket_ok,
        format!(
            "price_set(0.5)=({}, {}); delta=0.95 pooling: {pooling_note}; +-log z everywhere={steps_ok}; \
             delta_bar in ({:.4}, {:.4}) after {} bisection steps, {} monotonicity violations",
            s.p_low,
            s.p_high,
            bar.lo,
            bar.hi,
            bar.bisection_steps,
            bar.monotonicity_violations.len()
        ),
    )
}

fn mean_exit_up(sol: &Solution, lambda0: f64, seed: u64) -> (f64, f64) {
    let h = hitting_stats(sol, lambda0, 20_000, 500, seed).unwrap();
    (
        h.mean_tau_up.unwrap_or(f64::NAN),
        h.se_tau_up.unwrap_or(f64::NAN),
    )
}

fn c12_outcomes() -> Verdict {
    let prm = reference();
    let opts = SolveOptions::default();
    let base = solve(&prm, &opts).unwrap();

    let near = solve_outcomes(&prm, 0.5 + 1e-9, &opts).unwrap();
    let recovery = sup_diff(&near.values, &base.values);

    let at75 = solve_outcomes(&prm, 0.75, &opts).unwrap();
    let contains = base
        .investment_nodes()
        .iter()
        .all(|&k| at75.theta[k] == 1.0);

    let rhos = [0.55, 0.65, 0.75, 0.85];
    let sols: Vec<_> = rhos
        .iter()
        .map(|&r| solve_outcomes(&prm, r, &opts).unwrap())
        .collect();
    let (mut checked, mut excluded, mut violated) = (0, 0, 0);
    let mut worst = (0.0f64, 0usize, 0.0f64);
    for w in sols.windows(2) {
        for k in base.grid.interior() {
            if w[0].v_good[k] < w[0].v_bad[k] || w[1].v_good[k] < w[1].v_bad[k] {
                excluded += 1;
                continue;
            }
            checked += 1;
            let drop = w[0].delta[k] - w[1].delta[k];
            if drop > 1e-12 {
                violated += 1;
                if drop > worst.0 {
                    worst = (drop, k, w[0].outcome.rho);
                }
            }
        }
    }

    let at90 = solve_outcomes(&prm, 0.9, &opts).unwrap();
    let seed = 31;
    let mid = base.grid.lambda(base.grid.m);
    let hb = hitting_stats(&base, mid, 20_000, 500, seed).unwrap();
    let ho = outcome_hitting_stats(&at90, mid, 20_000, 500, seed).unwrap();
    let (tb, to) = (hb.mean_tau_up.unwrap(), ho.mean_tau_up.unwrap());
    let (tb3, _) = mean_exit_up(&base, 0.3, seed);
    let ho3 = outcome_hitting_stats(&at90, 0.3, 20_000, 500, seed).unwrap();

    let pass = recovery < 1e-6 && contains && violated == 0 && to <= tb;
    verdict(
        pass,
        format!(
            "recovery sup {recovery:.2e}; rho=0.75 contains benchmark set={contains} \
             ({} vs {} nodes); Delta_out monotone in rho: {violated} of {checked} checks violated \
             ({excluded} excluded), largest drop {:.4} at node {} after rho={}; \
             mean exit-to-up from lambda={mid:.4}: rho=0.9 {to:.4} vs benchmark {tb:.4} \
             (from 0.3: {:.4} vs {tb3:.4}); alt-form gap at 0.75 {:.4}",
            at75.investment_nodes().len(),
            base.investment_nodes().len(),
            worst.0,
            worst.1,
            worst.2,
            ho3.mean_tau_up.unwrap_or(f64::NAN),
            at75.alt_form_gap(),
        ),
    )
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|x| x.unwrap()).collect()
}

fn c13_figures() -> Verdict {
    let text = "[model]\nv = 1.0\np = 0.40\nq = 0.75\nc = 0.22\ndelta = 0.92\n[sim]\nseed = 7\n";
    // the resolved output directory is part of each file's provenance, so
    // both runs use the same configuration and directory
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(text).unwrap();
    cfg.output.dir = tmp.path().to_path_buf();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let files = run_command(&cfg, Command::Figures).unwrap();
        snapshots.push(
            files
                .iter()
                .map(|f| std::fs::read(f).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    let identical = snapshots[0].len() == 3 && snapshots[0] == snapshots[1];

    let dir = tmp.path();
    let f = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    let (lo, hi) = (2.0 / 11.0, 2.0 / 3.0);

    let fig1 = read_rows(&dir.join("fig1_policy.csv"));
    let outside_zero = fig1
        .iter()
        .filter(|r| f(r, 2) <= lo + 1e-9 || f(r, 2) >= hi - 1e-9)
        .all(|r| f(r, 4) == 0.0);
    let theta: Vec<f64> = fig1.iter().map(|r| f(r, 4)).collect();
    let inverse_u = theta.iter().any(|&t| t > 0.0) && unimodal(&theta, 0.0);

    let fig2 = read_rows(&dir.join("fig2_value.csv"));
    let values: Vec<f64> = fig2.iter().map(|r| f(r, 2)).collect();
    let increasing = values.windows(2).all(|w| w[1] >= w[0]) && values.last() > values.first();
    let fd: Vec<f64> = fig2.iter().map(|r| f(r, 3)).collect();
    let fd_unimodal = unimodal(&fd, 1e-12);

    let fig3 = read_rows(&dir.join("fig3_paths.csv"));
    let mut ids: Vec<u64> = fig3.iter().map(|r| r[0].parse().unwrap()).collect();
    ids.dedup();
    let paths_ok = ids.len() == 10
        && ids.iter().all(|id| {
            fig3.iter()
                .filter(|r| r[0].parse::<u64>().unwrap() == *id)
                .count()
                == 11
        })
        && fig3
            .iter()
            .filter(|r| &r[2] == "0")
            .all(|r| f(r, 1) > lo && f(r, 1) < hi);

    verdict(
        identical && outside_zero && inverse_u && increasing && fd_unimodal && paths_ok,
        format!(
            "byte-identical={identical}; policy zero outside=({outside_zero}) inverse-U={inverse_u}; \
             value increasing={increasing}; fd unimodal={fd_unimodal}; 10 paths x 10 periods={paths_ok}"
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Option<u64>, Check); 13] = [
        ("threshold oracle", Some(1_000), c1_thresholds),
        (
            "stationary vs finite-horizon fixed point",
            Some(5_000),
            c2_fixed_point_vs_finite,
        ),
        ("structural policy claims", Some(5_000), c3_structure),
        ("Bellman contraction", Some(1_000), c4_contraction),
        ("drift identity", None, c5_drift),
        (
            "early-resolution absorption",
            Some(10_000),
            c6_early_resolution,
        ),
        ("single-node exact chain", None, c7_single_node_chain),
        ("tremble-limit convergence", None, c8_tremble),
        ("finite-horizon monotonicity", None, c9_finite_monotone),
        (
            "comparative statics in precision",
            None,
            c10_comparative_statics,
        ),
        ("flexible-price extension", Some(30_000), c11_price),
        ("public-outcome extension", Some(60_000), c12_outcomes),
        ("figure datasets", None, c13_figures),
    ];
    let mut failed = 0;
    for (i, (name, budget_ms, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        let elapsed = t.elapsed();
        let in_budget = budget_ms.is_none_or(|b| elapsed <= Duration::from_millis(b));
        let pass = v.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget = budget_ms
            .map(|b| format!(" / budget {b} ms"))
            .unwrap_or_default();
        println!(
            "{} [{:>2}] {name} ({} ms{budget}): {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_millis(),
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed of {}",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
