//! TOML run configuration. Every section except `[model]` is optional and
//! filled with defaults; unknown keys are rejected.

use std::path::PathBuf;

use repcascade::extensions::{FlexOptions, SweepParam};
use repcascade::{ModelParams, SolveOptions, TieBreak};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub v: f64,
    pub p: f64,
    pub q: f64,
    pub c: f64,
    pub delta: f64,
    #[serde(default)]
    pub buyer_tie_break: TieBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub m: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            m: d.m,
            epsilon: d.epsilon,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_paths: usize,
    pub t_max: usize,
    /// Truncation horizon for welfare sums.
    pub horizon: usize,
    pub seed: u64,
    pub lambda0: f64,
    /// Paths written out in full by `simulate`.
    pub sample_paths: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            t_max: 200,
            horizon: 200,
            seed: 1,
            lambda0: 0.4,
            sample_paths: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            param: SweepParam::Q,
            values: vec![0.6, 0.75, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSection {
    pub horizon: usize,
    /// Horizons compared against the stationary solution.
    pub horizons: Vec<usize>,
}

impl Default for FiniteSection {
    fn default() -> Self {
        Self {
            horizon: 500,
            horizons: vec![1, 2, 5, 20, 100],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Discount factor for the flexible-price solve; the model's if absent.
    pub delta: Option<f64>,
    pub tol_delta: f64,
}

impl Default for PriceSection {
    fn default() -> Self {
        let f = FlexOptions::default();
        Self {
            lambda_min: f.lambda_min,
            lambda_max: f.lambda_max,
            delta: None,
            tol_delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutcomesSection {
    pub rho: f64,
}

impl Default for OutcomesSection {
    fn default() -> Self {
        Self { rho: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Both,
        }
    }
}

/// Fully resolved configuration; serializing it echoes every default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub finite: FiniteSection,
    #[serde(default)]
    pub price: PriceSection,
    #[serde(default)]
    pub outcomes: OutcomesSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            v: m.v,
            p: m.p,
            q: m.q,
            c: m.c,
            delta: m.delta,
            buyer_tie_break: m.buyer_tie_break,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            m: s.m,
            epsilon: s.epsilon,
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }

    pub fn flex_options(&self) -> FlexOptions {
        FlexOptions {
            lambda_min: self.price.lambda_min,
            lambda_max: self.price.lambda_max,
            m: self.solver.m,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    /// Checks every invariant up front so no command starts on bad input.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate()?;
        self.solve_options().validate()?;
        let sim = &self.sim;
        let bad = |field: &'static str, constraint: &'static str| {
            Err(CliError::Validation {
                field: field.to_string(),
                constraint: constraint.to_string(),
            })
        };
        if sim.n_paths == 0 {
            return bad("sim.n_paths", "n_paths >= 1");
        }
        if sim.t_max == 0 {
            return bad("sim.t_max", "t_max >= 1");
        }
        if sim.horizon == 0 {
            return bad("sim.horizon", "horizon >= 1");
        }
        if !(sim.lambda0 > 0.0 && sim.lambda0 < 1.0) {
            return bad("sim.lambda0", "0 < lambda0 < 1");
        }
        if self.sweep.values.is_empty() {
            return bad("sweep.values", "at least one value");
        }
        for &x in &self.sweep.values {
            self.sweep.param.apply(&self.params(), x)?;
        }
        if self.finite.horizon == 0 {
            return bad("finite.horizon", "horizon >= 1");
        }
        if self.finite.horizons.is_empty()
            || self.finite.horizons[0] == 0
            || !self.finite.horizons.windows(2).all(|w| w[0] < w[1])
        {
            return bad(
                "finite.horizons",
                "strictly increasing list of horizons >= 1",
            );
        }
        self.flex_options().validate()?;
        if let Some(d) = self.price.delta {
            if !(d > 0.0 && d < 1.0) {
                return bad("price.delta", "0 < delta < 1");
            }
        }
        if !(self.price.tol_delta > 0.0 && self.price.tol_delta < 0.5) {
            return bad("price.tol_delta", "0 < tol_delta < 1/2");
        }
        repcascade::extensions::OutcomeParams::new(self.outcomes.rho)?;
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
