//! One-parameter sweeps over the benchmark model; each point is an
//! independent solve, so points fan out through [`Exec`].

use serde::{Deserialize, Serialize};

use crate::dynamics::{classify, PatternKind};
use crate::error::{check, Error, Result};
use crate::exec::Exec;
use crate::model::ModelParams;
use crate::solver::{solve, SolveOptions};

/// Swept parameter. `Z` is signal precision given as a likelihood ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    V,
    P,
    Q,
    C,
    Delta,
    Z,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "v" => Self::V,
            "p" => Self::P,
            "q" => Self::Q,
            "c" => Self::C,
            "delta" => Self::Delta,
            "z" => Self::Z,
            other => return Err(Error::NotFound(format!("sweep parameter `{other}`"))),
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::V => "v",
            Self::P => "p",
            Self::Q => "q",
            Self::C => "c",
            Self::Delta => "delta",
            Self::Z => "z",
        }
    }

    pub fn apply(self, base: &ModelParams, value: f64) -> Result<ModelParams> {
        let mut p = *base;
        match self {
            Self::V => p.v = value,
            Self::P => p.p = value,
            Self::Q => p.q = value,
            Self::C => p.c = value,
            Self::Delta => p.delta = value,
            Self::Z => {
                check(value > 1.0, "z", value, "z > 1")?;
                p.q = value / (1.0 + value);
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub param: SweepParam,
    pub value: f64,
    pub params: ModelParams,
    pub z: f64,
    pub lambda_under: f64,
    pub lambda_over: f64,
    pub eta: f64,
    pub investment_nodes: usize,
    /// λ range of the investment set, if nonempty.
    pub investment_lambda_lo: Option<f64>,
    pub investment_lambda_hi: Option<f64>,
    pub max_delta: f64,
    pub classification: PatternKind,
    pub theta: Vec<f64>,
}

pub fn sweep_with(
    exec: Exec,
    base: &ModelParams,
    param: SweepParam,
    values: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    // validate every point before solving any
    let points = values
        .iter()
        .map(|&x| param.apply(base, x))
        .collect::<Result<Vec<_>>>()?;
    exec.map(points.len(), |i| {
        let prm = points[i];
        let sol = solve(&prm, opts)?;
        let invest = sol.investment_nodes();
        let lambdas = sol.lambdas();
        Ok(SweepRow {
            index: i,
            param,
            value: values[i],
            params: prm,
            z: sol.statics.z,
            lambda_under: sol.statics.lambda_under,
            lambda_over: sol.statics.lambda_over,
            eta: sol.statics.eta,
            investment_nodes: invest.len(),
            investment_lambda_lo: invest.first().map(|&k| lambdas[k]),
            investment_lambda_hi: invest.last().map(|&k| lambdas[k]),
            max_delta: sol
                .grid
                .interior()
                .map(|k| sol.delta[k])
                .fold(f64::NEG_INFINITY, f64::max),
            classification: classify(&sol).classification,
            theta: sol.theta,
        })
    })
    .into_iter()
    .collect()
}

pub fn sweep(
    base: &ModelParams,
    param: SweepParam,
    values: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    sweep_with(Exec::default(), base, param, values, opts)
}

/// Comparative statics in signal precision, given either as `q` or `z`.
pub fn precision_sweep(
    base: &ModelParams,
    param: SweepParam,
    values: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    check(
        matches!(param, SweepParam::Q | SweepParam::Z),
        "param",
        f64::NAN,
        "precision sweep takes q or z",
    )?;
    sweep(base, param, values, opts)
}
