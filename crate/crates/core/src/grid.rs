use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::model::{logistic, Statics};

/// Where a Bayes step from a grid node lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Landing {
    Interior(usize),
    DownCascade,
    UpCascade,
}

/// Log-odds grid aligned to the Bayes step.
///
/// Nodes `ℓ_k = ℓ̲ + k·h`, `k = 0..=2m`, with `h = log z / m`. Node 0 is the
/// down-cascade threshold and node `2m` the up-cascade threshold; a Bayes
/// step moves exactly `m` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub m: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

pub fn build_grid(statics: &Statics, m: usize) -> Result<Grid> {
    check(m >= 1, "m", m as f64, "m >= 1")?;
    let h = statics.log_z / m as f64;
    let mut nodes: Vec<f64> = (0..=2 * m)
        .map(|k| statics.ell_under + k as f64 * h)
        .collect();
    nodes[0] = statics.ell_under;
    nodes[2 * m] = statics.ell_over;
    Ok(Grid { m, h, nodes })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> usize {
        2 * self.m
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        1..2 * self.m
    }

    pub fn is_interior(&self, k: usize) -> bool {
        k >= 1 && k < 2 * self.m
    }

    pub fn lambda(&self, k: usize) -> f64 {
        logistic(self.nodes[k])
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.nodes.iter().map(|&l| logistic(l)).collect()
    }

    pub fn up(&self, k: usize) -> Landing {
        if k + self.m >= 2 * self.m {
            Landing::UpCascade
        } else {
            Landing::Interior(k + self.m)
        }
    }

    pub fn down(&self, k: usize) -> Landing {
        if k <= self.m {
            Landing::DownCascade
        } else {
            Landing::Interior(k - self.m)
        }
    }

    /// Fractional node index of an arbitrary log-odds value.
    pub fn position(&self, ell: f64) -> f64 {
        (ell - self.nodes[0]) / self.h
    }

    /// Nearest interior node to `ell`.
    pub fn nearest_interior(&self, ell: f64) -> usize {
        let x = self.position(ell).round();
        x.clamp(1.0, (2 * self.m - 1) as f64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_statics, ModelParams};

    #[test]
    fn single_step_grid() {
        let s = derive_statics(&ModelParams::reference()).unwrap();
        let g = build_grid(&s, 1).unwrap();
        assert_eq!(g.len(), 3);
        let expect = [(2.0f64 / 9.0).ln(), (2.0f64 / 3.0).ln(), 2.0f64.ln()];
        for (a, b) in g.nodes.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(g.interior(), 1..2);
        assert_eq!(g.up(1), Landing::UpCascade);
        assert_eq!(g.down(1), Landing::DownCascade);
    }

    #[test]
    fn fifty_subdivisions() {
        let s = derive_statics(&ModelParams::reference()).unwrap();
        let g = build_grid(&s, 50).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.h - 3.0f64.ln() / 50.0).abs() < 1e-15);
        assert!((g.h - 0.021972).abs() < 1e-6);
        assert_eq!(g.nodes[0], s.ell_under);
        assert_eq!(g.nodes[100], s.ell_over);
        assert!((g.nodes[50] - s.k.ln()).abs() < 1e-12);
        assert_eq!(g.up(49), Landing::Interior(99));
        assert_eq!(g.up(50), Landing::UpCascade);
        assert_eq!(g.down(51), Landing::Interior(1));
        assert_eq!(g.down(50), Landing::DownCascade);
    }

    #[test]
    fn rejects_zero_subdivisions() {
        let s = derive_statics(&ModelParams::reference()).unwrap();
        assert!(build_grid(&s, 0).is_err());
    }
}
