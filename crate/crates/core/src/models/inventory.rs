//! Single-product inventory control with backorders.
//!
//! Stage decision: `[x, y, d, s+, s-]` with end-of-stage level `x`
//! (free), post-order level `y` (free), order quantity `d`, and the
//! positive and negative parts of `y - demand`. Rows, in order:
//!
//! ```text
//! x - y                  = -demand
//! s+ - s- - y            = -demand
//! y - d - x_prev         = 0
//! y                      <= cap
//! ```
//!
//! with cost `c d + b s- + h s+`. The cap `x0 + sum of maximal demands`
//! keeps every subproblem bounded and never binds at an optimum.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::program::{RowKind, Stage, StageRealization, StochasticProgram};
use crate::rng;

pub const INVENTORY_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventorySpec {
    /// Unit buying cost per stage.
    pub c: Vec<f64>,
    /// Unit backorder cost per stage.
    pub b: Vec<f64>,
    /// Unit holding cost per stage.
    pub h: Vec<f64>,
    pub x0: f64,
    /// Demand per stage and realization.
    pub demands: Vec<Vec<f64>>,
    pub probabilities: Vec<Vec<f64>>,
}

impl InventorySpec {
    pub fn stages(&self) -> usize {
        self.demands.len()
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let t = self.stages();
        let bad = |m: &str| Err(ModelError::SpecInvalid(m.to_string()));
        if t == 0 {
            return bad("need at least one stage");
        }
        if [&self.c, &self.b, &self.h]
            .iter()
            .any(|v| v.len() != t || v.iter().any(|&x| !(x >= 0.0)))
        {
            return bad("costs must be nonnegative with one entry per stage");
        }
        if self.demands[0].len() != 1 {
            return bad("first-stage demand must be deterministic");
        }
        if self.probabilities.len() != t
            || self.demands.iter().zip(&self.probabilities).any(|(d, p)| d.len() != p.len())
        {
            return bad("one probability per demand realization");
        }
        if self.demands.iter().flatten().any(|&d| !(d >= 0.0)) || !self.x0.is_finite() {
            return bad("demands must be nonnegative and x0 finite");
        }
        Ok(())
    }

    pub fn level_cap(&self) -> f64 {
        self.x0.max(0.0)
            + self
                .demands
                .iter()
                .map(|d| d.iter().cloned().fold(0.0, f64::max))
                .sum::<f64>()
    }
}

pub fn build_inventory(spec: &InventorySpec) -> Result<StochasticProgram, ModelError> {
    spec.check()?;
    let cap = spec.level_cap();
    let stages = (0..spec.stages())
        .map(|s| {
            let state = if s == 0 { 1 } else { INVENTORY_DIM };
            let mut link = vec![0.0; state];
            link[0] = -1.0;
            let realizations = spec.demands[s]
                .iter()
                .zip(&spec.probabilities[s])
                .map(|(&xi, &p)| StageRealization {
                    recourse: vec![
                        vec![1.0, -1.0, 0.0, 0.0, 0.0],
                        vec![0.0, -1.0, 0.0, 1.0, -1.0],
                        vec![0.0, 1.0, -1.0, 0.0, 0.0],
                        vec![0.0, 1.0, 0.0, 0.0, 0.0],
                    ],
                    coupling: vec![vec![0.0; state], vec![0.0; state], link.clone(), vec![0.0; state]],
                    rhs: vec![-xi, -xi, 0.0, cap],
                    cost: vec![0.0, 0.0, spec.c[s], spec.h[s], spec.b[s]],
                    probability: p,
                    row_kinds: vec![RowKind::Equality, RowKind::Equality, RowKind::Equality, RowKind::LessEq],
                    floor: None,
                })
                .collect();
            Stage {
                free: vec![0, 1],
                realizations,
            }
        })
        .collect();
    Ok(StochasticProgram {
        x0: vec![spec.x0],
        stages,
        terminal_cost: None,
    })
}

/// Buying cost `1.5 + cos(pi t / 6)`, backorder 2.8, holding 0.2,
/// `x0 = 10`, mean demand `5 + 0.5 t` scaled by `1 + 0.1 N(0, 1)` (clamped
/// at zero), equally likely realizations; stage 1 sees its mean demand.
pub fn generate_inventory(stages: usize, realizations: usize, seed: u64) -> Result<InventorySpec, ModelError> {
    if stages == 0 || realizations == 0 {
        return Err(ModelError::SpecInvalid("stages and realizations must be positive".into()));
    }
    let mut rng = rng::stream(seed, rng::GENERATOR_STREAM);
    let mut demands = Vec::with_capacity(stages);
    let mut probabilities = Vec::with_capacity(stages);
    for t in 1..=stages {
        let mean = 5.0 + 0.5 * t as f64;
        let m = if t == 1 { 1 } else { realizations };
        demands.push(if t == 1 {
            vec![mean]
        } else {
            (0..m)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (mean * (1.0 + 0.1 * e)).max(0.0)
                })
                .collect()
        });
        probabilities.push(vec![1.0 / m as f64; m]);
    }
    Ok(InventorySpec {
        c: (1..=stages)
            .map(|t| 1.5 + (std::f64::consts::PI * t as f64 / 6.0).cos())
            .collect(),
        b: vec![2.8; stages],
        h: vec![0.2; stages],
        x0: 10.0,
        demands,
        probabilities,
    })
}
