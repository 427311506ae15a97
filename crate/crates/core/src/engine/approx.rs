//! Piecewise-affine outer approximations of the recourse functions.

use std::collections::HashSet;

use crate::cutpool::{CutPool, EvalMode, SelectionRule};
use crate::lp::{self, LpSolution, LpStatus};
use crate::program::{AffineMinorant, StageLp, StochasticProgram};

use super::Aggregation;

/// One approximated function: `weight * max(floor, cuts)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub weight: f64,
    pub floor: AffineMinorant,
    pub pool: CutPool,
}

impl Block {
    pub fn evaluate(&self, x: &[f64], mode: EvalMode) -> f64 {
        let f = self.floor.value(x);
        match self.pool.evaluate(x, mode) {
            Ok(v) => v.max(f),
            Err(_) => f,
        }
    }
}

/// Approximations of the recourse of every stage after the first.
///
/// `blocks(s)` approximates the expected cost from stage `s` on as a
/// function of the stage `s - 1` decision: one block per realization in
/// multicut mode (weighted by its probability), one block of weight 1 in
/// single-cut mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Approximation {
    aggregation: Aggregation,
    stages: Vec<Vec<Block>>,
}

impl Approximation {
    pub fn new(
        program: &StochasticProgram,
        aggregation: Aggregation,
        rule: SelectionRule,
        epsilon0: f64,
        floors: &[Vec<AffineMinorant>],
    ) -> Self {
        let mut stages = vec![Vec::new()];
        for s in 1..program.num_stages() {
            let dim = program.state_dim(s);
            let reals = &program.stages[s].realizations;
            let blocks = match aggregation {
                Aggregation::MultiCut => reals
                    .iter()
                    .zip(&floors[s])
                    .map(|(r, f)| Block {
                        weight: r.probability,
                        floor: f.clone(),
                        pool: CutPool::new(dim, rule, epsilon0),
                    })
                    .collect(),
                Aggregation::SingleCut => {
                    let mut floor = AffineMinorant::constant(0.0, dim);
                    for (r, f) in reals.iter().zip(&floors[s]) {
                        floor.theta += r.probability * f.theta;
                        for (a, b) in floor.beta.iter_mut().zip(&f.beta) {
                            *a += r.probability * b;
                        }
                    }
                    vec![Block {
                        weight: 1.0,
                        floor,
                        pool: CutPool::new(dim, rule, epsilon0),
                    }]
                }
            };
            stages.push(blocks);
        }
        Self { aggregation, stages }
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Blocks approximating the recourse of stage `s` (empty for `s = 0`).
    pub fn blocks(&self, s: usize) -> &[Block] {
        &self.stages[s]
    }

    pub(super) fn blocks_mut(&mut self, s: usize) -> &mut [Block] {
        &mut self.stages[s]
    }

    pub fn pools(&self, s: usize) -> impl Iterator<Item = &CutPool> {
        self.stages[s].iter().map(|b| &b.pool)
    }

    /// Approximate expected recourse of stage `s` at state `x`.
    pub fn evaluate(&self, s: usize, x: &[f64], mode: EvalMode) -> f64 {
        self.stages[s].iter().map(|b| b.weight * b.evaluate(x, mode)).sum()
    }

    /// Selected cuts over all cuts in the pools of stage `s`.
    pub fn proportion(&self, s: usize) -> f64 {
        let (mut n, mut k) = (0, 0);
        for p in self.pools(s) {
            let (a, b, _) = p.selection_stats();
            n += a;
            k += b;
        }
        if n == 0 {
            0.0
        } else {
            k as f64 / n as f64
        }
    }
}

/// Stage subproblem with epigraph variables for the next stage's blocks.
///
/// Columns are the stage decision followed by one free variable per
/// block. Each floor and selected cut `theta + beta . x <= f` becomes the
/// row `beta . x - f <= -theta`; identical rows appear once.
pub(crate) struct Subproblem {
    pub stage_lp: StageLp,
    /// `(inequality row, theta)` of every epigraph row.
    epigraph: Vec<(usize, f64)>,
}

pub(crate) struct Solved {
    pub solution: LpSolution,
    /// Coupling-row multipliers in model row order.
    pub coupling_duals: Vec<f64>,
    /// Intercept contributed by the epigraph rows' multipliers.
    pub future_intercept: f64,
}

impl Subproblem {
    pub fn build(
        program: &StochasticProgram,
        approx: &Approximation,
        s: usize,
        j: usize,
        x_prev: &[f64],
    ) -> Self {
        let next: &[Block] = if s + 1 < program.num_stages() {
            approx.blocks(s + 1)
        } else {
            &[]
        };
        let n = program.stage_dim(s);
        let mut stage_lp = program.stage_lp(s, j, x_prev, next.len());
        for (k, b) in next.iter().enumerate() {
            stage_lp.lp.objective[n + k] = b.weight;
        }
        let width = n + next.len();
        let mut epigraph = Vec::new();
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        for (k, b) in next.iter().enumerate() {
            let rows = std::iter::once((b.floor.theta, &b.floor.beta))
                .chain(b.pool.selected().map(|(_, c)| (c.theta, &c.beta)));
            for (theta, beta) in rows {
                let mut key: Vec<u64> = beta.iter().map(|v| v.to_bits()).collect();
                key.push(theta.to_bits());
                key.push(k as u64);
                if !seen.insert(key) {
                    continue;
                }
                let mut coeffs = beta.clone();
                coeffs.resize(width, 0.0);
                coeffs[n + k] = -1.0;
                let row = stage_lp.lp.add_le(coeffs, -theta);
                epigraph.push((row, theta));
            }
        }
        Self { stage_lp, epigraph }
    }

    pub fn solve(&self) -> Result<Solved, lp::LpError> {
        let solution = lp::solve(&self.stage_lp.lp)?;
        if solution.status != LpStatus::Optimal {
            return Ok(Solved {
                solution,
                coupling_duals: Vec::new(),
                future_intercept: 0.0,
            });
        }
        let coupling_duals = self.stage_lp.coupling_duals(&solution);
        let future_intercept = self
            .epigraph
            .iter()
            .map(|&(row, theta)| -solution.duals_ineq[row] * theta)
            .sum();
        Ok(Solved {
            solution,
            coupling_duals,
            future_intercept,
        })
    }
}
