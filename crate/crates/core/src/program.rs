//! Multistage stochastic linear programs with stagewise-independent,
//! finitely supported noise.
//!
//! Stage `t` (0-based index `s = t - 1` in this API) chooses `x_t` from
//!
//! ```text
//! A_tj x_t + B_tj x_{t-1}  {=, <=}  b_tj,   x_t >= 0 except free columns
//! ```
//!
//! paying `c_tj . x_t`, where realization `j` occurs with probability
//! `p_tj`. The first stage has exactly one realization and sees `x0` as
//! its incoming state. An optional terminal cost is a linear function of
//! the last stage's decision.
//!
//! Human-facing output (diagnostics, CSV, logs) numbers stages and
//! realizations from 1.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpSolution, LpStatus};
use crate::rng;

/// Default cap on the number of scenario-tree nodes for the extensive form.
pub const DEFAULT_TREE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    #[serde(rename = "eq")]
    Equality,
    #[serde(rename = "le")]
    LessEq,
}

/// `theta + beta . x`, a known lower bound on a recourse function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMinorant {
    pub theta: f64,
    pub beta: Vec<f64>,
}

impl AffineMinorant {
    pub fn constant(theta: f64, dim: usize) -> Self {
        Self {
            theta,
            beta: vec![0.0; dim],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.theta + lp::dot(&self.beta, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRealization {
    /// Coefficients of this stage's decision.
    #[serde(rename = "A")]
    pub recourse: Vec<Vec<f64>>,
    /// Coefficients of the incoming state.
    #[serde(rename = "B")]
    pub coupling: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub rhs: Vec<f64>,
    #[serde(rename = "c")]
    pub cost: Vec<f64>,
    #[serde(rename = "p")]
    pub probability: f64,
    pub row_kinds: Vec<RowKind>,
    /// Lower bound on this realization's recourse value as a function of
    /// the incoming state; used to seed the approximations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<AffineMinorant>,
}

impl StageRealization {
    pub fn rows(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Decision columns without a sign restriction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free: Vec<usize>,
    pub realizations: Vec<StageRealization>,
}

impl Stage {
    pub fn dim(&self) -> usize {
        self.realizations.first().map_or(0, |r| r.cost.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticProgram {
    pub x0: Vec<f64>,
    pub stages: Vec<Stage>,
    pub terminal_cost: Option<Vec<f64>>,
}

/// One realization index per stage; entry 0 is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub realizations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoStages,
    EmptyStage { stage: usize },
    RandomFirstStage { count: usize },
    Shape { stage: usize, realization: usize, what: String },
    NonFinite { stage: usize, realization: usize },
    Probability { stage: usize, realization: usize, value: f64 },
    ProbabilitySum { stage: usize, sum: f64 },
    TerminalCost { expected: usize, found: usize },
    Recourse { stage: usize, realization: usize, scenario: usize, status: LpStatus },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            NoStages => write!(f, "program has no stages"),
            EmptyStage { stage } => write!(f, "stage {}: no realizations", stage + 1),
            RandomFirstStage { count } => {
                write!(f, "stage 1: expected one realization, found {count}")
            }
            Shape { stage, realization, what } => {
                write!(f, "stage {}, realization {}: {what}", stage + 1, realization + 1)
            }
            NonFinite { stage, realization } => write!(
                f,
                "stage {}, realization {}: non-finite coefficient",
                stage + 1,
                realization + 1
            ),
            Probability { stage, realization, value } => write!(
                f,
                "stage {}, realization {}: probability {value} outside (0, 1]",
                stage + 1,
                realization + 1
            ),
            ProbabilitySum { stage, sum } => {
                write!(f, "stage {}: probabilities sum to {sum}", stage + 1)
            }
            TerminalCost { expected, found } => write!(
                f,
                "terminal cost has {found} entries, last stage has {expected} columns"
            ),
            Recourse { stage, realization, scenario, status } => {
                let what = match status {
                    LpStatus::Infeasible => "empty feasible set",
                    LpStatus::Unbounded => "unbounded subproblem",
                    LpStatus::Optimal => "ok",
                };
                write!(
                    f,
                    "relatively complete recourse violated at (t={}, j={}, scenario {}): {what}",
                    stage + 1,
                    realization + 1,
                    scenario
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("scenario tree has {nodes} nodes, above the cap of {cap}")]
    TreeTooLarge { nodes: u128, cap: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Stage subproblem with only the coupling rows, plus the position of
/// each coupling row inside the LP.
#[derive(Debug, Clone)]
pub struct StageLp {
    pub lp: LinearProgram,
    pub slots: Vec<RowSlot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSlot {
    Eq(usize),
    Le(usize),
}

impl StageLp {
    /// Multipliers of the coupling rows in model row order.
    pub fn coupling_duals(&self, sol: &LpSolution) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                RowSlot::Eq(i) => sol.duals_eq[i],
                RowSlot::Le(i) => sol.duals_ineq[i],
            })
            .collect()
    }
}

impl StochasticProgram {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_dim(&self, stage: usize) -> usize {
        self.stages[stage].dim()
    }

    /// Dimension of the state entering `stage`.
    pub fn state_dim(&self, stage: usize) -> usize {
        if stage == 0 {
            self.x0.len()
        } else {
            self.stage_dim(stage - 1)
        }
    }

    pub fn realization(&self, stage: usize, j: usize) -> &StageRealization {
        &self.stages[stage].realizations[j]
    }

    pub fn num_realizations(&self, stage: usize) -> usize {
        self.stages[stage].realizations.len()
    }

    /// Immediate cost vector of `(stage, j)`, terminal cost included.
    pub fn stage_cost(&self, stage: usize, j: usize) -> Vec<f64> {
        let mut c = self.realization(stage, j).cost.clone();
        if stage + 1 == self.num_stages() {
            if let Some(tc) = &self.terminal_cost {
                for (a, b) in c.iter_mut().zip(tc) {
                    *a += b;
                }
            }
        }
        c
    }

    /// Builds the subproblem of `(stage, j)` at incoming state `x_prev`
    /// with `extra` trailing free columns (zero cost) reserved for the
    /// caller.
    pub fn stage_lp(&self, stage: usize, j: usize, x_prev: &[f64], extra: usize) -> StageLp {
        let r = self.realization(stage, j);
        let n = r.cost.len();
        let mut objective = self.stage_cost(stage, j);
        objective.resize(n + extra, 0.0);
        let mut lp = LinearProgram::new(objective);
        for &f in &self.stages[stage].free {
            lp.set_free(f);
        }
        for k in n..n + extra {
            lp.set_free(k);
        }
        let mut slots = Vec::with_capacity(r.rows());
        for i in 0..r.rows() {
            let mut coeffs = r.recourse[i].clone();
            coeffs.resize(n + extra, 0.0);
            let rhs = r.rhs[i] - lp::dot(&r.coupling[i], x_prev);
            slots.push(match r.row_kinds[i] {
                RowKind::Equality => RowSlot::Eq(lp.add_eq(coeffs, rhs)),
                RowKind::LessEq => RowSlot::Le(lp.add_le(coeffs, rhs)),
            });
        }
        StageLp { lp, slots }
    }

    /// Structural checks: dimensions, probabilities, deterministic first
    /// stage, finite data.
    pub fn check_structure(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.stages.is_empty() {
            out.push(Diagnostic::NoStages);
            return out;
        }
        if self.stages[0].realizations.len() > 1 {
            out.push(Diagnostic::RandomFirstStage {
                count: self.stages[0].realizations.len(),
            });
        }
        let mut prev_dim = Some(self.x0.len());
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.realizations.is_empty() {
                out.push(Diagnostic::EmptyStage { stage: s });
                prev_dim = None;
                continue;
            }
            let dim = stage.dim();
            let rows = stage.realizations[0].rows();
            let shape = |j: usize, what: String| Diagnostic::Shape {
                stage: s,
                realization: j,
                what,
            };
            for &f in &stage.free {
                if f >= dim {
                    out.push(shape(0, format!("free column {f} out of range")));
                }
            }
            let mut sum = 0.0;
            for (j, r) in stage.realizations.iter().enumerate() {
                sum += r.probability;
                if !(r.probability > 0.0 && r.probability <= 1.0) {
                    out.push(Diagnostic::Probability {
                        stage: s,
                        realization: j,
                        value: r.probability,
                    });
                }
                if r.cost.len() != dim {
                    out.push(shape(j, format!("c has {} entries, expected {dim}", r.cost.len())));
                }
                if r.rows() != rows {
                    out.push(shape(j, format!("b has {} rows, expected {rows}", r.rows())));
                }
                if r.recourse.len() != r.rows() || r.coupling.len() != r.rows() || r.row_kinds.len() != r.rows() {
                    out.push(shape(
                        j,
                        format!(
                            "A, B, b and row_kinds have {}, {}, {} and {} rows",
                            r.recourse.len(),
                            r.coupling.len(),
                            r.rows(),
                            r.row_kinds.len()
                        ),
                    ));
                }
                if let Some(bad) = r.recourse.iter().position(|row| row.len() != dim) {
                    out.push(shape(j, format!("A row {} has {} columns, expected {dim}", bad + 1, r.recourse[bad].len())));
                }
                if let Some(pd) = prev_dim {
                    if let Some(bad) = r.coupling.iter().position(|row| row.len() != pd) {
                        out.push(shape(
                            j,
                            format!("B row {} has {} columns, expected {pd}", bad + 1, r.coupling[bad].len()),
                        ));
                    }
                    if let Some(fl) = &r.floor {
                        if fl.beta.len() != pd {
                            out.push(shape(j, format!("floor has {} coefficients, expected {pd}", fl.beta.len())));
                        }
                    }
                }
                let finite = r
                    .recourse
                    .iter()
                    .chain(&r.coupling)
                    .flatten()
                    .chain(&r.rhs)
                    .chain(&r.cost)
                    .chain(r.floor.iter().flat_map(|f| f.beta.iter().chain(std::iter::once(&f.theta))))
                    .all(|v| v.is_finite());
                if !finite {
                    out.push(Diagnostic::NonFinite { stage: s, realization: j });
                }
            }
            if (sum - 1.0).abs() > 1e-12 {
                out.push(Diagnostic::ProbabilitySum { stage: s, sum });
            }
            prev_dim = Some(dim);
        }
        if let Some(tc) = &self.terminal_cost {
            let last = self.stages.last().map_or(0, Stage::dim);
            if tc.len() != last {
                out.push(Diagnostic::TerminalCost {
                    expected: last,
                    found: tc.len(),
                });
            }
        }
        out
    }

    /// Spot check of relatively complete recourse: along `scenarios`
    /// sampled paths, every realization's subproblem is solved at the
    /// state reached so far (myopic stage costs only).
    pub fn check_recourse(&self, scenarios: usize, seed: u64) -> Result<Vec<Diagnostic>, LpError> {
        let mut out = Vec::new();
        let mut rng = rng::stream(seed, rng::VALIDATION_STREAM);
        for k in 0..scenarios {
            let sc = sample_scenario(self, &mut rng);
            let mut x_prev = self.x0.clone();
            for s in 0..self.num_stages() {
                let mut next = None;
                for j in 0..self.num_realizations(s) {
                    let sol = lp::solve(&self.stage_lp(s, j, &x_prev, 0).lp)?;
                    if sol.status != LpStatus::Optimal {
                        out.push(Diagnostic::Recourse {
                            stage: s,
                            realization: j,
                            scenario: k,
                            status: sol.status,
                        });
                    } else if j == sc.realizations[s] {
                        next = Some(sol.primal);
                    }
                }
                match next {
                    Some(x) => x_prev = x,
                    None => break,
                }
            }
        }
        Ok(out)
    }

    /// All diagnostics; the recourse check runs only on structurally
    /// valid programs.
    pub fn validate(&self, options: &ValidateOptions) -> Vec<Diagnostic> {
        let mut out = self.check_structure();
        if out.is_empty() && options.scenarios > 0 {
            match self.check_recourse(options.scenarios, options.seed) {
                Ok(d) => out.extend(d),
                Err(_) => out.push(Diagnostic::NonFinite { stage: 0, realization: 0 }),
            }
        }
        out
    }

    /// Number of scenario-tree nodes, saturating.
    pub fn tree_size(&self) -> u128 {
        let mut total: u128 = 0;
        let mut level: u128 = 1;
        for s in 0..self.num_stages() {
            level = level.saturating_mul(self.num_realizations(s) as u128);
            total = total.saturating_add(level);
        }
        total
    }

    /// Scenario tree in breadth-first order (parents before children).
    pub fn tree(&self, cap: usize) -> Result<Vec<TreeNode>, ProgramError> {
        let nodes = self.tree_size();
        if nodes > cap as u128 {
            return Err(ProgramError::TreeTooLarge { nodes, cap });
        }
        let mut out = Vec::with_capacity(nodes as usize);
        out.push(TreeNode {
            stage: 0,
            realization: 0,
            parent: None,
            probability: 1.0,
        });
        let mut level = 0..1;
        for s in 1..self.num_stages() {
            let start = out.len();
            for p in level.clone() {
                let pp = out[p].probability;
                for (j, r) in self.stages[s].realizations.iter().enumerate() {
                    out.push(TreeNode {
                        stage: s,
                        realization: j,
                        parent: Some(p),
                        probability: pp * r.probability,
                    });
                }
            }
            level = start..out.len();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateOptions {
    pub scenarios: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { scenarios: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub stage: usize,
    pub realization: usize,
    pub parent: Option<usize>,
    /// Probability of the path from the root to this node.
    pub probability: f64,
}

/// Draws one realization per stage, independently across stages.
pub fn sample_scenario<R: Rng + ?Sized>(program: &StochasticProgram, rng: &mut R) -> Scenario {
    let realizations = program
        .stages
        .iter()
        .enumerate()
        .map(|(s, stage)| {
            if s == 0 || stage.realizations.len() == 1 {
                return 0;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (j, r) in stage.realizations.iter().enumerate() {
                acc += r.probability;
                if u < acc {
                    return j;
                }
            }
            stage.realizations.len() - 1
        })
        .collect();
    Scenario { realizations }
}

/// Deterministic equivalent over the full scenario tree.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub lp: LinearProgram,
    pub nodes: Vec<TreeNode>,
    /// First LP column of each node's decision block.
    pub offsets: Vec<usize>,
}

impl ExtensiveForm {
    pub fn node_decision<'a>(&self, program: &StochasticProgram, primal: &'a [f64], node: usize) -> &'a [f64] {
        let start = self.offsets[node];
        &primal[start..start + program.stage_dim(self.nodes[node].stage)]
    }
}

pub fn extensive_form(program: &StochasticProgram, cap: usize) -> Result<ExtensiveForm, ProgramError> {
    let diags = program.check_structure();
    if !diags.is_empty() {
        return Err(ProgramError::Invalid(diags));
    }
    let nodes = program.tree(cap)?;
    let mut offsets = Vec::with_capacity(nodes.len());
    let mut ncols = 0;
    for n in &nodes {
        offsets.push(ncols);
        ncols += program.stage_dim(n.stage);
    }
    let mut objective = vec![0.0; ncols];
    let mut free = Vec::new();
    for (k, n) in nodes.iter().enumerate() {
        let c = program.stage_cost(n.stage, n.realization);
        for (i, v) in c.iter().enumerate() {
            objective[offsets[k] + i] = n.probability * v;
        }
        free.extend(program.stages[n.stage].free.iter().map(|f| offsets[k] + f));
    }
    let mut lp = LinearProgram::new(objective);
    for f in free {
        lp.set_free(f);
    }
    for (k, n) in nodes.iter().enumerate() {
        let r = program.realization(n.stage, n.realization);
        for i in 0..r.rows() {
            let mut coeffs = vec![0.0; ncols];
            coeffs[offsets[k]..offsets[k] + r.recourse[i].len()].copy_from_slice(&r.recourse[i]);
            let mut rhs = r.rhs[i];
            match n.parent {
                Some(p) => {
                    for (c, v) in r.coupling[i].iter().enumerate() {
                        coeffs[offsets[p] + c] += v;
                    }
                }
                None => rhs -= lp::dot(&r.coupling[i], &program.x0),
            }
            match r.row_kinds[i] {
                RowKind::Equality => lp.add_eq(coeffs, rhs),
                RowKind::LessEq => lp.add_le(coeffs, rhs),
            };
        }
    }
    Ok(ExtensiveForm { lp, nodes, offsets })
}

/// Optimal value of the deterministic equivalent.
pub fn extensive_form_value(program: &StochasticProgram, cap: usize) -> Result<LpSolution, ProgramError> {
    let ef = extensive_form(program, cap)?;
    Ok(lp::solve(&ef.lp)?)
}
