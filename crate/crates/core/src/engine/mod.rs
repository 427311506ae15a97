//! Forward/backward decomposition with single or multiple cuts per stage
//! and optional cut selection.

mod approx;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutpool::{Cut, SelectionRule, DEFAULT_EPSILON0};
use crate::lp::{self, LpError, LpStatus};
use crate::program::{
    sample_scenario, AffineMinorant, Diagnostic, ProgramError, StochasticProgram, DEFAULT_TREE_CAP,
};
use crate::{rng, stats};

pub use approx::{Approximation, Block};
pub use report::{convergence_csv, mean_proportions, proportions_csv, RunSummary, CONVERGENCE_HEADER_PREFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    /// One probability-weighted cut per trial point and stage.
    SingleCut,
    /// One cut per trial point and realization.
    MultiCut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// `forward` scenarios build trial points; `evaluation` fresh
    /// scenarios estimate the policy cost for the upper bound.
    Sampled { forward: usize, evaluation: usize },
    /// Every tree node is visited in the forward pass and the upper bound
    /// is the exact expected policy cost.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub aggregation: Aggregation,
    pub selection: SelectionRule,
    pub sampling: Sampling,
    pub alpha: f64,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Upper bound every this many iterations.
    pub upper_bound_every: usize,
    pub workers: usize,
    /// Constant recourse lower bound for realizations without a floor.
    pub initial_lower_bound: Option<f64>,
    /// Permits selection rules whose selected sets are not nested.
    pub allow_unnested: bool,
    pub tree_cap: usize,
    /// Report zero elapsed time so logs are reproducible byte for byte.
    pub no_timing: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::MultiCut,
            selection: SelectionRule::KeepAll,
            sampling: Sampling::Sampled {
                forward: 1,
                evaluation: 200,
            },
            alpha: 0.025,
            epsilon: 0.1,
            epsilon0: DEFAULT_EPSILON0,
            max_iterations: 500,
            seed: 0,
            upper_bound_every: 1,
            workers: 1,
            initial_lower_bound: None,
            allow_unnested: false,
            tree_cap: DEFAULT_TREE_CAP,
            no_timing: false,
        }
    }
}

impl MethodConfig {
    pub fn for_method(method: Method) -> Self {
        Self {
            aggregation: method.aggregation(),
            selection: method.selection(),
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if let Sampling::Sampled { forward, evaluation } = self.sampling {
            if forward < 1 {
                return bad("N must be at least 1");
            }
            if evaluation < 2 {
                return bad("S must be at least 2");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha must lie in (0, 0.5)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.epsilon0 >= 0.0) {
            return bad("epsilon0 must be nonnegative");
        }
        if self.upper_bound_every < 1 {
            return bad("upper bound period must be at least 1");
        }
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        if !self.selection.is_nested() && !self.allow_unnested {
            return bad("selection rule is not nested; enable allow_unnested to use it");
        }
        Ok(())
    }
}

/// The six method variants, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Sddp,
    SddpCs1,
    SddpCs2,
    Muda,
    CusmudaCs1,
    CusmudaCs2,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sddp,
        Method::SddpCs1,
        Method::SddpCs2,
        Method::Muda,
        Method::CusmudaCs1,
        Method::CusmudaCs2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Sddp => "SDDP",
            Method::SddpCs1 => "SDDP CS 1",
            Method::SddpCs2 => "SDDP CS 2",
            Method::Muda => "MuDA",
            Method::CusmudaCs1 => "CuSMuDA CS 1",
            Method::CusmudaCs2 => "CuSMuDA CS 2",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Method::Sddp => "sddp",
            Method::SddpCs1 => "sddp-cs1",
            Method::SddpCs2 => "sddp-cs2",
            Method::Muda => "muda",
            Method::CusmudaCs1 => "cusmuda-cs1",
            Method::CusmudaCs2 => "cusmuda-cs2",
        }
    }

    pub fn from_slug(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.slug() == s)
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            Method::Sddp | Method::SddpCs1 | Method::SddpCs2 => Aggregation::SingleCut,
            _ => Aggregation::MultiCut,
        }
    }

    pub fn selection(self) -> SelectionRule {
        match self {
            Method::Sddp | Method::Muda => SelectionRule::KeepAll,
            Method::SddpCs1 | Method::CusmudaCs1 => SelectionRule::Level1,
            Method::SddpCs2 | Method::CusmudaCs2 => SelectionRule::Lml1,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Program(Vec<Diagnostic>),
    #[error("no lower bound for the recourse of stage {} realization {}; supply a floor or an initial lower bound", .stage + 1, .realization + 1)]
    MissingLowerBound { stage: usize, realization: usize },
    #[error("subproblem {status:?} at (t={}, j={}, scenario {scenario})", .stage + 1, .realization + 1)]
    Subproblem {
        stage: usize,
        realization: usize,
        scenario: usize,
        status: LpStatus,
    },
    #[error("cut at (t={}, j={}) has value {cut_value} at its trial point, subproblem value {lp_value}", .stage + 1, .realization + 1)]
    DualExtractionMismatch {
        stage: usize,
        realization: usize,
        cut_value: f64,
        lp_value: f64,
    },
    #[error(transparent)]
    Tree(#[from] ProgramError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub z_inf: f64,
    pub z_sup: Option<f64>,
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    /// Milliseconds since the start of the run.
    pub elapsed_ms: u64,
    /// Selected proportion in the pools of stages 2..T.
    pub proportions: Vec<f64>,
    /// Subproblems solved this iteration, stages 1..T.
    pub lp_counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Aborted,
}

/// Where the initial recourse minorants came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FloorSource {
    Program,
    Constant(f64),
    Mixed { constant: f64 },
}

#[derive(Debug)]
pub struct RunResult {
    pub status: RunStatus,
    pub log: Vec<LogRow>,
    pub approximation: Approximation,
    pub floor_source: FloorSource,
    /// Set when the run aborted; the log holds the completed iterations.
    pub error: Option<EngineError>,
}

impl RunResult {
    pub fn final_row(&self) -> &LogRow {
        self.log.last().expect("log holds the initial row")
    }

    pub fn iterations(&self) -> usize {
        self.final_row().iteration
    }

    pub fn total_lps(&self) -> u64 {
        self.log.iter().flat_map(|r| &r.lp_counts).sum()
    }
}

/// A cut computed from one realization's subproblem at one trial point.
pub struct CutEvent<'a> {
    pub iteration: usize,
    pub stage: usize,
    pub realization: usize,
    pub trial: &'a [f64],
    pub solution: &'a lp::LpSolution,
    /// Coupling-row multipliers in model row order.
    pub coupling_duals: &'a [f64],
    pub cut: &'a Cut,
}

pub trait Observer {
    fn on_cut(&mut self, _event: &CutEvent) {}
    fn on_iteration(&mut self, _row: &LogRow, _approx: &Approximation) {}
}

impl Observer for () {}

/// Stopping test: both bounds zero-level, or a relative gap within `epsilon`.
pub fn check_stop(z_inf: f64, z_sup: f64, epsilon: f64) -> bool {
    (z_inf == 0.0 && z_sup <= epsilon) || (z_sup - z_inf).abs() <= epsilon * z_sup.abs().max(1.0)
}

/// `mean + std / sqrt(S) * q(1 - alpha)` with `q` the standard normal
/// quantile.
pub fn upper_confidence(mean: f64, std: f64, samples: usize, alpha: f64) -> f64 {
    mean + std / (samples as f64).sqrt() * stats::normal_quantile(1.0 - alpha)
}

/// Initial minorant of each realization's recourse, stages 1..T-1.
pub fn initial_floors(
    program: &StochasticProgram,
    config: &MethodConfig,
) -> Result<(Vec<Vec<AffineMinorant>>, FloorSource), EngineError> {
    let t = program.num_stages();
    let nonnegative = (1..t).all(|s| {
        let free = &program.stages[s].free;
        (0..program.num_realizations(s)).all(|j| {
            program
                .stage_cost(s, j)
                .iter()
                .enumerate()
                .all(|(i, &c)| if free.contains(&i) { c == 0.0 } else { c >= 0.0 })
        })
    });
    let fallback = config.initial_lower_bound.or(if nonnegative { Some(0.0) } else { None });
    let mut used_program = false;
    let mut used_constant = false;
    let mut floors = vec![Vec::new()];
    for s in 1..t {
        let dim = program.state_dim(s);
        let mut row = Vec::new();
        for (j, r) in program.stages[s].realizations.iter().enumerate() {
            match (&r.floor, fallback) {
                (Some(f), _) => {
                    used_program = true;
                    row.push(f.clone());
                }
                (None, Some(c)) => {
                    used_constant = true;
                    row.push(AffineMinorant::constant(c, dim));
                }
                (None, None) => {
                    return Err(EngineError::MissingLowerBound {
                        stage: s,
                        realization: j,
                    })
                }
            }
        }
        floors.push(row);
    }
    let source = match (used_program, used_constant) {
        (true, true) => FloorSource::Mixed {
            constant: fallback.unwrap_or(0.0),
        },
        (false, true) => FloorSource::Constant(fallback.unwrap_or(0.0)),
        _ => FloorSource::Program,
    };
    Ok((floors, source))
}

pub fn run(program: &StochasticProgram, config: &MethodConfig) -> Result<RunResult, EngineError> {
    run_observed(program, config, &mut ())
}

pub fn run_observed(
    program: &StochasticProgram,
    config: &MethodConfig,
    observer: &mut dyn Observer,
) -> Result<RunResult, EngineError> {
    config.check()?;
    let diags = program.check_structure();
    if !diags.is_empty() {
        return Err(EngineError::Program(diags));
    }
    let (floors, floor_source) = initial_floors(program, config)?;
    let tree = match config.sampling {
        Sampling::Exhaustive => Some(program.tree(config.tree_cap)?),
        Sampling::Sampled { .. } => None,
    };
    let threads = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| EngineError::Config(e.to_string()))?,
        )
    } else {
        None
    };
    let mut driver = Driver {
        program,
        config,
        tree,
        threads,
        approx: Approximation::new(program, config.aggregation, config.selection, config.epsilon0, &floors),
        start: Instant::now(),
    };

    let t = program.num_stages();
    let mut log = Vec::new();
    let mut counts = vec![0u64; t];
    let z_inf = driver.lower_bound(&mut counts)?;
    let row = driver.row(0, z_inf, None, counts);
    observer.on_iteration(&row, &driver.approx);
    log.push(row);

    let mut status = RunStatus::MaxIterations;
    let mut error = None;
    for k in 1..=config.max_iterations {
        match driver.iterate(k, observer) {
            Ok(row) => {
                observer.on_iteration(&row, &driver.approx);
                let stop = row.z_sup.is_some_and(|zs| check_stop(row.z_inf, zs, config.epsilon));
                log.push(row);
                if stop {
                    status = RunStatus::Converged;
                    break;
                }
            }
            Err(e) => {
                status = RunStatus::Aborted;
                error = Some(e);
                break;
            }
        }
    }
    Ok(RunResult {
        status,
        log,
        approximation: driver.approx,
        floor_source,
        error,
    })
}

struct Driver<'a> {
    program: &'a StochasticProgram,
    config: &'a MethodConfig,
    tree: Option<Vec<crate::program::TreeNode>>,
    threads: Option<rayon::ThreadPool>,
    approx: Approximation,
    start: Instant,
}

/// Decisions of one simulated path or tree level, with realized costs.
struct Simulated {
    /// `states[s][i]`: decision of item `i` at stage `s`.
    states: Vec<Vec<Vec<f64>>>,
    costs: Vec<f64>,
    weights: Vec<f64>,
}

struct BackwardSolve {
    cut: Cut,
    solution: lp::LpSolution,
    coupling_duals: Vec<f64>,
}

impl Driver<'_> {
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        match &self.threads {
            Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            None => items.iter().map(f).collect(),
        }
    }

    fn row(&self, iteration: usize, z_inf: f64, bound: Option<(f64, f64, f64)>, lp_counts: Vec<u64>) -> LogRow {
        let t = self.program.num_stages();
        LogRow {
            iteration,
            z_inf,
            z_sup: bound.map(|b| b.2),
            cost_mean: bound.map(|b| b.0),
            cost_std: bound.map(|b| b.1),
            elapsed_ms: if self.config.no_timing {
                0
            } else {
                self.start.elapsed().as_millis() as u64
            },
            proportions: (1..t).map(|s| self.approx.proportion(s)).collect(),
            lp_counts,
        }
    }

    fn solve_stage(&self, s: usize, j: usize, x_prev: &[f64], scenario: usize) -> Result<(Vec<f64>, f64), EngineError> {
        let sub = approx::Subproblem::build(self.program, &self.approx, s, j, x_prev);
        let solved = sub.solve()?;
        if solved.solution.status != LpStatus::Optimal {
            return Err(EngineError::Subproblem {
                stage: s,
                realization: j,
                scenario,
                status: solved.solution.status,
            });
        }
        let n = self.program.stage_dim(s);
        let mut x = solved.solution.primal;
        x.truncate(n);
        let cost = lp::dot(&self.program.stage_cost(s, j), &x);
        Ok((x, cost))
    }

    fn lower_bound(&self, counts: &mut [u64]) -> Result<f64, EngineError> {
        let sub = approx::Subproblem::build(self.program, &self.approx, 0, 0, &self.program.x0);
        let solved = sub.solve()?;
        counts[0] += 1;
        if solved.solution.status != LpStatus::Optimal {
            return Err(EngineError::Subproblem {
                stage: 0,
                realization: 0,
                scenario: 0,
                status: solved.solution.status,
            });
        }
        Ok(solved.solution.objective_value)
    }

    /// Simulates the current policy along sampled scenarios.
    fn simulate_paths(&self, scenarios: &[Vec<usize>], counts: &mut [u64]) -> Result<Simulated, EngineError> {
        let t = self.program.num_stages();
        let indexed: Vec<(usize, &Vec<usize>)> = scenarios.iter().enumerate().collect();
        let paths = self.par_map(&indexed, |&(k, sc)| {
            let mut x_prev = self.program.x0.clone();
            let mut states = Vec::with_capacity(t);
            let mut cost = 0.0;
            for (s, &j) in sc.iter().enumerate() {
                let (x, c) = self.solve_stage(s, j, &x_prev, k)?;
                cost += c;
                states.push(x.clone());
                x_prev = x;
            }
            Ok::<_, EngineError>((states, cost))
        });
        let mut out = Simulated {
            states: vec![Vec::with_capacity(scenarios.len()); t],
            costs: Vec::with_capacity(scenarios.len()),
            weights: vec![1.0 / scenarios.len() as f64; scenarios.len()],
        };
        for p in paths {
            let (states, cost) = p?;
            for (s, x) in states.into_iter().enumerate() {
                out.states[s].push(x);
            }
            out.costs.push(cost);
        }
        for c in counts.iter_mut() {
            *c += scenarios.len() as u64;
        }
        Ok(out)
    }

    /// Simulates the current policy on every node of the scenario tree;
    /// costs and weights are per leaf.
    fn simulate_tree(&self, counts: &mut [u64]) -> Result<Simulated, EngineError> {
        let tree = self.tree.as_ref().expect("exhaustive sampling builds the tree");
        let t = self.program.num_stages();
        let mut x: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
        let mut acc: Vec<f64> = vec![0.0; tree.len()];
        let mut states = vec![Vec::new(); t];
        let mut start = 0;
        for s in 0..t {
            let level: Vec<usize> = (start..tree.len()).take_while(|&i| tree[i].stage == s).collect();
            start += level.len();
            let solved = self.par_map(&level, |&i| {
                let node = &tree[i];
                let x_prev = match node.parent {
                    Some(p) => &x[p],
                    None => &self.program.x0,
                };
                self.solve_stage(s, node.realization, x_prev, i)
            });
            for (&i, r) in level.iter().zip(solved) {
                let (xi, c) = r?;
                acc[i] = c + tree[i].parent.map_or(0.0, |p| acc[p]);
                states[s].push(xi.clone());
                x[i] = xi;
            }
            counts[s] += level.len() as u64;
        }
        let leaves: Vec<usize> = (0..tree.len()).filter(|&i| tree[i].stage + 1 == t).collect();
        Ok(Simulated {
            states,
            costs: leaves.iter().map(|&i| acc[i]).collect(),
            weights: leaves.iter().map(|&i| tree[i].probability).collect(),
        })
    }

    fn backward_solve(&self, k: usize, s: usize, j: usize, i: usize, trial: &[f64]) -> Result<BackwardSolve, EngineError> {
        let r = self.program.realization(s, j);
        let sub = approx::Subproblem::build(self.program, &self.approx, s, j, trial);
        let solved = sub.solve()?;
        let sol = solved.solution;
        if sol.status != LpStatus::Optimal {
            return Err(EngineError::Subproblem {
                stage: s,
                realization: j,
                scenario: i,
                status: sol.status,
            });
        }
        let lambda = &solved.coupling_duals;
        let theta = lp::dot(lambda, &r.rhs) + solved.future_intercept;
        let mut beta = vec![0.0; trial.len()];
        for (l, row) in lambda.iter().zip(&r.coupling) {
            for (b, a) in beta.iter_mut().zip(row) {
                *b -= l * a;
            }
        }
        let cut = Cut {
            theta,
            beta,
            birth_iteration: k,
        };
        let cut_value = cut.value(trial);
        if (cut_value - sol.objective_value).abs() > 1e-6 * sol.objective_value.abs().max(1.0) {
            return Err(EngineError::DualExtractionMismatch {
                stage: s,
                realization: j,
                cut_value,
                lp_value: sol.objective_value,
            });
        }
        Ok(BackwardSolve {
            cut,
            solution: sol,
            coupling_duals: solved.coupling_duals,
        })
    }

    fn backward(&mut self, k: usize, states: &[Vec<Vec<f64>>], counts: &mut [u64], observer: &mut dyn Observer) -> Result<(), EngineError> {
        let t = self.program.num_stages();
        for s in (1..t).rev() {
            let trials = &states[s - 1];
            let m = self.program.num_realizations(s);
            let jobs: Vec<(usize, usize)> = (0..trials.len()).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
            let solved = self.par_map(&jobs, |&(i, j)| self.backward_solve(k, s, j, i, &trials[i]));
            counts[s] += jobs.len() as u64;
            let mut solved = solved.into_iter();
            for trial in trials {
                let mut per_j = Vec::with_capacity(m);
                for j in 0..m {
                    let b = solved.next().expect("one solve per job")?;
                    observer.on_cut(&CutEvent {
                        iteration: k,
                        stage: s,
                        realization: j,
                        trial,
                        solution: &b.solution,
                        coupling_duals: &b.coupling_duals,
                        cut: &b.cut,
                    });
                    per_j.push(b.cut);
                }
                let blocks = self.approx.blocks_mut(s);
                match self.config.aggregation {
                    Aggregation::MultiCut => {
                        for (block, cut) in blocks.iter_mut().zip(per_j) {
                            block.pool.add_trial(trial).expect("trial has state dimension");
                            block.pool.add_cut(cut).expect("cut has state dimension");
                        }
                    }
                    Aggregation::SingleCut => {
                        let mut agg = Cut {
                            theta: 0.0,
                            beta: vec![0.0; trial.len()],
                            birth_iteration: k,
                        };
                        for (j, c) in per_j.iter().enumerate() {
                            let p = self.program.realization(s, j).probability;
                            agg.theta += p * c.theta;
                            for (a, b) in agg.beta.iter_mut().zip(&c.beta) {
                                *a += p * b;
                            }
                        }
                        blocks[0].pool.add_trial(trial).expect("trial has state dimension");
                        blocks[0].pool.add_cut(agg).expect("cut has state dimension");
                    }
                }
            }
        }
        Ok(())
    }

    fn iterate(&mut self, k: usize, observer: &mut dyn Observer) -> Result<LogRow, EngineError> {
        let t = self.program.num_stages();
        let mut counts = vec![0u64; t];
        let with_bound = k % self.config.upper_bound_every == 0;
        let (forward, bound) = match self.config.sampling {
            Sampling::Exhaustive => {
                let sim = self.simulate_tree(&mut counts)?;
                let mean: f64 = sim.costs.iter().zip(&sim.weights).map(|(c, w)| c * w).sum();
                let var: f64 = sim.costs.iter().zip(&sim.weights).map(|(c, w)| w * (c - mean).powi(2)).sum();
                let bound = with_bound.then_some((mean, var.sqrt(), mean));
                (sim, bound)
            }
            Sampling::Sampled { forward, evaluation } => {
                let draw = |id, n| {
                    let mut r = rng::iteration_stream(self.config.seed, id, k as u64);
                    (0..n)
                        .map(|_| sample_scenario(self.program, &mut r).realizations)
                        .collect::<Vec<_>>()
                };
                let sim = self.simulate_paths(&draw(rng::FORWARD_STREAM, forward), &mut counts)?;
                let bound = if with_bound {
                    let eval = self.simulate_paths(&draw(rng::BOUND_STREAM, evaluation), &mut counts)?;
                    let (mean, std) = stats::mean_std(&eval.costs);
                    Some((mean, std, upper_confidence(mean, std, evaluation, self.config.alpha)))
                } else {
                    None
                };
                (sim, bound)
            }
        };
        self.backward(k, &forward.states, &mut counts, observer)?;
        let z_inf = self.lower_bound(&mut counts)?;
        Ok(self.row(k, z_inf, bound, counts))
    }
}
