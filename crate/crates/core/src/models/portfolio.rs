//! Portfolio selection with proportional transaction costs.
//!
//! Stage decision: `[x(1..n), cash, y(1..n), z(1..n)]` with holdings `x`,
//! cash, amounts sold `y` and bought `z`. Rows, in order:
//!
//! ```text
//! x(i) + y(i) - z(i) - r(i) x_prev(i)                       = 0   (i = 1..n)
//! cash - sum((1 - eta) y - (1 + nu) z) - r(n+1) x_prev(cash) = 0
//! x(i) - u(i) sum_k r(k) x_prev(k)                          <= 0  (i = 1..n)
//! ```
//!
//! where `r` are gross returns. The objective is the negated expected
//! terminal wealth, so every cost is zero except the terminal one.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::program::{AffineMinorant, RowKind, Stage, StageRealization, StochasticProgram};
use crate::rng;

pub const RISK_FREE_RETURN: f64 = 1.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub assets: usize,
    /// Position limits as fractions of wealth, one per risky asset.
    pub u: Vec<f64>,
    /// Selling costs per stage and risky asset.
    pub eta: Vec<Vec<f64>>,
    /// Buying costs per stage and risky asset.
    pub nu: Vec<Vec<f64>>,
    /// Initial holdings, risky assets then cash.
    pub x0: Vec<f64>,
    /// Gross returns per stage, realization and asset (cash last).
    pub returns: Vec<Vec<Vec<f64>>>,
    pub probabilities: Vec<Vec<f64>>,
    /// Expected gross returns after the last stage.
    pub terminal_mean: Vec<f64>,
}

impl PortfolioSpec {
    pub fn stages(&self) -> usize {
        self.returns.len()
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let n = self.assets;
        let t = self.stages();
        let bad = |m: String| Err(ModelError::SpecInvalid(m));
        if n == 0 || t == 0 {
            return bad("need at least one asset and one stage".into());
        }
        if self.u.len() != n || self.u.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return bad("u must have one entry in (0, 1] per risky asset".into());
        }
        for (name, costs) in [("eta", &self.eta), ("nu", &self.nu)] {
            if costs.len() != t || costs.iter().any(|c| c.len() != n || c.iter().any(|&v| !(v > 0.0))) {
                return bad(format!("{name} must hold positive costs per stage and asset"));
            }
        }
        if self.x0.len() != n + 1 || self.x0.iter().any(|&v| !(v >= 0.0)) {
            return bad("x0 must be nonnegative with n + 1 entries".into());
        }
        if self.returns[0].len() != 1 {
            return bad("first-stage returns must be deterministic".into());
        }
        if self.probabilities.len() != t {
            return bad("one probability vector per stage".into());
        }
        for (s, (r, p)) in self.returns.iter().zip(&self.probabilities).enumerate() {
            if r.len() != p.len() || r.iter().any(|v| v.len() != n + 1 || v.iter().any(|&x| !(x > 0.0))) {
                return bad(format!("stage {}: returns must be positive with n + 1 entries", s + 1));
            }
        }
        if self.terminal_mean.len() != n + 1 || self.terminal_mean.iter().any(|&v| !(v > 0.0)) {
            return bad("terminal mean must be positive with n + 1 entries".into());
        }
        Ok(())
    }

    /// Bound on wealth growth after stage `s` (0-based) up to valuation.
    fn growth_after(&self, s: usize) -> f64 {
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        let mut g = max(&self.terminal_mean);
        for stage in &self.returns[s + 1..] {
            g *= stage.iter().map(|r| max(r)).fold(0.0, f64::max);
        }
        g
    }
}

pub fn build_portfolio(spec: &PortfolioSpec) -> Result<StochasticProgram, ModelError> {
    spec.check()?;
    let n = spec.assets;
    let dim = 3 * n + 1;
    let cash = n;
    let stages = (0..spec.stages())
        .map(|s| {
            let state = if s == 0 { n + 1 } else { dim };
            let g = spec.growth_after(s);
            let realizations = spec.returns[s]
                .iter()
                .zip(&spec.probabilities[s])
                .map(|(r, &p)| {
                    let mut a = Vec::new();
                    let mut b = Vec::new();
                    let mut kinds = Vec::new();
                    for i in 0..n {
                        let mut row = vec![0.0; dim];
                        row[i] = 1.0;
                        row[n + 1 + i] = 1.0;
                        row[2 * n + 1 + i] = -1.0;
                        let mut brow = vec![0.0; state];
                        brow[i] = -r[i];
                        a.push(row);
                        b.push(brow);
                        kinds.push(RowKind::Equality);
                    }
                    let mut row = vec![0.0; dim];
                    row[cash] = 1.0;
                    for i in 0..n {
                        row[n + 1 + i] = -(1.0 - spec.eta[s][i]);
                        row[2 * n + 1 + i] = 1.0 + spec.nu[s][i];
                    }
                    let mut brow = vec![0.0; state];
                    brow[cash] = -r[cash];
                    a.push(row);
                    b.push(brow);
                    kinds.push(RowKind::Equality);
                    for i in 0..n {
                        let mut row = vec![0.0; dim];
                        row[i] = 1.0;
                        let mut brow = vec![0.0; state];
                        for k in 0..=n {
                            brow[k] = -spec.u[i] * r[k];
                        }
                        a.push(row);
                        b.push(brow);
                        kinds.push(RowKind::LessEq);
                    }
                    let mut beta = vec![0.0; state];
                    for k in 0..=n {
                        beta[k] = -g * r[k];
                    }
                    StageRealization {
                        recourse: a,
                        coupling: b,
                        rhs: vec![0.0; 2 * n + 1],
                        cost: vec![0.0; dim],
                        probability: p,
                        row_kinds: kinds,
                        floor: Some(AffineMinorant { theta: 0.0, beta }),
                    }
                })
                .collect();
            Stage {
                free: vec![],
                realizations,
            }
        })
        .collect();
    let mut terminal = vec![0.0; dim];
    for (k, m) in spec.terminal_mean.iter().enumerate() {
        terminal[k] = -m;
    }
    Ok(StochasticProgram {
        x0: spec.x0.clone(),
        stages,
        terminal_cost: Some(terminal),
    })
}

/// Cut gradient of realization `j` at stage `s` from the coupling-row
/// multipliers (model row order): `(lambda - <u, mu>) * r` on holdings and
/// cash, zero on trades, where `mu` are the nonnegative multipliers of
/// the position limits. The intercept is always zero.
pub fn portfolio_cut_closedform(spec: &PortfolioSpec, s: usize, j: usize, coupling_duals: &[f64]) -> (f64, Vec<f64>) {
    let n = spec.assets;
    let r = &spec.returns[s][j];
    let dim = if s == 0 { n + 1 } else { 3 * n + 1 };
    let lambda = &coupling_duals[..=n];
    let limit: f64 = (0..n).map(|i| spec.u[i] * -coupling_duals[n + 1 + i]).sum();
    let mut beta = vec![0.0; dim];
    for k in 0..=n {
        beta[k] = (lambda[k] - limit) * r[k];
    }
    (0.0, beta)
}

/// Synthetic instance: log-normal daily risky returns, a 0.1% risk-free
/// return, `u = 1`, `x0` uniform on `[0, 10]`, and transaction costs
/// `0.08 + 0.06 cos(2 pi U / T)` with `U` uniform on `1..=T`, drawn per
/// stage and asset (buying equals selling).
pub fn generate_portfolio(stages: usize, realizations: usize, assets: usize, seed: u64) -> Result<PortfolioSpec, ModelError> {
    if stages == 0 || realizations == 0 || assets == 0 {
        return Err(ModelError::SpecInvalid("stages, realizations and assets must be positive".into()));
    }
    let mut rng = rng::stream(seed, rng::GENERATOR_STREAM);
    let laws: Vec<LogNormal<f64>> = (0..assets)
        .map(|_| {
            let drift = rng.random_range(0.0001..0.0005);
            let vol = rng.random_range(0.005..0.015);
            LogNormal::new(drift - vol * vol / 2.0, vol).expect("positive volatility")
        })
        .collect();
    let x0 = (0..=assets).map(|_| rng.random_range(0.0..=10.0)).collect();
    let mut eta = Vec::with_capacity(stages);
    for _ in 0..stages {
        eta.push(
            (0..assets)
                .map(|_| {
                    let u = rng.random_range(1..=stages) as f64;
                    0.08 + 0.06 * (2.0 * std::f64::consts::PI * u / stages as f64).cos()
                })
                .collect::<Vec<f64>>(),
        );
    }
    let mut returns = Vec::with_capacity(stages);
    let mut probabilities = Vec::with_capacity(stages);
    for s in 0..stages {
        let m = if s == 0 { 1 } else { realizations };
        returns.push(
            (0..m)
                .map(|_| {
                    let mut r: Vec<f64> = laws.iter().map(|l| l.sample(&mut rng)).collect();
                    r.push(RISK_FREE_RETURN);
                    r
                })
                .collect::<Vec<_>>(),
        );
        probabilities.push(vec![1.0 / m as f64; m]);
    }
    let last: &Vec<Vec<f64>> = returns.last().expect("at least one stage");
    let terminal_mean = (0..=assets)
        .map(|k| last.iter().map(|r| r[k]).sum::<f64>() / last.len() as f64)
        .collect();
    Ok(PortfolioSpec {
        assets,
        u: vec![1.0; assets],
        nu: eta.clone(),
        eta,
        x0,
        returns,
        probabilities,
        terminal_mean,
    })
}
