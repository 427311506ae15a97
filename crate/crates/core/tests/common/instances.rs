//! Small random programs with relatively complete recourse.
//!
//! Decision per stage: `[x(d), e(d), s(d)]`. Rows:
//!
//! ```text
//! x + e - s - G x_prev = b        (d equalities)
//! sum(x) - w sum(x_prev) <= C
//! x <= cap                         (d rows)
//! ```
//!
//! `e` and `s` absorb any mismatch, so every state is feasible; `x` is
//! boxed and `e`, `s` carry positive costs, so every subproblem is
//! bounded. Only `x` is carried to the next stage.

use cutplane::program::{AffineMinorant, RowKind, Stage, StageRealization, StochasticProgram};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CAP: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_stages: usize,
    pub max_realizations: usize,
    pub max_state: usize,
}

pub const SMALL: Shape = Shape {
    max_stages: 4,
    max_realizations: 3,
    max_state: 3,
};

fn realization<R: Rng>(rng: &mut R, d: usize, state: usize, first: bool) -> StageRealization {
    let dim = 3 * d;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut rhs = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..d {
        let mut row = vec![0.0; dim];
        row[i] = 1.0;
        row[d + i] = 1.0;
        row[2 * d + i] = -1.0;
        let mut brow = vec![0.0; state];
        for k in 0..d.min(state) {
            brow[k] = -(rng.random_range(-0.5f64..1.0) * 4.0).round() / 4.0;
        }
        if first {
            brow.iter_mut().for_each(|v| *v = -0.5);
        }
        a.push(row);
        b.push(brow);
        rhs.push((rng.random_range(0.0f64..3.0) * 4.0).round() / 4.0);
        kinds.push(RowKind::Equality);
    }
    let mut row = vec![0.0; dim];
    row[..d].iter_mut().for_each(|v| *v = 1.0);
    let mut brow = vec![0.0; state];
    let w = (rng.random_range(0.0f64..1.0) * 4.0).round() / 4.0;
    brow[..d.min(state)].iter_mut().for_each(|v| *v = -w);
    a.push(row);
    b.push(brow);
    rhs.push(rng.random_range(1.0..(CAP * d as f64)).round());
    kinds.push(RowKind::LessEq);
    for i in 0..d {
        let mut row = vec![0.0; dim];
        row[i] = 1.0;
        a.push(row);
        b.push(vec![0.0; state]);
        rhs.push(CAP);
        kinds.push(RowKind::LessEq);
    }
    let mut cost = Vec::with_capacity(dim);
    cost.extend((0..d).map(|_| (rng.random_range(-1.0f64..1.0) * 8.0).round() / 8.0));
    cost.extend((0..d).map(|_| (rng.random_range(0.0f64..1.0) * 8.0).round() / 8.0));
    cost.extend((0..d).map(|_| (rng.random_range(1.0f64..3.0) * 8.0).round() / 8.0));
    StageRealization {
        recourse: a,
        coupling: b,
        rhs,
        cost,
        probability: 0.0,
        row_kinds: kinds,
        floor: None,
    }
}

/// Largest possible gain from the negative `x` costs of one realization.
fn gain(r: &StageRealization, d: usize) -> f64 {
    r.cost[..d].iter().map(|c| (-c).max(0.0) * CAP).sum()
}

pub fn random_program(seed: u64, shape: Shape) -> StochasticProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rng.random_range(2..=shape.max_stages);
    let d = rng.random_range(1..=shape.max_state);
    let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0..=3) as f64).collect();
    let mut stages: Vec<Stage> = Vec::new();
    for s in 0..t {
        let m = if s == 0 { 1 } else { rng.random_range(1..=shape.max_realizations) };
        let state = if s == 0 { d } else { 3 * d };
        let mut weights: Vec<f64> = (0..m).map(|_| rng.random_range(1..=4) as f64).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let realizations = weights
            .iter()
            .map(|&p| StageRealization {
                probability: p,
                ..realization(&mut rng, d, state, s == 0)
            })
            .collect();
        stages.push(Stage {
            free: vec![],
            realizations,
        });
    }
    // constant floors: worst-case gains of this and every later stage
    let mut later = 0.0;
    for s in (1..t).rev() {
        let state = 3 * d;
        let worst = stages[s].realizations.iter().map(|r| gain(r, d)).fold(0.0, f64::max);
        for r in &mut stages[s].realizations {
            r.floor = Some(AffineMinorant::constant(-(gain(r, d) + later), state));
        }
        later += worst;
    }
    StochasticProgram {
        x0,
        stages,
        terminal_cost: None,
    }
}

/// Uniform random state for stage `s` inside the region the instance
/// family reaches.
pub fn random_state<R: Rng>(rng: &mut R, program: &StochasticProgram, s: usize) -> Vec<f64> {
    (0..program.state_dim(s)).map(|_| rng.random_range(0.0..CAP)).collect()
}
