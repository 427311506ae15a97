//! Exact recourse values from subtree linear programs built here, not
//! through the library's extensive-form builder.

use cutplane::lp::{solve, LinearProgram, LpStatus};
use cutplane::program::{RowKind, StochasticProgram};

struct Node {
    stage: usize,
    realization: usize,
    parent: Option<usize>,
    weight: f64,
    offset: usize,
}

/// Optimal expected cost from stage `s` on, given realization `j` at
/// stage `s` and incoming state `x_prev`.
pub fn realization_value(p: &StochasticProgram, s: usize, j: usize, x_prev: &[f64]) -> f64 {
    let t = p.num_stages();
    let mut nodes = vec![Node {
        stage: s,
        realization: j,
        parent: None,
        weight: 1.0,
        offset: 0,
    }];
    let mut cols = p.stage_dim(s);
    let mut frontier = vec![0];
    for stage in s + 1..t {
        let mut next = Vec::new();
        for &parent in &frontier {
            for (k, r) in p.stages[stage].realizations.iter().enumerate() {
                nodes.push(Node {
                    stage,
                    realization: k,
                    parent: Some(parent),
                    weight: nodes[parent].weight * r.probability,
                    offset: cols,
                });
                cols += p.stage_dim(stage);
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    let mut obj = vec![0.0; cols];
    for n in &nodes {
        let r = &p.stages[n.stage].realizations[n.realization];
        for (i, c) in r.cost.iter().enumerate() {
            obj[n.offset + i] += n.weight * c;
        }
        if n.stage + 1 == t {
            if let Some(tc) = &p.terminal_cost {
                for (i, c) in tc.iter().enumerate() {
                    obj[n.offset + i] += n.weight * c;
                }
            }
        }
    }
    let mut lp = LinearProgram::new(obj);
    for n in &nodes {
        for &f in &p.stages[n.stage].free {
            lp.set_free(n.offset + f);
        }
    }
    for n in &nodes {
        let r = &p.stages[n.stage].realizations[n.realization];
        for row in 0..r.rhs.len() {
            let mut coeffs = vec![0.0; cols];
            for (i, a) in r.recourse[row].iter().enumerate() {
                coeffs[n.offset + i] += a;
            }
            let mut rhs = r.rhs[row];
            match n.parent {
                Some(pi) => {
                    for (i, b) in r.coupling[row].iter().enumerate() {
                        coeffs[nodes[pi].offset + i] += b;
                    }
                }
                None => {
                    rhs -= r.coupling[row].iter().zip(x_prev).map(|(b, x)| b * x).sum::<f64>();
                }
            }
            match r.row_kinds[row] {
                RowKind::Equality => lp.add_eq(coeffs, rhs),
                RowKind::LessEq => lp.add_le(coeffs, rhs),
            };
        }
    }
    let sol = solve(&lp).expect("oracle LP is well formed");
    assert_eq!(sol.status, LpStatus::Optimal, "oracle subtree at stage {s} not optimal");
    sol.objective_value
}

/// Probability-weighted recourse of stage `s` at `x_prev`.
pub fn expected_value(p: &StochasticProgram, s: usize, x_prev: &[f64]) -> f64 {
    p.stages[s]
        .realizations
        .iter()
        .enumerate()
        .map(|(j, r)| r.probability * realization_value(p, s, j, x_prev))
        .sum()
}

/// Optimal value of the whole program.
pub fn program_value(p: &StochasticProgram) -> f64 {
    realization_value(p, 0, 0, &p.x0)
}
