//! Random LP generator and an exhaustive basis-enumeration oracle that
//! shares no code with the simplex kernel.

use cutplane::lp::{LinearProgram, LpSolution, LpStatus, VarBound};
use rand::Rng;

pub fn random_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let rows = rng.random_range(1..=max_rows);
    let mut lp = LinearProgram::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
    let free: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
    for (j, f) in free.iter().enumerate() {
        if *f {
            lp.set_free(j);
        }
    }
    let feasible = rng.random_bool(0.9);
    let anchor: Vec<f64> = free
        .iter()
        .map(|f| {
            let v: f64 = rng.random_range(0.0..2.0);
            if *f { v - 1.0 } else { v }
        })
        .collect();
    // a budget row on the nonnegative columns and a box on every free
    // column keep each instance bounded
    let mut used = 0;
    let budget: Vec<f64> = free.iter().map(|f| if *f { 0.0 } else { 1.0 }).collect();
    lp.add_le(budget, 10.0);
    used += 1;
    for (j, f) in free.iter().enumerate() {
        if *f {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lp.add_le(e.clone(), 4.0);
            e[j] = -1.0;
            lp.add_le(e, 4.0);
            used += 2;
        }
    }
    while used < rows {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    (rng.random_range(-4.0f64..4.0) * 4.0).round() / 4.0
                }
            })
            .collect();
        let act: f64 = coeffs.iter().zip(&anchor).map(|(a, x)| a * x).sum();
        let shift = if feasible { 0.0 } else { rng.random_range(-3.0..3.0) };
        if rng.random_bool(0.4) {
            lp.add_eq(coeffs, act + shift);
        } else {
            lp.add_le(coeffs, act + rng.random_range(0.0..1.0) + shift.min(0.0) * 4.0);
        }
        used += 1;
    }
    lp
}

/// Minimum objective over all basic feasible solutions, or `None` when
/// no basis is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    // Standard form built independently: [x+ | x- (free only) | slacks].
    let n = lp.num_vars();
    let mut cols: Vec<(Vec<f64>, f64)> = Vec::new();
    let all: Vec<(&Vec<f64>, f64, bool)> = lp
        .eq_rows
        .iter()
        .map(|r| (&r.coeffs, r.rhs, false))
        .chain(lp.ineq_rows.iter().map(|r| (&r.coeffs, r.rhs, true)))
        .collect();
    // Drop equality rows that are combinations of earlier ones; an
    // inconsistent combination means the program is infeasible.
    let mut rows = Vec::new();
    let mut echelon: Vec<Vec<f64>> = Vec::new();
    for r in all {
        if r.2 {
            rows.push(r);
            continue;
        }
        let mut v: Vec<f64> = r.0.clone();
        v.push(r.1);
        for e in &echelon {
            let p = e.iter().position(|x| x.abs() > 1e-12).unwrap();
            let f = v[p] / e[p];
            for (a, b) in v.iter_mut().zip(e) {
                *a -= f * b;
            }
        }
        if v[..n].iter().all(|x| x.abs() < 1e-9) {
            if v[n].abs() > 1e-9 {
                return None;
            }
            continue;
        }
        echelon.push(v);
        rows.push(r);
    }
    let m = rows.len();
    for j in 0..n {
        let col: Vec<f64> = rows.iter().map(|r| r.0[j]).collect();
        cols.push((col.clone(), lp.objective[j]));
        if lp.bounds[j] == VarBound::Free {
            cols.push((col.iter().map(|v| -v).collect(), -lp.objective[j]));
        }
    }
    for (i, r) in rows.iter().enumerate() {
        if r.2 {
            let mut col = vec![0.0; m];
            col[i] = 1.0;
            cols.push((col, 0.0));
        }
    }
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let total = cols.len();
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    if m > total {
        return None;
    }
    loop {
        if let Some(xb) = solve_square(&subset, &cols, &b) {
            if xb.iter().all(|v| *v >= -1e-9) {
                let obj: f64 = subset.iter().zip(&xb).map(|(&j, v)| cols[j].1 * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < total - m + i {
                subset[i] += 1;
                for t in i + 1..m {
                    subset[t] = subset[t - 1] + 1;
                }
                break;
            }
        }
        if m == 0 {
            return best;
        }
    }
}

fn solve_square(subset: &[usize], cols: &[(Vec<f64>, f64)], b: &[f64]) -> Option<Vec<f64>> {
    let m = subset.len();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = subset.iter().map(|&j| cols[j].0[i]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=m {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// Checks the kernel's documented guarantees on one solve.
pub fn check_solution(lp: &LinearProgram, s: &LpSolution) -> Result<(), String> {
    if s.status != LpStatus::Optimal {
        return Ok(());
    }
    let scale = s.objective_value.abs().max(1.0);
    let viol = lp.max_violation(&s.primal);
    if viol > 1e-8 {
        return Err(format!("row residual {viol:e}"));
    }
    let dual = lp.dual_objective(&s.duals_eq, &s.duals_ineq);
    if (dual - s.objective_value).abs() > 1e-8 * scale {
        return Err(format!("duality gap {} vs {}", s.objective_value, dual));
    }
    if s.duals_ineq.iter().any(|y| *y > 1e-12) {
        return Err("positive multiplier on a <= row".into());
    }
    let rows = lp.eq_rows.len() + lp.ineq_rows.len();
    if s.basis.len() != rows {
        return Err(format!("basis size {} != {} rows", s.basis.len(), rows));
    }
    // at a vertex the nonzero standard-form components fit in the basis
    let nonzero = s.primal.iter().filter(|v| v.abs() > 1e-12).count()
        + lp
            .ineq_rows
            .iter()
            .filter(|r| (r.rhs - r.activity(&s.primal)).abs() > 1e-12)
            .count();
    if nonzero > rows {
        return Err(format!("{nonzero} nonzero components with {rows} rows"));
    }
    // reduced costs and complementary slackness
    for j in 0..lp.num_vars() {
        let mut d = lp.objective[j];
        for (r, y) in lp.eq_rows.iter().zip(&s.duals_eq) {
            d -= r.coeffs[j] * y;
        }
        for (r, y) in lp.ineq_rows.iter().zip(&s.duals_ineq) {
            d -= r.coeffs[j] * y;
        }
        let tol = 1e-8 * scale;
        match lp.bounds[j] {
            VarBound::Free if d.abs() > tol => return Err(format!("free reduced cost {d:e}")),
            VarBound::NonNegative if d < -tol => return Err(format!("negative reduced cost {d:e}")),
            VarBound::NonNegative if (d * s.primal[j]).abs() > tol => {
                return Err(format!("complementarity on column {j}"))
            }
            _ => {}
        }
    }
    for (r, y) in lp.ineq_rows.iter().zip(&s.duals_ineq) {
        let slack = r.rhs - r.activity(&s.primal);
        if (slack * y).abs() > 1e-8 * scale {
            return Err("complementarity on a <= row".into());
        }
    }
    Ok(())
}
