//! Two-phase tableau simplex with Bland's rule.
//!
//! The tableau is rebuilt from the original data through an LU
//! factorization of the current basis every `REFACTOR_EVERY` pivots and
//! before optimality is declared, which bounds round-off drift. The
//! reported point and multipliers are always recomputed from the final
//! basis matrix rather than read off the tableau.

use nalgebra::{DMatrix, DVector};

use super::{LpError, LpStatus, StandardForm, TOLERANCE};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

pub(super) struct Outcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub basis: Vec<usize>,
    pub pivots: usize,
}

/// Problem data after row flips (`b >= 0`) and artificial columns.
struct Extended<'a> {
    sf: &'a StandardForm,
    sign: Vec<f64>,
    /// `artificial[k]` is the row of artificial column `sf.cols + k`.
    artificial: Vec<usize>,
}

impl Extended<'_> {
    fn cols(&self) -> usize {
        self.sf.cols + self.artificial.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        if j < self.sf.cols {
            self.sign[i] * self.sf.at(i, j)
        } else if self.artificial[j - self.sf.cols] == i {
            1.0
        } else {
            0.0
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.sign[i] * self.sf.b[i]
    }

    fn basis_matrix(&self, basis: &[usize]) -> DMatrix<f64> {
        let m = self.sf.rows;
        DMatrix::from_fn(m, m, |i, k| self.entry(i, basis[k]))
    }
}

struct Tableau {
    m: usize,
    width: usize,
    /// `m` rows of `cols` coefficients followed by the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs of every column.
    d: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.t[r * w + q];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Recomputes the tableau and reduced costs from the original data.
    fn refactor(&mut self, ext: &Extended, cost: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let cols = self.width - 1;
        self.since_refactor = 0;
        if m == 0 {
            self.d = cost.to_vec();
            return Ok(());
        }
        let inv = ext
            .basis_matrix(&self.basis)
            .try_inverse()
            .ok_or_else(|| LpError::NonFinite("singular basis".into()))?;
        let mut t = vec![0.0; m * self.width];
        for j in 0..=cols {
            let col: Vec<f64> = (0..m)
                .map(|i| if j == cols { ext.rhs(i) } else { ext.entry(i, j) })
                .collect();
            if col.iter().all(|v| *v == 0.0) {
                continue;
            }
            for i in 0..m {
                let mut s = 0.0;
                for (k, v) in col.iter().enumerate() {
                    s += inv[(i, k)] * v;
                }
                t[i * self.width + j] = s;
            }
        }
        for (i, &q) in self.basis.iter().enumerate() {
            for r in 0..m {
                t[r * self.width + q] = if r == i { 1.0 } else { 0.0 };
            }
        }
        self.t = t;
        self.reset_costs(cost);
        Ok(())
    }

    fn reset_costs(&mut self, cost: &[f64]) {
        let cols = self.width - 1;
        let mut d = cost.to_vec();
        for (i, &q) in self.basis.iter().enumerate() {
            let cb = cost[q];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate().take(cols) {
                    *dj -= cb * self.at(i, j);
                }
            }
        }
        for &q in &self.basis {
            d[q] = 0.0;
        }
        self.d = d;
    }

    /// Bland's leaving row: minimum ratio, ties broken by the smallest
    /// basic column index.
    fn leaving_row(&self, q: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((r, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                    if (tie && self.basis[i] < self.basis[r]) || (!tie && ratio < br) {
                        Some((i, ratio))
                    } else {
                        Some((r, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Runs pivots until the reduced costs of all eligible columns are
    /// nonnegative. Returns `false` on an unbounded ray.
    fn optimize(
        &mut self,
        ext: &Extended,
        cost: &[f64],
        eligible: usize,
        limit: usize,
    ) -> Result<bool, LpError> {
        loop {
            if self.pivots >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor(ext, cost)?;
            }
            let entering = (0..eligible).find(|&j| self.d[j] < -COST_TOL);
            let Some(q) = entering else {
                if self.since_refactor == 0 {
                    return Ok(true);
                }
                // confirm on fresh data before declaring optimality
                self.refactor(ext, cost)?;
                if (0..eligible).all(|j| self.d[j] >= -COST_TOL) {
                    return Ok(true);
                }
                continue;
            };
            match self.leaving_row(q) {
                Some(r) => self.pivot(r, q),
                None => return Ok(false),
            }
        }
    }
}

pub(super) fn run(sf: &StandardForm) -> Result<Outcome, LpError> {
    let m = sf.rows;
    let n = sf.cols;
    let limit = 50_000 + 200 * (m + n);
    let sign: Vec<f64> = sf
        .b
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();

    // Unit columns serve as the starting basis wherever they exist.
    let mut basis = vec![usize::MAX; m];
    for j in 0..n {
        let mut hit = None;
        let mut unit = true;
        for i in 0..m {
            let v = sign[i] * sf.at(i, j);
            if v != 0.0 {
                if v == 1.0 && hit.is_none() {
                    hit = Some(i);
                } else {
                    unit = false;
                    break;
                }
            }
        }
        if let (true, Some(i)) = (unit, hit) {
            if basis[i] == usize::MAX {
                basis[i] = j;
            }
        }
    }
    let mut artificial = Vec::new();
    for (i, slot) in basis.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = n + artificial.len();
            artificial.push(i);
        }
    }
    let ext = Extended {
        sf,
        sign,
        artificial,
    };
    let cols = ext.cols();
    let width = cols + 1;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        for j in 0..cols {
            t[i * width + j] = ext.entry(i, j);
        }
        t[i * width + cols] = ext.rhs(i);
    }
    let mut tab = Tableau {
        m,
        width,
        t,
        basis,
        d: Vec::new(),
        pivots: 0,
        since_refactor: 0,
    };

    if !ext.artificial.is_empty() {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(n) {
            *c = 1.0;
        }
        tab.reset_costs(&phase1);
        tab.optimize(&ext, &phase1, cols, limit)?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &q)| q >= n)
            .map(|(i, _)| tab.rhs(i))
            .sum();
        let scale = sf.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if infeasibility > TOLERANCE * scale {
            return Ok(Outcome {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                y: Vec::new(),
                basis: tab.basis,
                pivots: tab.pivots,
            });
        }
        // Drive zero-level artificials out of the basis; rows where that
        // is impossible are redundant and keep their artificial at zero.
        for i in 0..m {
            if tab.basis[i] < n {
                continue;
            }
            if let Some(q) = (0..n).find(|&j| tab.at(i, j).abs() > PIVOT_TOL) {
                tab.pivot(i, q);
            }
        }
    }

    let mut phase2 = sf.c.clone();
    phase2.resize(cols, 0.0);
    tab.refactor(&ext, &phase2)?;
    if !tab.optimize(&ext, &phase2, n, limit)? {
        return Ok(Outcome {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            y: Vec::new(),
            basis: tab.basis,
            pivots: tab.pivots,
        });
    }

    let (x, y) = extract(&ext, &tab.basis, &phase2)?;
    Ok(Outcome {
        status: LpStatus::Optimal,
        x,
        y,
        basis: tab.basis,
        pivots: tab.pivots,
    })
}

/// Primal point and row multipliers of a basis, solved from the original
/// (unflipped) data.
fn extract(ext: &Extended, basis: &[usize], cost: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LpError> {
    let m = ext.sf.rows;
    let n = ext.sf.cols;
    let mut x = vec![0.0; n];
    if m == 0 {
        return Ok((x, Vec::new()));
    }
    let bm = ext.basis_matrix(basis);
    let rhs = DVector::from_fn(m, |i, _| ext.rhs(i));
    let lu = bm.clone().lu();
    let xb = lu
        .solve(&rhs)
        .ok_or_else(|| LpError::NonFinite("singular final basis".into()))?;
    let cb = DVector::from_fn(m, |k, _| cost[basis[k]]);
    let yflip = bm
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or_else(|| LpError::NonFinite("singular final basis".into()))?;
    for (k, &q) in basis.iter().enumerate() {
        if q < n {
            let v = xb[k];
            x[q] = if v < 0.0 && v > -TOLERANCE { 0.0 } else { v };
        }
    }
    let y = (0..m).map(|i| ext.sign[i] * yflip[i]).collect();
    Ok((x, y))
}
