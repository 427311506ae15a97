use super::{LinearProgram, VarBound};

/// `min c'x  s.t.  A x = b, x >= 0`, with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardForm {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Single(usize),
    Split { plus: usize, minus: usize },
}

/// Maps standard-form primal/dual vectors back to the original program.
///
/// Rows keep their order: equality rows first, then one row per
/// inequality with its own slack column, so row duals carry over
/// unchanged and the `<=` multipliers come out nonpositive.
#[derive(Debug, Clone, PartialEq)]
pub struct BackMap {
    columns: Vec<Column>,
    n_eq: usize,
    n_ineq: usize,
    slack_start: usize,
}

impl BackMap {
    pub fn primal(&self, x: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match *c {
                Column::Single(p) => x[p],
                Column::Split { plus, minus } => x[plus] - x[minus],
            })
            .collect()
    }

    pub fn duals(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            y[..self.n_eq].to_vec(),
            y[self.n_eq..self.n_eq + self.n_ineq].to_vec(),
        )
    }

    /// Image of an original point in standard-form coordinates. Slacks
    /// are `h - Gx`, negative when `x` violates a row.
    pub fn lift(&self, lp: &LinearProgram, x: &[f64]) -> Vec<f64> {
        let cols = self.slack_start + self.n_ineq;
        let mut out = vec![0.0; cols];
        for (c, &v) in self.columns.iter().zip(x) {
            match *c {
                Column::Single(p) => out[p] = v,
                Column::Split { plus, minus } => {
                    if v >= 0.0 {
                        out[plus] = v;
                    } else {
                        out[minus] = -v;
                    }
                }
            }
        }
        for (k, row) in lp.ineq_rows.iter().enumerate() {
            out[self.slack_start + k] = row.rhs - row.activity(x);
        }
        out
    }
}

/// Splits free variables into nonnegative pairs and adds one slack per
/// inequality row.
pub fn to_standard_form(lp: &LinearProgram) -> (StandardForm, BackMap) {
    let mut columns = Vec::with_capacity(lp.num_vars());
    let mut next = 0;
    for b in &lp.bounds {
        match b {
            VarBound::NonNegative => {
                columns.push(Column::Single(next));
                next += 1;
            }
            VarBound::Free => {
                columns.push(Column::Split {
                    plus: next,
                    minus: next + 1,
                });
                next += 2;
            }
        }
    }
    let slack_start = next;
    let n_eq = lp.eq_rows.len();
    let n_ineq = lp.ineq_rows.len();
    let cols = slack_start + n_ineq;
    let rows = n_eq + n_ineq;

    let mut c = vec![0.0; cols];
    for (col, &cost) in columns.iter().zip(&lp.objective) {
        match *col {
            Column::Single(p) => c[p] = cost,
            Column::Split { plus, minus } => {
                c[plus] = cost;
                c[minus] = -cost;
            }
        }
    }

    let mut a = vec![0.0; rows * cols];
    let mut b = Vec::with_capacity(rows);
    let all_rows = lp.eq_rows.iter().chain(&lp.ineq_rows);
    for (i, row) in all_rows.enumerate() {
        let line = &mut a[i * cols..(i + 1) * cols];
        for (col, &v) in columns.iter().zip(&row.coeffs) {
            match *col {
                Column::Single(p) => line[p] = v,
                Column::Split { plus, minus } => {
                    line[plus] = v;
                    line[minus] = -v;
                }
            }
        }
        if i >= n_eq {
            line[slack_start + i - n_eq] = 1.0;
        }
        b.push(row.rhs);
    }

    (
        StandardForm { rows, cols, a, b, c },
        BackMap {
            columns,
            n_eq,
            n_ineq,
            slack_start,
        },
    )
}
