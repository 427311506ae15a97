//! Cuts and trial points of one approximated recourse function, with
//! incremental cut selection.
//!
//! Every trial point keeps the running maximum of the stored cuts at that
//! point and the cuts attaining it (within `epsilon0`). The selection rule
//! picks a subset of each argmax set; the union over trials is the set of
//! cuts used in subproblems. Nothing is ever deleted: only the mask moves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::dot;

pub const DEFAULT_EPSILON0: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("dimension mismatch: pool has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cut born at iteration {found} after a cut born at {last}")]
    BirthOrder { last: usize, found: usize },
    #[error("pool has no cuts")]
    EmptyPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub theta: f64,
    pub beta: Vec<f64>,
    pub birth_iteration: usize,
}

impl Cut {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.theta + dot(&self.beta, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: Vec<f64>,
    /// Running maximum of the cuts at `point`; `-inf` until a cut exists.
    #[serde(with = "neg_inf_as_null")]
    pub best_value: f64,
    /// Ascending cut indices attaining `best_value`.
    pub argmax: Vec<usize>,
}

/// How each trial's argmax set maps to selected cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Every cut is used.
    KeepAll,
    /// All cuts attaining the maximum at some trial point.
    Level1,
    /// Only the oldest cut attaining the maximum at each trial point.
    Lml1,
    /// The `H` oldest maximizers at each trial point.
    OldestPrefix(usize),
    /// The `H` newest maximizers at each trial point. The selected sets
    /// are not nested as ties accumulate, so convergence is not
    /// guaranteed; engines require an explicit opt-in.
    NewestPrefix(usize),
}

impl SelectionRule {
    /// Positions (0-based) inside an argmax set of size `m` that are
    /// selected.
    pub fn positions(&self, m: usize) -> std::ops::Range<usize> {
        match *self {
            SelectionRule::KeepAll | SelectionRule::Level1 => 0..m,
            SelectionRule::Lml1 => 0..m.min(1),
            SelectionRule::OldestPrefix(h) => 0..m.min(h),
            SelectionRule::NewestPrefix(h) => m.saturating_sub(h)..m,
        }
    }

    /// Whether selected sets only grow as argmax sets grow.
    pub fn is_nested(&self) -> bool {
        !matches!(self, SelectionRule::NewestPrefix(h) if *h > 0)
    }

    fn keeps_ties(&self) -> bool {
        !matches!(self, SelectionRule::Lml1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    SelectedOnly,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    dim: usize,
    rule: SelectionRule,
    epsilon0: f64,
    cuts: Vec<Cut>,
    trials: Vec<TrialRecord>,
    /// Number of trials whose selected part of the argmax set holds the cut.
    refs: Vec<usize>,
}

fn tolerance(eps0: f64, m: f64) -> f64 {
    eps0 * m.abs().max(1.0)
}

impl CutPool {
    pub fn new(dim: usize, rule: SelectionRule, epsilon0: f64) -> Self {
        Self {
            dim,
            rule,
            epsilon0,
            cuts: Vec::new(),
            trials: Vec::new(),
            refs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> SelectionRule {
        self.rule
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn is_selected(&self, cut: usize) -> bool {
        self.rule == SelectionRule::KeepAll || self.refs[cut] > 0
    }

    pub fn selected(&self) -> impl Iterator<Item = (usize, &Cut)> {
        self.cuts.iter().enumerate().filter(|(i, _)| self.is_selected(*i))
    }

    pub fn selected_mask(&self) -> Vec<bool> {
        (0..self.cuts.len()).map(|i| self.is_selected(i)).collect()
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), PoolError> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(PoolError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            })
        }
    }

    fn retain(&mut self, argmax: &[usize], delta: isize) {
        for &c in &argmax[self.rule.positions(argmax.len())] {
            self.refs[c] = self.refs[c].wrapping_add_signed(delta);
        }
    }

    /// Records a trial point and scans the stored cuts oldest first.
    pub fn add_trial(&mut self, point: &[f64]) -> Result<usize, PoolError> {
        self.check_dim(point)?;
        let mut best = f64::NEG_INFINITY;
        let mut argmax = Vec::new();
        for (i, c) in self.cuts.iter().enumerate() {
            let v = c.value(point);
            if argmax.is_empty() || v > best + tolerance(self.epsilon0, best) {
                best = v;
                argmax.clear();
                argmax.push(i);
            } else if self.rule.keeps_ties() && (v - best).abs() <= tolerance(self.epsilon0, best) {
                argmax.push(i);
            }
        }
        self.retain(&argmax, 1);
        self.trials.push(TrialRecord {
            point: point.to_vec(),
            best_value: best,
            argmax,
        });
        Ok(self.trials.len() - 1)
    }

    /// Appends a cut and updates every trial's maximum and argmax set.
    pub fn add_cut(&mut self, cut: Cut) -> Result<usize, PoolError> {
        self.check_dim(&cut.beta)?;
        if let Some(last) = self.cuts.last() {
            if cut.birth_iteration < last.birth_iteration {
                return Err(PoolError::BirthOrder {
                    last: last.birth_iteration,
                    found: cut.birth_iteration,
                });
            }
        }
        let k = self.cuts.len();
        self.refs.push(0);
        let keeps_ties = self.rule.keeps_ties();
        let eps0 = self.epsilon0;
        let mut trials = std::mem::take(&mut self.trials);
        for t in &mut trials {
            let v = cut.value(&t.point);
            let tol = tolerance(eps0, t.best_value);
            if t.argmax.is_empty() || v > t.best_value + tol {
                self.retain(&t.argmax, -1);
                t.best_value = v;
                t.argmax.clear();
                t.argmax.push(k);
                self.retain(&t.argmax, 1);
            } else if keeps_ties && (v - t.best_value).abs() <= tol {
                self.retain(&t.argmax, -1);
                t.argmax.push(k);
                self.retain(&t.argmax, 1);
            }
        }
        self.trials = trials;
        self.cuts.push(cut);
        Ok(k)
    }

    pub fn evaluate(&self, point: &[f64], mode: EvalMode) -> Result<f64, PoolError> {
        self.check_dim(point)?;
        let mut best = f64::NEG_INFINITY;
        let mut any = false;
        for (i, c) in self.cuts.iter().enumerate() {
            if mode == EvalMode::All || self.is_selected(i) {
                best = best.max(c.value(point));
                any = true;
            }
        }
        if any {
            Ok(best)
        } else {
            Err(PoolError::EmptyPool)
        }
    }

    /// `(cuts, selected, selected / cuts)`, with proportion 0 when empty.
    pub fn selection_stats(&self) -> (usize, usize, f64) {
        let n = self.cuts.len();
        let s = (0..n).filter(|&i| self.is_selected(i)).count();
        let p = if n == 0 { 0.0 } else { s as f64 / n as f64 };
        (n, s, p)
    }

    /// Mask rebuilt from scratch: argmax sets by a fresh scan of every
    /// trial, then the union of their selected parts.
    pub fn recompute_mask(&self) -> Vec<bool> {
        let mut fresh = CutPool::new(self.dim, self.rule, self.epsilon0);
        fresh.cuts = self.cuts.clone();
        fresh.refs = vec![0; self.cuts.len()];
        for t in &self.trials {
            fresh.add_trial(&t.point).expect("stored trial has pool dimension");
        }
        fresh.selected_mask()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}
