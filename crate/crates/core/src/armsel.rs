//! Arm selection: the optimistic objective, its gradient, the vertex walk and
//! the exhaustive enumeration oracle.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::graph::DictionaryBasis;
use crate::learner::{confidence_radius, HyperParams, LearnerState, RadiusMode};
use crate::process::{unit_features, ActionSignal, KernelCoefficients, Mask};

/// Default cap on the number of supports `exact_select` may evaluate.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 2_000_000;

/// Convex objective `J(h) = sum_n h_n l_n + c |sum_n h_n b_n|`.
///
/// For the optimistic estimate, `l_n = a_n . alpha_hat` and `b_n = F a_n`,
/// where `a_n` is the aggregated feature of a unit source at node `n` and
/// `F^T F = V^{-1}`. The bonus term is then `c sqrt(x^T V^{-1} x)` with
/// `x = sum_n h_n a_n`.
#[derive(Debug, Clone)]
pub struct UcbObjective {
    linear: DVector<f64>,
    bonus: DMatrix<f64>,
    bonus_norms: DVector<f64>,
    c: f64,
}

impl UcbObjective {
    /// Builds the objective from per-node features (N x K), an estimate and a
    /// learner state supplying `V`.
    pub fn new(
        unit_features: &DMatrix<f64>,
        alpha_hat: &KernelCoefficients,
        c: f64,
        state: &LearnerState,
    ) -> Result<Self> {
        let factor = state.inverse_factor()?;
        Self::with_factor(unit_features, alpha_hat, c, &factor)
    }

    /// Like [`Self::new`] with an explicit factor `F` of `V^{-1}`.
    pub fn with_factor(
        unit_features: &DMatrix<f64>,
        alpha_hat: &KernelCoefficients,
        c: f64,
        factor: &DMatrix<f64>,
    ) -> Result<Self> {
        check_dim("estimate length", unit_features.ncols(), alpha_hat.len())?;
        check_dim("factor columns", unit_features.ncols(), factor.ncols())?;
        let linear = unit_features * alpha_hat.as_vector();
        let bonus = factor * unit_features.transpose();
        Self::from_parts(linear, bonus, c)
    }

    /// Objective with no exploration bonus.
    pub fn linear(weights: DVector<f64>) -> Result<Self> {
        let n = weights.len();
        Self::from_parts(weights, DMatrix::zeros(0, n), 0.0)
    }

    /// Raw constructor: per-node linear weights and bonus vectors as columns.
    pub fn from_parts(linear: DVector<f64>, bonus: DMatrix<f64>, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("c", format!("{c} must be non-negative")));
        }
        if linear.is_empty() {
            return Err(invalid("n", "objective needs at least one node"));
        }
        check_dim("bonus columns", linear.len(), bonus.ncols())?;
        if linear.iter().chain(bonus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("non-finite objective data".into()));
        }
        let bonus_norms = DVector::from_iterator(bonus.ncols(), bonus.column_iter().map(|c| c.norm()));
        Ok(Self {
            linear,
            bonus,
            bonus_norms,
            c,
        })
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn linear_weights(&self) -> &DVector<f64> {
        &self.linear
    }

    /// `(linear term, bonus term)` at `h`.
    pub fn terms(&self, h: &ActionSignal) -> Result<(f64, f64)> {
        check_dim("action", self.n(), h.n())?;
        let lin = self.linear.dot(h.values());
        let bonus = if self.c == 0.0 {
            0.0
        } else {
            self.c * (&self.bonus * h.values()).norm()
        };
        Ok((lin, bonus))
    }

    /// `J(h)`.
    pub fn value(&self, h: &ActionSignal) -> Result<f64> {
        self.terms(h).map(|(l, b)| l + b)
    }

    /// `(linear term, bonus term)` of the binary action on `support`.
    pub fn support_terms(&self, support: &[usize]) -> (f64, f64) {
        let lin: f64 = support.iter().map(|&i| self.linear[i]).sum();
        if self.c == 0.0 {
            return (lin, 0.0);
        }
        let mut u = DVector::zeros(self.bonus.nrows());
        for &i in support {
            u += self.bonus.column(i);
        }
        (lin, self.c * u.norm())
    }

    pub fn support_value(&self, support: &[usize]) -> f64 {
        let (l, b) = self.support_terms(support);
        l + b
    }

    /// `dJ/dh_n`. Where the bonus vector sum vanishes the bonus part is the
    /// one-sided directional derivative `c |b_n|`.
    pub fn partial_derivative(&self, h: &ActionSignal, n: usize) -> Result<f64> {
        if n >= self.n() {
            return Err(Error::IndexOutOfRange { index: n, len: self.n() });
        }
        Ok(self.gradient(h)?[n])
    }

    /// All partial derivatives at `h`.
    pub fn gradient(&self, h: &ActionSignal) -> Result<DVector<f64>> {
        check_dim("action", self.n(), h.n())?;
        let u = &self.bonus * h.values();
        Ok(self.gradient_at(&u))
    }

    fn gradient_at(&self, u: &DVector<f64>) -> DVector<f64> {
        if self.c == 0.0 {
            return self.linear.clone();
        }
        let norm = u.norm();
        if norm > 0.0 {
            &self.linear + self.bonus.tr_mul(u) * (self.c / norm)
        } else {
            &self.linear + &self.bonus_norms * self.c
        }
    }
}

/// Settings for the vertex walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmSelectConfig {
    pub t0: usize,
    pub max_iter: usize,
}

impl ArmSelectConfig {
    pub fn new(t0: usize, max_iter: usize) -> Self {
        Self { t0, max_iter }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.t0 == 0 || self.t0 > n {
            return Err(invalid("t0", format!("{} must lie in [1, {n}]", self.t0)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// A selected binary action and how it was found.
#[derive(Debug, Clone)]
pub struct Selection {
    pub action: ActionSignal,
    pub support: Vec<usize>,
    pub value: f64,
    pub linear_term: f64,
    pub bonus_term: f64,
    /// Swap evaluations performed (walk) or supports evaluated (enumeration).
    pub iterations: usize,
    /// Objective at every accepted vertex of the walk, starting point first.
    pub path: Vec<f64>,
}

impl Selection {
    fn new(obj: &UcbObjective, mut support: Vec<usize>, iterations: usize, path: Vec<f64>) -> Result<Self> {
        support.sort_unstable();
        let (linear_term, bonus_term) = obj.support_terms(&support);
        Ok(Self {
            action: ActionSignal::binary(obj.n(), &support)?,
            support,
            value: linear_term + bonus_term,
            linear_term,
            bonus_term,
            iterations,
            path,
        })
    }
}

fn bonus_sum(obj: &UcbObjective, support: &[usize]) -> DVector<f64> {
    let mut u = DVector::zeros(obj.bonus.nrows());
    for &i in support {
        u += obj.bonus.column(i);
    }
    u
}

/// Local search over size-`T0` supports.
///
/// Starts from the `T0` nodes with the largest derivative at their own unit
/// action, then repeatedly swaps the non-basic node with the largest
/// derivative in for the basic node with the smallest derivative, both
/// evaluated at the current vertex. A swap is kept only if it strictly
/// increases `J`. Ties go to the lowest node index.
pub fn grab_arm_light(obj: &UcbObjective, cfg: &ArmSelectConfig) -> Result<Selection> {
    let n = obj.n();
    cfg.validate(n)?;
    // At the unit vector e_n, the bonus derivative is c |b_n|.
    let start_scores: Vec<f64> = (0..n)
        .map(|i| obj.linear[i] + obj.c * obj.bonus_norms[i])
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| start_scores[b].total_cmp(&start_scores[a]).then(a.cmp(&b)));
    walk_from(obj, cfg, order[..cfg.t0].to_vec())
}

/// The walk of [`grab_arm_light`] started from a given support.
pub fn grab_arm_light_from(obj: &UcbObjective, cfg: &ArmSelectConfig, start: &[usize]) -> Result<Selection> {
    let n = obj.n();
    cfg.validate(n)?;
    check_dim("start support size", cfg.t0, start.len())?;
    // Validates range and distinctness.
    ActionSignal::binary(n, start)?;
    walk_from(obj, cfg, start.to_vec())
}

fn walk_from(obj: &UcbObjective, cfg: &ArmSelectConfig, mut support: Vec<usize>) -> Result<Selection> {
    let n = obj.n();
    support.sort_unstable();
    let mut basic = vec![false; n];
    for &i in &support {
        basic[i] = true;
    }
    let mut current = obj.support_value(&support);
    let mut path = vec![current];
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(support.clone());
    let mut iterations = 0;

    if cfg.t0 < n {
        for _ in 0..cfg.max_iter {
            iterations += 1;
            let u = bonus_sum(obj, &support);
            let grad = obj.gradient_at(&u);
            let mut enter = usize::MAX;
            let mut leave = usize::MAX;
            for i in 0..n {
                if basic[i] {
                    if leave == usize::MAX || grad[i] < grad[leave] {
                        leave = i;
                    }
                } else if enter == usize::MAX || grad[i] > grad[enter] {
                    enter = i;
                }
            }
            let mut candidate: Vec<usize> =
                support.iter().copied().filter(|&i| i != leave).chain([enter]).collect();
            candidate.sort_unstable();
            let value = obj.support_value(&candidate);
            if value <= current || visited.contains(&candidate) {
                break;
            }
            basic[leave] = false;
            basic[enter] = true;
            visited.insert(candidate.clone());
            support = candidate;
            current = value;
            path.push(value);
        }
    }
    Selection::new(obj, support, iterations, path)
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i + 1) as u128,
            None => return u128::MAX,
        }
    }
    acc
}

/// Calls `visit` on every size-`k` subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn enumerate_sizes(obj: &UcbObjective, sizes: &[usize], budget: u128, t0: usize) -> Result<Selection> {
    let n = obj.n();
    let count = sizes
        .iter()
        .fold(0u128, |acc, &k| acc.saturating_add(binomial(n, k)));
    if count > budget {
        return Err(Error::BudgetExceeded { n, t0, count, budget });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0usize;
    let mut u = DVector::zeros(obj.bonus.nrows());
    for &k in sizes {
        for_each_combination(n, k, |s| {
            evaluated += 1;
            let mut lin = 0.0;
            u.fill(0.0);
            for &i in s {
                lin += obj.linear[i];
                if obj.c != 0.0 {
                    u += obj.bonus.column(i);
                }
            }
            let v = lin + obj.c * u.norm();
            // Strict comparison keeps the earliest support on ties.
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, s.to_vec()));
            }
        });
    }
    let (_, support) = best.ok_or_else(|| invalid("t0", "no feasible support"))?;
    Selection::new(obj, support, evaluated, Vec::new())
}

/// Exhaustive maximization of `J` over binary actions with exactly `T0`
/// sources. Ties go to the lexicographically smallest support.
pub fn exact_select(obj: &UcbObjective, t0: usize, budget: u128) -> Result<Selection> {
    if t0 == 0 || t0 > obj.n() {
        return Err(invalid("t0", format!("{t0} must lie in [1, {}]", obj.n())));
    }
    enumerate_sizes(obj, &[t0], budget, t0)
}

/// Exhaustive maximization over supports of size at most `T0` (including the
/// empty action). Ties go to the smaller support, then lexicographic order.
pub fn exact_select_at_most(obj: &UcbObjective, t0: usize, budget: u128) -> Result<Selection> {
    if t0 > obj.n() {
        return Err(invalid("t0", format!("{t0} exceeds {}", obj.n())));
    }
    let sizes: Vec<usize> = (0..=t0).collect();
    enumerate_sizes(obj, &sizes, budget, t0)
}

/// Which maximizer to use for the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    /// The vertex walk.
    #[default]
    Walk,
    /// Enumeration; fails when over budget.
    Exact,
    /// Enumeration when within budget, otherwise the walk.
    Auto,
}

/// Maximizes `obj` with the chosen selector.
pub fn select(obj: &UcbObjective, cfg: &ArmSelectConfig, selector: Selector, budget: u128) -> Result<Selection> {
    match selector {
        Selector::Walk => grab_arm_light(obj, cfg),
        Selector::Exact => exact_select(obj, cfg.t0, budget),
        Selector::Auto => {
            if binomial(obj.n(), cfg.t0) <= budget {
                exact_select(obj, cfg.t0, budget)
            } else {
                grab_arm_light(obj, cfg)
            }
        }
    }
}

/// Options for [`ucb_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbOptions {
    pub radius: RadiusMode,
    /// Replaces the confidence radius, e.g. `Some(0.0)` for greedy play.
    pub force_c: Option<f64>,
    pub selector: Selector,
    pub budget: u128,
}

impl Default for UcbOptions {
    fn default() -> Self {
        Self {
            radius: RadiusMode::ExactLogdet,
            force_c: None,
            selector: Selector::Walk,
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }
}

/// One optimistic selection from the learner's current state.
pub fn ucb_select(
    state: &LearnerState,
    hyper: &HyperParams,
    basis: &DictionaryBasis,
    mask: &Mask,
    cfg: &ArmSelectConfig,
    options: &UcbOptions,
) -> Result<Selection> {
    let c = match options.force_c {
        Some(c) => c,
        None => confidence_radius(state, hyper, options.radius)?,
    };
    let features = unit_features(basis, mask)?;
    let obj = UcbObjective::new(&features, state.alpha_hat(), c, state)?;
    select(&obj, cfg, options.selector, options.budget)
}
