//! Online ridge estimation of the kernel coefficients, the confidence
//! radius of the estimate, and the theoretical determinant and regret bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::process::KernelCoefficients;

/// Constants shared by the confidence radius and the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    /// Ridge regularizer.
    pub mu: f64,
    /// Failure probability of the confidence set.
    pub delta: f64,
    /// Sub-Gaussian noise scale.
    pub r: f64,
    /// Bound on the norm of the true coefficients.
    pub s: f64,
    /// Number of kernel coefficients.
    pub k: usize,
    /// Sources per action.
    pub t0: usize,
    /// Observed node count.
    pub q: usize,
    /// Spectral power sum of the graph.
    pub d: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(invalid("mu", format!("{} must be positive", self.mu)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("{} must lie in (0, 1)", self.delta)));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(invalid("r", format!("{} must be non-negative", self.r)));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(invalid("s", format!("{} must be positive", self.s)));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(invalid("d", format!("{} must be positive", self.d)));
        }
        for (name, v) in [("k", self.k), ("t0", self.t0), ("q", self.q)] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Which form of the confidence radius to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMode {
    /// Uses the actual `log det V_t`.
    #[default]
    ExactLogdet,
    /// Replaces `log det V_t` by the determinant bound.
    DeterminantBound,
}

/// Ridge estimator state.
///
/// Besides the raw accumulators `V = mu I + sum Z^T Z` and `b = sum Z^T w`,
/// the state carries an upper-triangular `R` with `R^T R = V` and the rotated
/// response `z = R^{-T} b`, updated by orthogonal transformations. Forming and
/// factoring `V` directly loses all precision once the dictionary powers span
/// many orders of magnitude.
#[derive(Debug, Clone)]
pub struct LearnerState {
    mu: f64,
    v: DMatrix<f64>,
    bvec: DVector<f64>,
    root: DMatrix<f64>,
    rotated: DVector<f64>,
    alpha_hat: KernelCoefficients,
    t: usize,
}

impl LearnerState {
    pub fn new(k: usize, mu: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid("mu", format!("{mu} must be positive")));
        }
        Ok(Self {
            mu,
            v: DMatrix::identity(k, k) * mu,
            bvec: DVector::zeros(k),
            root: DMatrix::identity(k, k) * mu.sqrt(),
            rotated: DVector::zeros(k),
            alpha_hat: KernelCoefficients::from_vector(DVector::zeros(k))?,
            t: 0,
        })
    }

    pub fn init(hyper: &HyperParams) -> Result<Self> {
        hyper.validate()?;
        Self::new(hyper.k, hyper.mu)
    }

    pub fn k(&self) -> usize {
        self.bvec.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn bvec(&self) -> &DVector<f64> {
        &self.bvec
    }

    pub fn alpha_hat(&self) -> &KernelCoefficients {
        &self.alpha_hat
    }

    /// Upper-triangular square root of `V`.
    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// Adds one round of features `Z` (n x K) and masked observations `w`.
    pub fn ingest(&mut self, z: &DMatrix<f64>, w: &DVector<f64>) -> Result<()> {
        let k = self.k();
        check_dim("feature columns", k, z.ncols())?;
        check_dim("observation length", z.nrows(), w.len())?;
        if z.iter().chain(w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("non-finite feature or observation".into()));
        }
        // Rows with zero features carry no information about alpha.
        let rows: Vec<usize> = (0..z.nrows())
            .filter(|&i| z.row(i).iter().any(|&v| v != 0.0))
            .collect();
        self.t += 1;
        if rows.is_empty() {
            return Ok(());
        }
        self.v += z.tr_mul(z);
        self.bvec += z.tr_mul(w);

        let mut stacked = DMatrix::zeros(k + rows.len(), k + 1);
        stacked.view_mut((0, 0), (k, k)).copy_from(&self.root);
        stacked.view_mut((0, k), (k, 1)).copy_from(&self.rotated);
        for (r, &i) in rows.iter().enumerate() {
            for c in 0..k {
                stacked[(k + r, c)] = z[(i, c)];
            }
            stacked[(k + r, k)] = w[i];
        }
        let upper = stacked.qr().r();
        self.root = upper.view((0, 0), (k, k)).into_owned();
        self.rotated = upper.view((0, k), (k, 1)).column(0).into_owned();
        self.refresh_estimate()
    }

    fn refresh_estimate(&mut self) -> Result<()> {
        let alpha = self
            .root
            .solve_upper_triangular(&self.rotated)
            .filter(|a| a.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::NumericFailure("singular square-root factor".into()))?;
        self.alpha_hat = KernelCoefficients::from_vector(alpha)?;
        Ok(())
    }

    /// `log det V`.
    pub fn logdet(&self) -> f64 {
        2.0 * self.root.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>()
    }

    /// `F = R^{-T}`, so that `F^T F = V^{-1}` and `|F x|^2 = x^T V^{-1} x`.
    pub fn inverse_factor(&self) -> Result<DMatrix<f64>> {
        let k = self.k();
        self.root
            .transpose()
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::NumericFailure("singular square-root factor".into()))
    }

    /// `sqrt(x^T V x)`.
    pub fn v_norm(&self, x: &DVector<f64>) -> f64 {
        (&self.root * x).norm()
    }

    /// `sqrt(x^T V^{-1} x)`.
    pub fn v_inverse_norm(&self, x: &DVector<f64>) -> Result<f64> {
        self.root
            .tr_solve_upper_triangular(x)
            .map(|y| y.norm())
            .ok_or_else(|| Error::NumericFailure("singular square-root factor".into()))
    }
}

/// Radius `c_t` of the confidence ellipsoid around the current estimate.
///
/// The printed statement of the radius has a sign error in the delta term;
/// this follows the derivation: `R sqrt(log det V - K log mu + 2 log(1/delta))
/// + sqrt(mu) S`.
pub fn confidence_radius(state: &LearnerState, hyper: &HyperParams, mode: RadiusMode) -> Result<f64> {
    check_dim("learner dimension", hyper.k, state.k())?;
    let k = hyper.k as f64;
    let log_ratio = match mode {
        RadiusMode::ExactLogdet => state.logdet() - k * hyper.mu.ln(),
        RadiusMode::DeterminantBound => log_det_bound(hyper, state.t()) - k * hyper.mu.ln(),
    };
    let arg = log_ratio + 2.0 * (1.0 / hyper.delta).ln();
    if !(arg >= 0.0) {
        return Err(Error::NumericFailure(format!(
            "negative confidence radius argument {arg}"
        )));
    }
    Ok(hyper.r * arg.sqrt() + hyper.mu.sqrt() * hyper.s)
}

/// `K log(mu + t d Q T0)`, the log of the determinant bound on `V_t`.
pub fn log_det_bound(hyper: &HyperParams, t: usize) -> f64 {
    let growth = t as f64 * hyper.d * hyper.q as f64 * hyper.t0 as f64;
    hyper.k as f64 * (hyper.mu + growth).ln()
}

/// `(mu + t d Q T0)^K`; may overflow to infinity, see [`log_det_bound`].
pub fn det_bound(hyper: &HyperParams, t: usize) -> f64 {
    log_det_bound(hyper, t).exp()
}

/// `2 (c_T + 1) sqrt(2 K T log(1 + Q T0 d / mu))`.
pub fn regret_bound(hyper: &HyperParams, horizon: usize, c_t: f64) -> f64 {
    let inner = 1.0 + hyper.q as f64 * hyper.t0 as f64 * hyper.d / hyper.mu;
    2.0 * (c_t + 1.0) * (2.0 * hyper.k as f64 * horizon as f64 * inner.ln()).sqrt()
}
