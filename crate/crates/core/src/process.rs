//! The diffusion process: actions, masks, graph kernels and noisy partial
//! observations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Error, Result};
use crate::graph::{DictionaryBasis, Graph, Spectrum};
use crate::rng::{stream, Stream};

/// Polynomial kernel coefficients `alpha_0, ..., alpha_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoefficients(DVector<f64>);

impl KernelCoefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(values))
    }

    pub fn from_vector(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("alpha", "needs at least one coefficient"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("alpha", "coefficients must be finite"));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// The set of observable nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Vec<bool>,
    observed: usize,
}

impl Mask {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        let observed = bits.iter().filter(|&&b| b).count();
        if observed == 0 {
            return Err(invalid("mask", "at least one node must be observed"));
        }
        Ok(Self { bits, observed })
    }

    pub fn full(n: usize) -> Self {
        Self {
            bits: vec![true; n],
            observed: n,
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            bits[i] = true;
        }
        Self::new(bits)
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    /// Number of observed nodes `Q`.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.bits[i]).collect()
    }

    /// Indicator vector of observed nodes.
    pub fn indicator(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }))
    }

    /// Zeros the unobserved entries of `y`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            y.len(),
            y.iter().zip(&self.bits).map(|(&v, &b)| if b { v } else { 0.0 }),
        )
    }
}

/// Mask observing `round(fraction * n)` nodes chosen uniformly (at least one).
pub fn random_mask(n: usize, fraction: f64, seed: u64) -> Result<Mask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid("mask_fraction", format!("{fraction} must lie in (0, 1]")));
    }
    if n == 0 {
        return Err(invalid("n", "graph must have at least one node"));
    }
    let q = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = stream(seed, Stream::Mask);
    let mut picked = index::sample(&mut rng, n, q).into_vec();
    picked.sort_unstable();
    Mask::from_indices(n, &picked)
}

/// Source intensities in `[0, 1]` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSignal {
    values: DVector<f64>,
}

impl ActionSignal {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(invalid("action", format!("entry {i} = {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// Binary action with ones on `support`.
    pub fn binary(n: usize, support: &[usize]) -> Result<Self> {
        let mut values = DVector::zeros(n);
        for &i in support {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if values[i] == 1.0 {
                return Err(invalid("support", format!("node {i} listed twice")));
            }
            values[i] = 1.0;
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Nodes with non-zero intensity, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.values[i] != 0.0).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// The diffusion kernel generating observations.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueKernel {
    /// `sum_k alpha_k L^k`.
    Polynomial(KernelCoefficients),
    /// `exp(-tau L)`.
    Diffusion { tau: f64 },
}

/// `sum_k alpha_k L^k h`.
pub fn apply_poly_kernel(
    basis: &DictionaryBasis,
    alpha: &KernelCoefficients,
    h: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("kernel coefficients", basis.k(), alpha.len())?;
    check_dim("action", basis.n(), h.len())?;
    let mut out = DVector::zeros(basis.n());
    for (p, &a) in alpha.as_slice().iter().enumerate() {
        if a != 0.0 {
            out.axpy(a, &basis.apply_power(p, h), 1.0);
        }
    }
    Ok(out)
}

/// `exp(-tau L) h` through the eigenbasis.
pub fn apply_diffusion(spectrum: &Spectrum, tau: f64, h: &DVector<f64>) -> Result<DVector<f64>> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("{tau} must be non-negative")));
    }
    check_dim("action", spectrum.n(), h.len())?;
    Ok(spectrum.apply_function(|lam| (-tau * lam).exp(), h))
}

/// Truncated Taylor coefficients of `exp(-tau x)`: `(-tau)^k / k!`.
pub fn diffusion_poly_coefficients(tau: f64, k: usize) -> Result<KernelCoefficients> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("{tau} must be non-negative")));
    }
    let mut coeffs = Vec::with_capacity(k);
    let mut term = 1.0;
    for p in 0..k {
        coeffs.push(term);
        term *= -tau / (p + 1) as f64;
    }
    KernelCoefficients::new(coeffs)
}

/// Masked dictionary features: column `k` is `M L^k h`.
pub fn feature_matrix(basis: &DictionaryBasis, mask: &Mask, h: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim("mask", basis.n(), mask.n())?;
    check_dim("action", basis.n(), h.len())?;
    let mut z = DMatrix::zeros(basis.n(), basis.k());
    for p in 0..basis.k() {
        z.set_column(p, &mask.apply(&basis.apply_power(p, h)));
    }
    Ok(z)
}

/// Column sums of a feature matrix, i.e. `Z^T 1`.
pub fn aggregated_feature(z: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.sum()))
}

/// Per-node aggregated features: row `n` is the aggregated feature of the
/// unit action on node `n`, so `x(h) = A^T h` for every action.
pub fn unit_features(basis: &DictionaryBasis, mask: &Mask) -> Result<DMatrix<f64>> {
    check_dim("mask", basis.n(), mask.n())?;
    let m = mask.indicator();
    let mut a = DMatrix::zeros(basis.n(), basis.k());
    for p in 0..basis.k() {
        // Powers of a symmetric L are symmetric, so (L^p)^T m = L^p m.
        a.set_column(p, &(basis.power(p) * &m));
    }
    Ok(a)
}

/// A graph together with the derived quantities every learner needs.
#[derive(Debug, Clone)]
pub struct Network {
    graph: Graph,
    laplacian: DMatrix<f64>,
    spectrum: Spectrum,
    basis: DictionaryBasis,
}

impl Network {
    pub fn new(graph: Graph, k: usize) -> Result<Self> {
        let laplacian = graph.laplacian();
        let spectrum = Spectrum::of(&laplacian)?;
        let basis = DictionaryBasis::new(&laplacian, k)?;
        Ok(Self {
            graph,
            laplacian,
            spectrum,
            basis,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn basis(&self) -> &DictionaryBasis {
        &self.basis
    }

    /// `sum_{k<K} tr(L^k)`.
    pub fn power_sum(&self) -> f64 {
        self.spectrum.power_sum(self.k())
    }
}

/// One round of feedback.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Noisy resultant signal on all nodes.
    pub y: DVector<f64>,
    /// `y` restricted to observed nodes.
    pub w: DVector<f64>,
    /// Expected reward of the action.
    pub mean_reward: f64,
}

impl Observation {
    /// Sum of the observed entries.
    pub fn realized_reward(&self) -> f64 {
        self.w.sum()
    }
}

/// The unknown process the learner interacts with.
#[derive(Debug, Clone)]
pub struct Environment {
    network: Arc<Network>,
    kernel: TrueKernel,
    mask: Mask,
    noise_std: f64,
    reward_weights: DVector<f64>,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(
        network: Arc<Network>,
        kernel: TrueKernel,
        mask: Mask,
        noise_std: f64,
        noise_seed: u64,
    ) -> Result<Self> {
        check_dim("mask", network.n(), mask.n())?;
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(invalid("noise_std", format!("{noise_std} must be non-negative")));
        }
        let indicator = mask.indicator();
        // The kernel is symmetric, so 1^T M g(h) = (g M 1)^T h.
        let reward_weights = match &kernel {
            TrueKernel::Polynomial(alpha) => apply_poly_kernel(network.basis(), alpha, &indicator)?,
            TrueKernel::Diffusion { tau } => apply_diffusion(network.spectrum(), *tau, &indicator)?,
        };
        Ok(Self {
            network,
            kernel,
            mask,
            noise_std,
            reward_weights,
            rng: stream(noise_seed, Stream::Noise),
        })
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn kernel(&self) -> &TrueKernel {
        &self.kernel
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Noiseless resultant signal.
    pub fn resultant(&self, h: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.kernel {
            TrueKernel::Polynomial(alpha) => apply_poly_kernel(self.network.basis(), alpha, h),
            TrueKernel::Diffusion { tau } => apply_diffusion(self.network.spectrum(), *tau, h),
        }
    }

    /// Dense kernel matrix.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        match &self.kernel {
            TrueKernel::Polynomial(alpha) => {
                let mut m = DMatrix::zeros(self.network.n(), self.network.n());
                for (p, &a) in alpha.as_slice().iter().enumerate() {
                    m += self.network.basis().power(p) * a;
                }
                m
            }
            TrueKernel::Diffusion { tau } => {
                self.network.spectrum().matrix_function(|lam| (-tau * lam).exp())
            }
        }
    }

    /// Per-node contribution to the expected reward; `r(h) = g^T h`.
    pub fn reward_weights(&self) -> &DVector<f64> {
        &self.reward_weights
    }

    /// Expected observed reward `1^T M g(h)`.
    pub fn mean_reward(&self, h: &ActionSignal) -> f64 {
        self.reward_weights.dot(h.values())
    }

    /// Draws `y = g(h) + noise` and masks it.
    pub fn observe(&mut self, h: &ActionSignal) -> Result<Observation> {
        let mut y = self.resultant(h.values())?;
        if self.noise_std > 0.0 {
            for v in y.iter_mut() {
                let e: f64 = self.rng.sample(StandardNormal);
                *v += self.noise_std * e;
            }
        }
        let w = self.mask.apply(&y);
        Ok(Observation {
            y,
            w,
            mean_reward: self.mean_reward(h),
        })
    }
}
