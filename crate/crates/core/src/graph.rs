//! Weighted undirected graphs, their Laplacians, spectra and the dictionary
//! of Laplacian powers.

use std::f64::consts::SQRT_2;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Stream};

/// Largest number of `f64` entries a [`DictionaryBasis`] may hold (1 GiB).
pub const DEFAULT_BASIS_BUDGET: usize = 1 << 27;

/// Eigenvalues in `(-CLAMP_TOL, 0)` are rounding noise and are set to zero.
const CLAMP_TOL: f64 = 1e-10;

/// Symmetric, non-negative weight matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: DMatrix<f64>,
}

impl Graph {
    /// Validates and wraps a dense weight matrix.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 {
            return Err(invalid("n", "graph must have at least one node"));
        }
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "weight matrix columns",
                expected: n,
                actual: weights.ncols(),
            });
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(invalid("weights", format!("self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(invalid("weights", format!("bad weight {w} on ({i}, {j})")));
                }
                if w != weights[(j, i)] {
                    return Err(invalid("weights", format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Builds a graph from `(i, j, w)` triples. Repeated pairs are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(invalid("n", "graph must have at least one node"));
        }
        let mut weights = DMatrix::zeros(n, n);
        for (i, j, w) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
            if i == j {
                return Err(invalid("edges", format!("self-loop at node {i}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(invalid("edges", format!("bad weight {w} on ({i}, {j})")));
            }
            if weights[(i, j)] != 0.0 {
                return Err(invalid("edges", format!("duplicate edge ({i}, {j})")));
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Edges as `(i, j, w)` with `i < j` and `w > 0`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Weighted degrees.
    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.weights.row_iter().map(|r| r.sum()))
    }

    /// Combinatorial Laplacian `D - W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.weights.clone();
        for (i, d) in self.degrees().iter().enumerate() {
            l[(i, i)] = *d;
        }
        l
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn connected_components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if !seen[v] && self.weights[(u, v)] > 0.0 {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Writes the edge-list format: a `n=<count>` header then `i j w` lines.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n={}", self.n())?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{i} {j} {w}")?;
        }
        Ok(())
    }

    /// Parses the edge-list format. Blank lines and `#` comments are skipped.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { line: lineno, reason };
            if n.is_none() {
                let count = text
                    .strip_prefix("n=")
                    .ok_or_else(|| parse_err("expected `n=<count>` header".into()))?
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(e.to_string()))?;
                n = Some(count);
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `i j w`, got {} fields", fields.len())));
            }
            let i: usize = fields[0].parse().map_err(|e| parse_err(format!("{e}")))?;
            let j: usize = fields[1].parse().map_err(|e| parse_err(format!("{e}")))?;
            let w: f64 = fields[2].parse().map_err(|e| parse_err(format!("{e}")))?;
            if i >= j {
                return Err(parse_err(format!("edge ({i}, {j}) must satisfy i < j")));
            }
            edges.push((i, j, w));
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            reason: "missing `n=<count>` header".into(),
        })?;
        Self::from_edges(n, edges)
    }
}

/// Barabasi-Albert graph: a ring over the first `m0` nodes, then every new
/// node attaches to `m` distinct existing nodes with probability proportional
/// to their current degree. All weights are 1.
pub fn generate_ba(n: usize, m0: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if m > m0 {
        return Err(invalid("m", format!("{m} exceeds core size m0 = {m0}")));
    }
    if m0 > n {
        return Err(invalid("m0", format!("{m0} exceeds n = {n}")));
    }
    let mut rng = stream(seed, Stream::Graph);
    let mut weights = DMatrix::zeros(n, n);
    let mut degree = vec![0.0f64; n];
    let link = |w: &mut DMatrix<f64>, d: &mut [f64], a: usize, b: usize| {
        w[(a, b)] = 1.0;
        w[(b, a)] = 1.0;
        d[a] += 1.0;
        d[b] += 1.0;
    };
    match m0 {
        0 | 1 => {}
        2 => link(&mut weights, &mut degree, 0, 1),
        _ => {
            for i in 0..m0 {
                link(&mut weights, &mut degree, i, (i + 1) % m0);
            }
        }
    }
    for v in m0..n {
        let mut chosen = vec![false; v];
        let mut targets = Vec::with_capacity(m);
        for _ in 0..m {
            let mut probs: Vec<f64> = (0..v)
                .map(|u| if chosen[u] { 0.0 } else { degree[u] })
                .collect();
            let mut total: f64 = probs.iter().sum();
            if total <= 0.0 {
                for (u, p) in probs.iter_mut().enumerate() {
                    *p = if chosen[u] { 0.0 } else { 1.0 };
                }
                total = probs.iter().sum();
            }
            let pick = sample_weighted(&probs, total, rng.random::<f64>());
            chosen[pick] = true;
            targets.push(pick);
        }
        for u in targets {
            link(&mut weights, &mut degree, v, u);
        }
    }
    Ok(Graph { weights })
}

fn sample_weighted(probs: &[f64], total: f64, unit: f64) -> usize {
    let target = unit * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Node positions used by [`generate_rbf`] for the same seed.
pub fn rbf_coordinates(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stream(seed, Stream::Graph);
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Random geometric graph on the unit square with Gaussian-kernel weights
/// `exp(-d^2 / (2 sigma))` for pairs at distance at most `threshold`.
pub fn generate_rbf(n: usize, sigma: f64, threshold: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(invalid("n", "graph must have at least one node"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("{sigma} must be positive")));
    }
    if !(threshold > 0.0 && threshold <= SQRT_2) {
        return Err(invalid(
            "threshold",
            format!("{threshold} must lie in (0, sqrt(2)]"),
        ));
    }
    let pts = rbf_coordinates(n, seed);
    let mut weights = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pts[i][0] - pts[j][0];
            let dy = pts[i][1] - pts[j][1];
            let d2 = dx * dx + dy * dy;
            if d2.sqrt() <= threshold {
                let w = (-d2 / (2.0 * sigma)).exp();
                weights[(i, j)] = w;
                weights[(j, i)] = w;
            }
        }
    }
    Ok(Graph { weights })
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Decomposes a symmetric matrix. Tiny negative eigenvalues are clamped.
    pub fn of(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(invalid("matrix", "must be square and non-empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("matrix has non-finite entries".into()));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(invalid("matrix", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        let eig = matrix
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 1000 * n.max(10))
            .ok_or_else(|| Error::NumericFailure("eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(
            n,
            order.iter().map(|&i| {
                let v = eig.eigenvalues[i];
                if v < 0.0 && v > -CLAMP_TOL {
                    0.0
                } else {
                    v
                }
            }),
        );
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `sum_{k<K} sum_l lambda_l^k`, the trace of `I + L + ... + L^{K-1}`.
    /// Uses `0^0 = 1`.
    pub fn power_sum(&self, k: usize) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&lam| (0..k).map(|p| lam.powi(p as i32)).sum::<f64>())
            .sum()
    }

    /// Computes `U f(Lambda) U^T x`.
    pub fn apply_function<F: Fn(f64) -> f64>(&self, f: F, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.eigenvectors.tr_mul(x);
        for (c, &lam) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(lam);
        }
        &self.eigenvectors * coeffs
    }

    /// Dense `U f(Lambda) U^T`.
    pub fn matrix_function<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &lam) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= f(lam);
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// Dense powers `L^0, ..., L^{K-1}` of a Laplacian.
#[derive(Debug, Clone)]
pub struct DictionaryBasis {
    powers: Vec<DMatrix<f64>>,
}

impl DictionaryBasis {
    pub fn new(laplacian: &DMatrix<f64>, k: usize) -> Result<Self> {
        Self::with_budget(laplacian, k, DEFAULT_BASIS_BUDGET)
    }

    /// Like [`Self::new`] but fails when `K * N^2` exceeds `budget` entries.
    pub fn with_budget(laplacian: &DMatrix<f64>, k: usize, budget: usize) -> Result<Self> {
        let n = laplacian.nrows();
        if k == 0 {
            return Err(invalid("k", "dictionary needs at least one power"));
        }
        if n == 0 || laplacian.ncols() != n {
            return Err(invalid("laplacian", "must be square and non-empty"));
        }
        let entries = k.checked_mul(n * n).unwrap_or(usize::MAX);
        if entries > budget {
            return Err(Error::ResourceLimit(format!(
                "{k} powers of a {n}x{n} matrix need {entries} entries, budget is {budget}"
            )));
        }
        let mut powers = Vec::with_capacity(k);
        powers.push(DMatrix::identity(n, n));
        for p in 1..k {
            let next = &powers[p - 1] * laplacian;
            powers.push(next);
        }
        Ok(Self { powers })
    }

    pub fn n(&self) -> usize {
        self.powers[0].nrows()
    }

    /// Number of powers `K`.
    pub fn k(&self) -> usize {
        self.powers.len()
    }

    pub fn power(&self, p: usize) -> &DMatrix<f64> {
        &self.powers[p]
    }

    pub fn powers(&self) -> &[DMatrix<f64>] {
        &self.powers
    }

    /// `L^p h`, exploiting sparsity of `h`.
    pub fn apply_power(&self, p: usize, h: &DVector<f64>) -> DVector<f64> {
        let m = &self.powers[p];
        let mut out = DVector::zeros(self.n());
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                out.axpy(hj, &m.column(j), 1.0);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    /// Cyclic Jacobi eigenvalue iteration, an independent check on nalgebra.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn naive_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(a.nrows(), b.ncols());
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                let mut s = 0.0;
                for k in 0..a.ncols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                c[(i, j)] = s;
            }
        }
        c
    }

    #[test]
    fn path_laplacian_and_spectrum() {
        let l = path3().laplacian();
        let expected = DMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(l, expected);
        let s = Spectrum::of(&l).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in s.eigenvalues().iter().zip(jacobi_eigenvalues(&l)) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_spectrum() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let s = Spectrum::of(&g.laplacian()).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn power_sum_matches_trace_of_powers() {
        let l = path3().laplacian();
        let s = Spectrum::of(&l).unwrap();
        // eigenvalues 0, 1, 3 with K = 3: (1+0+0) + (1+1+1) + (1+3+9)
        assert_relative_eq!(s.power_sum(3), 17.0, epsilon = 1e-10);
        let basis = DictionaryBasis::new(&l, 3).unwrap();
        let trace: f64 = basis.powers().iter().map(|p| p.trace()).sum();
        assert_relative_eq!(s.power_sum(3), trace, epsilon = 1e-10);
    }

    #[test]
    fn frobenius_norms_differ_from_power_sum() {
        let l = path3().laplacian();
        let basis = DictionaryBasis::new(&l, 3).unwrap();
        let frob: f64 = basis.powers().iter().map(|p| p.norm_squared()).sum();
        // sum_k sum_l lambda^{2k} = 3 + (1 + 9) + (1 + 81)
        assert_relative_eq!(frob, 95.0, epsilon = 1e-9);
        assert_relative_eq!(Spectrum::of(&l).unwrap().power_sum(3), 17.0, epsilon = 1e-9);
    }

    #[test]
    fn power_sum_basics() {
        let g = generate_rbf(9, 0.5, 0.7, 1).unwrap();
        let s = Spectrum::of(&g.laplacian()).unwrap();
        assert_eq!(s.power_sum(1), 9.0);
        for k in 1..8 {
            assert!(s.power_sum(k + 1) >= s.power_sum(k));
        }
        let zero = Spectrum::of(&DMatrix::zeros(4, 4)).unwrap();
        assert!(zero.eigenvalues().iter().all(|&v| v == 0.0));
        assert_eq!(Graph::from_edges(5, []).unwrap().laplacian(), DMatrix::zeros(5, 5));
    }

    #[test]
    fn powers_reassociate() {
        let g = generate_rbf(10, 0.5, 0.5, 3).unwrap();
        let l = g.laplacian();
        let b = DictionaryBasis::new(&l, 5).unwrap();
        for p in 1..5 {
            let left = &l * b.power(p - 1);
            let scale = b.power(p).amax().max(1.0);
            assert!((b.power(p) - &left).amax() <= 1e-10 * scale);
            assert!((b.power(p) - b.power(p).transpose()).amax() <= 1e-10 * scale);
        }
    }

    #[test]
    fn ba_core_only_and_single_growth_step() {
        let core = generate_ba(10, 10, 3, 1).unwrap();
        assert_eq!(core.edge_count(), 10);
        let one = generate_ba(11, 10, 3, 1).unwrap();
        assert_eq!(one.degrees()[10], 3.0);
    }

    #[test]
    fn ba_sparse_attachment_has_heavier_tail() {
        let dispersion = |m: usize| -> f64 {
            (0..50)
                .map(|seed| {
                    let d = generate_ba(200, 10, m, seed).unwrap().degrees();
                    let mean = d.mean();
                    d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64 / (mean * mean)
                })
                .sum::<f64>()
                / 50.0
        };
        assert!(dispersion(1) > dispersion(5));
    }

    #[test]
    fn larger_cutoff_gives_more_edges() {
        let (mut dense, mut sparse) = (0, 0);
        for seed in 0..20 {
            dense += generate_rbf(400, 0.5, 0.987, seed).unwrap().edge_count();
            sparse += generate_rbf(400, 0.5, 0.95, seed).unwrap().edge_count();
        }
        assert!(dense > sparse);
        assert_eq!(generate_rbf(30, 0.5, 1e-9, 0).unwrap().edge_count(), 0);
    }

    #[test]
    fn single_node_graph() {
        let g = Graph::from_edges(1, []).unwrap();
        let s = Spectrum::of(&g.laplacian()).unwrap();
        assert_eq!(s.eigenvalues().as_slice(), &[0.0]);
        assert_eq!(s.power_sum(4), 1.0);
        let b = DictionaryBasis::new(&g.laplacian(), 3).unwrap();
        assert_eq!(b.power(2)[(0, 0)], 0.0);
        assert_eq!(b.power(0)[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_invalid_graph_inputs() {
        assert!(Graph::from_edges(0, []).is_err());
        assert!(Graph::from_edges(3, [(0, 3, 1.0)]).is_err());
        assert!(Graph::from_edges(3, [(1, 1, 1.0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1, -1.0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0., 1., 2., 0.]);
        assert!(Graph::from_weights(asym).is_err());
    }

    #[test]
    fn disconnected_graph_has_one_zero_per_component() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        assert_eq!(g.connected_components(), 3);
        let s = Spectrum::of(&g.laplacian()).unwrap();
        let zeros = s.eigenvalues().iter().filter(|v| v.abs() < 1e-9).count();
        assert_eq!(zeros, 3);
    }

    #[test]
    fn rbf_parameter_checks() {
        assert!(generate_rbf(10, 0.0, 0.5, 1).is_err());
        assert!(generate_rbf(10, -1.0, 0.5, 1).is_err());
        assert!(generate_rbf(10, 0.5, 0.0, 1).is_err());
        assert!(generate_rbf(10, 0.5, 1.5, 1).is_err());
        assert!(generate_rbf(10, 0.5, SQRT_2, 1).is_ok());
    }

    #[test]
    fn rbf_full_threshold_is_complete_and_weights_match_kernel() {
        let g = generate_rbf(12, 0.5, SQRT_2, 3).unwrap();
        assert_eq!(g.edge_count(), 12 * 11 / 2);
        let pts = rbf_coordinates(12, 3);
        for (i, j, w) in g.edges() {
            let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
            assert_relative_eq!(w, (-d2 / (2.0 * 0.5)).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn rbf_threshold_cuts_long_edges() {
        let g = generate_rbf(40, 0.5, 0.2, 9).unwrap();
        let pts = rbf_coordinates(40, 9);
        for i in 0..40 {
            for j in (i + 1)..40 {
                let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                assert_eq!(g.weights()[(i, j)] > 0.0, d <= 0.2);
            }
        }
    }

    #[test]
    fn ba_counts_and_connectivity() {
        for (n, m0, m) in [(50, 10, 1), (50, 10, 3), (200, 10, 5), (30, 1, 1), (30, 2, 2)] {
            let g = generate_ba(n, m0, m, 11).unwrap();
            let core = match m0 {
                0 | 1 => 0,
                2 => 1,
                _ => m0,
            };
            assert_eq!(g.edge_count(), core + (n - m0) * m, "n={n} m0={m0} m={m}");
            assert_eq!(g.connected_components(), 1);
            assert!(g.edges().iter().all(|e| e.2 == 1.0));
        }
        assert!(generate_ba(10, 3, 4, 0).is_err());
        assert!(generate_ba(10, 11, 2, 0).is_err());
        assert!(generate_ba(10, 3, 0, 0).is_err());
    }

    #[test]
    fn ba_is_seed_deterministic() {
        assert_eq!(generate_ba(60, 10, 3, 5).unwrap(), generate_ba(60, 10, 3, 5).unwrap());
        assert_ne!(generate_ba(60, 10, 3, 5).unwrap(), generate_ba(60, 10, 3, 6).unwrap());
    }

    #[test]
    fn dictionary_powers_match_naive_products() {
        let g = generate_rbf(8, 0.5, 0.8, 2).unwrap();
        let l = g.laplacian();
        let b = DictionaryBasis::new(&l, 4).unwrap();
        let mut expect = DMatrix::identity(8, 8);
        for p in 0..4 {
            assert!((b.power(p) - &expect).amax() < 1e-12);
            expect = naive_matmul(&expect, &l);
        }
        let h = DVector::from_fn(8, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
        assert!((b.apply_power(3, &h) - b.power(3) * &h).amax() < 1e-12);
    }

    #[test]
    fn dictionary_budget_and_k_checks() {
        let l = path3().laplacian();
        assert!(matches!(DictionaryBasis::new(&l, 0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(DictionaryBasis::with_budget(&l, 3, 26), Err(Error::ResourceLimit(_))));
        assert!(DictionaryBasis::with_budget(&l, 3, 27).is_ok());
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = generate_rbf(15, 0.5, 0.4, 4).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert!(Graph::read_edge_list("0 1 1.0\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("n=3\n1 0 1.0\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("n=3\n0 1\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("n=3\n0 5 1.0\n".as_bytes()).is_err());
        let parsed = Graph::read_edge_list("# c\nn=3\n\n0 2 0.5\n".as_bytes()).unwrap();
        assert_eq!(parsed.weights()[(2, 0)], 0.5);
    }

    /// Union-find reference for component counts.
    fn uf_components(n: usize, edges: &[(usize, usize, f64)]) -> usize {
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut parent: Vec<usize> = (0..n).collect();
        for &(a, b, _) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..n).filter(|&x| find(&mut parent, x) == x).count()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn laplacian_invariants(n in 2usize..25, thr in 0.05f64..1.0, seed in 0u64..1000) {
            let g = generate_rbf(n, 0.5, thr, seed).unwrap();
            let l = g.laplacian();
            prop_assert!((l.clone() - l.transpose()).amax() == 0.0);
            let ones = DVector::from_element(n, 1.0);
            prop_assert!((&l * &ones).amax() < 1e-12);
            let s = Spectrum::of(&l).unwrap();
            prop_assert!(s.eigenvalues().iter().all(|&v| v >= -CLAMP_TOL));
            prop_assert!(s.eigenvalues().as_slice().windows(2).all(|w| w[0] <= w[1]));
            let zeros = s.eigenvalues().iter().filter(|v| v.abs() < 1e-8).count();
            prop_assert_eq!(zeros, uf_components(n, &g.edges()));
            prop_assert_eq!(g.connected_components(), uf_components(n, &g.edges()));
            let u = s.eigenvectors();
            prop_assert!((u.transpose() * u - DMatrix::identity(n, n)).amax() < 1e-10);
            let recon = s.matrix_function(|x| x);
            prop_assert!((recon - &l).amax() < 1e-10);
            let basis = DictionaryBasis::new(&l, 3).unwrap();
            let tr: f64 = basis.powers().iter().map(|p| p.trace()).sum();
            prop_assert!((s.power_sum(3) - tr).abs() < 1e-8 * tr.max(1.0));
        }

        #[test]
        fn ba_edge_count(n in 12usize..60, m in 1usize..5, seed in 0u64..500) {
            let g = generate_ba(n, 10, m, seed).unwrap();
            prop_assert_eq!(g.edge_count(), 10 + (n - 10) * m);
            prop_assert_eq!(g.connected_components(), 1);
        }
    }
}
