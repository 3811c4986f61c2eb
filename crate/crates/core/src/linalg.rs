//! Small dense complex linear algebra.
//!
//! Everything here works on dimensions up to [`MAX_DIM`]: two photons with a
//! polarization and a spatial qubit each (16) times a three-level probe
//! register per receiver (9). States carry human-readable basis labels so
//! tests and reports can address amplitudes by name (`"H a1 H b1"`). A
//! composite label is the space-separated concatenation of its factor
//! labels, so every factor label must be a single token.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexAmplitude = Complex64;

/// Tolerance for normalization, hermiticity and trace checks.
pub const EPS_NORM: f64 = 1e-12;
/// Tolerance for agreement between independent computation routes.
pub const EPS_ORACLE: f64 = 1e-10;
/// Smallest eigenvalue accepted for a density matrix.
pub const EPS_EIGEN: f64 = 1e-10;
/// Largest Hilbert-space dimension any operation will build.
pub const MAX_DIM: usize = 144;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidSubsystems("dimension must be positive".into()));
    }
    if dim > MAX_DIM {
        return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
    }
    Ok(())
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    match values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// A ket in a labelled orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    labels: Vec<String>,
}

impl StateVector {
    /// Builds a vector from raw amplitudes. Normalization is not enforced
    /// here; see [`StateVector::normalized`].
    pub fn new<S: Into<String>>(amplitudes: Vec<Complex64>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_dim(amplitudes.len())?;
        if labels.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: amplitudes.len(),
                found: labels.len(),
            });
        }
        check_finite(&amplitudes)?;
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if label.is_empty() {
                return Err(Error::InvalidLabels("empty basis label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidLabels(format!("duplicate basis label `{label}`")));
            }
        }
        Ok(Self { amplitudes, labels })
    }

    /// Builds a vector and rescales it to unit norm.
    pub fn normalized<S: Into<String>>(amplitudes: Vec<Complex64>, labels: Vec<S>) -> Result<Self> {
        let mut v = Self::new(amplitudes, labels)?;
        let n = v.norm_sqr().sqrt();
        if n < EPS_NORM {
            return Err(Error::NotNormalized(n * n));
        }
        v.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(v)
    }

    /// Computational basis vector `labels[index]`.
    pub fn basis<S: AsRef<str>>(labels: &[S], index: usize) -> Result<Self> {
        if index >= labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: index + 1,
            });
        }
        let mut amps = vec![ZERO; labels.len()];
        amps[index] = ONE;
        Self::new(amps, labels.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitude(&self, label: &str) -> Option<Complex64> {
        self.labels.iter().position(|l| l == label).map(|i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EPS_NORM
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.norm_sqr()))
        }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Rotates the global phase so the first amplitude with modulus above
    /// [`EPS_NORM`] is real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        if let Some(lead) = self.amplitudes.iter().find(|a| a.norm() > EPS_NORM) {
            let phase = lead.conj() / lead.norm();
            self.amplitudes.iter_mut().for_each(|a| *a *= phase);
        }
        self
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Largest component-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(if self.dim() == other.dim() { 0.0 } else { f64::INFINITY }, f64::max)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, l) in self.amplitudes.iter().zip(&self.labels) {
            if a.norm() <= EPS_NORM {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{}>", a.re, a.im, l)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Kronecker product with pairwise-concatenated labels.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let dim = a.dim().saturating_mul(b.dim());
    check_dim(dim)?;
    let mut amps = Vec::with_capacity(dim);
    let mut labels = Vec::with_capacity(dim);
    for (x, lx) in a.amplitudes.iter().zip(&a.labels) {
        for (y, ly) in b.amplitudes.iter().zip(&b.labels) {
            amps.push(x * y);
            labels.push(format!("{lx} {ly}"));
        }
    }
    StateVector::new(amps, labels)
}

/// Tensor product of a non-empty sequence of factors, left to right.
pub fn tensor_all(factors: &[&StateVector]) -> Result<StateVector> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidSubsystems("no factors".into()))?;
    rest.iter().try_fold((*first).clone(), |acc, f| tensor(&acc, f))
}

fn validate_layout(total: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidSubsystems(format!("bad factor dimensions {dims:?}")));
    }
    let product = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if product != Some(total) {
        return Err(Error::InvalidSubsystems(format!(
            "factor dimensions {dims:?} do not multiply to {total}"
        )));
    }
    Ok(())
}

/// Mixed-radix digits of `index`, most significant factor first.
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

fn compose(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (digit, dim)| acc * dim + digit)
}

/// Reorders tensor factors: factor `order[k]` of the input becomes factor
/// `k` of the output. Labels are regrouped token-wise, which requires each
/// label to hold exactly one token per factor.
pub fn permute_subsystems(state: &StateVector, dims: &[usize], order: &[usize]) -> Result<StateVector> {
    validate_layout(state.dim(), dims)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidSubsystems(format!("{order:?} is not a permutation")));
    }
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let mut amps = vec![ZERO; state.dim()];
    let mut labels = vec![String::new(); state.dim()];
    let mut d = vec![0usize; dims.len()];
    for (i, (amp, label)) in state.amplitudes.iter().zip(&state.labels).enumerate() {
        digits(i, dims, &mut d);
        let j = compose(order.iter().map(|&k| d[k]).zip(new_dims.iter().copied()));
        let tokens: Vec<&str> = label.split(' ').collect();
        if tokens.len() != dims.len() {
            return Err(Error::InvalidLabels(format!(
                "label `{label}` does not have {} tokens",
                dims.len()
            )));
        }
        amps[j] = *amp;
        labels[j] = order.iter().map(|&k| tokens[k]).collect::<Vec<_>>().join(" ");
    }
    StateVector::new(amps, labels)
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        check_finite(&data)?;
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidSubsystems("matrix rows are not square".into()));
        }
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    /// `|a><b|`
    pub fn outer(a: &StateVector, b: &StateVector) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Self::from_fn(a.dim(), |i, j| a.amplitudes[i] * b.amplitudes[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(Self { dim: n, data: out })
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.dim != v.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        let n = self.dim;
        let amps = (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * v.amplitudes[j]).sum())
            .collect();
        StateVector::new(amps, v.labels.clone())
    }

    /// `self · rho · self†`
    pub fn conjugate(&self, rho: &Matrix) -> Result<Matrix> {
        self.mul(rho)?.mul(&self.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (i..n).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        match (self.adjoint().mul(self), Matrix::identity(self.dim)) {
            (Ok(p), Ok(id)) => p.max_abs_diff(&id) <= tol,
            _ => false,
        }
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Partial trace over a matrix on `dims`-factored space, keeping the factors
/// in `keep` (in ascending factor order).
pub fn partial_trace_matrix(m: &Matrix, keep: &[usize], dims: &[usize]) -> Result<Matrix> {
    validate_layout(m.dim, dims)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.is_empty() {
        return Err(Error::InvalidSubsystems("keep set is empty".into()));
    }
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidSubsystems(format!(
            "keep set {keep:?} is invalid for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let out_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();
    let mut out = Matrix::zeros(out_dim)?;
    let mut dr = vec![0usize; dims.len()];
    let mut dc = vec![0usize; dims.len()];
    for r in 0..m.dim {
        digits(r, dims, &mut dr);
        let kr = compose(keep_sorted.iter().map(|&k| (dr[k], dims[k])));
        for c in 0..m.dim {
            digits(c, dims, &mut dc);
            if traced.iter().any(|&t| dr[t] != dc[t]) {
                continue;
            }
            let kc = compose(keep_sorted.iter().map(|&k| (dc[k], dims[k])));
            *out.at_mut(kr, kc) += m.get(r, c);
        }
    }
    Ok(out)
}

/// A validated density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Matrix,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_hermitian(EPS_NORM) {
            return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > EPS_NORM || tr.im.abs() > EPS_NORM {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        if let Some(&min) = matrix.hermitian_eigenvalues().first() {
            if min < -EPS_EIGEN {
                return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self { matrix })
    }

    /// Normalizes a positive, Hermitian, nonzero-trace matrix.
    pub fn from_unnormalized(matrix: Matrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= EPS_NORM {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr:e} too small")));
        }
        Self::new(matrix.scale(1.0 / tr))
    }

    /// For matrices that are density operators by construction (unitary
    /// conjugation of a pure state).
    pub(crate) fn from_matrix_unchecked(matrix: Matrix) -> Self {
        debug_assert!(matrix.is_hermitian(EPS_NORM));
        Self { matrix }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let n = psi.dim();
        let norm = psi.norm_sqr();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(psi.amplitudes[i] * psi.amplitudes[j].conj() / norm);
            }
        }
        Self {
            matrix: Matrix { dim: n, data },
        }
    }

    /// `Σ w_k |ψ_k><ψ_k|` for normalized states and weights summing to 1.
    pub fn mixture(terms: &[(f64, &StateVector)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, s)| s.dim())
            .ok_or_else(|| Error::InvalidDensityMatrix("empty mixture".into()))?;
        let mut m = Matrix::zeros(dim)?;
        for (w, s) in terms {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            s.ensure_normalized()?;
            for i in 0..dim {
                for j in 0..dim {
                    *m.at_mut(i, j) += s.amplitudes[i] * s.amplitudes[j].conj() * *w;
                }
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix.get(i, j)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.mul(&self.matrix).map(|m| m.trace().re).unwrap_or(f64::NAN)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues()
    }
}

/// `<psi|rho|psi>`, real part.
pub fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    let n = rho.dim();
    if psi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi.dim(),
        });
    }
    let a = psi.amplitudes();
    let mut acc = ZERO;
    for i in 0..n {
        if a[i] == ZERO {
            continue;
        }
        for j in 0..n {
            acc += a[i].conj() * rho.get(i, j) * a[j];
        }
    }
    Ok(acc.re)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    let reduced = partial_trace_matrix(&rho.matrix, keep, dims)?;
    Ok(DensityMatrix { matrix: reduced })
}

/// `½ ‖a − b‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = Matrix::from_fn(a.dim(), |i, j| a.get(i, j) - b.get(i, j))?;
    Ok(0.5 * diff.hermitian_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}
