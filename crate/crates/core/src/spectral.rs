//! Dense symmetric matrices and their spectral calculus.
//!
//! Everything here is built on one primitive, [`eig_sym`], a cyclic Jacobi
//! eigensolver. Spectral functions `X ↦ Q·diag(g(w))·Qᵀ` are well defined for
//! any orthonormal eigenbasis because `g` acts per eigenvalue, so repeated
//! eigenvalues need no special handling.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by [`numerical_rank`] when callers have no better choice.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Maximum number of Jacobi sweeps before [`eig_sym`] gives up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Off-diagonal Frobenius mass, relative to `‖X‖_F`, at which Jacobi stops.
pub const JACOBI_REL_TOL: f64 = 1e-12;

/// A dense symmetric `p × p` matrix stored row-major.
///
/// Both triangles are stored; every constructor and mutator keeps them
/// bit-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSym", into = "RawSym")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSym {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<RawSym> for SymMatrix {
    type Error = Error;

    fn try_from(raw: RawSym) -> Result<Self> {
        SymMatrix::from_row_major(raw.dim, raw.data)
    }
}

impl From<SymMatrix> for RawSym {
    fn from(m: SymMatrix) -> Self {
        RawSym { dim: m.dim, data: m.data }
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Wraps a row-major array, rejecting anything that is not exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    /// Wraps a row-major array, replacing it by its symmetric part `(M + Mᵀ)/2`.
    pub fn symmetrized(dim: usize, data: &[f64]) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::invalid("row-major data does not match the dimension"));
        }
        Ok(Self::from_upper_fn(dim, |i, j| 0.5 * (data[i * dim + j] + data[j * dim + i])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Row-major view of all `p²` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius inner product `⟨A, B⟩ = tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SymMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Dense product `self · other` (not symmetric in general).
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.data[i * p + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * p..(k + 1) * p];
                for (o, b) in out[i * p..(i + 1) * p].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Frobenius norm of the commutator `XY − YX`.
    pub fn commutator_norm(&self, other: &SymMatrix) -> f64 {
        let xy = self.matmul(other);
        let p = self.dim;
        // (YX) = (XY)ᵀ for symmetric X, Y.
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                let d = xy[i * p + j] - xy[j * p + i];
                acc += d * d;
            }
        }
        acc.sqrt()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Eigenvalues (non-increasing) and orthonormal eigenvectors of a [`SymMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    /// `p × p` row-major; column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let p = self.dim();
        (0..p).map(|i| self.eigenvectors[i * p + j]).collect()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Q·diag(w)·Qᵀ` for caller-supplied eigenvalues `w`.
    pub fn reconstruct_with(&self, w: &[f64]) -> SymMatrix {
        let p = self.dim();
        assert_eq!(w.len(), p);
        let q = &self.eigenvectors;
        let mut out = SymMatrix::zeros(p);
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            for i in 0..p {
                let qi = q[i * p + k] * wk;
                if qi == 0.0 {
                    continue;
                }
                for j in i..p {
                    out.data[i * p + j] += qi * q[j * p + k];
                }
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                out.data[j * p + i] = out.data[i * p + j];
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// Applies `g` to every eigenvalue and reconstructs.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        let w: Vec<f64> = self.eigenvalues.iter().map(|&t| g(t)).collect();
        if let Some(bad) = w.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("spectral function produced non-finite value {bad}")));
        }
        Ok(self.reconstruct_with(&w))
    }

    /// `max |QᵀQ − I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.dim();
        let q = &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for a in 0..p {
            for b in a..p {
                let dot: f64 = (0..p).map(|i| q[i * p + a] * q[i * p + b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops to
/// [`JACOBI_REL_TOL`]`·‖X‖_F`; more than [`JACOBI_MAX_SWEEPS`] sweeps is a
/// [`Error::NumericalFailure`]. The result is deterministic for a given input.
pub fn eig_sym(x: &SymMatrix) -> Result<SpectralDecomp> {
    if !x.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let p = x.dim();
    let mut a = x.data.clone();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let threshold = JACOBI_REL_TOL * x.frobenius_norm();

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                s += 2.0 * a[i * p + j] * a[i * p + j];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..=JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for ip in 0..p {
            for iq in (ip + 1)..p {
                let apq = a[ip * p + iq];
                if apq == 0.0 {
                    continue;
                }
                let app = a[ip * p + ip];
                let aqq = a[iq * p + iq];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[ip * p + ip] = app - t * apq;
                a[iq * p + iq] = aqq + t * apq;
                a[ip * p + iq] = 0.0;
                a[iq * p + ip] = 0.0;
                for r in 0..p {
                    if r == ip || r == iq {
                        continue;
                    }
                    let arp = a[r * p + ip];
                    let arq = a[r * p + iq];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * p + ip] = new_rp;
                    a[ip * p + r] = new_rp;
                    a[r * p + iq] = new_rq;
                    a[iq * p + r] = new_rq;
                }
                for r in 0..p {
                    let vrp = v[r * p + ip];
                    let vrq = v[r * p + iq];
                    v[r * p + ip] = c * vrp - s * vrq;
                    v[r * p + iq] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge within {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| a[j * p + j].total_cmp(&a[i * p + i]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&k| a[k * p + k]).collect();
    let mut eigenvectors = vec![0.0; p * p];
    for (col, &k) in order.iter().enumerate() {
        for r in 0..p {
            eigenvectors[r * p + col] = v[r * p + k];
        }
    }
    Ok(SpectralDecomp { eigenvalues, eigenvectors })
}

/// Projection onto `{X ⪰ 0 : σ_max(X) ≤ radius}`: eigenvalues clamped to `[0, radius]`.
pub fn project_psd_ball(x: &SymMatrix, radius: f64) -> Result<SymMatrix> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive and finite, got {radius}")));
    }
    let d = eig_sym(x)?;
    d.map(|t| t.clamp(0.0, radius))
}

/// `U·diag(g(σⱼ))·Uᵀ` for an eigendecomposition `X = U·diag(σ)·Uᵀ`.
pub fn apply_spectral(x: &SymMatrix, g: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    eig_sym(x)?.map(g)
}

/// Self-adjoint dilation `[0 M; Mᵀ 0]` of a row-major `rows × cols` matrix.
///
/// The nonzero eigenvalues of the dilation are `±σᵢ(M)`.
pub fn dilate(rows: usize, cols: usize, m: &[f64]) -> Result<SymMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("dilation needs a non-empty matrix"));
    }
    if m.len() != rows * cols {
        return Err(Error::invalid(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut out = SymMatrix::zeros(rows + cols);
    for i in 0..rows {
        for j in 0..cols {
            out.set(i, rows + j, m[i * cols + j]);
        }
    }
    Ok(out)
}

/// Number of eigenvalues strictly above `tol · max(1, σ_max)`.
pub fn numerical_rank(d: &SpectralDecomp, tol: f64) -> usize {
    let cut = tol * d.spectral_radius().max(1.0);
    d.eigenvalues.iter().filter(|&&w| w > cut).count()
}

/// [`numerical_rank`] of a matrix at [`DEFAULT_RANK_TOL`].
pub fn rank_of(x: &SymMatrix) -> Result<usize> {
    Ok(numerical_rank(&eig_sym(x)?, DEFAULT_RANK_TOL))
}
