//! Dense complex linear algebra for small matrices.
//!
//! Everything here is sized for single qudits (d ≤ 16) and modest tensor
//! powers of them. The Hermitian eigensolver is a cyclic complex Jacobi
//! iteration; all matrix functions (square roots, inverses) go through it.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Numerical tolerances shared by the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest tolerated |a_kl - conj(a_lk)| (relative to max(1, max|a|)).
    pub hermiticity: f64,
    /// Target Frobenius residual of an eigendecomposition.
    pub reconstruction: f64,
    /// Smallest eigenvalue accepted by `inv` / `inv_sqrt`.
    pub psd_floor: f64,
    /// Largest row or column count a tensor product may produce.
    pub max_dim: usize,
    /// Jacobi sweep cap.
    pub max_sweeps: usize,
}

pub const TOLERANCES: Tolerances = Tolerances {
    hermiticity: 1e-12,
    reconstruction: 1e-10,
    psd_floor: 1e-12,
    max_dim: 4096,
    max_sweeps: 100,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for col in 0..self.cols {
                let z = self[(r, col)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, col| if r == col { c(1.0, 0.0) } else { C64::default() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for col in 0..cols {
                data.push(f(r, col));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, col| if r == col { c(diag[r], 0.0) } else { C64::default() })
    }

    /// |u⟩⟨v|
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, col| u[r] * v[col].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, col)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, col| self[(col, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|k| self[(k, k)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matvec shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        assert!(
            self.rows == other.cols && self.cols == other.rows,
            "trace_product shape mismatch"
        );
        let mut acc = C64::default();
        for r in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(r, k)] * other[(k, r)];
            }
        }
        acc
    }

    /// Kronecker product, refused when either output dimension exceeds `cap`.
    pub fn kron_capped(&self, other: &ComplexMatrix, cap: usize) -> Result<Self> {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        if rows.max(cols) > cap {
            return Err(Error::Capacity {
                dim: rows.max(cols),
                cap,
            });
        }
        let mut out = Self::zeros(rows, cols);
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self[(ar, ac)];
                if a == C64::default() {
                    continue;
                }
                for br in 0..other.rows {
                    let row = ar * other.rows + br;
                    for bc in 0..other.cols {
                        out.data[row * cols + ac * other.cols + bc] = a * other[(br, bc)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest |a_kl - conj(a_lk)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for col in r..self.cols {
                worst = worst.max((self[(r, col)] - self[(col, r)].conj()).norm());
            }
        }
        worst
    }
}

/// Kronecker product with the default capacity cap.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.kron_capped(b, TOLERANCES.max_dim)
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, col): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, col): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + col]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::default() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// A square complex matrix that is exactly Hermitian.
///
/// Construction checks the Hermiticity defect and then replaces the input by
/// `(A + A†)/2`, so downstream code can rely on exact symmetry.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.0)
    }
}

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let defect = m.hermiticity_defect();
        if defect > TOLERANCES.hermiticity * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: defect });
        }
        Ok(Self::symmetrized(m))
    }

    /// `(A + A†)/2` without checking how far `A` was from Hermitian.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "symmetrized needs a square matrix");
        let n = m.rows;
        let mut out = m;
        for r in 0..n {
            out[(r, r)] = c(out[(r, r)].re, 0.0);
            for col in r + 1..n {
                let avg = (out[(r, col)] + out[(col, r)].conj()) * 0.5;
                out[(r, col)] = avg;
                out[(col, r)] = avg.conj();
            }
        }
        Self(out)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    /// |v⟩⟨v| (not normalised).
    pub fn ket_bra(v: &[C64]) -> Self {
        Self::symmetrized(ComplexMatrix::outer(v, v))
    }

    /// Orthogonal projector onto the line through `v`.
    pub fn projector(v: &[C64]) -> Self {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        Self::ket_bra(v).scale(1.0 / norm2)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// tr(AB), real for Hermitian A and B.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_re(s))
    }

    /// `U A U†`
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::symmetrized(&(u * &self.0) * &u.adjoint())
    }

    pub fn tensor(&self, other: &HermitianMatrix) -> Result<Self> {
        Ok(Self(tensor(&self.0, &other.0)?))
    }

    pub fn eig(&self) -> Result<Eigen> {
        eig_hermitian(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values[0])
    }

    pub fn psd_function(&self, f: PsdFunction) -> Result<Self> {
        psd_function(self, f, TOLERANCES.psd_floor)
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.psd_function(PsdFunction::Sqrt)
    }

    pub fn inv(&self) -> Result<Self> {
        self.psd_function(PsdFunction::Inv)
    }

    pub fn inv_sqrt(&self) -> Result<Self> {
        self.psd_function(PsdFunction::InvSqrt)
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &HermitianMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &HermitianMatrix) -> ComplexMatrix {
        &self.0 * &rhs.0
    }
}

/// Eigendecomposition `A = V diag(values) V†`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V f(Λ) V†`
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = v[(r, k)] * w;
                for col in 0..n {
                    out[(r, col)] += vr * v[(col, k)].conj();
                }
            }
        }
        HermitianMatrix::symmetrized(out)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<Eigen> {
    let n = a.dim();
    let mut m = a.as_matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();
    let target = 1e-15 * scale;

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for col in r + 1..n {
                s += m[(r, col)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    let trivial = n < 2 || scale == 0.0;
    while !trivial && off_norm(&m) > target {
        if sweeps == TOLERANCES.max_sweeps {
            return Err(Error::NumericalFailure {
                sweeps,
                residual: off_norm(&m),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                if mag < 1e-18 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = C64::default();
                    m[(q, p)] = C64::default();
                    continue;
                }
                // Unphase the (p, q) entry, then apply a real Jacobi rotation.
                let phase_conj = (apq / mag).conj();
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let j_pp = c(cs, 0.0);
                let j_pq = c(sn, 0.0);
                let j_qp = phase_conj * (-sn);
                let j_qq = phase_conj * cs;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * j_pp + mkq * j_qp;
                    m[(k, q)] = mkp * j_pq + mkq * j_qq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = j_pp.conj() * mpk + j_qp.conj() * mqk;
                    m[(q, k)] = j_pq.conj() * mpk + j_qq.conj() * mqk;
                }
                m[(p, q)] = C64::default();
                m[(q, p)] = C64::default();
                m[(p, p)] = c(m[(p, p)].re, 0.0);
                m[(q, q)] = c(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * j_pp + vkq * j_qp;
                    v[(k, q)] = vkp * j_pq + vkq * j_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    Ok(Eigen { values, vectors })
}

/// Spectral functions applied by [`psd_function`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdFunction {
    Sqrt,
    Inv,
    InvSqrt,
}

/// `V f(Λ) V†` for a positive semidefinite `A`.
///
/// Eigenvalues within round-off of zero are clamped before `Sqrt`; `Inv` and
/// `InvSqrt` refuse any eigenvalue at or below `floor`.
pub fn psd_function(a: &HermitianMatrix, f: PsdFunction, floor: f64) -> Result<HermitianMatrix> {
    let eig = a.eig()?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);
    let negativity = 1e-10 * hi.abs().max(1.0);
    if lo < -negativity {
        return Err(Error::NotPsd { eigenvalue: lo });
    }
    match f {
        PsdFunction::Sqrt => Ok(eig.reassemble(|x| x.max(0.0).sqrt())),
        PsdFunction::Inv | PsdFunction::InvSqrt => {
            if lo <= floor {
                return Err(Error::SingularMatrix {
                    eigenvalue: lo,
                    floor,
                });
            }
            if f == PsdFunction::Inv {
                Ok(eig.reassemble(|x| 1.0 / x))
            } else {
                Ok(eig.reassemble(|x| 1.0 / x.sqrt()))
            }
        }
    }
}

/// Real symmetric matrix; construction symmetrises exactly.
#[derive(Clone, PartialEq)]
pub struct RealSymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for RealSymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl RealSymMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{dim}x{dim} matrix needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        Ok(m)
    }

    /// Builds from rows, rejecting ragged or visibly asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("matrix rows must all have length equal to the row count".into()));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(1.0_f64, |acc, x| acc.max(x.abs()));
        for i in 0..dim {
            for j in i + 1..dim {
                let gap = (rows[i][j] - rows[j][i]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::Shape(format!(
                        "matrix is not symmetric: entry ({i},{j}) differs from ({j},{i}) by {gap:e}"
                    )));
                }
            }
        }
        Self::new(dim, rows.concat())
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// v vᵀ
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// tr(AB) = Σ a_ij b_ij for symmetric A, B.
    pub fn trace_product(&self, other: &RealSymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "trace_product shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "matvec shape mismatch");
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// vᵀ A v
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `S A S` for symmetric `S`.
    pub fn congruence(&self, s: &RealSymMatrix) -> Self {
        let n = self.dim;
        assert_eq!(n, s.dim, "congruence shape mismatch");
        let mut sa = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let sik = s.get(i, k);
                for j in 0..n {
                    sa[i * n + j] += sik * self.get(k, j);
                }
            }
        }
        Self::from_fn(n, |i, j| (0..n).map(|k| sa[i * n + k] * s.get(k, j)).sum())
    }

    /// Restriction to the given rows and columns.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(ComplexMatrix::from_fn(self.dim, self.dim, |i, j| {
            c(self.get(i, j), 0.0)
        }))
    }

    pub fn eig(&self) -> Result<RealEigen> {
        let e = self.to_hermitian().eig()?;
        let n = self.dim;
        let vectors = (0..n)
            .map(|k| (0..n).map(|r| e.vectors[(r, k)].re).collect())
            .collect();
        Ok(RealEigen {
            values: e.values,
            vectors,
        })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values.first().copied().unwrap_or(0.0))
    }

    pub fn is_psd(&self, floor: f64) -> Result<bool> {
        Ok(self.dim == 0 || self.min_eigenvalue()? >= floor)
    }

    pub fn psd_function(&self, f: PsdFunction) -> Result<Self> {
        let h = psd_function(&self.to_hermitian(), f, TOLERANCES.psd_floor)?;
        Ok(Self::from_fn(self.dim, |i, j| h.as_matrix()[(i, j)].re))
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.psd_function(PsdFunction::Sqrt)
    }

    pub fn inv(&self) -> Result<Self> {
        self.psd_function(PsdFunction::Inv)
    }

    pub fn inv_sqrt(&self) -> Result<Self> {
        self.psd_function(PsdFunction::InvSqrt)
    }
}

impl Add for &RealSymMatrix {
    type Output = RealSymMatrix;

    fn add(self, rhs: &RealSymMatrix) -> RealSymMatrix {
        assert_eq!(self.dim, rhs.dim, "add shape mismatch");
        RealSymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &RealSymMatrix {
    type Output = RealSymMatrix;

    fn sub(self, rhs: &RealSymMatrix) -> RealSymMatrix {
        assert_eq!(self.dim, rhs.dim, "sub shape mismatch");
        RealSymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Serialize for RealSymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealSymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        RealSymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Real eigendecomposition, eigenvalues ascending; `vectors[k]` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct RealEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_z() -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn herm(rows: &[&[(f64, f64)]]) -> HermitianMatrix {
        let n = rows.len();
        let data = rows.iter().flat_map(|r| r.iter().map(|&(a, b)| c(a, b))).collect();
        HermitianMatrix::new(ComplexMatrix::new(n, n, data).unwrap()).unwrap()
    }

    fn reconstruction_residual(a: &HermitianMatrix) -> f64 {
        let e = a.eig().unwrap();
        let back = e.reassemble(|x| x);
        (back.as_matrix() - a.as_matrix()).frobenius_norm()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = HermitianMatrix::identity(2).eig().unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn sigma_z_eigenpairs() {
        let e = sigma_z().eig().unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        // |↓⟩ for -1, |↑⟩ for +1
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_4x4_reconstruction() {
        let a = herm(&[
            &[(2.0, 0.0), (0.3, 0.7), (-1.1, 0.2), (0.0, -0.4)],
            &[(0.3, -0.7), (-0.5, 0.0), (0.25, 0.25), (1.3, 0.0)],
            &[(-1.1, -0.2), (0.25, -0.25), (0.9, 0.0), (0.6, -0.8)],
            &[(0.0, 0.4), (1.3, 0.0), (0.6, 0.8), (-1.7, 0.0)],
        ]);
        assert!(reconstruction_residual(&a) <= 1e-10);
        let e = a.eig().unwrap();
        let vtv = &e.vectors.adjoint() * &e.vectors;
        assert!((&vtv - &ComplexMatrix::identity(4)).frobenius_norm() <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn sqrt_of_identity() {
        let s = HermitianMatrix::identity(3).sqrt().unwrap();
        assert!((s.as_matrix() - &ComplexMatrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn inverse_of_diagonal() {
        let inv = HermitianMatrix::from_real_diagonal(&[2.0, 4.0]).inv().unwrap();
        assert!((inv.as_matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((inv.as_matrix()[(1, 1)].re - 0.25).abs() < 1e-15);
        assert!(inv.as_matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn singular_inverse_names_eigenvalue() {
        let err = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).inv().unwrap_err();
        match err {
            Error::SingularMatrix { eigenvalue, floor } => {
                assert_eq!(eigenvalue, 0.0);
                assert_eq!(floor, 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            HermitianMatrix::from_real_diagonal(&[1.0, 1e-13]).inv_sqrt(),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        assert!(matches!(sigma_z().sqrt(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn tensor_identities() {
        let i4 = tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(i4, ComplexMatrix::identity(4));
        let zz = sigma_z().tensor(&sigma_z()).unwrap();
        assert_eq!(zz, HermitianMatrix::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn tensor_capacity() {
        let big = ComplexMatrix::identity(64);
        assert_eq!(tensor(&big, &big).unwrap().rows(), 4096);
        let bigger = ComplexMatrix::identity(65);
        assert!(matches!(tensor(&big, &bigger), Err(Error::Capacity { dim: 4160, cap: 4096 })));
    }

    #[test]
    fn real_sym_functions() {
        let a = RealSymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let s = a.sqrt().unwrap();
        let back = RealSymMatrix::identity(2).congruence(&s);
        // S·I·S = S² = A
        assert!((&back - &a).max_abs() < 1e-12);
        let inv = a.inv().unwrap();
        let id = a.congruence(&inv.sqrt().unwrap());
        assert!((&id - &RealSymMatrix::identity(2)).max_abs() < 1e-12);
        assert!(RealSymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn real_eigenvectors_are_real_and_orthonormal() {
        let a = RealSymMatrix::from_rows(&[
            vec![4.0, -1.0, 0.5],
            vec![-1.0, 2.0, 0.0],
            vec![0.5, 0.0, 1.0],
        ])
        .unwrap();
        let e = a.eig().unwrap();
        for (k, v) in e.vectors.iter().enumerate() {
            let av = a.matvec(v);
            for i in 0..3 {
                assert!((av[i] - e.values[k] * v[i]).abs() < 1e-12);
            }
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
    }
}
