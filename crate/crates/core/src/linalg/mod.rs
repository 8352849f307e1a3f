//! Dense complex matrices at small fiber dimension.
//!
//! Everything here is written for dimensions up to about eight; no blocking,
//! no pivot-free shortcuts. Fiber fields call into these kernels tens of
//! thousands of times, so the routines avoid allocation beyond the result.

mod eig;
mod funcs;

pub use eig::{eigvals, herm_eig, HermitianEig, MAX_JACOBI_SWEEPS};
pub use funcs::{
    contour_sqrt, denman_beavers_sqrt, herm_apply, principal_sqrt, psd_sqrt, resolvent,
    sign_modulus, spectral_projector, Contour, ContourSpec, PolarData, SqrtMethod,
};
pub(crate) use funcs::polar_parts;
pub use funcs::{CONTOUR_START_NODES, THRESHOLD_GAP};

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance used to certify the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(x: C64) -> Self {
        CMat { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = C64::new(x, 0.0);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Dimension of a square matrix.
    #[inline]
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub: shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "mul: inner dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    /// `self + s·I`
    pub fn shift(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += s;
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Symmetry defect `max |M − M*|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square() && self.hermitian_defect() <= HERMITIAN_TOL * self.norm_fro().max(1.0)
    }

    /// `(M + M*)/2`
    pub fn hermitian_part(&self) -> CMat {
        self.add(&self.adjoint()).scale_re(0.5)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        // exactly Hermitian input: |λ| keeps tiny values that squaring would lose
        if self.is_square() && self.hermitian_defect() == 0.0 {
            if let Ok(e) = herm_eig(self) {
                let mut s: Vec<f64> = e.eigenvalues.iter().map(|x| x.abs()).collect();
                s.sort_by(|a, b| b.total_cmp(a));
                return s;
            }
        }
        let gram = if self.rows >= self.cols {
            self.adjoint().mul(self)
        } else {
            self.mul(&self.adjoint())
        };
        let gram = gram.hermitian_part();
        let eig = herm_eig(&gram).expect("Gram matrix is Hermitian by construction");
        let mut s: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).collect();
        s.reverse();
        s
    }

    /// Operator 2-norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.singular_values()[0]
    }

    /// Smallest singular value of a square matrix; for a rectangular matrix
    /// the smallest of the min(rows, cols) values.
    pub fn min_singular(&self) -> f64 {
        self.singular_values().last().copied().unwrap_or(0.0)
    }

    /// LU factorization with partial pivoting; returns (LU, pivots, sign).
    fn lu(&self) -> Result<(CMat, Vec<usize>, f64)> {
        if !self.is_square() {
            return Err(Error::DimMismatch("LU of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.max_abs();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= f64::MIN_POSITIVE || best <= 1e-300 * scale.max(1e-300) {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                sign = -sign;
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)] / d;
                a[(i, k)] = l;
                if l != ZERO {
                    for j in k + 1..n {
                        let u = a[(k, j)];
                        a[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok((a, piv, sign))
    }

    pub fn det(&self) -> C64 {
        match self.lu() {
            Ok((lu, _, sign)) => {
                let mut d = C64::new(sign, 0.0);
                for i in 0..lu.rows {
                    d *= lu[(i, i)];
                }
                d
            }
            Err(_) => ZERO,
        }
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &CMat) -> Result<CMat> {
        let (lu, piv, _) = self.lu()?;
        let n = self.rows;
        if rhs.rows != n {
            return Err(Error::DimMismatch("solve: rhs rows".into()));
        }
        let m = rhs.cols;
        let mut x = CMat::zeros(n, m);
        for (i, &p) in piv.iter().enumerate() {
            for j in 0..m {
                x[(i, j)] = rhs[(p, j)];
            }
        }
        for j in 0..m {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / lu[(i, i)];
            }
        }
        if !x.is_finite() {
            return Err(Error::Singular);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve(&CMat::identity(self.rows))
    }

    /// Block diagonal `diag(self, other)`.
    pub fn block_diag(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.cols, "vstack: column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        CMat { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Sub-block `rows r0..r1`, `cols c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CMat {
        CMat::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }
}

/// Relative residual `‖a − b‖_F / max(1, scale)`.
pub fn rel_diff(a: &CMat, b: &CMat, scale: f64) -> f64 {
    a.sub(b).norm_fro() / scale.max(1.0)
}
