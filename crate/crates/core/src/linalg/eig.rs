use super::{CMat, C64, HERMITIAN_TOL, ONE, ZERO};
use crate::error::{Error, Result};

pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Convergence threshold on the off-diagonal Frobenius mass, relative to ‖M‖_F.
const JACOBI_OFF_TOL: f64 = 1e-14;

/// Spectral decomposition `M = V·diag(λ)·V*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: CMat,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V·diag(f(λ))·V*`
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let v = &self.eigenvectors;
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        CMat::from_fn(n, n, |i, j| {
            let mut s = ZERO;
            for k in 0..n {
                if w[k] != 0.0 {
                    s += v[(i, k)] * v[(j, k)].conj() * w[k];
                }
            }
            s
        })
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply(|x| x)
    }

    /// Orthogonal projector onto the span of eigenvectors selected by `keep`.
    pub fn projector(&self, keep: impl Fn(f64) -> bool) -> CMat {
        self.apply(|l| if keep(l) { 1.0 } else { 0.0 })
    }
}

/// Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.
///
/// Sweeps run in row-major `(p, q)` order and stop once the off-diagonal
/// Frobenius mass drops below `1e-14·‖M‖_F`. Output is sorted ascending and
/// every eigenvector is rotated so that its first entry of largest modulus is
/// real and positive, which makes the result a deterministic function of the
/// input bits.
pub fn herm_eig(m: &CMat) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::DimMismatch("herm_eig needs a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    let norm = m.norm_fro();
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOL * norm.max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let mut a = m.hermitian_part();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = CMat::identity(n);

    let mut converged = norm == 0.0;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[(p, q)].norm_sqr();
                }
            }
        }
        if off.sqrt() <= JACOBI_OFF_TOL * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[(p, q)].norm_sqr();
                }
            }
        }
        if off.sqrt() > JACOBI_OFF_TOL * norm {
            return Err(Error::NoConvergence { what: "cyclic Jacobi", iterations: MAX_JACOBI_SWEEPS });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        // phase tie-break: first entry of largest modulus becomes real positive
        let mut best = 0.0;
        for i in 0..n {
            best = f64::max(best, v[(i, k)].norm());
        }
        let mut phase = ONE;
        for i in 0..n {
            let z = v[(i, k)];
            if z.norm() >= best * (1.0 - 1e-12) {
                phase = z.conj() / z.norm();
                break;
            }
        }
        for i in 0..n {
            vecs[(i, col)] = v[(i, k)] * phase;
        }
        for i in 0..n {
            if vecs[(i, col)] != ZERO && vecs[(i, col)].norm() >= best * (1.0 - 1e-12) {
                vecs[(i, col)] = C64::new(vecs[(i, col)].norm(), 0.0);
                break;
            }
        }
    }
    Ok(HermitianEig { eigenvalues, eigenvectors: vecs })
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
///
/// The unitary is `U = diag(1, e^{-iφ})·R(θ)` on the `(p, q)` plane, where
/// `φ = arg a_pq` makes the pivot block real and `R` is the classical real
/// rotation.
fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // skip rotations that cannot change the diagonal in floating point
    if r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph = apq / r;
    let phc = ph.conj();

    // A ← A·U
    for k in 0..n {
        let x = a[(k, p)];
        let y = a[(k, q)];
        a[(k, p)] = x * c - y * phc * s;
        a[(k, q)] = x * s + y * phc * c;
    }
    // A ← U*·A
    for k in 0..n {
        let x = a[(p, k)];
        let y = a[(q, k)];
        a[(p, k)] = x * c - ph * y * s;
        a[(q, k)] = x * s + ph * y * c;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    // V ← V·U
    for k in 0..n {
        let x = v[(k, p)];
        let y = v[(k, q)];
        v[(k, p)] = x * c - y * phc * s;
        v[(k, q)] = x * s + y * phc * c;
    }
}

/// Complex Givens rotation `G` with `G·[a; b] = [r; 0]`, stored as `(c1, c2)`
/// where `G = [[conj(c1), conj(c2)], [−c2, c1]]`.
#[inline]
fn givens(a: C64, b: C64) -> Option<(C64, C64)> {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 || b == ZERO {
        return None;
    }
    Some((a / r, b / r))
}

/// Eigenvalues of a general complex square matrix (Hessenberg reduction
/// followed by single-shift QR with Wilkinson shifts).
///
/// Returned in the order they deflate; callers sort as needed.
pub fn eigvals(m: &CMat) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::DimMismatch("eigvals needs a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    let mut h = m.clone();

    // Hessenberg form by Givens similarity transforms.
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            if let Some((c1, c2)) = givens(h[(i - 1, j)], h[(i, j)]) {
                apply_rows(&mut h, i - 1, i, c1, c2, 0, n);
                apply_cols(&mut h, i - 1, i, c1, c2, 0, n);
                h[(i, j)] = ZERO;
            }
        }
    }

    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            out.push(h[(0, 0)]);
            break;
        }
        // locate the active unreduced block [lo, hi)
        let mut lo = hi - 1;
        while lo > 0 {
            let s = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let s = if s == 0.0 { scale } else { s };
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * s {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            out.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 60 * n {
            return Err(Error::NoConvergence { what: "Hessenberg QR", iterations: total });
        }
        let a = h[(hi - 2, hi - 2)];
        let b = h[(hi - 2, hi - 1)];
        let c = h[(hi - 1, hi - 2)];
        let d = h[(hi - 1, hi - 1)];
        let mut mu = if iter.is_multiple_of(11) {
            // exceptional shift
            d + C64::new(h[(hi - 1, hi - 2)].norm() * 0.75, 0.0)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() <= (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        if !mu.re.is_finite() || !mu.im.is_finite() {
            mu = d;
        }
        for k in lo..hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi - 1 {
            let g = givens(h[(k, k)], h[(k + 1, k)]);
            if let Some((c1, c2)) = g {
                apply_rows(&mut h, k, k + 1, c1, c2, lo, hi);
                h[(k + 1, k)] = ZERO;
            }
            rots.push(g);
        }
        for (idx, g) in rots.into_iter().enumerate() {
            let k = lo + idx;
            if let Some((c1, c2)) = g {
                apply_cols(&mut h, k, k + 1, c1, c2, lo, (k + 2).min(hi));
            }
        }
        for k in lo..hi {
            h[(k, k)] += mu;
        }
    }
    Ok(out)
}

/// rows (p, q) ← G·rows over columns c0..c1
fn apply_rows(h: &mut CMat, p: usize, q: usize, c1: C64, c2: C64, c0: usize, cend: usize) {
    for j in c0..cend {
        let x = h[(p, j)];
        let y = h[(q, j)];
        h[(p, j)] = c1.conj() * x + c2.conj() * y;
        h[(q, j)] = -c2 * x + c1 * y;
    }
}

/// columns (p, q) ← columns·G* over rows r0..r1
fn apply_cols(h: &mut CMat, p: usize, q: usize, c1: C64, c2: C64, r0: usize, rend: usize) {
    for i in r0..rend {
        let x = h[(i, p)];
        let y = h[(i, q)];
        h[(i, p)] = x * c1 + y * c2;
        h[(i, q)] = -x * c2.conj() + y * c1.conj();
    }
}
