//! Matrix functions: spectral projectors, resolvents, polar (sign/modulus)
//! parts and the principal square root by three independent routes.

use super::{eigvals, herm_eig, rel_diff, CMat, C64, ONE, ZERO};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Distance below which an eigenvalue counts as sitting on a projector threshold.
pub const THRESHOLD_GAP: f64 = 1e-12;
/// Eigenvalue estimates this close to (−∞, 0] are refused by the square root.
pub const CUT_GAP: f64 = 1e-8;
/// Required accuracy of any square root: ‖R² − M‖ ≤ SQRT_TOL·max(1, ‖M‖).
pub const SQRT_TOL: f64 = 1e-9;
/// Successive contour refinements must agree to this (relative).
pub const CONTOUR_SETTLE: f64 = 1e-10;
pub const CONTOUR_START_NODES: usize = 64;
pub const CONTOUR_MAX_DOUBLINGS: usize = 6;
const DB_MAX_ITER: usize = 50;

/// `f(M)` for Hermitian `M` through its eigendecomposition.
pub fn herm_apply(m: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    Ok(herm_eig(m)?.apply(f))
}

/// Positive semidefinite square root; negative round-off eigenvalues clamp to 0.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    herm_apply(m, |x| x.max(0.0).sqrt())
}

/// `E_λ`: sum of eigenprojectors with eigenvalue ≤ λ.
pub fn spectral_projector(m: &CMat, lambda: f64) -> Result<CMat> {
    let e = herm_eig(m)?;
    if let Some(&bad) = e.eigenvalues.iter().find(|&&x| (x - lambda).abs() < THRESHOLD_GAP) {
        return Err(Error::EigenvalueAtThreshold { eigenvalue: bad, threshold: lambda });
    }
    Ok(e.projector(|x| x <= lambda))
}

/// `(λ·I − M)⁻¹`
pub fn resolvent(m: &CMat, lambda: C64) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::DimMismatch("resolvent needs a square matrix".into()));
    }
    let spec = eigvals(m)?;
    if spec.iter().any(|z| (z - lambda).norm() < THRESHOLD_GAP) {
        return Err(Error::SingularShift { re: lambda.re, im: lambda.im });
    }
    let shifted = m.scale(-ONE).shift(lambda);
    let r = shifted.inverse().map_err(|_| Error::SingularShift { re: lambda.re, im: lambda.im })?;
    let resid = rel_diff(&shifted.mul(&r), &CMat::identity(m.rows()), 1.0);
    if resid > 1e-10 * (shifted.op_norm() * r.op_norm()).max(1.0) {
        return Err(Error::SingularShift { re: lambda.re, im: lambda.im });
    }
    Ok(r)
}

/// Sign / modulus decomposition `α = s·γ²` of an invertible Hermitian matrix.
#[derive(Clone, Debug)]
pub struct PolarData {
    /// Hermitian involution, the sign of α.
    pub sign: CMat,
    /// Positive square root of |α|.
    pub modulus: CMat,
}

pub fn sign_modulus(alpha: &CMat) -> Result<PolarData> {
    let e = herm_eig(alpha)?;
    let min_abs = e.eigenvalues.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if min_abs <= THRESHOLD_GAP {
        return Err(Error::KernelPresent { min_abs });
    }
    Ok(PolarData { sign: e.apply(f64::signum), modulus: e.apply(|x| x.abs().sqrt()) })
}

/// Sign/modulus parts without the invertibility requirement; the sign is
/// taken as +1 on the kernel.
pub(crate) fn polar_parts(alpha: &CMat) -> Result<PolarData> {
    let e = herm_eig(alpha)?;
    Ok(PolarData {
        sign: e.apply(|x| if x < 0.0 { -1.0 } else { 1.0 }),
        modulus: e.apply(|x| x.abs().sqrt()),
    })
}

/// Rectangle with vertices ε−iδ, N−iδ, N+iδ, ε+iδ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub eps: f64,
    pub delta: f64,
    pub big_n: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(eps: f64, delta: f64, big_n: f64, nodes: usize) -> Result<Self> {
        let spec = ContourSpec { eps, delta, big_n, nodes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Validation { field: "contour".into(), message: m.into() };
        if !(self.eps > 0.0) {
            return Err(bad("ε must be positive"));
        }
        if !(self.delta > 0.0) {
            return Err(bad("δ must be positive"));
        }
        if !(self.big_n > self.eps) {
            return Err(bad("N must exceed ε"));
        }
        if self.nodes < 16 || !self.nodes.is_multiple_of(2) {
            return Err(bad("node count must be even and at least 16"));
        }
        Ok(())
    }

    /// Rectangle fitted around a spectrum estimate: ε = ½·min Re λ,
    /// N = 2·spectral radius, δ = max(imaginary spread, 0.1·N), widened if
    /// needed so every estimate is strictly inside.
    pub fn around(spectrum: &[C64]) -> Result<Self> {
        let min_re = spectrum.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if !(min_re > 0.0) {
            return Err(Error::SpectrumOutsideContour);
        }
        let radius = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let max_im = spectrum.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
        let min_im = spectrum.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
        let abs_im = max_im.abs().max(min_im.abs());
        let big_n = 2.0 * radius;
        let delta = (max_im - min_im).max(0.1 * big_n).max(2.0 * abs_im);
        ContourSpec::new(0.5 * min_re, delta, big_n, CONTOUR_START_NODES)
    }

    fn encloses(&self, z: C64) -> bool {
        z.re > self.eps && z.re < self.big_n && z.im.abs() < self.delta
    }
}

/// Closed integration contour for the holomorphic functional calculus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contour {
    Rectangle(ContourSpec),
    Circle { center: C64, radius: f64, nodes: usize },
}

impl Contour {
    fn encloses(&self, z: C64) -> bool {
        match self {
            Contour::Rectangle(r) => r.encloses(z),
            Contour::Circle { center, radius, .. } => (z - center).norm() < *radius,
        }
    }

    /// Distance from the closed contour to the closest point of `pts`.
    fn gap(&self, pts: &[C64]) -> f64 {
        match self {
            Contour::Circle { center, radius, .. } => {
                pts.iter().map(|z| ((z - center).norm() - radius).abs()).fold(f64::INFINITY, f64::min)
            }
            Contour::Rectangle(r) => edges(r)
                .iter()
                .map(|(a, b)| pts.iter().map(|z| seg_dist(*z, *a, *b)).fold(f64::INFINITY, f64::min))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn edges(r: &ContourSpec) -> [(C64, C64); 4] {
    let v0 = C64::new(r.eps, -r.delta);
    let v1 = C64::new(r.big_n, -r.delta);
    let v2 = C64::new(r.big_n, r.delta);
    let v3 = C64::new(r.eps, r.delta);
    [(v0, v1), (v1, v2), (v2, v3), (v3, v0)]
}

fn seg_dist(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = ((z - a).re * d.re + (z - a).im * d.im) / d.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

/// sin⁶ periodizing substitution t(s) on [0, 1]: t′ vanishes to sixth order
/// at both ends, so the trapezoid rule on each edge sees a function whose
/// low odd derivatives vanish at the corners.
#[inline]
fn sidi6(s: f64) -> (f64, f64) {
    let (s1, c1) = (2.0 * PI * s).sin_cos();
    let (s2, c2) = (2.0 * s1 * c1, c1 * c1 - s1 * s1);
    let (s3, c3) = (s1 * (3.0 - 4.0 * s1 * s1), c1 * (4.0 * c1 * c1 - 3.0));
    let t = s - 1.5 * s1 / (2.0 * PI) + 0.6 * s2 / (4.0 * PI) - 0.1 * s3 / (6.0 * PI);
    let dt = 1.0 - 1.5 * c1 + 0.6 * c2 - 0.1 * c3;
    (t, dt)
}

/// Quadrature state for `(1/2πi)∮ f(λ)(λ − M)⁻¹ dλ` with nested node sets.
struct ContourRule {
    /// (start, end, nodes-per-edge) for rectangles; a single pseudo edge for circles.
    pieces: Vec<(C64, C64, usize)>,
    circle: Option<(C64, f64, usize)>,
}

impl ContourRule {
    fn new(contour: &Contour, spectrum: &[C64]) -> Self {
        match contour {
            Contour::Circle { center, radius, nodes } => {
                ContourRule { pieces: vec![], circle: Some((*center, *radius, *nodes)) }
            }
            Contour::Rectangle(r) => {
                // spread the node budget over the edges in proportion to
                // length / distance-to-singularities (spectrum and the cut at 0)
                let mut sing: Vec<C64> = spectrum.to_vec();
                sing.push(ZERO);
                let es = edges(r);
                let weights: Vec<f64> = es
                    .iter()
                    .map(|(a, b)| {
                        let d = sing.iter().map(|z| seg_dist(*z, *a, *b)).fold(f64::INFINITY, f64::min);
                        (b - a).norm() / d.max(1e-300)
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                let pieces = es
                    .iter()
                    .zip(&weights)
                    .map(|((a, b), w)| {
                        let m = ((r.nodes as f64) * w / total).round() as usize;
                        (*a, *b, m.max(4))
                    })
                    .collect();
                ContourRule { pieces, circle: None }
            }
        }
    }

    /// Sum over nodes at refinement `level` (level 0: all nodes; level k > 0:
    /// only the nodes new at that level), already multiplied by the weight of
    /// that level's grid.
    fn partial(&self, m: &CMat, f: &dyn Fn(C64) -> C64, level: usize) -> Result<CMat> {
        let n = m.rows();
        let mut acc = CMat::zeros(n, n);
        let factor = 1usize << level;
        let singular = || Error::ContourFailure("resolvent singular on contour".into());
        let mut add_node = |lam: C64, w: C64| -> Result<()> {
            if n == 1 {
                let d = lam - m[(0, 0)];
                if d == ZERO {
                    return Err(singular());
                }
                acc[(0, 0)] += f(lam) * w / d;
                return Ok(());
            }
            let inv = m.scale(-ONE).shift(lam).inverse().map_err(|_| singular())?;
            acc = acc.add(&inv.scale(f(lam) * w));
            Ok(())
        };
        if let Some((center, radius, nodes)) = self.circle {
            let k = nodes * factor;
            for j in 0..k {
                if level > 0 && j % 2 == 0 {
                    continue;
                }
                let th = 2.0 * PI * j as f64 / k as f64;
                let e = C64::new(th.cos(), th.sin());
                let lam = center + e * radius;
                // dλ = i·r·e^{iθ} dθ, and 1/(2πi) ∮ → (1/k)·Σ r e^{iθ}
                add_node(lam, e * radius / k as f64)?;
            }
        } else {
            for &(a, b, m0) in &self.pieces {
                let k = m0 * factor;
                for j in 1..k {
                    if level > 0 && j % 2 == 0 {
                        continue;
                    }
                    let (t, dt) = sidi6(j as f64 / k as f64);
                    let lam = a + (b - a) * t;
                    let w = (b - a) * dt / (k as f64) / C64::new(0.0, 2.0 * PI);
                    add_node(lam, w)?;
                }
            }
        }
        Ok(acc)
    }
}

/// `(1/2πi)∮ f(λ)(λ − M)⁻¹ dλ` by nested trapezoid rules, doubling the node
/// count until two successive results agree to `CONTOUR_SETTLE`.
pub(crate) fn contour_calculus(m: &CMat, contour: &Contour, f: &dyn Fn(C64) -> C64) -> Result<CMat> {
    let spectrum = eigvals(m)?;
    if spectrum.iter().any(|z| !contour.encloses(*z)) {
        return Err(Error::SpectrumOutsideContour);
    }
    if contour.gap(&spectrum) < THRESHOLD_GAP {
        return Err(Error::ContourFailure("spectrum touches the contour".into()));
    }
    let rule = ContourRule::new(contour, &spectrum);
    let mut current = rule.partial(m, f, 0)?;
    let mut change = f64::INFINITY;
    for level in 1..=CONTOUR_MAX_DOUBLINGS {
        let fresh = rule.partial(m, f, level)?;
        let next = current.scale_re(0.5).add(&fresh);
        change = rel_diff(&next, &current, next.norm_fro());
        current = next;
        if change < CONTOUR_SETTLE {
            return Ok(current);
        }
    }
    Err(Error::ContourTooTight { change })
}

/// Principal square root through the resolvent integral on `contour`.
pub fn contour_sqrt(m: &CMat, contour: &Contour) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::DimMismatch("square root needs a square matrix".into()));
    }
    check_cut(m)?;
    let mut r = contour_calculus(m, contour, &|z: C64| z.sqrt())?;
    if m.is_real() {
        r = real_part(&r);
    }
    let resid = rel_diff(&r.mul(&r), m, m.op_norm());
    if resid > SQRT_TOL {
        return Err(Error::ContourTooTight { change: resid });
    }
    Ok(r)
}

/// Scaled Denman–Beavers iteration, the independent cross-check route.
pub fn denman_beavers_sqrt(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::DimMismatch("square root needs a square matrix".into()));
    }
    check_cut(m)?;
    let n = m.rows();
    let mut y = m.clone();
    let mut z = CMat::identity(n);
    let mut scaling = true;
    for _ in 0..DB_MAX_ITER {
        let yi = y.inverse()?;
        let zi = z.inverse()?;
        let mu = if scaling {
            let d = (y.det() * z.det()).norm();
            if d > 0.0 && d.is_finite() {
                d.powf(-1.0 / (2.0 * n as f64))
            } else {
                1.0
            }
        } else {
            1.0
        };
        let y_next = y.scale_re(mu).add(&zi.scale_re(1.0 / mu)).scale_re(0.5);
        let z_next = z.scale_re(mu).add(&yi.scale_re(1.0 / mu)).scale_re(0.5);
        let step = rel_diff(&y_next, &y, y_next.norm_fro());
        y = y_next;
        z = z_next;
        if step < 1e-2 {
            scaling = false;
        }
        if step < 1e-15 {
            break;
        }
    }
    if m.is_real() {
        y = real_part(&y);
    }
    // one Newton polish: Y ← ½(Y + Y⁻¹M)
    if let Ok(yi) = y.inverse() {
        let polished = y.add(&yi.mul(m)).scale_re(0.5);
        if rel_diff(&polished.mul(&polished), m, 1.0) <= rel_diff(&y.mul(&y), m, 1.0) {
            y = polished;
        }
    }
    let resid = rel_diff(&y.mul(&y), m, m.op_norm());
    if resid > SQRT_TOL {
        return Err(Error::NoConvergence { what: "Denman–Beavers", iterations: DB_MAX_ITER });
    }
    Ok(y)
}

/// Route for [`principal_sqrt`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SqrtMethod {
    /// Eigendecomposition; Hermitian positive input only.
    Eig,
    /// Resolvent integral over the given rectangle; `None` fits one around
    /// the spectrum estimate.
    Contour(Option<ContourSpec>),
    /// Scaled Denman–Beavers.
    Iteration,
}

/// Principal square root (branch cut on the negative reals; real input maps
/// to real output).
pub fn principal_sqrt(m: &CMat, method: SqrtMethod) -> Result<CMat> {
    match method {
        SqrtMethod::Eig => {
            let e = herm_eig(m)?;
            if let Some(&l) = e.eigenvalues.first() {
                if l <= CUT_GAP {
                    return Err(Error::SpectrumOnCut { re: l, im: 0.0 });
                }
            }
            Ok(e.apply(f64::sqrt))
        }
        SqrtMethod::Contour(spec) => {
            let spec = match spec {
                Some(s) => {
                    s.validate()?;
                    s
                }
                None => {
                    check_cut(m)?;
                    ContourSpec::around(&eigvals(m)?)?
                }
            };
            contour_sqrt(m, &Contour::Rectangle(spec))
        }
        SqrtMethod::Iteration => denman_beavers_sqrt(m),
    }
}

fn check_cut(m: &CMat) -> Result<()> {
    let scale = m.max_abs().max(1.0);
    for z in eigvals(m)? {
        let dist = if z.re <= 0.0 { z.im.abs() } else { z.norm() };
        if dist < CUT_GAP * scale {
            return Err(Error::SpectrumOnCut { re: z.re, im: z.im });
        }
    }
    Ok(())
}

fn real_part(m: &CMat) -> CMat {
    CMat::from_fn(m.rows(), m.cols(), |i, j| C64::new(m[(i, j)].re, 0.0))
}
