use super::{sup_residual, CertificateKind, CongruenceCertificate, CONGRUENCE_TOL, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::field::{common_fibers, grid_point, mask_intervals, sup_norm, OperatorField, DEFAULT_GRID};
use crate::linalg::{contour_sqrt, herm_eig, polar_parts, CMat, Contour, C64, CONTOUR_START_NODES, THRESHOLD_GAP};
use crate::torsion::COMMUTE_TOL;
use rayon::prelude::*;

/// Margin kept below 1 in the smallness condition `‖α‖·‖F‖ < 1`.
pub const SMALLNESS_MARGIN: f64 = 1e-3;

/// Spectral cut of a Hermitian field at `|λ| < ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct Excision {
    pub eps: f64,
    /// Spectral projector of `|α| < ε`.
    pub q: OperatorField,
    pub p: OperatorField,
    /// `αQ`.
    pub alpha_q: OperatorField,
    /// `αQ + sP`, invertible off the torsion and congruent to `α`.
    pub restricted: OperatorField,
    /// Cells of the grid where something was cut away.
    pub excised: Vec<(f64, f64)>,
    /// `α = h*(αQ + sP)h` with `h = Q + |α|^{1/2}P`.
    pub certificate: CongruenceCertificate,
}

/// Moves `eps` inside `[eps/2, eps]` to the middle of the widest gap between
/// the given moduli, so no eigenvalue sits on the cut.
pub(crate) fn nudge_threshold(moduli: &[f64], eps: f64) -> f64 {
    let lo = 0.5 * eps;
    let near = |m: &f64| (m - eps).abs() <= 1e-9 * eps;
    let mut inside: Vec<f64> = moduli.iter().copied().filter(|m| (lo..=eps).contains(m)).collect();
    if inside.is_empty() && !moduli.iter().any(near) {
        return eps;
    }
    inside.push(lo);
    inside.push(eps);
    inside.sort_by(f64::total_cmp);
    let (a, b) = inside.windows(2).map(|w| (w[0], w[1])).fold((lo, lo), |best, w| {
        if w.1 - w.0 > best.1 - best.0 {
            w
        } else {
            best
        }
    });
    0.5 * (a + b)
}

struct ExcisedFiber {
    q: CMat,
    alpha_q: CMat,
    restricted: CMat,
    h: CMat,
    cut: bool,
}

pub fn excise_spectral(alpha: &OperatorField, eps: f64) -> Result<Excision> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Validation { field: "eps".into(), message: format!("ε must be positive, got {eps}") });
    }
    if !alpha.is_hermitian() {
        return Err(Error::NotHermitian { defect: alpha.hermitian_defect() });
    }
    let n = alpha.grid_or(DEFAULT_GRID);
    let a = alpha.fibers_at(n)?;
    let gap = THRESHOLD_GAP * sup_norm(&a).max(1.0);
    let fibers: Vec<ExcisedFiber> = a
        .par_iter()
        .map(|m| {
            let e = herm_eig(m)?;
            if let Some(&l) = e.eigenvalues.iter().find(|l| (l.abs() - eps).abs() < gap) {
                return Err(Error::EigenvalueAtThreshold { eigenvalue: l, threshold: eps });
            }
            let keep = |l: f64| l.abs() < eps;
            Ok(ExcisedFiber {
                q: e.projector(keep),
                alpha_q: e.apply(|l| if keep(l) { l } else { 0.0 }),
                restricted: e.apply(|l| if keep(l) { l } else { l.signum() }),
                h: e.apply(|l| if keep(l) { 1.0 } else { l.abs().sqrt() }),
                cut: !e.eigenvalues.iter().all(|&l| keep(l)),
            })
        })
        .collect::<Result<_>>()?;
    let residual = {
        let rebuilt: Vec<CMat> = fibers.par_iter().map(|x| x.h.adjoint().mul(&x.restricted).mul(&x.h)).collect();
        sup_residual(&rebuilt, &a, sup_norm(&a))
    };
    if residual > CONGRUENCE_TOL {
        return Err(Error::CertificateFailed(format!("α − h*(αQ + sP)h has relative norm {residual:e}")));
    }
    let dim = alpha.dim();
    let excised = mask_intervals(&fibers.iter().map(|x| x.cut).collect::<Vec<_>>());
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut alpha_q = Vec::with_capacity(n);
    let mut restricted = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    for x in fibers {
        p.push(CMat::identity(dim).sub(&x.q));
        q.push(x.q);
        alpha_q.push(x.alpha_q);
        restricted.push(x.restricted);
        h.push(x.h);
    }
    let mut certificate = CongruenceCertificate::new(CertificateKind::ExcisionPair, OperatorField::sampled(h)?, residual);
    certificate.eps = Some(eps);
    certificate.excised = excised.clone();
    Ok(Excision {
        eps,
        q: OperatorField::sampled(q)?,
        p: OperatorField::sampled(p)?,
        alpha_q: OperatorField::sampled(alpha_q)?,
        restricted: OperatorField::sampled(restricted)?,
        excised,
        certificate,
    })
}

struct IsoFiber {
    h: CMat,
    /// Residuals of `h² = M`, `s h₂ = h* s`, `γ h₁ = h₂ γ`, `γ h = h₁ γ`.
    ids: [f64; 4],
    residual: f64,
}

fn rel(a: &CMat, b: &CMat, scale: f64) -> f64 {
    a.sub(b).op_norm() / scale.max(1.0)
}

/// Square roots of `1 + γF̃sγ`, `1 + γ²F̃s`, `1 + F̃sγ²` on the circle
/// `|λ − 1| = (1 + q)/2`, `q = ‖γF̃sγ‖`, and the resulting congruence
/// `Q g*βg Q = h*(αQ)h`.
fn iso_fiber(alpha_q: &CMat, fq: &CMat, target: &CMat, beta_norm: f64) -> Result<IsoFiber> {
    let d = alpha_q.rows();
    let id = CMat::identity(d);
    let polar = polar_parts(alpha_q)?;
    let (s, g) = (&polar.sign, &polar.modulus);
    let m1 = id.add(&g.mul(fq).mul(s).mul(g));
    let m2 = id.add(&g.mul(g).mul(fq).mul(s));
    let m = id.add(&fq.mul(s).mul(g).mul(g));
    let q = m1.sub(&id).op_norm();
    let (h1, h2, h) = if q == 0.0 {
        (id.clone(), id.clone(), id.clone())
    } else {
        if q >= 1.0 {
            return Err(Error::ContourFailure(format!("‖γF̃sγ‖ = {q} leaves no room for the circle around 1")));
        }
        let circle = Contour::Circle { center: C64::new(1.0, 0.0), radius: 0.5 * (1.0 + q), nodes: CONTOUR_START_NODES };
        (contour_sqrt(&m1, &circle)?, contour_sqrt(&m2, &circle)?, contour_sqrt(&m, &circle)?)
    };
    let (gn, hn) = (g.op_norm(), h.op_norm().max(h1.op_norm()).max(h2.op_norm()));
    let ids = [
        rel(&h.mul(&h), &m, m.op_norm()),
        rel(&s.mul(&h2), &h.adjoint().mul(s), hn),
        rel(&g.mul(&h1), &h2.mul(g), gn * hn),
        rel(&g.mul(&h), &h1.mul(g), gn * hn),
    ];
    let residual = target.sub(&h.adjoint().mul(alpha_q).mul(&h)).op_norm() / beta_norm.max(1e-300);
    Ok(IsoFiber { h, ids, residual })
}

/// Congruence certificate for an isomorphism `(f, g): (A, α) → (B, β)` of
/// Hermitian objects with `f∘α = β∘g` and `f*g = 1 + Fα`.
///
/// When `‖α‖·‖F‖` is not below 1, `α` is first cut down to `|λ| < ε` with
/// `ε·‖F‖ = ½(1 − 10⁻³)`; the certificate then holds on the kept part only
/// and lists the excised cells.
pub fn excision_isometry(
    alpha: &OperatorField,
    beta: &OperatorField,
    f: &OperatorField,
    g: &OperatorField,
) -> Result<CongruenceCertificate> {
    for (name, x) in [("α", alpha), ("β", beta)] {
        if !x.is_hermitian() {
            return Err(Error::HypothesisViolated(format!("{name} is not Hermitian (defect {:e})", x.hermitian_defect())));
        }
    }
    let (n, v) = common_fibers(&[alpha, beta, f, g])?;
    let (a, b, f, g) = (&v[0], &v[1], &v[2], &v[3]);
    let (na, nb, nf, ng) = (sup_norm(a), sup_norm(b), sup_norm(f), sup_norm(g));
    let lhs: Vec<CMat> = (0..n).into_par_iter().map(|j| f[j].mul(&a[j])).collect();
    let rhs: Vec<CMat> = (0..n).into_par_iter().map(|j| b[j].mul(&g[j])).collect();
    let comm = sup_residual(&lhs, &rhs, 1.0) / (nf * na + nb * ng).max(1e-300);
    if comm > COMMUTE_TOL {
        return Err(Error::HypothesisViolated(format!("f∘α − β∘g has relative norm {comm:e}")));
    }

    let corr: Vec<CMat> = (0..n)
        .into_par_iter()
        .map(|j| a[j].solve(&g[j].adjoint().mul(&f[j]).sub(&CMat::identity(a[j].rows()))))
        .collect::<Result<_>>()?;
    let check = (0..n)
        .into_par_iter()
        .map(|j| {
            let want = CMat::identity(a[j].rows()).add(&corr[j].mul(&a[j]));
            f[j].adjoint().mul(&g[j]).sub(&want).op_norm()
        })
        .reduce(|| 0.0, f64::max)
        / (nf * ng).max(1.0);
    if !(check <= COMMUTE_TOL) {
        return Err(Error::HypothesisViolated(format!("f*g − 1 − Fα has relative norm {check:e}")));
    }
    let norm_f = sup_norm(&corr);
    if !norm_f.is_finite() {
        return Err(Error::SmallnessUnreachable("F is not finite".into()));
    }

    let cut = na * norm_f >= 1.0 - SMALLNESS_MARGIN;
    let (eps, aq, q) = if cut {
        let eps0 = 0.5 * (1.0 - SMALLNESS_MARGIN) / norm_f;
        if eps0 < 1e-12 * na.max(1.0) {
            return Err(Error::SmallnessUnreachable(format!("‖F‖ = {norm_f:e} forces ε = {eps0:e}")));
        }
        let moduli: Vec<f64> =
            a.par_iter().map(|m| herm_eig(m).map(|e| e.eigenvalues)).collect::<Result<Vec<_>>>()?.concat();
        let moduli: Vec<f64> = moduli.into_iter().map(f64::abs).collect();
        let eps = nudge_threshold(&moduli, eps0);
        let ex = excise_spectral(&OperatorField::sampled(a.to_vec())?, eps)?;
        (Some(eps), ex.alpha_q.fibers_at(n)?.into_owned(), Some((ex.q.fibers_at(n)?.into_owned(), ex.excised)))
    } else {
        (None, a.to_vec(), None)
    };

    let fibers: Vec<IsoFiber> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (fq, target) = match &q {
                Some((q, _)) => {
                    let qj = &q[j];
                    (qj.mul(&corr[j]).mul(qj), qj.mul(&g[j].adjoint().mul(&b[j]).mul(&g[j])).mul(qj))
                }
                None => (corr[j].clone(), g[j].adjoint().mul(&b[j]).mul(&g[j])),
            };
            iso_fiber(&aq[j], &fq, &target, nb).map_err(|e| match e {
                Error::ContourFailure(m) => Error::ContourFailure(format!("fiber {j} (z = {}): {m}", grid_point(j, n))),
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let names = ["h_squared", "sign_intertwines", "gamma_h1", "gamma_h"];
    let mut worst = [0.0f64; 4];
    let mut residual = 0.0f64;
    for x in &fibers {
        for (w, v) in worst.iter_mut().zip(x.ids) {
            *w = w.max(v);
        }
        residual = residual.max(x.residual);
    }
    if let Some(k) = (0..4).find(|&k| !(worst[k] <= IDENTITY_TOL)) {
        return Err(Error::CertificateFailed(format!("identity {} off by {:e}", names[k], worst[k])));
    }
    if !(residual <= CONGRUENCE_TOL) {
        return Err(Error::CertificateFailed(format!("Q g*βg Q − h*αh has relative norm {residual:e}")));
    }
    let h: Vec<CMat> = fibers.into_iter().map(|x| x.h).collect();
    let total = if cut {
        None
    } else {
        let inv: Result<Vec<CMat>> = (0..n).into_par_iter().map(|j| Ok(h[j].mul(&g[j].inverse()?))).collect();
        inv.ok().and_then(|t| OperatorField::sampled(t).ok())
    };
    let mut cert = CongruenceCertificate::new(CertificateKind::ExcisionPair, OperatorField::sampled(h)?, residual);
    cert.total = total;
    cert.eps = eps;
    cert.excised = q.map(|(_, ex)| ex).unwrap_or_default();
    cert.witness = Some(OperatorField::sampled(corr)?);
    cert.identities = names.iter().map(|s| s.to_string()).zip(worst).collect();
    cert.identities.insert("f_star_g".into(), check);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GermZero, ScalarGermField, Sign};

    #[test]
    fn threshold_nudging() {
        assert_eq!(nudge_threshold(&[5.0], 1.0), 1.0);
        let e = nudge_threshold(&[0.9, 1.0], 1.0);
        assert!((e - 0.7).abs() < 1e-12, "{e}");
    }

    #[test]
    fn definite_fibers_are_untouched() {
        let n = 64;
        let alpha = OperatorField::from_fn(n, |z| CMat::from_real_diag(&[2.0 + z, 3.0])).unwrap();
        let ex = excise_spectral(&alpha, 1.0).unwrap();
        assert_eq!(ex.excised, vec![(0.0, 1.0)]);
        for m in ex.q.fibers().unwrap() {
            assert_eq!(m.max_abs(), 0.0);
        }
        assert!(ex.certificate.residual < 1e-14);
    }

    #[test]
    fn scalar_cut_near_the_zero() {
        let g = ScalarGermField::parse("z - 0.5", vec![GermZero::symmetric(0.5, 1, Sign::Minus, Sign::Plus, 1.0)]).unwrap();
        let ex = excise_spectral(&OperatorField::symbolic(g), 0.1).unwrap();
        let q = ex.q.fibers().unwrap();
        let n = q.len();
        for (j, m) in q.iter().enumerate() {
            let inside = (grid_point(j, n) - 0.5).abs() < 0.1;
            assert_eq!(m[(0, 0)].re, if inside { 1.0 } else { 0.0 });
        }
        assert!(ex.certificate.residual < 1e-12);
        assert_eq!(ex.excised.len(), 2);
    }

    #[test]
    fn threshold_on_an_eigenvalue_is_rejected() {
        let alpha = OperatorField::constant(16, CMat::from_real_diag(&[0.5, 2.0])).unwrap();
        assert!(matches!(excise_spectral(&alpha, 0.5), Err(Error::EigenvalueAtThreshold { .. })));
    }

    #[test]
    fn rescaled_isomorphism() {
        let n = 128;
        let alpha = OperatorField::scalar_fn(n, |z| z - 0.5).unwrap();
        let beta = OperatorField::scalar_fn(n, |z| 2.0 * (z - 0.5)).unwrap();
        let f = OperatorField::scalar_fn(n, |_| 2f64.sqrt()).unwrap();
        let g = OperatorField::scalar_fn(n, |_| 0.5f64.sqrt()).unwrap();
        let c = excision_isometry(&alpha, &beta, &f, &g).unwrap();
        assert!(c.excised.is_empty());
        for m in c.map.fibers().unwrap() {
            assert!((m[(0, 0)].re - 1.0).abs() < 1e-12);
        }
        for m in c.total.unwrap().fibers().unwrap() {
            assert!((m[(0, 0)].re - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn nontrivial_correction_needs_the_circle() {
        // f*g = 1 + Fα with F = c(2 + z)
        let n = 64;
        let c = 0.2;
        let alpha = OperatorField::from_fn(n, |z| CMat::from_real_diag(&[z - 0.5, 0.2 + z])).unwrap();
        let g = OperatorField::from_fn(n, |z| {
            let d = |x: f64| 1.0 + c * (2.0 + z) * x;
            CMat::from_real_diag(&[d(z - 0.5), d(0.2 + z)])
        })
        .unwrap();
        let f = OperatorField::identity(n, 2).unwrap();
        let beta = OperatorField::from_fn(n, |z| {
            let d = |x: f64| x / (1.0 + c * (2.0 + z) * x);
            CMat::from_real_diag(&[d(z - 0.5), d(0.2 + z)])
        })
        .unwrap();
        let cert = excision_isometry(&alpha, &beta, &f, &g).unwrap();
        assert!(cert.excised.is_empty());
        assert!(cert.residual < 1e-8);
        for v in cert.identities.values() {
            assert!(*v < 1e-9);
        }
    }

    #[test]
    fn large_correction_triggers_excision() {
        // F = diag(k, 1), ‖α‖·‖F‖ = 3k
        let n = 64;
        let k = 1.5;
        let alpha = OperatorField::from_fn(n, |z| CMat::from_real_diag(&[z - 0.5, 3.0])).unwrap();
        let g = OperatorField::from_fn(n, |z| CMat::from_real_diag(&[1.0 + k * (z - 0.5), 4.0])).unwrap();
        let f = OperatorField::identity(n, 2).unwrap();
        let beta =
            OperatorField::from_fn(n, |z| CMat::from_real_diag(&[(z - 0.5) / (1.0 + k * (z - 0.5)), 0.75])).unwrap();
        let cert = excision_isometry(&alpha, &beta, &f, &g).unwrap();
        let eps = cert.eps.unwrap();
        assert!(eps <= 0.5 / k && eps >= 0.25 / k, "{eps}");
        assert!(!cert.excised.is_empty());
        assert!(cert.residual < 1e-8);
    }
}
