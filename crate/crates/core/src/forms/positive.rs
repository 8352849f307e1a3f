use super::{sup_residual, CertificateKind, CongruenceCertificate, TorsionForm, CONGRUENCE_TOL, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::field::{common_fibers, grid_point, sup_norm, OperatorField};
use crate::linalg::{contour_sqrt, eigvals, herm_eig, psd_sqrt, CMat, Contour, ContourSpec, C64};
use crate::torsion::{COMMUTE_TOL, INVERTIBILITY_FLOOR};
use rayon::prelude::*;
use serde::Serialize;

/// Smallest real part accepted in the spectrum of `f*g`.
pub const SPECTRUM_FLOOR: f64 = 1e-6;
/// Tolerance for "non-negative" eigenvalues.
pub const NEGATIVITY_TOL: f64 = 1e-9;
/// Regularisation levels `μ` of the η-limit, coarse to fine.
pub const ETA_LEVELS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

fn check_square(lhs: &[CMat], rhs: &[CMat], scale: f64, what: &str) -> Result<f64> {
    let r = sup_residual(lhs, rhs, 1.0) / scale.max(1e-300);
    if !(r <= COMMUTE_TOL) {
        return Err(Error::HypothesisViolated(format!("{what} has relative norm {r:e}")));
    }
    Ok(r)
}

struct PositiveFiber {
    k: CMat,
    ids: [f64; 3],
}

/// Congruence of positive discriminant forms from an isomorphism `(f, g)`
/// with `g∘α_φ = α_ψ∘f`: `k = (f*g)^{1/2}` by the rectangle contour, so
/// that `f*α_ψ f = k α_φ k*`.
pub fn congruence_positive(
    phi: &TorsionForm,
    psi: &TorsionForm,
    f: &OperatorField,
    g: &OperatorField,
) -> Result<CongruenceCertificate> {
    if !phi.is_discriminant() || !psi.is_discriminant() {
        return Err(Error::HypothesisViolated("both forms must be discriminant forms".into()));
    }
    let (n, v) = common_fibers(&[phi.alpha(), psi.alpha(), f, g])?;
    let (a, b, f, g) = (&v[0], &v[1], &v[2], &v[3]);
    let lhs: Vec<CMat> = (0..n).into_par_iter().map(|j| g[j].mul(&a[j])).collect();
    let rhs: Vec<CMat> = (0..n).into_par_iter().map(|j| b[j].mul(&f[j])).collect();
    check_square(&lhs, &rhs, sup_norm(g) * sup_norm(a) + sup_norm(b) * sup_norm(f), "g∘α_φ − α_ψ∘f")?;
    for (name, x) in [("f", f), ("g", g)] {
        let floor = INVERTIBILITY_FLOOR * sup_norm(x).max(1.0);
        if let Some(j) = x.iter().position(|m| !(m.min_singular() >= floor)) {
            return Err(Error::HypothesisViolated(format!("{name} is not invertible at fiber {j}")));
        }
    }
    let fibers: Vec<PositiveFiber> = (0..n)
        .into_par_iter()
        .map(|j| {
            let m = f[j].adjoint().mul(&g[j]);
            let spec = eigvals(&m)?;
            if let Some(l) = spec.iter().find(|l| !(l.re > SPECTRUM_FLOOR)) {
                return Err(Error::SpectrumNotPositive { fiber: j, re: l.re, im: l.im });
            }
            let k = contour_sqrt(&m, &Contour::Rectangle(ContourSpec::around(&spec)?))?;
            let (an, kn) = (a[j].op_norm().max(1.0), k.op_norm().max(1.0));
            let lhs = f[j].adjoint().mul(&b[j]).mul(&f[j]);
            let rhs = k.mul(&a[j]).mul(&k.adjoint());
            let ids = [
                k.mul(&k).sub(&m).op_norm() / m.op_norm().max(1.0),
                k.mul(&a[j]).sub(&a[j].mul(&k.adjoint())).op_norm() / (an * kn),
                lhs.sub(&rhs).op_norm() / (an * kn * kn),
            ];
            Ok(PositiveFiber { k, ids })
        })
        .collect::<Result<_>>()?;
    let names = ["k_squared", "k_alpha_symmetric", "congruence"];
    let mut worst = [0.0f64; 3];
    for x in &fibers {
        for (w, v) in worst.iter_mut().zip(x.ids) {
            *w = w.max(v);
        }
    }
    for i in 0..2 {
        if !(worst[i] <= IDENTITY_TOL) {
            return Err(Error::CertificateFailed(format!("identity {} off by {:e}", names[i], worst[i])));
        }
    }
    if !(worst[2] <= CONGRUENCE_TOL) {
        return Err(Error::CertificateFailed(format!("f*α_ψ f − kα_φ k* has relative norm {:e}", worst[2])));
    }
    let k = OperatorField::sampled(fibers.into_iter().map(|x| x.k).collect())?;
    let mut cert = CongruenceCertificate::new(CertificateKind::Positive, k, worst[2]);
    cert.identities = names.iter().map(|s| s.to_string()).zip(worst).collect();
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedDiagram {
    /// `h` with `h∘α = α∘f` and `g∘α = α∘h`.
    pub h: OperatorField,
    /// Level `μ` at which the η-limit settled.
    pub mu: f64,
    /// Distance to the fiberwise conjugate `αfα⁻¹`.
    pub oracle_gap: f64,
    pub identities: [f64; 2],
}

/// Completes `g∘α² = α²∘f` to `g∘α = α∘h ∧ h∘α = α∘f` for a positive `α`, as
/// the limit of `α f η_μ(α)⁻¹` where `η_μ` replaces eigenvalues below `μ` by 1.
pub fn complete_diagram(alpha: &OperatorField, f: &OperatorField, g: &OperatorField) -> Result<CompletedDiagram> {
    let (n, v) = common_fibers(&[alpha, f, g])?;
    let (a, f, g) = (&v[0], &v[1], &v[2]);
    let a2: Vec<CMat> = a.par_iter().map(|m| m.mul(m)).collect();
    let lhs: Vec<CMat> = (0..n).into_par_iter().map(|j| g[j].mul(&a2[j])).collect();
    let rhs: Vec<CMat> = (0..n).into_par_iter().map(|j| a2[j].mul(&f[j])).collect();
    let na = sup_norm(a);
    check_square(&lhs, &rhs, na * na * (sup_norm(f) + sup_norm(g)), "g∘α² − α²∘f")?;
    let eigs: Vec<_> = a.par_iter().map(herm_eig).collect::<Result<_>>()?;
    if let Some((j, l)) = eigs.iter().enumerate().find_map(|(j, e)| {
        let l = e.eigenvalues[0];
        (l < -NEGATIVITY_TOL * na.max(1.0)).then_some((j, l))
    }) {
        return Err(Error::NegativityDetected { fiber: j, value: l });
    }
    let level = |mu: f64| -> Vec<CMat> {
        (0..n)
            .into_par_iter()
            .map(|j| a[j].mul(&f[j]).mul(&eigs[j].apply(|l| if l < mu { 1.0 } else { 1.0 / l })))
            .collect()
    };
    let mut prev = level(ETA_LEVELS[0]);
    let mut change = f64::INFINITY;
    let mut settled = None;
    for &mu in &ETA_LEVELS[1..] {
        let next = level(mu);
        change = sup_residual(&next, &prev, sup_norm(&next));
        prev = next;
        if change < IDENTITY_TOL {
            settled = Some(mu);
            break;
        }
    }
    let Some(mu) = settled else {
        return Err(Error::NotConverging { change });
    };
    let h = prev;
    let oracle: Result<Vec<CMat>> = (0..n).into_par_iter().map(|j| Ok(a[j].mul(&f[j]).mul(&a[j].inverse()?))).collect();
    let oracle_gap = match oracle {
        Ok(o) => sup_residual(&h, &o, sup_norm(&h)),
        Err(_) => f64::NAN,
    };
    let ha: Vec<CMat> = (0..n).into_par_iter().map(|j| h[j].mul(&a[j])).collect();
    let af: Vec<CMat> = (0..n).into_par_iter().map(|j| a[j].mul(&f[j])).collect();
    let ga: Vec<CMat> = (0..n).into_par_iter().map(|j| g[j].mul(&a[j])).collect();
    let ah: Vec<CMat> = (0..n).into_par_iter().map(|j| a[j].mul(&h[j])).collect();
    let hn = sup_norm(&h);
    let identities = [
        sup_residual(&ha, &af, hn * na),
        sup_residual(&ga, &ah, (sup_norm(g) * na).max(hn * na)),
    ];
    if identities.iter().any(|r| !(*r <= IDENTITY_TOL)) {
        return Err(Error::CertificateFailed(format!("completed squares off by {identities:?}")));
    }
    Ok(CompletedDiagram { h: OperatorField::sampled(h)?, mu, oracle_gap, identities })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AddedForm {
    /// The sum, presented by `1 + β` on the same object.
    pub form: TorsionForm,
    /// Non-negative `g` with `g α^{1/2} = α^{1/2} β*`.
    pub g: OperatorField,
    /// Smallest eigenvalue of `g` over the grid.
    pub min_eigenvalue: f64,
}

/// Sum of the discriminant form of a non-negative `α` with the form given by
/// `β` (`βα ≥ 0`) on the same object.
pub fn add_forms(phi: &TorsionForm, psi: &TorsionForm) -> Result<AddedForm> {
    if !phi.is_discriminant() {
        return Err(Error::HypothesisViolated("the first summand must be a discriminant form".into()));
    }
    if phi.object != psi.object {
        return Err(Error::HypothesisViolated("summands live on different objects".into()));
    }
    let beta = &psi.f;
    let (n, v) = common_fibers(&[phi.alpha(), beta])?;
    let (a, b) = (&v[0], &v[1]);
    let scale = sup_norm(a).max(1.0) * sup_norm(b).max(1.0);
    for j in 0..n {
        let ba = b[j].mul(&a[j]).hermitian_part();
        let l = herm_eig(&ba)?.eigenvalues[0];
        if l < -NEGATIVITY_TOL * scale {
            return Err(Error::NegativityDetected { fiber: j, value: l });
        }
    }
    let root: Vec<CMat> = a.par_iter().map(psd_sqrt).collect::<Result<_>>()?;
    let bstar: Vec<CMat> = b.iter().map(CMat::adjoint).collect();
    let done = complete_diagram(
        &OperatorField::sampled(root)?,
        &OperatorField::sampled(bstar)?,
        &OperatorField::sampled(b.to_vec())?,
    )?;
    let gf = done.h.fibers_at(n)?.into_owned();
    let mut min_eigenvalue = f64::INFINITY;
    for (j, m) in gf.iter().enumerate() {
        if m.hermitian_defect() > IDENTITY_TOL * m.op_norm().max(1.0) {
            return Err(Error::HypothesisViolated(format!("g is not Hermitian at fiber {j}")));
        }
        let l = herm_eig(&m.hermitian_part())?.eigenvalues[0];
        if l < -NEGATIVITY_TOL * m.op_norm().max(1.0) {
            return Err(Error::NegativityDetected { fiber: j, value: l });
        }
        min_eigenvalue = min_eigenvalue.min(l);
    }
    let one_plus: Vec<CMat> = b.iter().map(|m| m.add(&CMat::identity(m.rows()))).collect();
    if let Some(j) = one_plus.iter().position(|m| !(m.min_singular() >= INVERTIBILITY_FLOOR)) {
        return Err(Error::HypothesisViolated(format!("1 + β is not invertible at fiber {j} (z = {})", grid_point(j, n))));
    }
    let f = match (beta, phi.alpha()) {
        (OperatorField::Symbolic(bs), OperatorField::Symbolic(_)) => {
            OperatorField::symbolic(bs.add(&super::one())?)
        }
        _ => OperatorField::sampled(one_plus)?,
    };
    let form = TorsionForm::new(phi.object.clone(), f)?;
    Ok(AddedForm { form, g: done.h, min_eigenvalue })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuperfiniteReport {
    pub holds: bool,
    /// `inf s_min(α⁻¹fα)` and `sup ‖α⁻¹fα‖`.
    pub inf_g: f64,
    pub sup_g: f64,
    pub inf_f: f64,
    /// Largest distance between the spectra of `f` and `α⁻¹fα` on a fiber.
    pub spectral_gap: f64,
    /// Lower bound for `s_min(g)` from `|det g| = |det f|` and `‖g‖_F`.
    pub det_bound: f64,
}

fn spectrum_distance(x: &[C64], y: &[C64]) -> f64 {
    let one_way = |p: &[C64], q: &[C64]| {
        p.iter().map(|a| q.iter().map(|b| (a - b).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(x, y).max(one_way(y, x))
}

/// For a uniformly invertible `f` commuting with `α` up to `g = α⁻¹fα`,
/// checks that `g` is uniformly invertible as well.
pub fn superfinite_check(alpha: &OperatorField, f: &OperatorField) -> Result<SuperfiniteReport> {
    let (n, v) = common_fibers(&[alpha, f])?;
    let (a, f) = (&v[0], &v[1]);
    let rows: Vec<(f64, f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let g = a[j].solve(&f[j].mul(&a[j]))?;
            let sg = g.singular_values();
            let d = g.rows();
            let det = f[j].det().norm();
            let bound = if d == 1 {
                det
            } else {
                let fro = g.norm_fro();
                det * ((d - 1) as f64 / (fro * fro)).powf(0.5 * (d - 1) as f64)
            };
            let gap = spectrum_distance(&eigvals(&f[j])?, &eigvals(&g)?);
            Ok((sg[d - 1], sg[0], f[j].min_singular(), gap, bound))
        })
        .collect::<Result<_>>()?;
    let inf_g = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let sup_g = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let inf_f = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let spectral_gap = rows.iter().map(|r| r.3 / sup_g.max(1.0)).fold(0.0, f64::max);
    let det_bound = rows.iter().map(|r| r.4).fold(f64::INFINITY, f64::min);
    let holds = inf_f >= INVERTIBILITY_FLOOR
        && inf_g >= INVERTIBILITY_FLOOR
        && inf_g >= det_bound * (1.0 - 1e-9)
        && sup_g <= crate::torsion::BOUND;
    Ok(SuperfiniteReport { holds, inf_g, sup_g, inf_f, spectral_gap, det_bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub holds: bool,
    /// Smallest eigenvalue of `β^{-1/2}(βα)β^{-1/2}`.
    pub min_eigenvalue: f64,
    /// Smallest real part among the eigenvalues of `α` itself.
    pub min_real_alpha: f64,
    pub hermitian_defect: f64,
}

/// For `β > 0` with `βα ≥ 0`: `α` is similar to the Hermitian
/// `β^{1/2}αβ^{-1/2}`, so its spectrum is real and non-negative.
pub fn spectrum_positivity(alpha: &OperatorField, beta: &OperatorField) -> Result<PositivityReport> {
    let (n, v) = common_fibers(&[alpha, beta])?;
    let (a, b) = (&v[0], &v[1]);
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let e = herm_eig(&b[j])?;
            if !(e.eigenvalues[0] > 0.0) || b[j].hermitian_defect() > IDENTITY_TOL * b[j].op_norm().max(1.0) {
                return Err(Error::HypothesisViolated(format!("β is not positive at fiber {j}")));
            }
            let ba = b[j].mul(&a[j]);
            let s = ba.op_norm().max(1.0);
            if ba.hermitian_defect() > IDENTITY_TOL * s {
                return Err(Error::HypothesisViolated(format!("βα is not Hermitian at fiber {j}")));
            }
            let inv_root = e.apply(|l| 1.0 / l.sqrt());
            let sym = inv_root.mul(&ba).mul(&inv_root);
            let defect = sym.hermitian_defect() / sym.op_norm().max(1.0);
            let l = herm_eig(&sym.hermitian_part())?.eigenvalues[0];
            let re = eigvals(&a[j])?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            Ok((l / s, re / a[j].op_norm().max(1.0), defect))
        })
        .collect::<Result<_>>()?;
    let min_eigenvalue = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_real_alpha = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hermitian_defect = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let holds = min_eigenvalue >= -NEGATIVITY_TOL && min_real_alpha >= -NEGATIVITY_TOL && hermitian_defect <= IDENTITY_TOL;
    Ok(PositivityReport { holds, min_eigenvalue, min_real_alpha, hermitian_defect })
}
