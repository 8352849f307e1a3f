use super::excision::nudge_threshold;
use super::{discriminant, is_identity, sup_residual, CertificateKind, CongruenceCertificate, TorsionForm};
use crate::error::{Error, Result};
use crate::field::{common_fibers, grid_point, mask_intervals, sup_norm, OperatorField, LOCATION_TOL};
use crate::linalg::{herm_eig, CMat};
use crate::torsion::{sampled_trivial_floor, COMMUTE_TOL};
use rayon::prelude::*;

/// Joint lower bound below which `[α; f*]` counts as singular.
pub const JOINT_FLOOR: f64 = 1e-8;
/// Number of times the excision threshold may be halved while reducing.
pub const MAX_HALVINGS: usize = 8;

/// Least-norm solution of `σα + δf* = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingWitness {
    pub sigma: OperatorField,
    pub delta: OperatorField,
    pub residual: f64,
    pub sigma_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    /// Discriminant form of the new field `α'`.
    pub form: TorsionForm,
    pub certificate: CongruenceCertificate,
}

/// Zero location shared by two symbolic fields, if any.
fn shared_zero(alpha: &OperatorField, f: &OperatorField) -> Option<f64> {
    let (a, f) = (alpha.as_symbolic()?, f.as_symbolic()?);
    a.zeros().iter().map(|z| z.at).find(|&at| f.zeros().iter().any(|w| (w.at - at).abs() < LOCATION_TOL))
}

fn nearest_fiber(z: f64, n: usize) -> usize {
    ((z * n as f64 - 0.5).round().max(0.0) as usize).min(n - 1)
}

pub fn splitting_witness(alpha: &OperatorField, f: &OperatorField) -> Result<SplittingWitness> {
    let (n, v) = common_fibers(&[alpha, f])?;
    if let Some(z) = shared_zero(alpha, f) {
        return Err(Error::JointlySingular { fiber: nearest_fiber(z, n), z, bound: 0.0 });
    }
    let (a, f) = (&v[0], &v[1]);
    let parts: Vec<(CMat, CMat, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let bound = a[j].vstack(&f[j].adjoint()).min_singular();
            if !(bound >= JOINT_FLOOR) {
                return Err(Error::JointlySingular { fiber: j, z: grid_point(j, n), bound });
            }
            let gram = a[j].adjoint().mul(&a[j]).add(&f[j].mul(&f[j].adjoint()));
            let sigma = gram.solve(&a[j].adjoint())?;
            let delta = gram.solve(&f[j])?;
            let id = CMat::identity(a[j].rows());
            let res = sigma.mul(&a[j]).add(&delta.mul(&f[j].adjoint())).sub(&id).op_norm();
            Ok((sigma, delta, res))
        })
        .collect::<Result<_>>()?;
    let residual = parts.iter().map(|p| p.2).fold(0.0, f64::max);
    if !(residual <= COMMUTE_TOL) {
        return Err(Error::NoSplitting { residual });
    }
    let (sigma, delta): (Vec<CMat>, Vec<CMat>) = parts.into_iter().map(|p| (p.0, p.1)).unzip();
    let sigma_norm = sup_norm(&sigma);
    Ok(SplittingWitness { sigma: OperatorField::sampled(sigma)?, delta: OperatorField::sampled(delta)?, residual, sigma_norm })
}

/// `inf s_min([α; f*]) / max(1, ‖α‖, ‖f‖)`; zero when the form is exactly degenerate.
pub fn nondegeneracy(phi: &TorsionForm) -> Result<f64> {
    if shared_zero(phi.alpha(), &phi.f).is_some() {
        return Ok(0.0);
    }
    let (_, v) = common_fibers(&[phi.alpha(), &phi.f])?;
    let (a, f) = (&v[0], &v[1]);
    let inf = (0..a.len()).into_par_iter().map(|j| a[j].vstack(&f[j].adjoint()).min_singular()).reduce(|| f64::INFINITY, f64::min);
    Ok(inf / sup_norm(a).max(sup_norm(f)).max(1.0))
}

fn uniformly_invertible(f: &OperatorField) -> Result<bool> {
    match f {
        OperatorField::Symbolic(g) => Ok(g.zeros().is_empty()),
        OperatorField::Sampled { fibers, .. } => {
            let floor = sampled_trivial_floor(fibers.len()) * sup_norm(fibers).max(1.0);
            Ok(fibers.par_iter().all(|m| m.min_singular() >= floor))
        }
    }
}

/// Isomorphism from `φ` to a discriminant form.
///
/// An invertible `f` gives `α' = fα` directly. Otherwise the torsion is cut
/// out with a spectral projector `Q` of `|α| ≤ ε`, where `ε` comes from the
/// splitting `σα + δf* = 1`, and `α' = QfQαQ + P` with the morphism
/// `T = QfQ + α⁻¹P`, `S = 1`.
pub fn reduce_to_discriminant(phi: &TorsionForm) -> Result<Reduction> {
    let alpha = phi.alpha();
    let f = &phi.f;
    let n = crate::field::common_grid(&[alpha, f])?;
    let floor = JOINT_FLOOR.max(sampled_trivial_floor(n));
    let nd = nondegeneracy(phi)?;
    if nd < floor {
        return Err(Error::Degenerate(format!("[α; f*] bounded below only by {nd:e}")));
    }
    if is_identity(f) {
        let form = discriminant(alpha.clone())?;
        let cert = CongruenceCertificate::new(CertificateKind::Direct, f.clone(), 0.0);
        return Ok(Reduction { form, certificate: cert });
    }
    if uniformly_invertible(f)? {
        return direct(alpha, f);
    }
    if !alpha.is_hermitian() {
        return Err(Error::HypothesisViolated("reduction through excision needs a Hermitian α".into()));
    }
    let w = splitting_witness(alpha, f)?;
    let (_, v) = common_fibers(&[alpha, f])?;
    let (a, fv) = (&v[0], &v[1]);
    let eigs: Vec<_> = a.par_iter().map(herm_eig).collect::<Result<_>>()?;
    let moduli: Vec<f64> = eigs.iter().flat_map(|e| e.eigenvalues.iter().map(|l| l.abs())).collect();
    let mut eps = 0.5 / w.sigma_norm;
    for _ in 0..=MAX_HALVINGS {
        let e = nudge_threshold(&moduli, eps);
        if let Some(r) = try_excised(a, fv, &eigs, e)? {
            return Ok(r);
        }
        eps *= 0.5;
    }
    Err(Error::Degenerate(format!("QfQ stays singular down to ε = {eps:e}")))
}

fn direct(alpha: &OperatorField, f: &OperatorField) -> Result<Reduction> {
    let prod = f.compose(alpha)?;
    let (new_alpha, residual) = match &prod {
        OperatorField::Symbolic(_) => (prod.clone(), 0.0),
        OperatorField::Sampled { fibers, .. } => {
            let herm: Vec<CMat> = fibers.par_iter().map(CMat::hermitian_part).collect();
            let r = sup_residual(fibers, &herm, sup_norm(fibers));
            (OperatorField::sampled(herm)?, r)
        }
    };
    if !(residual <= COMMUTE_TOL) {
        return Err(Error::HypothesisViolated(format!("fα is not Hermitian (relative defect {residual:e})")));
    }
    let form = discriminant(new_alpha)?;
    let mut cert = CongruenceCertificate::new(CertificateKind::Direct, f.clone(), residual);
    cert.identities.insert("commute".into(), residual);
    Ok(Reduction { form, certificate: cert })
}

struct ReducedFiber {
    t: CMat,
    alpha: CMat,
    witness: CMat,
    t_min: f64,
    cut: bool,
}

fn try_excised(a: &[CMat], f: &[CMat], eigs: &[crate::linalg::HermitianEig], eps: f64) -> Result<Option<Reduction>> {
    let n = a.len();
    let fibers: Vec<ReducedFiber> = (0..n)
        .into_par_iter()
        .map(|j| {
            let e = &eigs[j];
            let keep = |l: f64| l.abs() <= eps;
            let q = e.projector(keep);
            let p = e.projector(|l| !keep(l));
            let inv_p = e.apply(|l| if keep(l) { 0.0 } else { 1.0 / l });
            let inv_p2 = e.apply(|l| if keep(l) { 0.0 } else { 1.0 / (l * l) });
            let qfq = q.mul(&f[j]).mul(&q);
            let t = qfq.add(&inv_p);
            let alpha = qfq.mul(&a[j]).mul(&q).add(&p).hermitian_part();
            let witness = q.mul(&f[j].adjoint()).mul(&inv_p).add(&inv_p.mul(&f[j])).sub(&inv_p2);
            ReducedFiber { t_min: t.min_singular(), t, alpha, witness, cut: !e.eigenvalues.iter().all(|&l| keep(l)) }
        })
        .collect();
    let fnorm = sup_norm(f).max(1.0);
    if fibers.iter().any(|x| !(x.t_min >= crate::torsion::INVERTIBILITY_FLOOR * fnorm)) {
        return Ok(None);
    }
    let ta: Vec<CMat> = (0..n).into_par_iter().map(|j| fibers[j].t.mul(&a[j])).collect();
    let na: Vec<CMat> = fibers.iter().map(|x| x.alpha.clone()).collect();
    let tnorm = sup_norm(&fibers.iter().map(|x| x.t.clone()).collect::<Vec<_>>());
    let commute = sup_residual(&ta, &na, tnorm * sup_norm(a));
    let rebuilt: Vec<CMat> =
        (0..n).into_par_iter().map(|j| fibers[j].t.add(&a[j].mul(&fibers[j].witness))).collect();
    let representative = sup_residual(f, &rebuilt, fnorm);
    let residual = commute.max(representative);
    if !(residual <= COMMUTE_TOL) {
        return Err(Error::CertificateFailed(format!(
            "reduction residuals: commute {commute:e}, representative {representative:e}"
        )));
    }
    let excised = mask_intervals(&fibers.iter().map(|x| x.cut).collect::<Vec<_>>());
    let mut t = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for x in fibers {
        t.push(x.t);
        w.push(x.witness);
    }
    let form = discriminant(OperatorField::sampled(na)?)?;
    let mut cert = CongruenceCertificate::new(CertificateKind::Reduction, OperatorField::sampled(t)?, residual);
    cert.witness = Some(OperatorField::sampled(w)?);
    cert.eps = Some(eps);
    cert.excised = excised;
    cert.identities.insert("commute".into(), commute);
    cert.identities.insert("representative".into(), representative);
    Ok(Some(Reduction { form, certificate: cert }))
}
