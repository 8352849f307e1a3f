use super::reduce::reduce_to_discriminant;
use super::{discriminant, TorsionForm};
use crate::error::{Error, Result};
use crate::field::{common_fibers, grid_point, sup_norm, OperatorField, Side, Sign, DEFAULT_GRID, LOCATION_TOL};
use crate::linalg::{herm_eig, CMat, C64};
use crate::torsion::{iso_modules, Decision, GermEntry, IsoVerdict, BOUND, INVERTIBILITY_FLOOR};
use rayon::prelude::*;
use serde::Serialize;

/// Eigenvalues closer than this (relative) to zero block the sign splitting.
pub const ZERO_EIGEN_TOL: f64 = 1e-13;

/// `φ ≅ φ₊ ⊥ φ₋` with `φ₊` positive and `φ₋` negative definite.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    /// The discriminant form that was split.
    pub reduced: TorsionForm,
    pub positive: TorsionForm,
    pub negative: TorsionForm,
    pub e_plus: OperatorField,
    pub e_minus: OperatorField,
    /// `‖diag(α₊, α₋) − W* diag(α, −s) W‖` with `W = [[E₊, E₋], [E₋, E₊]]`.
    pub reassembly_residual: f64,
}

fn indicator(g: &crate::field::ScalarGermField, keep: Sign, n: usize) -> Result<OperatorField> {
    OperatorField::from_fn(n, |z| {
        let v = g.eval(z);
        CMat::scalar(C64::new(if Sign::of(v) == keep && v != 0.0 { 1.0 } else { 0.0 }, 0.0))
    })
}

/// Reduces to a discriminant form first when `φ` is not one already.
pub fn pos_neg_split(phi: &TorsionForm) -> Result<Split> {
    let reduced = if phi.is_discriminant() { phi.clone() } else { reduce_to_discriminant(phi)?.form };
    match reduced.alpha() {
        OperatorField::Symbolic(g) => {
            let (p, m) = (g.sign_part(Sign::Plus), g.sign_part(Sign::Minus));
            p.validate()?;
            m.validate()?;
            Ok(Split {
                e_plus: indicator(g, Sign::Plus, DEFAULT_GRID)?,
                e_minus: indicator(g, Sign::Minus, DEFAULT_GRID)?,
                positive: discriminant(OperatorField::symbolic(p))?,
                negative: discriminant(OperatorField::symbolic(m))?,
                reduced,
                reassembly_residual: 0.0,
            })
        }
        OperatorField::Sampled { fibers, .. } => {
            let n = fibers.len();
            let scale = sup_norm(fibers).max(1.0);
            let parts: Vec<[CMat; 5]> = fibers
                .par_iter()
                .enumerate()
                .map(|(j, a)| {
                    let e = herm_eig(a)?;
                    if e.eigenvalues.iter().any(|l| l.abs() < ZERO_EIGEN_TOL * scale) {
                        return Err(Error::ZeroEigenvalueFiber { fiber: j, z: grid_point(j, n) });
                    }
                    let ep = e.projector(|l| l > 0.0);
                    let em = e.projector(|l| l < 0.0);
                    let ap = e.apply(|l| if l > 0.0 { l } else { 1.0 });
                    let am = e.apply(|l| if l < 0.0 { l } else { -1.0 });
                    let s = e.apply(f64::signum);
                    Ok([ep, em, ap, am, s])
                })
                .collect::<Result<_>>()?;
            let residual = parts
                .par_iter()
                .zip(fibers.par_iter())
                .map(|([ep, em, ap, am, s], a)| {
                    let w = ep.block_diag(ep).add(&offdiag(em));
                    let inner = a.block_diag(&s.scale_re(-1.0));
                    w.adjoint().mul(&inner).mul(&w).sub(&ap.block_diag(am)).op_norm()
                })
                .reduce(|| 0.0, f64::max)
                / scale;
            let mut cols: [Vec<CMat>; 4] = Default::default();
            for p in parts {
                let [ep, em, ap, am, _] = p;
                cols[0].push(ep);
                cols[1].push(em);
                cols[2].push(ap);
                cols[3].push(am);
            }
            let [ep, em, ap, am] = cols;
            Ok(Split {
                reduced,
                positive: discriminant(OperatorField::sampled(ap)?)?,
                negative: discriminant(OperatorField::sampled(am)?)?,
                e_plus: OperatorField::sampled(ep)?,
                e_minus: OperatorField::sampled(em)?,
                reassembly_residual: residual,
            })
        }
    }
}

/// `[[0, m], [m, 0]]`.
fn offdiag(m: &CMat) -> CMat {
    let d = m.rows();
    CMat::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
        (true, false) => m[(i, j - d)],
        (false, true) => m[(i - d, j)],
        _ => C64::new(0.0, 0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetabolizerCheck {
    pub decision: Decision,
    /// ess-sup of `δ = β^{-*}αβ^{-1}`.
    pub delta_sup: f64,
    /// Smallest singular value of `δ` over the grid.
    pub delta_inf: f64,
}

/// A metabolizer `Y = (B, β)` of a definite form with `α = β*δβ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metabolizer {
    pub beta: OperatorField,
    pub delta: OperatorField,
    /// Representative of the inclusion `Y → X`.
    pub inclusion: OperatorField,
    pub check: MetabolizerCheck,
}

fn combine(a: Decision, b: Decision) -> Decision {
    match (a, b) {
        (Decision::No, _) | (_, Decision::No) => Decision::No,
        (Decision::Yes, Decision::Yes) => Decision::Yes,
        _ => Decision::Inconclusive,
    }
}

fn sampled_check(alpha: &OperatorField, beta: &OperatorField) -> Result<(f64, f64)> {
    let (_, v) = common_fibers(&[alpha, beta])?;
    let (a, b) = (&v[0], &v[1]);
    let bounds: Vec<(f64, f64)> = (0..a.len())
        .into_par_iter()
        .map(|j| {
            let bi = match b[j].inverse() {
                Ok(m) => m,
                Err(_) => return (f64::INFINITY, 0.0),
            };
            let d = bi.adjoint().mul(&a[j]).mul(&bi);
            if !d.is_finite() {
                return (f64::INFINITY, 0.0);
            }
            let s = d.singular_values();
            (s[0], s[s.len() - 1])
        })
        .collect();
    Ok((bounds.iter().map(|b| b.0).fold(0.0, f64::max), bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)))
}

fn order_halves(g: &crate::field::ScalarGermField, at: f64, side: Side) -> u32 {
    g.zeros()
        .iter()
        .find(|z| (z.at - at).abs() < LOCATION_TOL)
        .and_then(|z| z.side(side))
        .map_or(0, |s| s.order.halves())
}

/// Whether `β` presents a metabolizer of the discriminant form of `α`:
/// `δ = β^{-*}αβ^{-1}` must be bounded and uniformly invertible. Symbolic
/// pairs are decided exactly from germ orders (`ord α = 2·ord β` on every side).
pub fn is_metabolizer(alpha: &OperatorField, beta: &OperatorField) -> Result<MetabolizerCheck> {
    let (delta_sup, delta_inf) = sampled_check(alpha, beta)?;
    if let (Some(a), Some(b)) = (alpha.as_symbolic(), beta.as_symbolic()) {
        let mut locs: Vec<f64> = a.zeros().iter().chain(b.zeros()).map(|z| z.at).collect();
        locs.sort_by(f64::total_cmp);
        let balanced = locs.iter().all(|&at| {
            [Side::Left, Side::Right].iter().all(|&s| order_halves(a, at, s) == 2 * order_halves(b, at, s))
        });
        let decision = if balanced { Decision::Yes } else { Decision::No };
        return Ok(MetabolizerCheck { decision, delta_sup, delta_inf });
    }
    let decision = combine(
        Decision::from_sup(delta_sup, BOUND),
        Decision::from_sup(1.0 / delta_inf, 1.0 / INVERTIBILITY_FLOOR),
    );
    Ok(MetabolizerCheck { decision, delta_sup, delta_inf })
}

/// `β = |α|^{1/2}`, `δ = sign α`, inclusion `sign α · |α|^{1/2}`.
pub fn metabolizer(phi: &TorsionForm) -> Result<Metabolizer> {
    let reduced = if phi.is_discriminant() { phi.clone() } else { reduce_to_discriminant(phi)?.form };
    let alpha = reduced.alpha();
    let (beta, delta, inclusion) = match alpha {
        OperatorField::Symbolic(g) => {
            let beta = g.sqrt_abs();
            let n = DEFAULT_GRID;
            let sign = OperatorField::scalar_fn(n, |z| g.eval(z).signum())?;
            let incl = OperatorField::scalar_fn(n, |z| {
                let v = g.eval(z);
                v.signum() * v.abs().sqrt()
            })?;
            (OperatorField::symbolic(beta), sign, incl)
        }
        OperatorField::Sampled { fibers, .. } => {
            let n = fibers.len();
            let scale = sup_norm(fibers).max(1.0);
            let parts: Vec<(CMat, CMat, CMat)> = fibers
                .par_iter()
                .enumerate()
                .map(|(j, a)| {
                    let e = herm_eig(a)?;
                    if let Some(l) = e.eigenvalues.iter().find(|l| l.abs() < ZERO_EIGEN_TOL * scale) {
                        return Err(Error::NotBlockDefinite(format!(
                            "fiber {j} (z = {}) has eigenvalue {l:e}",
                            grid_point(j, n)
                        )));
                    }
                    Ok((
                        e.apply(|l| l.abs().sqrt()),
                        e.apply(f64::signum),
                        e.apply(|l| l.signum() * l.abs().sqrt()),
                    ))
                })
                .collect::<Result<_>>()?;
            let mut cols: [Vec<CMat>; 3] = Default::default();
            for (b, s, i) in parts {
                cols[0].push(b);
                cols[1].push(s);
                cols[2].push(i);
            }
            let [b, s, i] = cols;
            (OperatorField::sampled(b)?, OperatorField::sampled(s)?, OperatorField::sampled(i)?)
        }
    };
    let check = is_metabolizer(alpha, &beta)?;
    if check.decision != Decision::Yes {
        return Err(Error::CertificateFailed(format!(
            "|α|^(1/2) fails the metabolizer test (δ in [{:e}, {:e}])",
            check.delta_inf, check.delta_sup
        )));
    }
    Ok(Metabolizer { beta, delta, inclusion, check })
}

/// Hyperbolic presentation `[[0, a], [a, 0]]` on `X₊ ⊕ X₊` and the residual
/// of its diagonalisation to `a ⊕ (−a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicStructure {
    pub presentation: OperatorField,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicReport {
    pub hyperbolic: bool,
    /// False when the answer rests on the sampled density heuristic.
    pub exact: bool,
    pub dilatation: Option<f64>,
    /// A germ of one sign with no partner of the other.
    pub distinguishing: Option<GermEntry>,
    pub structure: Option<HyperbolicStructure>,
}

/// `φ` is hyperbolic iff its positive and negative parts live on isomorphic modules.
pub fn is_hyperbolic(phi: &TorsionForm) -> Result<HyperbolicReport> {
    let split = pos_neg_split(phi)?;
    let verdict = iso_modules(&split.positive.object, &split.negative.object)?;
    let (hyperbolic, exact, dilatation, distinguishing) = match verdict {
        IsoVerdict::Iso => (true, true, None, None),
        IsoVerdict::NotIso { distinguishing, .. } => (false, true, None, distinguishing),
        IsoVerdict::Heuristic { answer, dilatation } => (answer, false, dilatation, None),
    };
    let structure = if hyperbolic { Some(hyperbolic_structure(split.positive.alpha())?) } else { None };
    Ok(HyperbolicReport { hyperbolic, exact, dilatation, distinguishing, structure })
}

fn hyperbolic_structure(a: &OperatorField) -> Result<HyperbolicStructure> {
    let n = a.grid_or(DEFAULT_GRID);
    let a = a.fibers_at(n)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let pairs: Vec<(CMat, f64)> = a
        .par_iter()
        .map(|m| {
            let d = m.rows();
            let id = CMat::identity(d).scale_re(r);
            let u = id.block_diag(&id.scale_re(-1.0)).add(&offdiag(&id));
            let h = offdiag(m);
            let diag = m.block_diag(&m.scale_re(-1.0));
            let res = u.adjoint().mul(&diag).mul(&u).sub(&h).op_norm() / m.op_norm().max(1.0);
            (h, res)
        })
        .collect();
    let residual = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(HyperbolicStructure { presentation: OperatorField::sampled(pairs.into_iter().map(|p| p.0).collect())?, residual })
}
