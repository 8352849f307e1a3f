//! Symmetric forms on torsion objects, presented by fields `f` with
//! `f∘α = α*∘f*`, and the constructions relating them: excision,
//! reduction to a discriminant form, the sign splitting and metabolizers.

pub mod excision;
pub mod positive;
pub mod reduce;
pub mod split;

pub use excision::{excise_spectral, excision_isometry, Excision};
pub use positive::{
    add_forms, complete_diagram, congruence_positive, spectrum_positivity, superfinite_check, AddedForm,
    CompletedDiagram, PositivityReport, SuperfiniteReport,
};
pub use reduce::{nondegeneracy, reduce_to_discriminant, splitting_witness, Reduction, SplittingWitness};
pub use split::{is_hyperbolic, is_metabolizer, metabolizer, pos_neg_split, HyperbolicReport, Metabolizer, MetabolizerCheck, Split};

use crate::error::{Error, Result};
use crate::field::{common_fibers, sup_norm, OperatorField, ScalarGermField};
use crate::linalg::{CMat, C64};
use crate::torsion::{dual_object, TorsionMorphism, TorsionObject, COMMUTE_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Relative tolerance for the identities a certificate is checked against.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Relative tolerance for the final congruence residual.
pub const CONGRUENCE_TOL: f64 = 1e-8;

/// A morphism `X → e(X)` given by `f` with witness `h` (`f∘α = α*∘h`), together
/// with a field `F = −F*` exhibiting `f − h* = α*∘F` (`None` for `F = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct PresentationPair {
    pub object: TorsionObject,
    pub f: OperatorField,
    pub h: OperatorField,
    pub correction: Option<OperatorField>,
}

/// A form presented symmetrically: `h = f*`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionForm {
    pub object: TorsionObject,
    pub f: OperatorField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Both sides already agree up to an invertible change of presentation.
    Direct,
    /// `β` restricted to the excised part equals `h*αh`.
    ExcisionPair,
    /// Isomorphism to a discriminant form.
    Reduction,
    /// Square root of `f*g` on positive forms.
    Positive,
}

/// Numerical evidence for a congruence. `map` is the field `h` (or `k`)
/// realising it; `total` composes it with the given isomorphism when that
/// is uniformly invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct CongruenceCertificate {
    pub kind: CertificateKind,
    pub map: OperatorField,
    pub total: Option<OperatorField>,
    pub witness: Option<OperatorField>,
    pub residual: f64,
    pub eps: Option<f64>,
    pub excised: Vec<(f64, f64)>,
    pub identities: BTreeMap<String, f64>,
}

/// Serializable part of a certificate; fields are written separately.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub kind: CertificateKind,
    pub residual: f64,
    pub eps: Option<f64>,
    pub excised: Vec<(f64, f64)>,
    pub identities: BTreeMap<String, f64>,
}

impl CongruenceCertificate {
    pub(crate) fn new(kind: CertificateKind, map: OperatorField, residual: f64) -> Self {
        CongruenceCertificate {
            kind,
            map,
            total: None,
            witness: None,
            residual,
            eps: None,
            excised: Vec::new(),
            identities: BTreeMap::new(),
        }
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            kind: self.kind,
            residual: self.residual,
            eps: self.eps,
            excised: self.excised.clone(),
            identities: self.identities.clone(),
        }
    }
}

pub(crate) fn one() -> ScalarGermField {
    ScalarGermField::constant(1.0).expect("constant 1 is a valid field")
}

/// The identity field shaped like `like`.
pub(crate) fn identity_like(like: &OperatorField) -> Result<OperatorField> {
    match like {
        OperatorField::Symbolic(_) => Ok(OperatorField::symbolic(one())),
        OperatorField::Sampled { dim, fibers } => OperatorField::identity(fibers.len(), *dim),
    }
}

pub(crate) fn is_identity(f: &OperatorField) -> bool {
    match f {
        OperatorField::Symbolic(g) => g.zeros().is_empty() && g.expr().constant_value() == Some(1.0),
        OperatorField::Sampled { dim, fibers } => {
            let id = CMat::identity(*dim);
            fibers.iter().all(|m| *m == id)
        }
    }
}

fn is_zero(f: &Option<OperatorField>) -> bool {
    match f {
        None => true,
        Some(OperatorField::Symbolic(_)) => false,
        Some(OperatorField::Sampled { fibers, .. }) => fibers.iter().all(|m| m.max_abs() == 0.0),
    }
}

/// `max_j ‖a_j − b_j‖ / max(1, scale)`.
pub(crate) fn sup_residual(a: &[CMat], b: &[CMat], scale: f64) -> f64 {
    let r = a.par_iter().zip(b.par_iter()).map(|(x, y)| x.sub(y).op_norm()).reduce(|| 0.0, f64::max);
    r / scale.max(1.0)
}

/// Check `f∘α = α*∘h` on the common grid.
fn check_symmetric_square(alpha: &OperatorField, f: &OperatorField, h: &OperatorField) -> Result<()> {
    if let (Some(_), Some(fs), Some(hs)) = (alpha.as_symbolic(), f.as_symbolic(), h.as_symbolic()) {
        if fs.expr() == hs.expr() {
            return Ok(());
        }
    }
    let (_, v) = common_fibers(&[alpha, f, h])?;
    let (a, f, h) = (&v[0], &v[1], &v[2]);
    let lhs: Vec<CMat> = a.par_iter().zip(f.par_iter()).map(|(a, f)| f.mul(a)).collect();
    let rhs: Vec<CMat> = a.par_iter().zip(h.par_iter()).map(|(a, h)| a.adjoint().mul(h)).collect();
    let scale = sup_norm(f) * sup_norm(a) + sup_norm(a) * sup_norm(h);
    let r = sup_residual(&lhs, &rhs, 1.0) / scale.max(1e-300);
    if r > COMMUTE_TOL {
        return Err(Error::HypothesisViolated(format!("f∘α − α*∘h has relative norm {r:e}")));
    }
    Ok(())
}

impl PresentationPair {
    pub fn new(
        object: TorsionObject,
        f: OperatorField,
        h: OperatorField,
        correction: Option<OperatorField>,
    ) -> Result<Self> {
        let a = object.alpha();
        check_symmetric_square(a, &f, &h)?;
        if let Some(c) = correction.as_ref().filter(|_| !is_zero(&correction)) {
            let (_, v) = common_fibers(&[a, &f, &h, c])?;
            let skew = v[3].par_iter().map(|m| m.add(&m.adjoint()).op_norm()).reduce(|| 0.0, f64::max);
            let scale = sup_norm(&v[3]).max(1.0);
            if skew > COMMUTE_TOL * scale {
                return Err(Error::HypothesisViolated(format!("F + F* has norm {skew:e}")));
            }
        }
        let p = PresentationPair { object, f, h, correction };
        let d = p.symmetry_defect()?;
        if d > COMMUTE_TOL {
            return Err(Error::HypothesisViolated(format!("f − h* − α*F has relative norm {d:e}")));
        }
        Ok(p)
    }

    /// `‖f − h* − α*F‖` relative to `max(1, ‖f‖)`.
    pub fn symmetry_defect(&self) -> Result<f64> {
        let a = self.object.alpha();
        if let (Some(f), Some(h)) = (self.f.as_symbolic(), self.h.as_symbolic()) {
            if f.expr() == h.expr() && self.correction.is_none() {
                return Ok(0.0);
            }
        }
        let mut all = vec![a, &self.f, &self.h];
        all.extend(self.correction.as_ref());
        let (_, v) = common_fibers(&all)?;
        let lhs: Vec<CMat> = v[1].par_iter().zip(v[2].par_iter()).map(|(f, h)| f.sub(&h.adjoint())).collect();
        let rhs: Vec<CMat> = match &self.correction {
            None => lhs.iter().map(|m| CMat::zeros(m.rows(), m.cols())).collect(),
            Some(_) => v[0].par_iter().zip(v[3].par_iter()).map(|(a, c)| a.adjoint().mul(c)).collect(),
        };
        Ok(sup_residual(&lhs, &rhs, sup_norm(&v[1])))
    }

    /// The same morphism presented by `(h*, f*)` with correction `−F`.
    pub fn transpose(&self) -> PresentationPair {
        let correction = match &self.correction {
            Some(OperatorField::Sampled { dim, fibers }) => Some(OperatorField::Sampled {
                dim: *dim,
                fibers: fibers.iter().map(|m| m.scale_re(-1.0)).collect(),
            }),
            c => c.clone(),
        };
        PresentationPair { object: self.object.clone(), f: self.h.adjoint(), h: self.f.adjoint(), correction }
    }

    /// `f₁ = f − ½α*F`, `h₁ = h − ½Fα`; then `h₁ = f₁*` and `[f₁] = [f]`.
    pub fn symmetrize(&self) -> Result<TorsionForm> {
        if is_zero(&self.correction) {
            return Ok(TorsionForm { object: self.object.clone(), f: self.f.clone() });
        }
        let a = self.object.alpha();
        let c = self.correction.as_ref().expect("non-zero correction");
        let (_, v) = common_fibers(&[a, &self.f, &self.h, c])?;
        let half = C64::new(0.5, 0.0);
        let f1: Vec<CMat> = (0..v[0].len())
            .into_par_iter()
            .map(|j| v[1][j].sub(&v[0][j].adjoint().mul(&v[3][j]).scale(half)))
            .collect();
        let h1: Vec<CMat> =
            (0..v[0].len()).into_par_iter().map(|j| v[2][j].sub(&v[3][j].mul(&v[0][j]).scale(half))).collect();
        let adj: Vec<CMat> = h1.iter().map(CMat::adjoint).collect();
        let d = sup_residual(&f1, &adj, sup_norm(&f1));
        if d > COMMUTE_TOL {
            return Err(Error::CertificateFailed(format!("h₁ − f₁* has relative norm {d:e}")));
        }
        Ok(TorsionForm { object: self.object.clone(), f: OperatorField::sampled(f1)? })
    }

    pub fn morphism(&self) -> Result<TorsionMorphism> {
        TorsionMorphism::new(self.object.clone(), dual_object(&self.object), self.f.clone(), self.h.clone())
    }
}

impl TorsionForm {
    pub fn new(object: TorsionObject, f: OperatorField) -> Result<Self> {
        let h = f.adjoint();
        check_symmetric_square(object.alpha(), &f, &h)?;
        Ok(TorsionForm { object, f })
    }

    pub fn alpha(&self) -> &OperatorField {
        self.object.alpha()
    }

    pub fn is_discriminant(&self) -> bool {
        is_identity(&self.f)
    }

    pub fn presentation(&self) -> PresentationPair {
        PresentationPair { object: self.object.clone(), f: self.f.clone(), h: self.f.adjoint(), correction: None }
    }

    pub fn morphism(&self) -> Result<TorsionMorphism> {
        TorsionMorphism::new(self.object.clone(), dual_object(&self.object), self.f.clone(), self.f.adjoint())
    }
}

/// The form `f = 1` on `(A, α)`; `α` must be Hermitian and injective.
pub fn discriminant(alpha: OperatorField) -> Result<TorsionForm> {
    let defect = alpha.hermitian_defect();
    if !alpha.is_hermitian() {
        return Err(Error::NotHermitian { defect });
    }
    let object = TorsionObject::new(alpha)?;
    let f = identity_like(object.alpha())?;
    Ok(TorsionForm { object, f })
}
