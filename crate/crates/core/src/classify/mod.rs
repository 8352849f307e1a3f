//! Congruence classification of torsion Hermitian forms by the germ
//! signatures of their positive and negative parts, and the ratio oracle
//! used to cross-check it.

pub mod oracle;

pub use oracle::{ratio_oracle, OracleAnswer, OracleVerdict, DEFAULT_REFINEMENTS};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::field::{sample_symbolic, OperatorField, ScalarGermField, DEFAULT_GRID};
use crate::forms::{
    congruence_positive, discriminant, pos_neg_split, reduce_to_discriminant, CertificateSummary, CongruenceCertificate,
    Split, TorsionForm,
};
use crate::torsion::density::{density_curve_on, LAMBDA_WINDOW};
use crate::torsion::{germ_signature, iso_modules, ns_exponent, GermEntry, GermSignature, IsoVerdict, TorsionObject};
use serde::{Serialize, Serializer};

/// Points on the λ window used for sampled exponent fits.
pub const DENSITY_POINTS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExactSymbolic,
    HeuristicSampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub mode: Mode,
    /// Germ signatures of the two parts; absent for sampled forms.
    pub positive: Option<GermSignature>,
    pub negative: Option<GermSignature>,
    /// Exponents of the spectral density near 0 of the two parts.
    pub ns_exponents: (Option<f64>, Option<f64>),
    pub reduction: CertificateSummary,
    pub split_residual: f64,
}

fn symbolic_exponent(sig: &GermSignature) -> Option<f64> {
    sig.orders().last().map(|p| 1.0 / p.value())
}

fn sampled_exponent(x: &TorsionObject, grid: usize) -> Option<f64> {
    let c = density_curve_on(x, grid, LAMBDA_WINDOW.0, LAMBDA_WINDOW.1, DENSITY_POINTS).ok()?;
    ns_exponent(&c).ok()
}

fn split_of(phi: &TorsionForm) -> Result<(Split, CertificateSummary)> {
    let red = reduce_to_discriminant(phi)?;
    let split = pos_neg_split(&red.form)?;
    Ok((split, red.certificate.summary()))
}

pub fn classify_form(phi: &TorsionForm) -> Result<ClassificationReport> {
    let (split, reduction) = split_of(phi)?;
    let (p, m) = (&split.positive.object, &split.negative.object);
    if p.alpha().as_symbolic().is_some() {
        let (ps, ms) = (germ_signature(p)?, germ_signature(m)?);
        Ok(ClassificationReport {
            mode: Mode::ExactSymbolic,
            ns_exponents: (symbolic_exponent(&ps), symbolic_exponent(&ms)),
            positive: Some(ps),
            negative: Some(ms),
            reduction,
            split_residual: split.reassembly_residual,
        })
    } else {
        let grid = p.alpha().grid_or(DEFAULT_GRID);
        Ok(ClassificationReport {
            mode: Mode::HeuristicSampled,
            positive: None,
            negative: None,
            ns_exponents: (sampled_exponent(p, grid), sampled_exponent(m, grid)),
            reduction,
            split_residual: split.reassembly_residual,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distinguisher {
    pub part: Part,
    pub germ: GermEntry,
    /// Whether the germ belongs to the first form.
    pub in_first: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartCertificate {
    pub part: Part,
    pub certificate: CongruenceCertificate,
}

impl Serialize for PartCertificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            part: Part,
            #[serde(flatten)]
            summary: &'a CertificateSummary,
        }
        Out { part: self.part, summary: &self.certificate.summary() }.serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CongruenceReport {
    pub congruent: bool,
    /// False when the answer rests on sampled density curves.
    pub exact: bool,
    pub distinguishing: Option<Distinguisher>,
    /// Density dilatation constants of the two parts (sampled mode).
    pub dilatations: (Option<f64>, Option<f64>),
    pub certificates: Vec<PartCertificate>,
}

/// Sampled copy of a symbolic part with its sign normalised to be positive.
fn positive_samples(x: &TorsionObject, sign: f64, n: usize) -> Result<OperatorField> {
    let g = x.alpha().as_symbolic().ok_or_else(|| Error::Validation {
        field: "alpha".into(),
        message: "expected a symbolic part".into(),
    })?;
    sample_symbolic(&g.scale(sign)?, n)
}

/// `k = (α_ψ/α_φ)^{1/2}` on one part, through the positive-form certificate
/// with `f = 1` and `g = α_ψ/α_φ`.
fn scalar_part_certificate(a: &TorsionObject, b: &TorsionObject, sign: f64) -> Result<CongruenceCertificate> {
    let n = DEFAULT_GRID;
    let (fa, fb) = (positive_samples(a, sign, n)?, positive_samples(b, sign, n)?);
    let (xa, xb) = (fa.fibers().unwrap_or_default(), fb.fibers().unwrap_or_default());
    let ratio = OperatorField::sampled(xa.iter().zip(xb).map(|(x, y)| CMat::scalar(y[(0, 0)] / x[(0, 0)])).collect())?;
    let one = OperatorField::identity(n, 1)?;
    let form = |x| TorsionForm { object: TorsionObject::sampled_from_exact(x), f: one.clone() };
    congruence_positive(&form(fa), &form(fb), &one, &ratio)
}

pub fn congruent(phi: &TorsionForm, psi: &TorsionForm) -> Result<CongruenceReport> {
    let (sp, _) = split_of(phi)?;
    let (sq, _) = split_of(psi)?;
    let parts = [
        (Part::Negative, &sp.negative.object, &sq.negative.object, -1.0),
        (Part::Positive, &sp.positive.object, &sq.positive.object, 1.0),
    ];
    let symbolic = [&sp.positive, &sq.positive].iter().all(|f| f.alpha().as_symbolic().is_some());
    if symbolic {
        for (part, a, b, _) in parts {
            let (sa, sb) = (germ_signature(a)?, germ_signature(b)?);
            if let Some((germ, in_first)) = sa.first_difference(&sb) {
                return Ok(CongruenceReport {
                    congruent: false,
                    exact: true,
                    distinguishing: Some(Distinguisher { part, germ, in_first }),
                    dilatations: (None, None),
                    certificates: Vec::new(),
                });
            }
        }
        let certificates = parts
            .iter()
            .map(|&(part, a, b, sign)| Ok(PartCertificate { part, certificate: scalar_part_certificate(a, b, sign)? }))
            .collect::<Result<Vec<_>>>()?;
        return Ok(CongruenceReport {
            congruent: true,
            exact: true,
            distinguishing: None,
            dilatations: (None, None),
            certificates,
        });
    }
    let grid = [sp.positive.alpha(), sq.positive.alpha()].iter().find_map(|f| f.grid()).unwrap_or(DEFAULT_GRID);
    let as_sampled = |x: &TorsionObject| -> Result<TorsionObject> { TorsionObject::new(x.alpha().to_sampled(grid)?) };
    let mut answers = Vec::new();
    for (_, a, b, _) in parts {
        answers.push(iso_modules(&as_sampled(a)?, &as_sampled(b)?)?);
    }
    let dil = |v: &IsoVerdict| match v {
        IsoVerdict::Heuristic { dilatation, .. } => *dilatation,
        _ => None,
    };
    Ok(CongruenceReport {
        congruent: answers.iter().all(IsoVerdict::answer),
        exact: false,
        distinguishing: None,
        dilatations: (dil(&answers[1]), dil(&answers[0])),
        certificates: Vec::new(),
    })
}

/// Discriminant form of a symbolic scalar field.
pub fn scalar_form(g: ScalarGermField) -> Result<TorsionForm> {
    discriminant(OperatorField::symbolic(g))
}
