//! Seeded property suite behind `tforms check`.
//!
//! Every property is run on freshly drawn instances and tallied. Nothing in
//! the report depends on timing or thread count, so a fixed seed gives a
//! byte-identical report.

use crate::classify::{congruent, ratio_oracle, scalar_form, OracleAnswer, DEFAULT_REFINEMENTS};
use crate::error::Result;
use crate::field::{OperatorField, Sign};
use crate::forms::{
    congruence_positive, discriminant, excision_isometry, is_hyperbolic, metabolizer, pos_neg_split, TorsionForm,
    CONGRUENCE_TOL, IDENTITY_TOL,
};
use crate::linalg::{herm_eig, principal_sqrt, spectral_projector, CMat, SqrtMethod, C64};
use crate::random::{
    mutate, random_factor_spec, random_form_field, random_hermitian, random_hermitian_field, random_invertible_field,
    random_matrix, rng, SignedGerm,
};
use crate::torsion::{germ_signature, Decision, GermSignature};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Eigendecompositions must reconstruct their input to this relative accuracy.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Grid used by the sampled instances of the suite.
pub const CHECK_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Linalg,
    Forms,
    Classify,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest measured residual; absent for yes/no properties.
    pub worst: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub suite: Suite,
    pub properties: Vec<PropertyResult>,
    pub passed: usize,
    pub failed: usize,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

struct Tally(PropertyResult);

impl Tally {
    fn measured(name: &str, tol: f64) -> Self {
        Tally(PropertyResult { name: name.into(), cases: 0, passed: 0, failed: 0, worst: Some(0.0), tolerance: Some(tol) })
    }

    fn boolean(name: &str) -> Self {
        Tally(PropertyResult { name: name.into(), cases: 0, passed: 0, failed: 0, worst: None, tolerance: None })
    }

    /// An error counts as a failure.
    fn value(&mut self, r: Result<f64>) {
        let p = &mut self.0;
        p.cases += 1;
        match r {
            Ok(v) if v <= p.tolerance.unwrap_or(0.0) => {
                p.passed += 1;
                p.worst = p.worst.map(|w| w.max(v));
            }
            Ok(v) => {
                p.failed += 1;
                p.worst = p.worst.map(|w| if v.is_nan() { v } else { w.max(v) });
            }
            Err(_) => p.failed += 1,
        }
    }

    fn truth(&mut self, r: Result<bool>) {
        let p = &mut self.0;
        p.cases += 1;
        if matches!(r, Ok(true)) {
            p.passed += 1;
        } else {
            p.failed += 1;
        }
    }
}

pub fn run_check(seed: u64, suite: Suite) -> CheckReport {
    let mut properties = Vec::new();
    if matches!(suite, Suite::Linalg | Suite::All) {
        properties.extend(linalg_suite(seed));
    }
    if matches!(suite, Suite::Forms | Suite::All) {
        properties.extend(forms_suite(seed));
    }
    if matches!(suite, Suite::Classify | Suite::All) {
        properties.extend(classify_suite(seed));
    }
    let passed = properties.iter().map(|p| p.passed).sum();
    let failed = properties.iter().map(|p| p.failed).sum();
    CheckReport { seed, suite, properties, passed, failed }
}

/// Hermitian matrix with prescribed eigenvalues in a random basis.
fn with_spectrum(r: &mut impl Rng, eigenvalues: &[f64]) -> CMat {
    let d = eigenvalues.len();
    let u = herm_eig(&random_hermitian(r, d)).expect("Hermitian").eigenvectors;
    u.mul(&CMat::from_real_diag(eigenvalues)).mul(&u.adjoint()).hermitian_part()
}

/// Relative eigen-reconstruction error and unitarity defect.
pub fn eigen_errors(m: &CMat) -> Result<(f64, f64)> {
    let e = herm_eig(m)?;
    let scale = m.op_norm().max(1.0);
    let v = &e.eigenvectors;
    Ok((e.reconstruct().sub(m).op_norm() / scale, v.adjoint().mul(v).sub(&CMat::identity(m.rows())).op_norm()))
}

fn linalg_suite(seed: u64) -> Vec<PropertyResult> {
    let mut r = rng(seed);
    let mut recon = Tally::measured("eigen_reconstruction", RECONSTRUCTION_TOL);
    let mut unitary = Tally::measured("eigenvectors_unitary", RECONSTRUCTION_TOL);
    let mut sqrt = Tally::measured("principal_sqrt", IDENTITY_TOL);
    let mut proj = Tally::measured("spectral_projector", RECONSTRUCTION_TOL);
    for case in 0..200 {
        let d = r.random_range(1..=8);
        let m = if case % 4 == 3 {
            let mut ev: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            ev[d / 2] = ev[0];
            with_spectrum(&mut r, &ev)
        } else {
            random_hermitian(&mut r, d)
        };
        let errs = eigen_errors(&m);
        recon.value(errs.clone().map(|e| e.0));
        unitary.value(errs.map(|e| e.1));
        let lambda = r.random_range(-0.5..0.5);
        proj.value(spectral_projector(&m, lambda).map(|p| {
            let idem = p.mul(&p).sub(&p).op_norm();
            let comm = p.mul(&m).sub(&m.mul(&p)).op_norm() / m.op_norm().max(1.0);
            idem.max(comm)
        }));
    }
    for _ in 0..60 {
        let d = r.random_range(1..=4);
        let a = random_matrix(&mut r, d);
        let m = a.mul(&a.adjoint()).shift(C64::new(0.1, 0.0));
        for method in [SqrtMethod::Eig, SqrtMethod::Contour(None), SqrtMethod::Iteration] {
            sqrt.value(principal_sqrt(&m, method).map(|s| s.mul(&s).sub(&m).op_norm() / m.op_norm()));
        }
    }
    vec![recon.0, unitary.0, sqrt.0, proj.0]
}

/// Positive forms `φ = (A, 1)`, `ψ = (B, 1)` and an isomorphism `(f, g)`
/// with `gA = Bf`: `B = f^{-*}·k₀Ak₀*·f^{-1}` and `g = BfA^{-1}` where
/// `k₀ = s(1 + AX)` with `‖A‖‖X‖ ≤ ½`, so that `g = s²f^{-*}(1 + AX)(1 + AX*)`
/// stays uniformly invertible.
pub fn positive_instance(
    r: &mut impl Rng,
    n: usize,
    d: usize,
) -> Result<(TorsionForm, TorsionForm, OperatorField, OperatorField)> {
    let a = random_form_field(r, d, Some(Sign::Plus), 2).sample(n)?;
    let f = random_invertible_field(r, d, n)?;
    let x = random_matrix(r, d);
    let x = x.scale_re(0.5 / (x.op_norm() * a.ess_sup()).max(1e-300));
    let s = r.random_range(0.5..2.0);
    let (av, fv) = (a.fibers().unwrap_or_default(), f.fibers().unwrap_or_default());
    let pairs: Vec<(CMat, CMat)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let k0 = CMat::identity(d).add(&av[j].mul(&x)).scale_re(s);
            let inner = k0.mul(&av[j]).mul(&k0.adjoint());
            let fi = fv[j].inverse()?;
            let b = fi.adjoint().mul(&inner).mul(&fi).hermitian_part();
            let g = av[j].solve(&fv[j].adjoint().mul(&b))?.adjoint();
            Ok((b, g))
        })
        .collect::<Result<_>>()?;
    let (b, g): (Vec<CMat>, Vec<CMat>) = pairs.into_iter().unzip();
    Ok((discriminant(a)?, discriminant(OperatorField::sampled(b)?)?, f, OperatorField::sampled(g)?))
}

/// `(α, β, f, g)` with `β = α + αFα`, `f = 1 + αF`, `g = 1` and
/// `‖α‖·‖F‖ = product`.
pub fn excision_instance(
    r: &mut impl Rng,
    n: usize,
    d: usize,
    product: f64,
) -> Result<(OperatorField, OperatorField, OperatorField, OperatorField)> {
    let alpha = random_form_field(r, d, None, 2).sample(n)?;
    let corr = random_hermitian_field(r, d, n, product / alpha.ess_sup())?;
    let af = alpha.compose(&corr)?;
    let one = OperatorField::identity(n, d)?;
    let beta = OperatorField::sampled(
        alpha.add(&af.compose(&alpha)?)?.fibers().unwrap_or_default().iter().map(CMat::hermitian_part).collect(),
    )?;
    Ok((alpha, beta, one.add(&af)?, one))
}

/// Signed germs of a pair of part signatures, in the slot convention of
/// the random generator.
pub fn signed_germs(positive: &GermSignature, negative: &GermSignature) -> Vec<SignedGerm> {
    let mut out: Vec<SignedGerm> = positive
        .entries()
        .iter()
        .chain(negative.entries())
        .map(|e| {
            let slot = (e.location * crate::random::LOCATION_DENOMINATOR as f64).round() as u32;
            (slot, e.side, e.order.value().round() as u32, e.sign)
        })
        .collect();
    out.sort();
    out
}

fn forms_suite(seed: u64) -> Vec<PropertyResult> {
    let mut r = rng(seed.wrapping_add(1));
    let n = CHECK_GRID;
    let mut split = Tally::measured("split_reassembly", CONGRUENCE_TOL);
    let mut positive = Tally::measured("positive_certificate_identities", IDENTITY_TOL);
    let mut excision = Tally::measured("excision_certificate_identities", IDENTITY_TOL);
    let mut residual = Tally::measured("excision_congruence_residual", CONGRUENCE_TOL);
    let mut meta = Tally::boolean("metabolizer_delta_criterion");
    let worst_identity = |c: &crate::forms::CongruenceCertificate| c.identities.values().fold(0.0, |a: f64, &b| a.max(b));
    for _ in 0..40 {
        let d = r.random_range(1..=4);
        let alpha = random_form_field(&mut r, d, None, 3).sample(n);
        split.value(alpha.and_then(discriminant).and_then(|p| pos_neg_split(&p)).map(|s| s.reassembly_residual));

        let d = r.random_range(1..=4);
        let cert = positive_instance(&mut r, n, d).and_then(|(p, q, f, g)| congruence_positive(&p, &q, &f, &g));
        positive.value(cert.map(|c| worst_identity(&c).max(c.residual)));

        let d = r.random_range(1..=4);
        let product = r.random_range(0.1..3.0);
        let cert = excision_instance(&mut r, n, d, product).and_then(|(a, b, f, g)| excision_isometry(&a, &b, &f, &g));
        residual.value(cert.as_ref().map(|c| c.residual).map_err(Clone::clone));
        excision.value(cert.map(|c| worst_identity(&c)));
    }
    for k in 0..20 {
        let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let phi = if k % 4 < 2 {
            let mut spec = random_factor_spec(&mut r, 4).definite();
            spec.sign = sign;
            spec.build().and_then(scalar_form)
        } else {
            let d = r.random_range(1..=3);
            random_form_field(&mut r, d, Some(sign), 2).sample(n).and_then(discriminant)
        };
        meta.truth(phi.and_then(|p| metabolizer(&p)).map(|m| m.check.decision == Decision::Yes));
    }
    vec![split.0, positive.0, excision.0, residual.0, meta.0]
}

fn classify_suite(seed: u64) -> Vec<PropertyResult> {
    let mut r = rng(seed.wrapping_add(2));
    let mut signatures = Tally::boolean("signatures_match_factors");
    let mut verdicts = Tally::boolean("congruence_iff_signatures");
    let mut oracle = Tally::boolean("ratio_oracle_agreement");
    let mut hyper = Tally::boolean("hyperbolic_iff_zero_free");
    for _ in 0..60 {
        let a = random_factor_spec(&mut r, 4);
        let b = mutate(&mut r, &a);
        let case = || -> Result<[bool; 4]> {
            let (fa, fb) = (a.build()?, b.build()?);
            let (pa, pb) = (scalar_form(fa.clone())?, scalar_form(fb.clone())?);
            let split = pos_neg_split(&pa)?;
            let got = signed_germs(&germ_signature(&split.positive.object)?, &germ_signature(&split.negative.object)?);
            let same = a.signed_germs() == b.signed_germs();
            let report = congruent(&pa, &pb)?;
            let answer = ratio_oracle(&fa, &fb, &DEFAULT_REFINEMENTS)?.answer;
            let agrees = match answer {
                OracleAnswer::Inconclusive => true,
                OracleAnswer::Congruent => report.congruent,
                OracleAnswer::NotCongruent => !report.congruent,
            };
            let h = is_hyperbolic(&pa)?;
            Ok([got == a.signed_germs(), report.congruent == same, agrees, h.hyperbolic == a.factors.is_empty()])
        };
        let out = case();
        for (k, t) in [&mut signatures, &mut verdicts, &mut oracle, &mut hyper].into_iter().enumerate() {
            t.truth(out.as_ref().map(|o| o[k]).map_err(Clone::clone));
        }
    }
    vec![signatures.0, verdicts.0, oracle.0, hyper.0]
}
