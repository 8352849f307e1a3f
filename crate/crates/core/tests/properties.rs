use proptest::prelude::*;
use rand::Rng;
use tforms::classify::{classify_form, scalar_form};
use tforms::field::{field_algebra, FieldOp, OperatorField, ScalarGermField, Sign};
use tforms::forms::{discriminant, excise_spectral, pos_neg_split, TorsionForm};
use tforms::linalg::{herm_eig, principal_sqrt, sign_modulus, spectral_projector, CMat, SqrtMethod, C64};
use tforms::random::{random_factor_spec, random_form_field, random_hermitian, random_invertible_field, rng};
use tforms::torsion::density::density_curve_on;
use tforms::torsion::{dual_object, germ_signature, GermEntry, GermSignature, morphisms_equal, Decision, TorsionObject};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    a.sub(b).op_norm() / b.op_norm().max(1.0)
}

fn hermitian(seed: u64, d: usize) -> CMat {
    random_hermitian(&mut rng(seed), d)
}

/// Hermitian matrix with the given spectrum in a random basis.
fn with_spectrum(seed: u64, ev: &[f64]) -> CMat {
    let u = herm_eig(&hermitian(seed, ev.len())).unwrap().eigenvectors;
    u.mul(&CMat::from_real_diag(ev)).mul(&u.adjoint()).hermitian_part()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn eigen_reconstruction(seed: u64, d in 1usize..=8, scale in -3.0f64..3.0) {
        let m = hermitian(seed, d).scale_re(10f64.powf(scale));
        let e = herm_eig(&m).unwrap();
        prop_assert!(e.reconstruct().sub(&m).op_norm() <= 1e-10 * m.op_norm().max(1.0));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn square_roots_agree(seed: u64, ev in prop::collection::vec(0.1f64..10.0, 1..=6)) {
        let m = with_spectrum(seed, &ev);
        let a = principal_sqrt(&m, SqrtMethod::Eig).unwrap();
        let b = principal_sqrt(&m, SqrtMethod::Contour(None)).unwrap();
        let c = principal_sqrt(&m, SqrtMethod::Iteration).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-9, "eig vs contour {}", rel(&a, &b));
        prop_assert!(rel(&a, &c) <= 1e-9, "eig vs iteration {}", rel(&a, &c));
    }

    #[test]
    fn projectors_nest(seed: u64, d in 1usize..=6, l1 in -2.0f64..2.0, l2 in -2.0f64..2.0) {
        let m = hermitian(seed, d);
        let (Ok(p1), Ok(p2), Ok(p)) =
            (spectral_projector(&m, l1), spectral_projector(&m, l2), spectral_projector(&m, l1.min(l2)))
        else {
            return Err(TestCaseError::reject("threshold on an eigenvalue"));
        };
        prop_assert!(p1.mul(&p2).sub(&p).op_norm() <= 1e-10);
    }

    #[test]
    fn polar_parts(seed: u64, d in 1usize..=6) {
        let m = hermitian(seed, d);
        let Ok(p) = sign_modulus(&m) else { return Err(TestCaseError::reject("near-singular")) };
        let (s, g) = (&p.sign, &p.modulus);
        let scale = m.op_norm().max(1.0);
        prop_assert!(s.mul(s).sub(&CMat::identity(d)).op_norm() <= 1e-10);
        prop_assert!(s.mul(g).mul(g).sub(&m).op_norm() <= 1e-10 * scale);
        prop_assert!(s.mul(g).sub(&g.mul(s)).op_norm() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn field_algebra_is_fiberwise(seed: u64, d in 1usize..=4, n in 8usize..64) {
        let mut r = rng(seed);
        let a = random_invertible_field(&mut r, d, n).unwrap();
        let b = random_invertible_field(&mut r, d, n).unwrap();
        let (fa, fb) = (a.fibers().unwrap(), b.fibers().unwrap());
        let sum = field_algebra(FieldOp::Add, &[&a, &b]).unwrap();
        let prod = field_algebra(FieldOp::Compose, &[&a, &b]).unwrap();
        for j in 0..n {
            prop_assert_eq!(&sum.fibers().unwrap()[j], &fa[j].add(&fb[j]));
            prop_assert!(prod.fibers().unwrap()[j].sub(&fa[j].mul(&fb[j])).op_norm() <= 1e-14 * fa[j].op_norm() * fb[j].op_norm());
        }
        let gram = field_algebra(FieldOp::Compose, &[&a.adjoint(), &a]).unwrap();
        for m in gram.fibers().unwrap() {
            prop_assert!(herm_eig(&m.hermitian_part()).unwrap().eigenvalues[0] >= -1e-12);
        }
    }

    #[test]
    fn sampling_commutes_with_products(seed: u64, n in 16usize..512) {
        let mut r = rng(seed);
        let f = random_factor_spec(&mut r, 2).build().unwrap();
        let g = random_factor_spec(&mut r, 2).build().unwrap();
        let (Ok(direct), Ok(sf), Ok(sg)) = (f.mul(&g).sample(n), f.sample(n), g.sample(n)) else {
            return Err(TestCaseError::reject("a zero sits on the grid"));
        };
        for ((p, x), y) in direct.iter().zip(&sf).zip(&sg) {
            prop_assert!((p - x * y).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn signature_survives_unit_factors(seed: u64) {
        let f = random_factor_spec(&mut rng(seed), 3).build().unwrap();
        let sig = germ_signature(&TorsionObject::new(OperatorField::symbolic(f.clone())).unwrap()).unwrap();
        for unit in ["2", "1 + z/2"] {
            let u = ScalarGermField::parse(unit, vec![]).unwrap();
            let g = germ_signature(&TorsionObject::new(OperatorField::symbolic(u.mul(&f))).unwrap()).unwrap();
            prop_assert_eq!(&g, &sig);
        }
        let neg = germ_signature(&TorsionObject::new(OperatorField::symbolic(f.scale(-1.0).unwrap())).unwrap()).unwrap();
        let flipped = sig.entries().iter().map(|e| GermEntry { sign: e.sign.flip(), ..*e }).collect();
        prop_assert_eq!(neg, GermSignature::from_entries(flipped));
    }

    #[test]
    fn part_signatures_carry_their_sign(seed: u64) {
        let spec = random_factor_spec(&mut rng(seed), 4);
        let report = classify_form(&scalar_form(spec.build().unwrap()).unwrap()).unwrap();
        let (pos, neg) = (report.positive.unwrap(), report.negative.unwrap());
        prop_assert!(pos.entries().iter().all(|e| e.sign == Sign::Plus));
        prop_assert!(neg.entries().iter().all(|e| e.sign == Sign::Minus));
        prop_assert_eq!(pos.len() + neg.len(), 2 * spec.factors.len());
    }

    #[test]
    fn double_dual_is_the_identity(seed: u64, d in 1usize..=4) {
        let x = TorsionObject::new(random_form_field(&mut rng(seed), d, None, 2).sample(32).unwrap()).unwrap();
        let back = dual_object(&dual_object(&x));
        prop_assert!(back.alpha().sub(x.alpha()).unwrap().ess_sup() <= 1e-14);
    }

    #[test]
    fn transpose_is_an_involution(seed: u64, d in 1usize..=3) {
        let alpha = random_form_field(&mut rng(seed), d, None, 2).sample(32).unwrap();
        let unit = alpha.scale(C64::new(1.0 / alpha.ess_sup(), 0.0)).unwrap();
        let f = OperatorField::identity(32, d).unwrap().scale(C64::new(2.0, 0.0)).unwrap().add(&unit).unwrap();
        let phi = TorsionForm::new(TorsionObject::new(alpha).unwrap(), f).unwrap();
        let p = phi.presentation();
        let twice = p.transpose().transpose();
        let eq = morphisms_equal(&p.morphism().unwrap(), &twice.morphism().unwrap()).unwrap();
        prop_assert_eq!(eq.decision, Decision::Yes);
    }

    #[test]
    fn excision_is_a_congruence(seed: u64, d in 1usize..=4, eps in 0.01f64..0.5) {
        let alpha = random_form_field(&mut rng(seed), d, None, 3).sample(64).unwrap();
        let ex = excise_spectral(&alpha, eps).unwrap();
        prop_assert!(ex.certificate.residual <= 1e-8, "{}", ex.certificate.residual);
        for (q, p) in ex.q.fibers().unwrap().iter().zip(ex.p.fibers().unwrap()) {
            prop_assert!(q.mul(q).sub(q).op_norm() <= 1e-10);
            prop_assert!(q.add(p).sub(&CMat::identity(d)).op_norm() <= 1e-12);
        }
    }

    #[test]
    fn split_reassembles(seed: u64, d in 1usize..=4) {
        let alpha = random_form_field(&mut rng(seed), d, None, 3).sample(128).unwrap();
        let s = pos_neg_split(&discriminant(alpha).unwrap()).unwrap();
        prop_assert!(s.reassembly_residual <= 1e-8);
    }

    #[test]
    fn definite_forms_have_empty_opposite_part(seed: u64, positive: bool) {
        let sign = if positive { Sign::Plus } else { Sign::Minus };
        let mut spec = random_factor_spec(&mut rng(seed), 3).definite();
        spec.sign = sign;
        let s = pos_neg_split(&scalar_form(spec.build().unwrap()).unwrap()).unwrap();
        let opposite = if positive { s.negative } else { s.positive };
        prop_assert!(germ_signature(&opposite.object).unwrap().is_empty());
    }

    #[test]
    fn density_is_a_bounded_distribution(seed: u64, d in 1usize..=4) {
        let mut r = rng(seed);
        let x = TorsionObject::new(random_form_field(&mut r, d, None, 3).sample(256).unwrap()).unwrap();
        let hi = r.random_range(0.5..4.0);
        let Ok(c) = density_curve_on(&x, 256, 1e-4, hi, 40) else {
            return Err(TestCaseError::reject("window below every modulus"));
        };
        prop_assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.values.iter().all(|&v| (0.0..=d as f64 + 1e-12).contains(&v)));
    }
}

#[test]
fn real_inputs_give_real_roots() {
    let m = CMat::from_real_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
    let r = principal_sqrt(&m, SqrtMethod::Contour(None)).unwrap();
    assert!(r.as_slice().iter().all(|z: &C64| z.im == 0.0));
}
