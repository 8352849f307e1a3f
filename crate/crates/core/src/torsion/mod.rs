//! Torsion objects `X = (α: A → A)`, their morphisms up to the
//! representative equivalence, and the duality `X ↦ e(X)`.

pub mod density;
pub mod signature;

pub use density::{density_curve, iso_modules, ns_exponent, DensityCurve, IsoVerdict};
pub use signature::{germ_signature, GermEntry, GermSignature};

use crate::error::{Error, Result};
use crate::field::{common_grid, ess_bounds, is_injective_dense, OperatorField, Side, INJECTIVE_FLOOR};
use crate::linalg::CMat;
use rayon::prelude::*;

/// Bound separating bounded from unbounded witness fields.
pub const BOUND: f64 = 1e6;
/// Uniform invertibility floor for smallest singular values.
pub const INVERTIBILITY_FLOOR: f64 = 1e-6;
/// Relative tolerance for commuting squares.
pub const COMMUTE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Yes,
    No,
    Inconclusive,
}

impl Decision {
    pub fn from_sup(sup: f64, bound: f64) -> Decision {
        if sup < bound / 10.0 {
            Decision::Yes
        } else if sup > bound * 10.0 || !sup.is_finite() {
            Decision::No
        } else {
            Decision::Inconclusive
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorsionObject {
    alpha: OperatorField,
}

impl TorsionObject {
    pub fn new(alpha: OperatorField) -> Result<Self> {
        let rep = is_injective_dense(&alpha);
        if !rep.injective {
            return Err(Error::NotInjectiveDense { witness: rep.witness.unwrap_or_default() });
        }
        Ok(TorsionObject { alpha })
    }

    /// For samples of a symbolic field, whose injectivity is known exactly
    /// even where high-order zeros push fibers below the sampled floor.
    pub(crate) fn sampled_from_exact(alpha: OperatorField) -> Self {
        TorsionObject { alpha }
    }

    pub fn alpha(&self) -> &OperatorField {
        &self.alpha
    }

    /// Whether the module vanishes. Exact for symbolic fields; for sampled
    /// fields a uniform lower bound on the grid is taken as evidence.
    pub fn is_trivial(&self) -> bool {
        match &self.alpha {
            OperatorField::Symbolic(g) => g.zeros().is_empty(),
            OperatorField::Sampled { fibers, .. } => {
                let r = ess_bounds(&self.alpha);
                r.inf_singular >= sampled_trivial_floor(fibers.len()) * r.ess_sup.max(1.0)
            }
        }
    }
}

/// Relative lower bound above which a sampled field is considered
/// uniformly invertible: a zero of order one would show up below `1/N`.
pub fn sampled_trivial_floor(n: usize) -> f64 {
    INVERTIBILITY_FLOOR.max(8.0 / n as f64)
}

pub fn dual_object(x: &TorsionObject) -> TorsionObject {
    TorsionObject { alpha: x.alpha.adjoint() }
}

/// A morphism `[f]: X → Y` with witness `g` satisfying `f∘α = β∘g`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionMorphism {
    pub source: TorsionObject,
    pub target: TorsionObject,
    pub f: OperatorField,
    pub g: OperatorField,
}

impl TorsionMorphism {
    pub fn new(source: TorsionObject, target: TorsionObject, f: OperatorField, g: OperatorField) -> Result<Self> {
        let m = TorsionMorphism { source, target, f, g };
        let (res, scale) = m.commutation_residual()?;
        if res > COMMUTE_TOL * scale.max(1e-300) {
            return Err(Error::HypothesisViolated(format!("f∘α − β∘g has norm {res:e} (scale {scale:e})")));
        }
        Ok(m)
    }

    /// Morphism with witness recovered fiberwise as `g = β⁻¹ f α`.
    pub fn from_representative(source: TorsionObject, target: TorsionObject, f: OperatorField) -> Result<Self> {
        if let (Some(a), Some(b), OperatorField::Symbolic(_)) =
            (source.alpha.as_symbolic(), target.alpha.as_symbolic(), &f)
        {
            if a.expr() == b.expr() {
                let g = f.clone();
                return Self::new(source, target, f, g);
            }
        }
        let n = common_grid(&[&source.alpha, &target.alpha, &f])?;
        let a = source.alpha.fibers_at(n)?;
        let b = target.alpha.fibers_at(n)?;
        let ff = f.fibers_at(n)?;
        let g: Result<Vec<CMat>> =
            (0..n).into_par_iter().map(|j| b[j].solve(&ff[j].mul(&a[j]))).collect();
        let g = OperatorField::sampled(g?)?;
        Self::new(source, target, f, g)
    }

    pub fn identity(x: &TorsionObject) -> Result<Self> {
        let id = match &x.alpha {
            OperatorField::Symbolic(_) => OperatorField::symbolic(crate::field::ScalarGermField::constant(1.0)?),
            OperatorField::Sampled { dim, fibers } => OperatorField::identity(fibers.len(), *dim)?,
        };
        Ok(TorsionMorphism { source: x.clone(), target: x.clone(), f: id.clone(), g: id })
    }

    /// `(‖f∘α − β∘g‖, ‖f‖‖α‖ + ‖β‖‖g‖)` in ess-sup norm.
    pub fn commutation_residual(&self) -> Result<(f64, f64)> {
        let (a, b) = (&self.source.alpha, &self.target.alpha);
        let n = common_grid(&[a, b, &self.f, &self.g])?;
        let (a, b, f, g) = (a.fibers_at(n)?, b.fibers_at(n)?, self.f.fibers_at(n)?, self.g.fibers_at(n)?);
        let res = (0..n)
            .into_par_iter()
            .map(|j| f[j].mul(&a[j]).sub(&b[j].mul(&g[j])).op_norm())
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max);
        let sup = |v: &[CMat]| v.iter().map(CMat::op_norm).fold(0.0, f64::max);
        Ok((res, sup(&f) * sup(&a) + sup(&b) * sup(&g)))
    }

    /// `self ∘ first`, where `first: X → Y` and `self: Y → Z`.
    pub fn after(&self, first: &TorsionMorphism) -> Result<TorsionMorphism> {
        Ok(TorsionMorphism {
            source: first.source.clone(),
            target: self.target.clone(),
            f: self.f.compose(&first.f)?,
            g: self.g.compose(&first.g)?,
        })
    }
}

/// `[g*]: e(Y) → e(X)` with witness `f*`.
pub fn dual_morphism(m: &TorsionMorphism) -> TorsionMorphism {
    TorsionMorphism {
        source: dual_object(&m.target),
        target: dual_object(&m.source),
        f: m.g.adjoint(),
        g: m.f.adjoint(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqualityReport {
    pub decision: Decision,
    /// Largest `‖F‖` seen, including near-zero probes in symbolic mode.
    pub sup: f64,
    /// `F = β⁻¹(f − f′)` on the grid (fibers where `β` is singular are set to zero).
    pub witness: OperatorField,
}

/// Decide whether `f − f′ = β∘F` with `F` bounded.
pub fn morphisms_equal(m: &TorsionMorphism, other: &TorsionMorphism) -> Result<EqualityReport> {
    morphisms_equal_with(m, other, BOUND)
}

pub fn morphisms_equal_with(m: &TorsionMorphism, other: &TorsionMorphism, bound: f64) -> Result<EqualityReport> {
    let beta = &m.target.alpha;
    let n = common_grid(&[beta, &m.f, &other.f])?;
    let b = beta.fibers_at(n)?;
    let (f1, f2) = (m.f.fibers_at(n)?, other.f.fibers_at(n)?);
    if f1[0].rows() != f2[0].rows() || b[0].rows() != f1[0].rows() {
        return Err(Error::DimMismatch("morphisms between different objects".into()));
    }
    let bscale = ess_bounds(beta).ess_sup.max(1.0);
    let solved: Vec<(CMat, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let d = f1[j].sub(&f2[j]);
            let singular = b[j].min_singular() <= INJECTIVE_FLOOR * bscale;
            match (singular, b[j].solve(&d)) {
                (false, Ok(x)) => {
                    let s = x.op_norm();
                    (x, s, true)
                }
                _ => {
                    let consistent = d.op_norm() <= COMMUTE_TOL * bscale;
                    (CMat::zeros(d.rows(), d.cols()), 0.0, consistent)
                }
            }
        })
        .collect();
    let consistent = solved.iter().all(|s| s.2);
    let mut sup = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    let witness = OperatorField::sampled(solved.into_iter().map(|s| s.0).collect())?;
    if !consistent {
        return Ok(EqualityReport { decision: Decision::No, sup: f64::INFINITY, witness });
    }
    if let (Some(bs), Some(a), Some(c)) = (beta.as_symbolic(), m.f.as_symbolic(), other.f.as_symbolic()) {
        for zero in bs.zeros() {
            for side in [Side::Left, Side::Right] {
                if zero.side(side).is_none() {
                    continue;
                }
                let probe: Vec<(f64, f64)> = (3..=8)
                    .map(|k| {
                        let t = 10f64.powi(-k);
                        let z = crate::field::germ::wrap(zero.at + side.direction() * t);
                        (t, ((a.eval(z) - c.eval(z)) / bs.eval(z)).abs())
                    })
                    .collect();
                sup = probe.iter().map(|p| p.1).fold(sup, f64::max);
                let pts: Vec<(f64, f64)> =
                    probe.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
                if pts.len() >= 3 && density::ls_slope(&pts) <= -0.5 {
                    return Ok(EqualityReport { decision: Decision::No, sup: f64::INFINITY, witness });
                }
            }
        }
    }
    Ok(EqualityReport { decision: Decision::from_sup(sup, bound), sup, witness })
}

/// Uniform invertibility of representative and witness on the grid.
pub fn is_isomorphism(m: &TorsionMorphism) -> bool {
    [&m.f, &m.g].iter().all(|t| {
        if let Some(g) = t.as_symbolic() {
            if !g.zeros().is_empty() {
                return false;
            }
        }
        let r = ess_bounds(t);
        r.ess_sup <= BOUND && r.inf_singular >= INVERTIBILITY_FLOOR
    })
}
