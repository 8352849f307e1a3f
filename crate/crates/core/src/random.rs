//! Seeded random instances.
//!
//! Symbolic fields are products of zero factors at distinct multiples of
//! 1/32 with orders in {1, 2, 3}, times a positive unit. Sampled fields are
//! `U(z)·diag(λ₁(z), …, λ_d(z))·U(z)*` with a smooth unitary path `U` and
//! eigenvalue profiles built from the same factors. No multiple of 1/32 is a
//! grid point for grids that are powers of two, so sampled fields stay
//! injective on the grid.

use crate::error::Result;
use crate::field::{GermZero, OperatorField, ScalarGermField, Side, Sign};
use crate::linalg::{herm_eig, CMat, HermitianEig, C64};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LOCATION_DENOMINATOR: u32 = 32;
pub const MAX_ORDER: u32 = 3;
pub const UNIT: &str = "1 + z/2";

/// How a factor vanishes at its location `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// `(z − a)^p`
    Plain,
    /// `(a − z)^p`
    Reflected,
    /// `|z − a|^p`
    Abs,
    /// `−|z − a|^p`
    NegAbs,
}

impl FactorKind {
    const ALL: [FactorKind; 4] = [FactorKind::Plain, FactorKind::Reflected, FactorKind::Abs, FactorKind::NegAbs];

    fn signs(self, p: u32) -> (Sign, Sign) {
        let odd = p % 2 == 1;
        match self {
            FactorKind::Plain if odd => (Sign::Minus, Sign::Plus),
            FactorKind::Reflected if odd => (Sign::Plus, Sign::Minus),
            FactorKind::Plain | FactorKind::Reflected | FactorKind::Abs => (Sign::Plus, Sign::Plus),
            FactorKind::NegAbs => (Sign::Minus, Sign::Minus),
        }
    }

    /// Value of the factor at `z`, literally as the expression evaluates it.
    pub fn eval(self, a: f64, p: u32, z: f64) -> f64 {
        let p = p as i32;
        match self {
            FactorKind::Plain => (z - a).powi(p),
            FactorKind::Reflected => (a - z).powi(p),
            FactorKind::Abs => (z - a).abs().powi(p),
            FactorKind::NegAbs => -(z - a).abs().powi(p),
        }
    }

    fn source(self, a: f64, p: u32) -> String {
        match self {
            FactorKind::Plain => format!("(z - {a})^{p}"),
            FactorKind::Reflected => format!("({a} - z)^{p}"),
            FactorKind::Abs => format!("abs(z - {a})^{p}"),
            FactorKind::NegAbs => format!("(-1)*abs(z - {a})^{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Factor {
    /// Location is `slot / 32`, `1 ≤ slot < 32`.
    pub slot: u32,
    pub order: u32,
    pub kind: FactorKind,
}

impl Factor {
    pub fn location(&self) -> f64 {
        self.slot as f64 / LOCATION_DENOMINATOR as f64
    }

    pub fn field(&self) -> Result<ScalarGermField> {
        let (l, r) = self.kind.signs(self.order);
        let z = GermZero::symmetric(self.location(), self.order, l, r, 1.0);
        ScalarGermField::parse(&self.kind.source(self.location(), self.order), vec![z])
    }
}

/// One signed germ `(slot, side, order, sign)` as predicted from the factors.
pub type SignedGerm = (u32, Side, u32, Sign);

/// A random form as a list of factors, a positive unit source expression
/// and an overall sign.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpec {
    pub factors: Vec<Factor>,
    pub unit: String,
    pub sign: Sign,
}

impl FactorSpec {
    pub fn build(&self) -> Result<ScalarGermField> {
        let unit = match self.sign {
            Sign::Plus => self.unit.clone(),
            Sign::Minus => format!("(-1)*({})", self.unit),
        };
        let mut acc = ScalarGermField::parse(&unit, vec![])?;
        for f in &self.factors {
            acc = acc.mul(&f.field()?);
        }
        acc.validate()?;
        Ok(acc)
    }

    /// Signed germs of the product, read off the factor list alone: a
    /// factor's own one-sided signs times the signs of all other factors at
    /// its location.
    pub fn signed_germs(&self) -> Vec<SignedGerm> {
        let mut out = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            let a = f.location();
            let others = self
                .factors
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .fold(self.sign, |s, (_, g)| s.times(Sign::of(g.kind.eval(g.location(), g.order, a))));
            let (l, r) = f.kind.signs(f.order);
            out.push((f.slot, Side::Left, f.order, l.times(others)));
            out.push((f.slot, Side::Right, f.order, r.times(others)));
        }
        out.sort();
        out
    }

    /// Forces every factor to be `|z − a|^p`, which makes the form definite
    /// of sign `self.sign`.
    pub fn definite(mut self) -> Self {
        for f in &mut self.factors {
            f.kind = FactorKind::Abs;
        }
        self
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_factor_spec(rng: &mut impl Rng, max_zeros: usize) -> FactorSpec {
    let count = rng.random_range(0..=max_zeros);
    let mut slots: Vec<u32> =
        sample(rng, (LOCATION_DENOMINATOR - 1) as usize, count).into_iter().map(|s| s as u32 + 1).collect();
    slots.sort_unstable();
    let factors = slots
        .into_iter()
        .map(|slot| Factor {
            slot,
            order: rng.random_range(1..=MAX_ORDER),
            kind: FactorKind::ALL[rng.random_range(0..4)],
        })
        .collect();
    FactorSpec { factors, unit: UNIT.into(), sign: Sign::Plus }
}

/// Second form of a pair: either a positive unit multiple (congruent) or a
/// single mutation of one factor, which may or may not change the class.
pub fn mutate(rng: &mut impl Rng, spec: &FactorSpec) -> FactorSpec {
    let mut out = spec.clone();
    let choice = rng.random_range(0..5);
    if choice == 0 || out.factors.is_empty() {
        let c = rng.random_range(1..=4) as f64 * 0.5;
        out.unit = format!("{c}*(2 + cos(7*z))");
        return out;
    }
    let i = rng.random_range(0..out.factors.len());
    match choice {
        1 => {
            let f = &mut out.factors[i];
            f.order = if f.order == MAX_ORDER { f.order - 1 } else { f.order + 1 };
        }
        2 => out.factors[i].kind = FactorKind::ALL[rng.random_range(0..4)],
        3 => {
            let used: Vec<u32> = out.factors.iter().map(|f| f.slot).collect();
            let free: Vec<u32> = (1..LOCATION_DENOMINATOR).filter(|s| !used.contains(s)).collect();
            if !free.is_empty() {
                out.factors[i].slot = free[rng.random_range(0..free.len())];
                out.factors.sort_by_key(|f| f.slot);
            }
        }
        _ => {
            out.factors.remove(i);
        }
    }
    out
}

pub fn random_matrix(rng: &mut impl Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> CMat {
    random_matrix(rng, d).hermitian_part()
}

/// `U(z) = W·exp(2πi·z·H)` for a random unitary `W` and Hermitian `H`.
#[derive(Clone, Debug)]
pub struct UnitaryPath {
    w: CMat,
    h: HermitianEig,
}

impl UnitaryPath {
    pub fn random(rng: &mut impl Rng, d: usize) -> Self {
        let w = exp_i(&herm_eig(&random_hermitian(rng, d).scale_re(3.0)).expect("Hermitian"), 1.0);
        UnitaryPath { w, h: herm_eig(&random_hermitian(rng, d)).expect("Hermitian") }
    }

    pub fn at(&self, z: f64) -> CMat {
        self.w.mul(&exp_i(&self.h, 2.0 * std::f64::consts::PI * z))
    }
}

fn exp_i(e: &HermitianEig, t: f64) -> CMat {
    let d = e.dim();
    let v = &e.eigenvectors;
    let w: Vec<C64> = e.eigenvalues.iter().map(|&l| C64::from_polar(1.0, t * l)).collect();
    CMat::from_fn(d, d, |i, j| (0..d).map(|k| v[(i, k)] * w[k] * v[(j, k)].conj()).sum())
}

/// One eigenvalue function: `scale · factor(z)`, or the zero-free
/// `scale · (1 + cos(2πz)/2)` when `factor` is `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub factor: Option<Factor>,
    pub scale: f64,
}

impl Profile {
    pub fn eval(&self, z: f64) -> f64 {
        match self.factor {
            Some(f) => self.scale * f.kind.eval(f.location(), f.order, z),
            None => self.scale * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * z).cos()),
        }
    }

    /// Sign away from the zero, if the profile keeps one sign.
    pub fn definite_sign(&self) -> Option<Sign> {
        let s = Sign::of(self.scale);
        match self.factor.map(|f| (f.kind, f.order % 2 == 0)) {
            None | Some((FactorKind::Abs, _)) => Some(s),
            Some((FactorKind::NegAbs, _)) => Some(s.flip()),
            Some((_, true)) => Some(s),
            Some((_, false)) => None,
        }
    }
}

/// A sampled Hermitian field `U(z)·diag(λ(z))·U(z)*`.
#[derive(Clone, Debug)]
pub struct FormFieldSpec {
    pub profiles: Vec<Profile>,
    pub path: UnitaryPath,
}

impl FormFieldSpec {
    pub fn dim(&self) -> usize {
        self.profiles.len()
    }

    pub fn fiber(&self, z: f64) -> CMat {
        let u = self.path.at(z);
        let d: Vec<f64> = self.profiles.iter().map(|p| p.eval(z)).collect();
        u.mul(&CMat::from_real_diag(&d)).mul(&u.adjoint()).hermitian_part()
    }

    pub fn sample(&self, n: usize) -> Result<OperatorField> {
        OperatorField::from_fn(n, |z| self.fiber(z))
    }
}

/// Random eigenvalue profile. With `definite` set every profile has that
/// sign; `max_order` caps the vanishing orders.
pub fn random_profile(rng: &mut impl Rng, definite: Option<Sign>, max_order: u32) -> Profile {
    let scale = rng.random_range(0.5..2.0);
    if rng.random_range(0..4) == 0 {
        let s = definite.unwrap_or(if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus });
        return Profile { factor: None, scale: s.value() * scale };
    }
    let order = rng.random_range(1..=max_order);
    let slot = rng.random_range(1..LOCATION_DENOMINATOR);
    let kind = match definite {
        Some(Sign::Plus) => FactorKind::Abs,
        Some(Sign::Minus) => FactorKind::NegAbs,
        None => FactorKind::ALL[rng.random_range(0..4)],
    };
    Profile { factor: Some(Factor { slot, order, kind }), scale }
}

pub fn random_form_field(rng: &mut impl Rng, d: usize, definite: Option<Sign>, max_order: u32) -> FormFieldSpec {
    let profiles = (0..d).map(|_| random_profile(rng, definite, max_order)).collect();
    FormFieldSpec { profiles, path: UnitaryPath::random(rng, d) }
}

/// `c·(1 + B₀ + cos(2πz)·B₁)` with `‖B₀‖ + ‖B₁‖ ≤ 0.6`, so the smallest
/// singular value is at least `0.4c`.
pub fn random_invertible_field(rng: &mut impl Rng, d: usize, n: usize) -> Result<OperatorField> {
    let (b0, b1) = (random_matrix(rng, d), random_matrix(rng, d));
    let s = 0.6 / (b0.op_norm() + b1.op_norm()).max(1e-12);
    let c = rng.random_range(0.5..2.0);
    OperatorField::from_fn(n, |z| {
        let t = (2.0 * std::f64::consts::PI * z).cos();
        CMat::identity(d).add(&b0.scale_re(s)).add(&b1.scale_re(s * t)).scale_re(c)
    })
}

/// `H₀ + sin(2πz)·H₁` scaled to ess-sup norm `norm`.
pub fn random_hermitian_field(rng: &mut impl Rng, d: usize, n: usize, norm: f64) -> Result<OperatorField> {
    let (h0, h1) = (random_hermitian(rng, d), random_hermitian(rng, d));
    let raw = OperatorField::from_fn(n, |z| h0.add(&h1.scale_re((2.0 * std::f64::consts::PI * z).sin())))?;
    let sup = raw.ess_sup().max(1e-12);
    raw.scale(C64::new(norm / sup, 0.0))
}
