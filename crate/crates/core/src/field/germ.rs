//! Real scalar fields on the circle given by an expression together with
//! an explicit list of zeros and their one-sided germs.

use super::expr::Expr;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Vanishing order, stored in half units so square roots of even germs
/// and of odd germs alike stay representable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GermOrder(u32);

impl GermOrder {
    pub fn integer(p: u32) -> Self {
        GermOrder(2 * p)
    }

    pub fn from_halves(h: u32) -> Self {
        GermOrder(h)
    }

    pub fn from_f64(p: f64) -> Option<Self> {
        let h = (2.0 * p).round();
        if h >= 1.0 && (2.0 * p - h).abs() < 1e-12 {
            Some(GermOrder(h as u32))
        } else {
            None
        }
    }

    pub fn halves(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn is_even(self) -> bool {
        self.0.is_multiple_of(4)
    }
}

impl Serialize for GermOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_u32(self.0 / 2)
        } else {
            s.serialize_f64(self.value())
        }
    }
}

impl std::ops::Add for GermOrder {
    type Output = GermOrder;
    fn add(self, o: GermOrder) -> GermOrder {
        GermOrder(self.0 + o.0)
    }
}

impl fmt::Display for GermOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}", self.value())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn direction(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn times(self, o: Sign) -> Sign {
        if self == o {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Behavior `sign · coeff · t^order` of a field at distance `t` from a zero
/// on one side. `coeff` is a positive magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideGerm {
    pub order: GermOrder,
    pub sign: Sign,
    pub coeff: f64,
}

impl SideGerm {
    pub fn new(order: GermOrder, sign: Sign, coeff: f64) -> Self {
        SideGerm { order, sign, coeff }
    }

    fn model(&self, t: f64) -> f64 {
        self.sign.value() * self.coeff * t.powf(self.order.value())
    }
}

/// A declared zero. A side set to `None` means the field does not vanish
/// when approaching `at` from that side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GermZero {
    pub at: f64,
    pub left: Option<SideGerm>,
    pub right: Option<SideGerm>,
}

impl GermZero {
    /// Zero of integer order `p` with the given one-sided signs and
    /// leading coefficient magnitude `coeff`.
    pub fn symmetric(at: f64, p: u32, left: Sign, right: Sign, coeff: f64) -> Self {
        let o = GermOrder::integer(p);
        GermZero { at, left: Some(SideGerm::new(o, left, coeff)), right: Some(SideGerm::new(o, right, coeff)) }
    }

    pub fn side(&self, s: Side) -> Option<&SideGerm> {
        match s {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    fn side_mut(&mut self, s: Side) -> &mut Option<SideGerm> {
        match s {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn max_order(&self) -> GermOrder {
        [self.left, self.right].iter().flatten().map(|g| g.order).max().unwrap_or(GermOrder(0))
    }
}

/// Number of samples used to look for undeclared zeros.
pub const VALIDATION_SAMPLES: usize = 16384;
/// Largest radius at which declared germs are compared with the expression.
pub const GERM_RADIUS: f64 = 1e-3;
/// Minimum of |unit part| relative to its local maximum before a zero is suspected.
pub const UNIT_FLOOR: f64 = 1e-8;
/// Locations closer than this are treated as the same point.
pub const LOCATION_TOL: f64 = 1e-12;

const SIDE_PROBE: f64 = 1e-10;

pub(crate) fn wrap(z: f64) -> f64 {
    let w = z - z.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Signed offset of `z` from `z0` on the circle, in `[-½, ½)`.
pub(crate) fn circle_offset(z: f64, z0: f64) -> f64 {
    wrap(z - z0 + 0.5) - 0.5
}

pub(crate) fn circle_dist(a: f64, b: f64) -> f64 {
    circle_offset(a, b).abs()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGermField {
    expr: Expr,
    zeros: Vec<GermZero>,
}

impl ScalarGermField {
    /// Build and validate: the declared zeros must be exactly the zero set
    /// and each germ must match the expression.
    pub fn new(expr: Expr, zeros: Vec<GermZero>) -> Result<Self> {
        let f = Self::unchecked(expr, zeros)?;
        f.validate()?;
        Ok(f)
    }

    pub fn parse(src: &str, zeros: Vec<GermZero>) -> Result<Self> {
        Self::new(Expr::parse(src)?, zeros)
    }

    /// Build without the sampling checks. Structural requirements (sorted,
    /// distinct locations in `[0,1)`, positive finite coefficients) are
    /// still enforced.
    pub fn unchecked(expr: Expr, mut zeros: Vec<GermZero>) -> Result<Self> {
        for z in &mut zeros {
            if !(z.at.is_finite() && (0.0..1.0).contains(&z.at)) {
                return Err(Error::GermMismatch { at: z.at, reason: "location outside [0, 1)".into() });
            }
            if z.left.is_none() && z.right.is_none() {
                return Err(Error::GermMismatch { at: z.at, reason: "zero vanishes from neither side".into() });
            }
            for g in [z.left, z.right].iter().flatten() {
                if !(g.coeff.is_finite() && g.coeff > 0.0) || g.order.halves() == 0 {
                    return Err(Error::GermMismatch {
                        at: z.at,
                        reason: "germ needs positive order and positive finite coefficient".into(),
                    });
                }
            }
        }
        zeros.sort_by(|a, b| a.at.total_cmp(&b.at));
        for w in zeros.windows(2) {
            if w[1].at - w[0].at < LOCATION_TOL {
                return Err(Error::GermMismatch { at: w[1].at, reason: "zero declared twice".into() });
            }
        }
        Ok(ScalarGermField { expr, zeros })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::Validation { field: "constant".into(), message: "constant must be finite and non-zero".into() });
        }
        Ok(ScalarGermField { expr: Expr::Const(c), zeros: Vec::new() })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn zeros(&self) -> &[GermZero] {
        &self.zeros
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.expr.eval(z)
    }

    pub fn is_trivial(&self) -> bool {
        self.zeros.is_empty()
    }

    /// One-sided limit value of the expression at `z0` (meaningful only where
    /// the field does not vanish from that side).
    pub fn side_value(&self, z0: f64, side: Side) -> f64 {
        self.expr.eval(wrap(z0 + side.direction() * SIDE_PROBE))
    }

    /// Sign of the field approaching `z0` from `side`, whether or not it vanishes there.
    pub fn side_sign(&self, z0: f64, side: Side) -> Sign {
        match self.zero_at(z0).and_then(|z| z.side(side)) {
            Some(g) => g.sign,
            None => Sign::of(self.side_value(z0, side)),
        }
    }

    pub fn zero_at(&self, z0: f64) -> Option<&GermZero> {
        self.zeros.iter().find(|z| circle_dist(z.at, z0) < LOCATION_TOL)
    }

    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        for (index, zj) in (0..n).map(|j| (j, (j as f64 + 0.5) / n as f64)) {
            if let Some(z) = self.zeros.iter().find(|z| (z.at - zj).abs() < 1e-14) {
                return Err(Error::GridHitsZero { index, zero: z.at });
            }
        }
        Ok((0..n).map(|j| self.expr.eval((j as f64 + 0.5) / n as f64)).collect())
    }

    /// Points where the field may jump: the wrap point and piecewise breakpoints.
    fn cuts(&self) -> Vec<f64> {
        let mut c = vec![0.0];
        c.extend(self.expr.breakpoints());
        c
    }

    /// Unit part: the expression divided by the declared one-sided zero factors.
    fn unit(&self, z: f64) -> f64 {
        let mut v = self.expr.eval(z);
        for zero in &self.zeros {
            let off = circle_offset(z, zero.at);
            let g = if off < 0.0 { zero.left } else { zero.right };
            if let Some(g) = g {
                v /= off.abs().powf(g.order.value());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let cuts = self.cuts();
        self.validate_germs(&cuts)?;
        self.validate_zero_set(&cuts)
    }

    fn validate_germs(&self, cuts: &[f64]) -> Result<()> {
        let analytic = self.expr.is_analytic();
        for (i, zero) in self.zeros.iter().enumerate() {
            let mut gap = f64::INFINITY;
            for (k, other) in self.zeros.iter().enumerate() {
                if k != i {
                    gap = gap.min(circle_dist(other.at, zero.at));
                }
            }
            for &c in cuts {
                let d = circle_dist(c, zero.at);
                if d > LOCATION_TOL {
                    gap = gap.min(d);
                }
            }
            let r0 = GERM_RADIUS.min(0.25 * gap);
            let on_cut = cuts.iter().any(|&c| circle_dist(c, zero.at) <= LOCATION_TOL);
            if analytic && !on_cut {
                match (zero.left, zero.right) {
                    (Some(l), Some(r)) => {
                        if l.order != r.order {
                            return Err(Error::GermMismatch {
                                at: zero.at,
                                reason: "analytic zero must have equal orders on both sides".into(),
                            });
                        }
                        if !l.order.is_integer() || l.order.is_even() != (l.sign == r.sign) {
                            return Err(Error::GermMismatch {
                                at: zero.at,
                                reason: "signs must agree exactly when the order is even".into(),
                            });
                        }
                    }
                    _ => {
                        return Err(Error::GermMismatch {
                            at: zero.at,
                            reason: "analytic expression cannot vanish from one side only".into(),
                        })
                    }
                }
            }
            for side in [Side::Left, Side::Right] {
                let dir = side.direction();
                match zero.side(side) {
                    Some(g) => {
                        for k in 0..4 {
                            let t = r0 * 10f64.powi(-k);
                            let model = g.model(t);
                            if k > 0 && model.abs() < 1e-13 {
                                break;
                            }
                            let ratio = self.expr.eval(wrap(zero.at + dir * t)) / model;
                            if !(0.5..=2.0).contains(&ratio) {
                                return Err(Error::GermMismatch {
                                    at: zero.at,
                                    reason: format!(
                                        "{} germ ratio {ratio:.4} at distance {t:e} outside [1/2, 2]",
                                        side.name()
                                    ),
                                });
                            }
                        }
                    }
                    None => {
                        let near = self.side_value(zero.at, side).abs();
                        let far = self.expr.eval(wrap(zero.at + dir * r0)).abs();
                        if !(near > 1e-6 * far.max(1e-300)) {
                            return Err(Error::GermMismatch {
                                at: zero.at,
                                reason: format!("field vanishes from the {} without a declared germ", side.name()),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_zero_set(&self, cuts: &[f64]) -> Result<()> {
        let m = VALIDATION_SAMPLES;
        let pts: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
        let u: Vec<f64> = pts.iter().map(|&z| self.unit(z)).collect();
        if let Some(j) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::UndeclaredZeroSuspected { near: pts[j] });
        }
        // segment id: number of cuts at or below the point
        let seg: Vec<usize> = pts.iter().map(|&z| cuts.iter().filter(|&&c| c <= z).count()).collect();
        let declared_between = |a: f64, b: f64| self.zeros.iter().any(|z| z.at > a && z.at <= b);
        for j in 0..m - 1 {
            if seg[j] == seg[j + 1] && (u[j] > 0.0) != (u[j + 1] > 0.0) && !declared_between(pts[j], pts[j + 1]) {
                return Err(Error::UndeclaredZeroSuspected { near: 0.5 * (pts[j] + pts[j + 1]) });
            }
        }
        let window = m / 32;
        for j in 0..m {
            let here = u[j].abs();
            let lo = if j > 0 && seg[j - 1] == seg[j] { u[j - 1].abs() } else { f64::INFINITY };
            let hi = if j + 1 < m && seg[j + 1] == seg[j] { u[j + 1].abs() } else { f64::INFINITY };
            if here > lo || here > hi {
                continue;
            }
            // A zero between samples pulls the minimum down to the size of
            // the neighbouring steps; flat stretches and rounding noise do not.
            let step = [lo, hi].iter().filter(|v| v.is_finite()).map(|v| v - here).fold(0.0, f64::max);
            if here > 4.0 * step {
                continue;
            }
            let a = if lo.is_finite() { pts[j - 1] } else { pts[j] };
            let b = if hi.is_finite() { pts[j + 1] } else { pts[j] };
            let (zmin, vmin) = golden_min(|z| self.unit(z).abs(), a, b);
            let mut scale = 0f64;
            for k in j.saturating_sub(window)..(j + window + 1).min(m) {
                if seg[k] == seg[j] {
                    scale = scale.max(u[k].abs());
                }
            }
            if !(vmin >= UNIT_FLOOR * scale) {
                return Err(Error::UndeclaredZeroSuspected { near: zmin });
            }
        }
        Ok(())
    }

    /// Multiply by a non-zero real constant.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::Validation { field: "scale".into(), message: "scale factor must be finite and non-zero".into() });
        }
        let s = Sign::of(c);
        let zeros = self
            .zeros
            .iter()
            .map(|z| {
                let f = |g: SideGerm| SideGerm::new(g.order, g.sign.times(s), g.coeff * c.abs());
                GermZero { at: z.at, left: z.left.map(f), right: z.right.map(f) }
            })
            .collect();
        Ok(ScalarGermField { expr: Expr::Const(c).mul(self.expr.clone()), zeros })
    }

    /// Pointwise product; orders add at common zeros.
    pub fn mul(&self, other: &Self) -> Self {
        let mut zeros: Vec<GermZero> = Vec::new();
        let locations = merged_locations(&self.zeros, &other.zeros);
        for at in locations {
            let a = self.zero_at(at).copied();
            let b = other.zero_at(at).copied();
            let mut z = GermZero { at, left: None, right: None };
            for side in [Side::Left, Side::Right] {
                let ga = a.and_then(|z| z.side(side).copied());
                let gb = b.and_then(|z| z.side(side).copied());
                *z.side_mut(side) = match (ga, gb) {
                    (Some(x), Some(y)) => Some(SideGerm::new(x.order + y.order, x.sign.times(y.sign), x.coeff * y.coeff)),
                    (Some(x), None) => Some(times_value(x, other.side_value(at, side))),
                    (None, Some(y)) => Some(times_value(y, self.side_value(at, side))),
                    (None, None) => None,
                };
            }
            zeros.push(z);
        }
        ScalarGermField { expr: self.expr.clone().mul(other.expr.clone()), zeros }
    }

    /// Pointwise sum. The lower-order germ dominates; equal orders add their
    /// leading terms. The result is revalidated since sums can create zeros.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut zeros = Vec::new();
        for at in merged_locations(&self.zeros, &other.zeros) {
            let (Some(a), Some(b)) = (self.zero_at(at), other.zero_at(at)) else {
                continue;
            };
            let mut z = GermZero { at, left: None, right: None };
            for side in [Side::Left, Side::Right] {
                if let (Some(x), Some(y)) = (a.side(side), b.side(side)) {
                    *z.side_mut(side) = Some(if x.order < y.order {
                        *x
                    } else if y.order < x.order {
                        *y
                    } else {
                        let s = x.sign.value() * x.coeff + y.sign.value() * y.coeff;
                        if s.abs() <= 1e-12 * x.coeff.max(y.coeff) {
                            return Err(Error::GermMismatch {
                                at,
                                reason: "leading terms cancel; order of the sum is undetermined".into(),
                            });
                        }
                        SideGerm::new(x.order, Sign::of(s), s.abs())
                    });
                }
            }
            if z.left.is_some() || z.right.is_some() {
                zeros.push(z);
            }
        }
        ScalarGermField::new(self.expr.clone().add(other.expr.clone()), zeros)
    }

    /// `|α|^{1/2}`: halves every order.
    pub fn sqrt_abs(&self) -> Self {
        let zeros = self
            .zeros
            .iter()
            .map(|z| {
                let f = |g: SideGerm| SideGerm::new(GermOrder::from_halves(g.order.halves() / 2), Sign::Plus, g.coeff.sqrt());
                GermZero { at: z.at, left: z.left.map(f), right: z.right.map(f) }
            })
            .collect::<Vec<_>>();
        debug_assert!(self.zeros.iter().all(|z| [z.left, z.right].iter().flatten().all(|g| g.order.halves() % 2 == 0)));
        ScalarGermField { expr: Expr::Sqrt(Box::new(Expr::Abs(Box::new(self.expr.clone())))), zeros }
    }

    pub fn abs(&self) -> Self {
        let f = |g: SideGerm| SideGerm::new(g.order, Sign::Plus, g.coeff);
        let zeros = self.zeros.iter().map(|z| GermZero { at: z.at, left: z.left.map(f), right: z.right.map(f) }).collect();
        ScalarGermField { expr: Expr::Abs(Box::new(self.expr.clone())), zeros }
    }

    /// The field on the intervals where it has sign `keep`, padded by the
    /// constant `±1` elsewhere. Germs of the other sign are dropped.
    pub fn sign_part(&self, keep: Sign) -> Self {
        let mut cuts: Vec<f64> = self.cuts();
        cuts.extend(self.zeros.iter().map(|z| z.at));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < LOCATION_TOL);
        let pad = Expr::Const(keep.value());
        let mut pieces = Vec::with_capacity(cuts.len());
        let mut any_kept = false;
        let mut all_kept = true;
        for (i, &lo) in cuts.iter().enumerate() {
            let hi = cuts.get(i + 1).copied().unwrap_or(1.0);
            let mid = 0.5 * (lo + hi);
            if Sign::of(self.eval(mid)) == keep {
                pieces.push(self.expr.clone());
                any_kept = true;
            } else {
                pieces.push(pad.clone());
                all_kept = false;
            }
        }
        let expr = if all_kept {
            self.expr.clone()
        } else if !any_kept {
            pad
        } else {
            Expr::Piecewise { breaks: cuts[1..].to_vec(), pieces }
        };
        let zeros = self
            .zeros
            .iter()
            .filter_map(|z| {
                let f = |g: Option<SideGerm>| g.filter(|g| g.sign == keep);
                let k = GermZero { at: z.at, left: f(z.left), right: f(z.right) };
                (k.left.is_some() || k.right.is_some()).then_some(k)
            })
            .collect();
        ScalarGermField { expr, zeros }
    }
}

fn times_value(g: SideGerm, v: f64) -> SideGerm {
    SideGerm::new(g.order, g.sign.times(Sign::of(v)), g.coeff * v.abs())
}

fn merged_locations(a: &[GermZero], b: &[GermZero]) -> Vec<f64> {
    let mut locs: Vec<f64> = a.iter().chain(b).map(|z| z.at).collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup_by(|x, y| (*x - *y).abs() < LOCATION_TOL);
    locs
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if b - a < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

impl fmt::Display for ScalarGermField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)?;
        for z in &self.zeros {
            write!(f, " [zero at {}:", z.at)?;
            for side in [Side::Left, Side::Right] {
                match z.side(side) {
                    Some(g) => write!(f, " {} {}{}", side.name(), g.sign.symbol(), g.order)?,
                    None => write!(f, " {} none", side.name())?,
                }
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sign::{Minus, Plus};

    fn linear() -> ScalarGermField {
        ScalarGermField::parse("z - 0.5", vec![GermZero::symmetric(0.5, 1, Minus, Plus, 1.0)]).unwrap()
    }

    #[test]
    fn declared_germs_validate() {
        linear();
        ScalarGermField::parse("(z-0.5)^2", vec![GermZero::symmetric(0.5, 2, Plus, Plus, 1.0)]).unwrap();
        ScalarGermField::parse("abs(z-0.5)", vec![GermZero::symmetric(0.5, 1, Plus, Plus, 1.0)]).unwrap();
        ScalarGermField::parse("sin(2*pi*z)", vec![
            GermZero::symmetric(0.0, 1, Minus, Plus, 2.0 * std::f64::consts::PI),
            GermZero::symmetric(0.5, 1, Plus, Minus, 2.0 * std::f64::consts::PI),
        ])
        .unwrap();
        ScalarGermField::parse("(z-0.25)*(z-0.5)^2", vec![
            GermZero::symmetric(0.25, 1, Minus, Plus, 0.0625),
            GermZero::symmetric(0.5, 2, Plus, Plus, 0.25),
        ])
        .unwrap();
    }

    #[test]
    fn undeclared_zeros_are_caught() {
        for src in ["z - 0.3", "(z - 0.3)^2", "(z-0.3)^2*(z-0.5)"] {
            let r = ScalarGermField::parse(src, vec![GermZero::symmetric(0.5, 1, Minus, Plus, 0.04)]);
            assert!(r.is_err(), "{src}");
        }
        assert!(matches!(
            ScalarGermField::parse("(z-0.3)^2 + 1", vec![]).map(|_| ()),
            Ok(())
        ));
        assert!(matches!(
            ScalarGermField::parse("(z-0.3)^2", vec![]),
            Err(Error::UndeclaredZeroSuspected { .. })
        ));
    }

    #[test]
    fn wrong_declarations_are_rejected() {
        // wrong order, wrong sign, wrong coefficient, parity violation
        let bad = [
            GermZero::symmetric(0.5, 2, Plus, Plus, 1.0),
            GermZero::symmetric(0.5, 1, Plus, Minus, 1.0),
            GermZero::symmetric(0.5, 1, Minus, Plus, 10.0),
            GermZero::symmetric(0.5, 1, Plus, Plus, 1.0),
        ];
        for z in bad {
            assert!(ScalarGermField::parse("z - 0.5", vec![z]).is_err(), "{z:?}");
        }
        assert!(ScalarGermField::parse("1 + z", vec![GermZero::symmetric(0.5, 1, Minus, Plus, 1.0)]).is_err());
    }

    #[test]
    fn sampling() {
        let f = linear();
        let v = f.sample(4).unwrap();
        assert_eq!(v, vec![-0.375, -0.125, 0.125, 0.375]);
        let g = ScalarGermField::parse("z", vec![GermZero {
            at: 0.5 / 3.0,
            left: None,
            right: None,
        }]);
        assert!(g.is_err());
    }

    #[test]
    fn product_adds_orders() {
        let f = linear();
        let sq = f.mul(&f);
        let z = sq.zero_at(0.5).unwrap();
        assert_eq!(z.left.unwrap().order, GermOrder::integer(2));
        assert_eq!(z.left.unwrap().sign, Plus);
        assert_eq!(z.right.unwrap().sign, Plus);
        sq.validate().unwrap();
        let u = ScalarGermField::parse("1 + z/2", vec![]).unwrap();
        let fu = f.mul(&u);
        fu.validate().unwrap();
        assert!((fu.zeros()[0].right.unwrap().coeff - 1.25).abs() < 1e-9);
    }

    #[test]
    fn sum_takes_lowest_order() {
        let f = linear();
        let sum = f.add(&f.mul(&f)).unwrap();
        let z = sum.zero_at(0.5).unwrap();
        assert_eq!(z.left.unwrap().order, GermOrder::integer(1));
        assert!(f.add(&f.scale(-1.0).unwrap()).is_err());
        // a sum that creates a new zero is refused
        let one = ScalarGermField::constant(-0.2).unwrap();
        assert!(f.add(&one).is_err());
    }

    #[test]
    fn sign_parts_are_one_sided() {
        let f = linear();
        let p = f.sign_part(Plus);
        p.validate().unwrap();
        assert_eq!(p.zeros().len(), 1);
        assert!(p.zeros()[0].left.is_none() && p.zeros()[0].right.is_some());
        assert!(p.eval(0.2) > 0.0 && p.eval(0.7) > 0.0);
        let m = f.sign_part(Minus);
        m.validate().unwrap();
        assert!(m.zeros()[0].right.is_none());
        assert!(m.eval(0.2) < 0.0 && m.eval(0.7) < 0.0);
    }

    #[test]
    fn sqrt_halves_orders() {
        let sq = ScalarGermField::parse("(z-0.5)^2", vec![GermZero::symmetric(0.5, 2, Plus, Plus, 1.0)]).unwrap();
        let r = sq.sqrt_abs();
        r.validate().unwrap();
        assert_eq!(r.zeros()[0].right.unwrap().order, GermOrder::integer(1));
        let h = linear().sqrt_abs();
        h.validate().unwrap();
        assert_eq!(h.zeros()[0].left.unwrap().order.value(), 0.5);
    }
}
