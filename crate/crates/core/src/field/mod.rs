//! Decomposable operator fields over the circle `[0, 1)` with Lebesgue
//! measure, either sampled on a half-offset grid or given symbolically.

pub mod expr;
pub mod germ;
pub mod io;

pub use expr::Expr;
pub use germ::{GermOrder, GermZero, ScalarGermField, Side, SideGerm, Sign, LOCATION_TOL};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use rayon::prelude::*;
use std::borrow::Cow;

/// Sampling resolution used when a symbolic field has to be evaluated numerically.
pub const DEFAULT_GRID: usize = 4096;
/// Smallest singular value below which a sampled fiber counts as singular.
pub const INJECTIVE_FLOOR: f64 = 1e-13;

pub fn grid_point(j: usize, n: usize) -> f64 {
    (j as f64 + 0.5) / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseSpace {
    CircleGrid { n: usize },
    SymbolicCircle,
}

impl BaseSpace {
    pub fn grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation { field: "grid".into(), message: "grid size must be positive".into() });
        }
        Ok(BaseSpace::CircleGrid { n })
    }

    /// Grid points; empty for the symbolic circle.
    pub fn points(&self) -> Vec<f64> {
        match *self {
            BaseSpace::CircleGrid { n } => (0..n).map(|j| grid_point(j, n)).collect(),
            BaseSpace::SymbolicCircle => Vec::new(),
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            BaseSpace::CircleGrid { n } => 1.0 / n as f64,
            BaseSpace::SymbolicCircle => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorField {
    Sampled { dim: usize, fibers: Vec<CMat> },
    Symbolic(ScalarGermField),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldOp {
    Add,
    Scale(C64),
    Compose,
    Adjoint,
}

/// Fiberwise norm summary.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FieldNormReport {
    pub ess_sup: f64,
    pub inf_singular: f64,
    pub zero_measure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectivityReport {
    pub injective: bool,
    pub witness: Option<String>,
}

impl OperatorField {
    pub fn sampled(fibers: Vec<CMat>) -> Result<Self> {
        let Some(first) = fibers.first() else {
            return Err(Error::Validation { field: "fibers".into(), message: "a sampled field needs at least one fiber".into() });
        };
        let dim = first.rows();
        for (j, m) in fibers.iter().enumerate() {
            if !m.is_square() || m.rows() != dim {
                return Err(Error::DimMismatch(format!("fiber {j} is {}x{}, expected {dim}x{dim}", m.rows(), m.cols())));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(OperatorField::Sampled { dim, fibers })
    }

    /// Sample `f` at the `n` grid points.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> CMat + Sync) -> Result<Self> {
        BaseSpace::grid(n)?;
        Self::sampled((0..n).into_par_iter().map(|j| f(grid_point(j, n))).collect())
    }

    pub fn scalar_fn(n: usize, f: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        Self::from_fn(n, |z| CMat::scalar(C64::new(f(z), 0.0)))
    }

    pub fn constant(n: usize, m: CMat) -> Result<Self> {
        BaseSpace::grid(n)?;
        Self::sampled(vec![m; n])
    }

    pub fn identity(n: usize, dim: usize) -> Result<Self> {
        Self::constant(n, CMat::identity(dim))
    }

    pub fn symbolic(g: ScalarGermField) -> Self {
        OperatorField::Symbolic(g)
    }

    pub fn space(&self) -> BaseSpace {
        match self {
            OperatorField::Sampled { fibers, .. } => BaseSpace::CircleGrid { n: fibers.len() },
            OperatorField::Symbolic(_) => BaseSpace::SymbolicCircle,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorField::Sampled { dim, .. } => *dim,
            OperatorField::Symbolic(_) => 1,
        }
    }

    pub fn grid(&self) -> Option<usize> {
        match self {
            OperatorField::Sampled { fibers, .. } => Some(fibers.len()),
            OperatorField::Symbolic(_) => None,
        }
    }

    pub fn fibers(&self) -> Option<&[CMat]> {
        match self {
            OperatorField::Sampled { fibers, .. } => Some(fibers),
            OperatorField::Symbolic(_) => None,
        }
    }

    pub fn as_symbolic(&self) -> Option<&ScalarGermField> {
        match self {
            OperatorField::Symbolic(g) => Some(g),
            OperatorField::Sampled { .. } => None,
        }
    }

    /// Fibers on a grid of size `n`; symbolic fields are sampled, sampled
    /// fields must already live on that grid.
    pub fn fibers_at(&self, n: usize) -> Result<Cow<'_, [CMat]>> {
        match self {
            OperatorField::Sampled { fibers, .. } if fibers.len() == n => Ok(Cow::Borrowed(fibers)),
            OperatorField::Sampled { fibers, .. } => {
                Err(Error::SpaceMismatch(format!("field sampled on {} points, requested {n}", fibers.len())))
            }
            OperatorField::Symbolic(g) => Ok(Cow::Owned(
                g.sample(n)?.into_iter().map(|v| CMat::scalar(C64::new(v, 0.0))).collect(),
            )),
        }
    }

    pub fn to_sampled(&self, n: usize) -> Result<OperatorField> {
        match self {
            OperatorField::Sampled { .. } => self.fibers_at(n).map(|_| self.clone()),
            OperatorField::Symbolic(g) => sample_symbolic(g, n),
        }
    }

    /// Own grid size, or `default` for symbolic fields.
    pub fn grid_or(&self, default: usize) -> usize {
        self.grid().unwrap_or(default)
    }

    pub fn adjoint(&self) -> OperatorField {
        match self {
            OperatorField::Sampled { dim, fibers } => {
                OperatorField::Sampled { dim: *dim, fibers: fibers.par_iter().map(CMat::adjoint).collect() }
            }
            OperatorField::Symbolic(g) => OperatorField::Symbolic(g.clone()),
        }
    }

    pub fn scale(&self, c: C64) -> Result<OperatorField> {
        match self {
            OperatorField::Sampled { dim, fibers } => {
                Ok(OperatorField::Sampled { dim: *dim, fibers: fibers.par_iter().map(|m| m.scale(c)).collect() })
            }
            OperatorField::Symbolic(g) => {
                if c.im != 0.0 {
                    return Err(Error::Validation {
                        field: "scale".into(),
                        message: "symbolic fields are real; complex scale factors leave the grammar".into(),
                    });
                }
                Ok(OperatorField::Symbolic(g.scale(c.re)?))
            }
        }
    }

    pub fn add(&self, other: &OperatorField) -> Result<OperatorField> {
        if let (OperatorField::Symbolic(a), OperatorField::Symbolic(b)) = (self, other) {
            return Ok(OperatorField::Symbolic(a.add(b)?));
        }
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &OperatorField) -> Result<OperatorField> {
        if let (OperatorField::Symbolic(a), OperatorField::Symbolic(b)) = (self, other) {
            return Ok(OperatorField::Symbolic(a.add(&b.scale(-1.0)?)?));
        }
        self.zip(other, |a, b| a.sub(b))
    }

    /// Fiberwise product `self ∘ other`.
    pub fn compose(&self, other: &OperatorField) -> Result<OperatorField> {
        if let (OperatorField::Symbolic(a), OperatorField::Symbolic(b)) = (self, other) {
            return Ok(OperatorField::Symbolic(a.mul(b)));
        }
        self.zip(other, |a, b| a.mul(b))
    }

    fn zip(&self, other: &OperatorField, f: impl Fn(&CMat, &CMat) -> CMat + Sync) -> Result<OperatorField> {
        let n = match (self.grid(), other.grid()) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::SpaceMismatch(format!("grids of size {a} and {b}")));
            }
            (Some(a), _) | (_, Some(a)) => a,
            (None, None) => DEFAULT_GRID,
        };
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(format!("fiber dimensions {} and {}", self.dim(), other.dim())));
        }
        let a = self.fibers_at(n)?;
        let b = other.fibers_at(n)?;
        Self::sampled(a.par_iter().zip(b.par_iter()).map(|(x, y)| f(x, y)).collect())
    }

    pub fn hermitian_defect(&self) -> f64 {
        match self {
            OperatorField::Sampled { fibers, .. } => fibers.iter().map(CMat::hermitian_defect).fold(0.0, f64::max),
            OperatorField::Symbolic(_) => 0.0,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        match self {
            OperatorField::Sampled { fibers, .. } => fibers.iter().all(CMat::is_hermitian),
            OperatorField::Symbolic(_) => true,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            OperatorField::Sampled { fibers, .. } => fibers.iter().all(CMat::is_real),
            OperatorField::Symbolic(_) => true,
        }
    }

    /// Largest operator norm over the grid (symbolic fields use [`DEFAULT_GRID`]).
    pub fn ess_sup(&self) -> f64 {
        ess_bounds(self).ess_sup
    }
}

/// Grid shared by the sampled fields among `fields` ([`DEFAULT_GRID`] if all are symbolic).
pub fn common_grid(fields: &[&OperatorField]) -> Result<usize> {
    let mut n = None;
    for f in fields {
        if let Some(m) = f.grid() {
            match n {
                Some(k) if k != m => return Err(Error::SpaceMismatch(format!("grids of size {k} and {m}"))),
                _ => n = Some(m),
            }
        }
    }
    Ok(n.unwrap_or(DEFAULT_GRID))
}

/// Fibers of all `fields` on their common grid.
pub(crate) fn common_fibers<'a>(fields: &[&'a OperatorField]) -> Result<(usize, Vec<Cow<'a, [CMat]>>)> {
    let n = common_grid(fields)?;
    let sets = fields.iter().map(|f| f.fibers_at(n)).collect::<Result<Vec<_>>>()?;
    Ok((n, sets))
}

/// Largest operator norm in a fiber list.
pub(crate) fn sup_norm(fibers: &[CMat]) -> f64 {
    fibers.par_iter().map(CMat::op_norm).reduce(|| 0.0, f64::max)
}

/// Half-open grid cells `[j/N, (j+1)/N)` where `mask` holds, merged into runs.
pub fn mask_intervals(mask: &[bool]) -> Vec<(f64, f64)> {
    let n = mask.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (j, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let (lo, hi) = (j as f64 / n, (j + 1) as f64 / n);
        match out.last_mut() {
            Some(last) if last.1 == lo => last.1 = hi,
            _ => out.push((lo, hi)),
        }
    }
    out
}

pub fn field_algebra(op: FieldOp, operands: &[&OperatorField]) -> Result<OperatorField> {
    let need = |k: usize| {
        if operands.len() == k {
            Ok(())
        } else {
            Err(Error::Validation {
                field: "operands".into(),
                message: format!("{op:?} takes {k} operand(s), got {}", operands.len()),
            })
        }
    };
    match op {
        FieldOp::Add => {
            need(2)?;
            operands[0].add(operands[1])
        }
        FieldOp::Compose => {
            need(2)?;
            operands[0].compose(operands[1])
        }
        FieldOp::Scale(c) => {
            need(1)?;
            operands[0].scale(c)
        }
        FieldOp::Adjoint => {
            need(1)?;
            Ok(operands[0].adjoint())
        }
    }
}

pub fn ess_bounds(t: &OperatorField) -> FieldNormReport {
    let fibers = match t.fibers_at(t.grid_or(DEFAULT_GRID)) {
        Ok(f) => f,
        // the default grid cannot hit a validated zero except at grid points,
        // which the half offset rules out for dyadic locations
        Err(_) => return FieldNormReport { ess_sup: f64::NAN, inf_singular: 0.0, zero_measure: 0.0 },
    };
    let n = fibers.len();
    let sv: Vec<(f64, f64)> = fibers
        .par_iter()
        .map(|m| {
            let s = m.singular_values();
            (s[0], s[s.len() - 1])
        })
        .collect();
    let ess_sup = sv.iter().map(|s| s.0).fold(0.0, f64::max);
    let inf_singular = sv.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let zero_measure = match t {
        OperatorField::Symbolic(_) => 0.0,
        OperatorField::Sampled { .. } => {
            sv.iter().filter(|s| s.1 < INJECTIVE_FLOOR * s.0.max(1.0)).count() as f64 / n as f64
        }
    };
    FieldNormReport { ess_sup, inf_singular, zero_measure }
}

pub fn is_injective_dense(alpha: &OperatorField) -> InjectivityReport {
    match alpha {
        OperatorField::Symbolic(g) => InjectivityReport {
            injective: true,
            witness: (!g.zeros().is_empty()).then(|| {
                let locs: Vec<String> = g.zeros().iter().map(|z| z.at.to_string()).collect();
                format!("finite zero set {{{}}}", locs.join(", "))
            }),
        },
        OperatorField::Sampled { fibers, .. } => {
            let scale = ess_bounds(alpha).ess_sup.max(1.0);
            for (j, m) in fibers.iter().enumerate() {
                let s = m.min_singular();
                if !(s > INJECTIVE_FLOOR * scale) {
                    return InjectivityReport {
                        injective: false,
                        witness: Some(format!(
                            "fiber {j} (z = {}) has smallest singular value {s:e}",
                            grid_point(j, fibers.len())
                        )),
                    };
                }
            }
            InjectivityReport { injective: true, witness: None }
        }
    }
}

pub fn sample_symbolic(f: &ScalarGermField, n: usize) -> Result<OperatorField> {
    if n < 16 {
        return Err(Error::Validation { field: "grid".into(), message: format!("grid size {n} below 16") });
    }
    OperatorField::sampled(f.sample(n)?.into_iter().map(|v| CMat::scalar(C64::new(v, 0.0))).collect())
}
