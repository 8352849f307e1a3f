use super::signature::{germ_signature, GermEntry};
use super::TorsionObject;
use crate::error::{Error, Result};
use crate::field::DEFAULT_GRID;
use rayon::prelude::*;
use serde::Serialize;

/// Default λ window for density comparisons.
pub const LAMBDA_WINDOW: (f64, f64) = (1e-6, 1e-1);
/// Largest dilatation constant tried by the sampled isomorphism test.
pub const MAX_DILATATION: f64 = 64.0;

/// `F(λ)`: measure of the set where fiber eigenvalues of `|α|` are at most λ,
/// counted with multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

/// All fiber moduli (singular values) sorted ascending, with the weight of one fiber.
pub(crate) fn sorted_moduli(x: &TorsionObject, default_grid: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.alpha().grid_or(default_grid);
    let fibers = x.alpha().fibers_at(n)?;
    let mut all: Vec<f64> = fibers.par_iter().flat_map_iter(|m| m.singular_values()).collect();
    all.sort_by(f64::total_cmp);
    Ok((all, 1.0 / n as f64))
}

fn count_at(sorted: &[f64], w: f64, lambda: f64) -> f64 {
    sorted.partition_point(|&s| s <= lambda) as f64 * w
}

pub fn log_grid(lmin: f64, lmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(lmin > 0.0 && lmax > lmin && lmax.is_finite()) || points < 2 {
        return Err(Error::Validation {
            field: "lambda".into(),
            message: format!("need 0 < lambda_min < lambda_max and at least 2 points (got {lmin}, {lmax}, {points})"),
        });
    }
    let (a, b) = (lmin.ln(), lmax.ln());
    Ok((0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect())
}

/// Symbolic fields are sampled on [`DEFAULT_GRID`]; see [`density_curve_on`].
pub fn density_curve(x: &TorsionObject, lmin: f64, lmax: f64, points: usize) -> Result<DensityCurve> {
    density_curve_on(x, DEFAULT_GRID, lmin, lmax, points)
}

pub fn density_curve_on(x: &TorsionObject, grid: usize, lmin: f64, lmax: f64, points: usize) -> Result<DensityCurve> {
    let lambdas = log_grid(lmin, lmax, points)?;
    let (sorted, w) = sorted_moduli(x, grid)?;
    let values: Vec<f64> = lambdas.iter().map(|&l| count_at(&sorted, w, l)).collect();
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyWindow);
    }
    Ok(DensityCurve { lambdas, values })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of `log F` against `log λ` over the middle decade of the window.
pub fn ns_exponent(curve: &DensityCurve) -> Result<f64> {
    let (first, last) = match (curve.lambdas.first(), curve.lambdas.last()) {
        (Some(a), Some(b)) => (a.log10(), b.log10()),
        _ => return Err(Error::EmptyWindow),
    };
    let mid = 0.5 * (first + last);
    let half = 0.5f64.min(0.5 * (last - first));
    let pts: Vec<(f64, f64)> = curve
        .lambdas
        .iter()
        .zip(&curve.values)
        .filter(|(l, v)| (l.log10() - mid).abs() <= half + 1e-12 && **v > 0.0)
        .map(|(l, v)| (l.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    Ok(ls_slope(&pts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum IsoVerdict {
    Iso,
    /// `from_first` tells which object carries the unmatched germ.
    NotIso { distinguishing: Option<GermEntry>, from_first: bool },
    Heuristic { answer: bool, dilatation: Option<f64> },
}

impl IsoVerdict {
    pub fn answer(&self) -> bool {
        match self {
            IsoVerdict::Iso => true,
            IsoVerdict::NotIso { .. } => false,
            IsoVerdict::Heuristic { answer, .. } => *answer,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, IsoVerdict::Heuristic { .. })
    }
}

/// Exact for two symbolic objects (germ signatures equal up to sign);
/// otherwise a density-dilatation heuristic on [`LAMBDA_WINDOW`].
pub fn iso_modules(x: &TorsionObject, y: &TorsionObject) -> Result<IsoVerdict> {
    if x.alpha().as_symbolic().is_some() && y.alpha().as_symbolic().is_some() {
        let (sx, sy) = (germ_signature(x)?, germ_signature(y)?);
        return Ok(match sx.first_difference(&sy) {
            None => IsoVerdict::Iso,
            Some((e, from_first)) => IsoVerdict::NotIso { distinguishing: Some(e), from_first },
        });
    }
    let grid = x.alpha().grid().or(y.alpha().grid()).unwrap_or(DEFAULT_GRID);
    let (ax, wx) = sorted_moduli(x, grid)?;
    let (ay, wy) = sorted_moduli(y, grid)?;
    let lambdas = log_grid(LAMBDA_WINDOW.0, LAMBDA_WINDOW.1, 200)?;
    let fits = |c: f64| {
        lambdas.iter().all(|&l| {
            let fy = count_at(&ay, wy, l);
            count_at(&ax, wx, l / c) <= fy + 1e-12 && fy <= count_at(&ax, wx, c * l) + 1e-12
        })
    };
    let steps = (8.0 * MAX_DILATATION.log2()).round() as i32;
    let c = (0..=steps).map(|k| 2f64.powf(k as f64 / 8.0)).find(|&c| fits(c));
    Ok(IsoVerdict::Heuristic { answer: c.is_some(), dilatation: c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GermZero, OperatorField, ScalarGermField, Sign};
    use crate::linalg::CMat;

    fn abs_germ(p: u32) -> TorsionObject {
        let src = format!("abs(z - 0.5)^{p}");
        let g = ScalarGermField::parse(&src, vec![GermZero::symmetric(0.5, p, Sign::Plus, Sign::Plus, 1.0)]).unwrap();
        TorsionObject::new(OperatorField::symbolic(g)).unwrap()
    }

    #[test]
    fn density_of_linear_germ() {
        let c = density_curve_on(&abs_germ(1), 65536, 1e-4, 1e-1, 50).unwrap();
        for (l, v) in c.lambdas.iter().zip(&c.values) {
            assert!((v - 2.0 * l).abs() <= 2.0 / 65536.0, "{l} {v}");
        }
        assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn exponents_match_orders() {
        for p in 1..=3u32 {
            let c = density_curve_on(&abs_germ(p), 65536, 1e-6, 1e-1, 200).unwrap();
            let e = ns_exponent(&c).unwrap();
            let want = 1.0 / p as f64;
            assert!((e / want - 1.0).abs() < 0.05, "p = {p}: {e}");
        }
    }

    #[test]
    fn bounded_below_has_empty_window() {
        let x = TorsionObject::new(OperatorField::scalar_fn(256, |z| 2.0 + z).unwrap()).unwrap();
        assert!(matches!(density_curve(&x, 1e-6, 1e-1, 20), Err(Error::EmptyWindow)));
        let c = density_curve(&x, 1e-6, 10.0, 20).unwrap();
        assert!(c.values.iter().zip(&c.lambdas).all(|(v, l)| *l >= 2.0 || *v == 0.0));
    }

    #[test]
    fn symbolic_iso_examples() {
        let a = abs_germ(1);
        assert_eq!(iso_modules(&a, &a).unwrap(), IsoVerdict::Iso);
        let g = ScalarGermField::parse("2*abs(z-0.5)", vec![GermZero::symmetric(0.5, 1, Sign::Plus, Sign::Plus, 2.0)]).unwrap();
        let b = TorsionObject::new(OperatorField::symbolic(g)).unwrap();
        assert_eq!(iso_modules(&a, &b).unwrap(), IsoVerdict::Iso);
        assert!(!iso_modules(&a, &abs_germ(2)).unwrap().answer());
    }

    #[test]
    fn sampled_iso_reports_dilatation() {
        let n = 4096;
        let x = TorsionObject::new(OperatorField::scalar_fn(n, |z| (z - 0.5).abs()).unwrap()).unwrap();
        let y = TorsionObject::new(OperatorField::scalar_fn(n, |z| 3.0 * (z - 0.5).abs()).unwrap()).unwrap();
        match iso_modules(&x, &y).unwrap() {
            IsoVerdict::Heuristic { answer: true, dilatation: Some(c) } => assert!((3.0..3.4).contains(&c)),
            other => panic!("{other:?}"),
        }
        let z = TorsionObject::new(OperatorField::scalar_fn(n, |z| (z - 0.5).powi(2)).unwrap()).unwrap();
        assert!(!iso_modules(&x, &z).unwrap().answer());
        let d = TorsionObject::new(OperatorField::from_fn(n, |z| CMat::from_real_diag(&[(z - 0.5).abs(), 1.0])).unwrap()).unwrap();
        assert!(iso_modules(&x, &d).unwrap().answer());
    }
}
