//! Brute-force congruence oracle for symbolic scalar fields: the ratio
//! `β/α` sampled on punctured neighbourhoods of every zero.

use crate::error::{Error, Result};
use crate::field::{ScalarGermField, Side, LOCATION_TOL};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_REFINEMENTS: [u32; 5] = [2, 3, 4, 5, 6];
/// `|log₁₀ ratio|` changing slower than this per decade counts as bounded.
pub const BOUNDED_SLOPE: f64 = 0.2;
/// ... and faster than this as unbounded.
pub const UNBOUNDED_SLOPE: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleAnswer {
    Congruent,
    NotCongruent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub answer: OracleAnswer,
    /// Smallest and largest `|β/α|` at the finest level.
    pub dilatation: (f64, f64),
    pub levels: Vec<u32>,
}

/// Ratios `β/α` at `loc ± 10^{−k}` for one level, over all probe points.
fn level_ratios(alpha: &ScalarGermField, beta: &ScalarGermField, probes: &[(f64, Side)], k: u32) -> Vec<f64> {
    let t = 10f64.powi(-(k as i32));
    probes
        .iter()
        .map(|&(at, side)| {
            let z = (at + side.direction() * t).rem_euclid(1.0);
            beta.eval(z) / alpha.eval(z)
        })
        .collect()
}

fn pair_verdict(coarse: &[f64], fine: &[f64], decades: f64) -> OracleAnswer {
    let mut all_bounded = true;
    for (&a, &b) in coarse.iter().zip(fine) {
        if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 {
            return OracleAnswer::NotCongruent;
        }
        if a < 0.0 && b < 0.0 {
            return OracleAnswer::NotCongruent;
        }
        let slope = (b.abs().log10() - a.abs().log10()).abs() / decades;
        if slope > UNBOUNDED_SLOPE {
            return OracleAnswer::NotCongruent;
        }
        if slope >= BOUNDED_SLOPE || a < 0.0 || b < 0.0 {
            all_bounded = false;
        }
    }
    if all_bounded {
        OracleAnswer::Congruent
    } else {
        OracleAnswer::Inconclusive
    }
}

/// Congruence of the discriminant forms of two scalar fields, judged from
/// the ratio `β/α` near the union of their zeros: bounded above and below
/// with matching signs means congruent. The verdict has to agree on the two
/// finest pairs of levels, otherwise it is inconclusive.
pub fn ratio_oracle(alpha: &ScalarGermField, beta: &ScalarGermField, refinements: &[u32]) -> Result<OracleVerdict> {
    let mut levels = refinements.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 3 || levels[0] == 0 || *levels.last().unwrap() > 10 {
        return Err(Error::Validation {
            field: "refinements".into(),
            message: "need at least three distinct levels between 1 and 10".into(),
        });
    }
    let mut locs: Vec<f64> = alpha.zeros().iter().chain(beta.zeros()).map(|z| z.at).collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup_by(|a, b| (*a - *b).abs() < LOCATION_TOL);
    let probes: Vec<(f64, Side)> = locs.iter().flat_map(|&at| [(at, Side::Left), (at, Side::Right)]).collect();
    if probes.is_empty() {
        return Ok(OracleVerdict { answer: OracleAnswer::Congruent, dilatation: (1.0, 1.0), levels });
    }
    let ratios: Vec<Vec<f64>> = levels.par_iter().map(|&k| level_ratios(alpha, beta, &probes, k)).collect();
    let m = levels.len();
    let verdicts: Vec<OracleAnswer> = (m - 2..m)
        .map(|i| pair_verdict(&ratios[i - 1], &ratios[i], (levels[i] - levels[i - 1]) as f64))
        .collect();
    let answer = if verdicts[0] == verdicts[1] { verdicts[1] } else { OracleAnswer::Inconclusive };
    let finest = &ratios[m - 1];
    let lo = finest.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let hi = finest.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(OracleVerdict { answer, dilatation: (lo, hi), levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GermZero, Sign};

    fn linear() -> ScalarGermField {
        ScalarGermField::parse("z - 0.5", vec![GermZero::symmetric(0.5, 1, Sign::Minus, Sign::Plus, 1.0)]).unwrap()
    }

    #[test]
    fn identical_fields() {
        let v = ratio_oracle(&linear(), &linear(), &DEFAULT_REFINEMENTS).unwrap();
        assert_eq!(v.answer, OracleAnswer::Congruent);
        assert_eq!(v.dilatation, (1.0, 1.0));
    }

    /// β = α + α²F with F = 1 + z.
    #[test]
    fn bounded_correction() {
        let beta = ScalarGermField::parse(
            "(z - 0.5) + (z - 0.5)^2*(1 + z)",
            vec![GermZero::symmetric(0.5, 1, Sign::Minus, Sign::Plus, 1.0)],
        )
        .unwrap();
        let v = ratio_oracle(&linear(), &beta, &DEFAULT_REFINEMENTS).unwrap();
        assert_eq!(v.answer, OracleAnswer::Congruent);
        assert!((v.dilatation.0 - 1.0).abs() < 1e-5 && (v.dilatation.1 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn cube_is_not_congruent() {
        let cube =
            ScalarGermField::parse("(z - 0.5)^3", vec![GermZero::symmetric(0.5, 3, Sign::Minus, Sign::Plus, 1.0)]).unwrap();
        let v = ratio_oracle(&linear(), &cube, &DEFAULT_REFINEMENTS).unwrap();
        assert_eq!(v.answer, OracleAnswer::NotCongruent);
        assert!(v.dilatation.0 < 1e-10);
    }

    #[test]
    fn opposite_sign_is_not_congruent() {
        let neg = linear().scale(-2.0).unwrap();
        assert_eq!(ratio_oracle(&linear(), &neg, &DEFAULT_REFINEMENTS).unwrap().answer, OracleAnswer::NotCongruent);
    }

    #[test]
    fn too_few_levels() {
        assert!(ratio_oracle(&linear(), &linear(), &[2, 3]).is_err());
    }
}
