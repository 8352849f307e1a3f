//! JSON field descriptions and the raw little-endian sample format.
//!
//! Sample files hold `grid` fibers of `dim × dim` complex entries, fiber by
//! fiber and row-major within a fiber, each entry as two `f64` (re, im).

use super::{GermOrder, GermZero, OperatorField, ScalarGermField, SideGerm, Sign};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldDesc {
    ScalarSymbolic {
        expr: String,
        #[serde(default)]
        zeros: Vec<ZeroDesc>,
    },
    Sampled {
        dim: usize,
        grid: usize,
        data: String,
    },
}

/// One declared zero. `left`/`right` are `"+"`, `"-"` or `"0"` (no
/// vanishing from that side). The optional per-side fields override
/// `order`/`coeff` for asymmetric germs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroDesc {
    pub at: f64,
    pub order: f64,
    pub left: String,
    pub right: String,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_coeff: Option<f64>,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation { field: field.to_string(), message: message.into() }
}

impl ZeroDesc {
    pub fn from_zero(z: &GermZero) -> Self {
        let main = z.left.or(z.right).expect("a declared zero vanishes from some side");
        let sign = |g: Option<SideGerm>| g.map_or("0", |g| g.sign.symbol()).to_string();
        let differs = |g: Option<SideGerm>, f: fn(&SideGerm) -> f64| g.map(|g| f(&g)).filter(|&v| v != f(&main));
        ZeroDesc {
            at: z.at,
            order: main.order.value(),
            left: sign(z.left),
            right: sign(z.right),
            coeff: main.coeff,
            left_order: differs(z.left, |g| g.order.value()),
            right_order: differs(z.right, |g| g.order.value()),
            left_coeff: differs(z.left, |g| g.coeff),
            right_coeff: differs(z.right, |g| g.coeff),
        }
    }

    pub fn to_zero(&self, field: &str) -> Result<GermZero> {
        let side = |s: &str, order: Option<f64>, coeff: Option<f64>| -> Result<Option<SideGerm>> {
            let sign = match s {
                "+" => Sign::Plus,
                "-" => Sign::Minus,
                "0" => return Ok(None),
                other => return Err(invalid(field, format!("side sign must be \"+\", \"-\" or \"0\", got {other:?}"))),
            };
            let p = order.unwrap_or(self.order);
            let order = GermOrder::from_f64(p)
                .ok_or_else(|| invalid(field, format!("order {p} is not a positive multiple of 1/2")))?;
            Ok(Some(SideGerm::new(order, sign, coeff.unwrap_or(self.coeff).abs())))
        };
        if self.coeff == 0.0 {
            return Err(invalid(field, format!("zero at {} has vanishing leading coefficient", self.at)));
        }
        Ok(GermZero {
            at: self.at,
            left: side(&self.left, self.left_order, self.left_coeff)?,
            right: side(&self.right, self.right_order, self.right_coeff)?,
        })
    }
}

impl FieldDesc {
    pub fn from_symbolic(g: &ScalarGermField) -> Self {
        FieldDesc::ScalarSymbolic { expr: g.expr().to_string(), zeros: g.zeros().iter().map(ZeroDesc::from_zero).collect() }
    }

    /// Materialize the field. Relative data paths resolve against `base`.
    pub fn load(&self, name: &str, base: &Path) -> Result<OperatorField> {
        match self {
            FieldDesc::ScalarSymbolic { expr, zeros } => {
                let zeros = zeros.iter().map(|z| z.to_zero(name)).collect::<Result<Vec<_>>>()?;
                let g = ScalarGermField::parse(expr, zeros).map_err(|e| match e {
                    Error::Parse { .. } => e,
                    other => invalid(name, other.to_string()),
                })?;
                Ok(OperatorField::symbolic(g))
            }
            FieldDesc::Sampled { dim, grid, data } => {
                let path = resolve(base, data);
                read_sampled(&path, *dim, *grid).map_err(|e| invalid(name, e.to_string()))
            }
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn encode_fibers(fibers: &[CMat]) -> Vec<u8> {
    let mut out = Vec::with_capacity(fibers.iter().map(|m| m.as_slice().len() * 16).sum());
    for m in fibers {
        for c in m.as_slice() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_fibers(bytes: &[u8], dim: usize, grid: usize) -> Result<Vec<CMat>> {
    let per = dim * dim * 16;
    if dim == 0 || grid == 0 {
        return Err(Error::DimMismatch("dim and grid must be positive".into()));
    }
    if bytes.len() != per * grid {
        return Err(Error::DimMismatch(format!(
            "expected {} bytes for {grid} fibers of dimension {dim}, found {}",
            per * grid,
            bytes.len()
        )));
    }
    let word = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("eight bytes"));
    (0..grid)
        .map(|j| {
            let base = j * dim * dim * 2;
            let data = (0..dim * dim).map(|e| C64::new(word(base + 2 * e), word(base + 2 * e + 1))).collect();
            CMat::from_vec(dim, dim, data)
        })
        .collect()
}

pub fn read_sampled(path: &Path, dim: usize, grid: usize) -> Result<OperatorField> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    OperatorField::sampled(decode_fibers(&bytes, dim, grid)?)
}

pub fn write_sampled(path: &Path, field: &OperatorField) -> Result<()> {
    let fibers = field
        .fibers()
        .ok_or_else(|| invalid("field", "only sampled fields have a binary form"))?;
    std::fs::write(path, encode_fibers(fibers)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_description_roundtrip() {
        let json = r#"{"kind":"scalar_symbolic","expr":"(z-0.5)^2","zeros":[{"at":0.5,"order":2,"left":"+","right":"+","coeff":1.0}]}"#;
        let d: FieldDesc = serde_json::from_str(json).unwrap();
        let f = d.load("alpha", Path::new(".")).unwrap();
        let g = f.as_symbolic().unwrap();
        let again = FieldDesc::from_symbolic(g).load("alpha", Path::new(".")).unwrap();
        assert_eq!(again.as_symbolic().unwrap().zeros(), g.zeros());
    }

    #[test]
    fn one_sided_zero_description() {
        let json = r#"{"kind":"scalar_symbolic","expr":"piecewise(1, 0.5, z-0.5)",
            "zeros":[{"at":0.5,"order":1,"left":"0","right":"+","coeff":1}]}"#;
        let d: FieldDesc = serde_json::from_str(json).unwrap();
        let f = d.load("a", Path::new(".")).unwrap();
        let z = f.as_symbolic().unwrap().zeros()[0];
        assert!(z.left.is_none());
        assert_eq!(ZeroDesc::from_zero(&z).left, "0");
    }

    #[test]
    fn errors_name_the_field() {
        let d = FieldDesc::ScalarSymbolic { expr: "z - 0.3".into(), zeros: vec![] };
        match d.load("beta", Path::new(".")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("{other:?}"),
        }
        let d = FieldDesc::ScalarSymbolic { expr: "z -".into(), zeros: vec![] };
        assert!(matches!(d.load("beta", Path::new(".")), Err(Error::Parse { .. })));
    }

    #[test]
    fn binary_roundtrip() {
        let f = OperatorField::from_fn(5, |z| CMat::from_fn(2, 2, |i, j| C64::new(z * i as f64, -(j as f64)))).unwrap();
        let bytes = encode_fibers(f.fibers().unwrap());
        assert_eq!(bytes.len(), 5 * 4 * 16);
        assert_eq!(&bytes[..8], &0f64.to_le_bytes());
        let back = decode_fibers(&bytes, 2, 5).unwrap();
        assert_eq!(back, f.fibers().unwrap());
        assert!(decode_fibers(&bytes, 2, 4).is_err());
    }
}
