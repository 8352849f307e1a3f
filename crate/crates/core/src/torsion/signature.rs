use super::TorsionObject;
use crate::error::{Error, Result};
use crate::field::{GermOrder, ScalarGermField, Side, Sign};
use serde::Serialize;
use std::cmp::Ordering;

/// One-sided germ of a zero: where, from which side, how fast, with which sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GermEntry {
    pub location: f64,
    pub side: Side,
    pub order: GermOrder,
    pub sign: Sign,
}

impl GermEntry {
    fn key_cmp(&self, o: &GermEntry) -> Ordering {
        self.location.total_cmp(&o.location).then(self.side.cmp(&o.side)).then(self.order.cmp(&o.order))
    }

    /// Equal up to sign.
    pub fn same_germ(&self, o: &GermEntry) -> bool {
        self.key_cmp(o) == Ordering::Equal
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GermSignature {
    entries: Vec<GermEntry>,
}

impl GermSignature {
    pub fn from_entries(mut entries: Vec<GermEntry>) -> Self {
        entries.sort_by(|a, b| a.key_cmp(b).then(a.sign.cmp(&b.sign)));
        GermSignature { entries }
    }

    pub fn of_field(g: &ScalarGermField) -> Self {
        let mut entries = Vec::new();
        for z in g.zeros() {
            for side in [Side::Left, Side::Right] {
                if let Some(s) = z.side(side) {
                    entries.push(GermEntry { location: z.at, side, order: s.order, sign: s.sign });
                }
            }
        }
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[GermEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries carrying the given sign.
    pub fn with_sign(&self, s: Sign) -> GermSignature {
        GermSignature { entries: self.entries.iter().filter(|e| e.sign == s).copied().collect() }
    }

    /// First entry present in one signature but not the other, ignoring
    /// signs. The flag tells whether the entry came from `self`.
    pub fn first_difference(&self, other: &GermSignature) -> Option<(GermEntry, bool)> {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.entries.get(i), other.entries.get(j)) {
                (None, None) => return None,
                (Some(a), None) => return Some((*a, true)),
                (None, Some(b)) => return Some((*b, false)),
                (Some(a), Some(b)) => match a.key_cmp(b) {
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                    }
                    Ordering::Less => return Some((*a, true)),
                    Ordering::Greater => return Some((*b, false)),
                },
            }
        }
    }

    pub fn equal_up_to_sign(&self, other: &GermSignature) -> bool {
        self.first_difference(other).is_none()
    }

    /// Comparison that also forgets locations and sides: only the multiset
    /// of orders remains. Exposed for inspection, never used for decisions.
    pub fn orders(&self) -> Vec<GermOrder> {
        let mut o: Vec<GermOrder> = self.entries.iter().map(|e| e.order).collect();
        o.sort();
        o
    }
}

pub fn germ_signature(x: &TorsionObject) -> Result<GermSignature> {
    let g = x.alpha().as_symbolic().ok_or_else(|| Error::Validation {
        field: "alpha".into(),
        message: "germ signatures need a symbolic scalar field".into(),
    })?;
    g.validate()?;
    Ok(GermSignature::of_field(g))
}
