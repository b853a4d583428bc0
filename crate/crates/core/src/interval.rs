//! Finite unions of closed intervals inside `[0, 1]`.

use crate::error::{CopulaError, Result};

/// Lengths at or below this are treated as empty.
pub(crate) const SLIVER: f64 = 1e-14;

/// Disjoint, ordered closed intervals within `[0, 1]`.
///
/// Overlapping or touching inputs are merged and zero-length intervals are
/// dropped, so two unions covering the same set compare equal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > 1.0 || a > b {
                return Err(CopulaError::Invalid(format!(
                    "interval [{a}, {b}] is not an ordered subinterval of [0, 1]"
                )));
            }
        }
        intervals.retain(|&(a, b)| b - a > SLIVER);
        intervals.sort_by(|l, r| l.0.total_cmp(&r.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 + SLIVER => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses `"a1,b1;a2,b2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for (k, part) in text.split(';').enumerate() {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let bounds: Vec<&str> = part.split(',').map(str::trim).collect();
            if bounds.len() != 2 {
                return Err(CopulaError::Schema {
                    path: format!("set[{k}]"),
                    message: format!("expected `a,b`, found `{part}`"),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| CopulaError::Schema { path: format!("set[{k}]"), message: format!("`{s}`: {e}") })
            };
            intervals.push((parse(bounds[0])?, parse(bounds[1])?));
        }
        Self::new(intervals)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Intersection with a single interval `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> Self {
        let intervals = self
            .intervals
            .iter()
            .filter_map(|&(a, b)| {
                let (a, b) = (a.max(lo), b.min(hi));
                (b - a > SLIVER).then_some((a, b))
            })
            .collect();
        Self { intervals }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_touching_and_drops_empty() {
        let u = IntervalUnion::new(vec![(0.5, 0.75), (0.25, 0.5), (0.9, 0.9)]).unwrap();
        assert_eq!(u.intervals(), &[(0.25, 0.75)]);
        assert_eq!(u.measure(), 0.5);
    }

    #[test]
    fn parse_set_syntax() {
        let u = IntervalUnion::parse("0.25,0.5; 0.75,1").unwrap();
        assert_eq!(u.intervals(), &[(0.25, 0.5), (0.75, 1.0)]);
        assert!(IntervalUnion::parse("0.25").is_err());
        assert!(IntervalUnion::parse("0.5,0.25").is_err());
    }

    #[test]
    fn clip_to_block() {
        let u = IntervalUnion::parse("0,0.25;0.5,0.75").unwrap();
        assert_eq!(u.clip(0.125, 0.625).intervals(), &[(0.125, 0.25), (0.5, 0.625)]);
    }
}
