//! Piecewise affine measure-preserving maps of `[0, 1]`.
//!
//! A map `h` with finitely many affine pieces describes the complete
//! dependence copula `C(x, y) = m{t <= x : h(t) <= y}`, the copula of
//! `(U, h(U))` for a uniform `U`. Interval exchanges are the special case
//! with slopes `+1`/`-1` and disjoint images.

use serde::{Deserialize, Serialize};

use crate::error::{CopulaError, Result};
use crate::interval::{IntervalUnion, SLIVER};

/// Tolerance for breakpoint and image bookkeeping.
pub(crate) const EPS: f64 = 1e-12;

/// `t -> slope * t + intercept` on `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub start: f64,
    pub end: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn image(&self) -> (f64, f64) {
        let (a, b) = (self.eval(self.start), self.eval(self.end));
        (a.min(b), a.max(b))
    }

    #[inline]
    pub fn preimage(&self, y: f64) -> f64 {
        (y - self.intercept) / self.slope
    }

    /// `1/|slope|`: the density this piece contributes to the image measure.
    #[inline]
    pub fn weight(&self) -> f64 {
        1.0 / self.slope.abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineMap {
    pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineMap {
    /// Validates that the pieces tile `[0, 1]`, map into `[0, 1]` and
    /// preserve Lebesgue measure.
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let map = Self { pieces };
        map.check_structure().map_err(CopulaError::Invalid)?;
        map.check_measure_preserving().map_err(CopulaError::Invalid)?;
        Ok(map)
    }

    pub(crate) fn from_pieces_unchecked(pieces: Vec<AffinePiece>) -> Self {
        Self { pieces }
    }

    pub fn identity() -> Self {
        Self::from_pieces_unchecked(vec![AffinePiece { start: 0.0, end: 1.0, slope: 1.0, intercept: 0.0 }])
    }

    /// `t -> k t mod 1`, the k-fold covering map (k = 2 is the doubling map).
    pub fn multiply_mod_one(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(CopulaError::Invalid("multiplier must be positive".into()));
        }
        let kf = k as f64;
        let pieces = (0..k)
            .map(|i| AffinePiece { start: i as f64 / kf, end: (i + 1) as f64 / kf, slope: kf, intercept: -(i as f64) })
            .collect();
        Ok(Self::from_pieces_unchecked(pieces))
    }

    /// Tent map `t -> 1 - |2t - 1|`.
    pub fn tent() -> Self {
        Self::from_pieces_unchecked(vec![
            AffinePiece { start: 0.0, end: 0.5, slope: 2.0, intercept: 0.0 },
            AffinePiece { start: 0.5, end: 1.0, slope: -2.0, intercept: 2.0 },
        ])
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub(crate) fn check_structure(&self) -> std::result::Result<(), String> {
        let pieces = &self.pieces;
        if pieces.is_empty() {
            return Err("map has no pieces".into());
        }
        if pieces[0].start.abs() > EPS {
            return Err(format!("first piece starts at {} instead of 0", pieces[0].start));
        }
        if (pieces[pieces.len() - 1].end - 1.0).abs() > EPS {
            return Err(format!("last piece ends at {} instead of 1", pieces[pieces.len() - 1].end));
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.start.is_finite() && p.end.is_finite() && p.slope.is_finite() && p.intercept.is_finite()) {
                return Err(format!("piece {k} has a non-finite field"));
            }
            if p.len() <= 0.0 {
                return Err(format!("piece {k} has empty source [{}, {}]", p.start, p.end));
            }
            if p.slope == 0.0 {
                return Err(format!("piece {k} has zero slope"));
            }
            let (lo, hi) = p.image();
            if lo < -EPS || hi > 1.0 + EPS {
                return Err(format!("piece {k} maps outside [0, 1] (image [{lo}, {hi}])"));
            }
            if k > 0 && (p.start - pieces[k - 1].end).abs() > EPS {
                return Err(format!("pieces {} and {k} overlap or leave a gap at {}", k - 1, pieces[k - 1].end));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated image endpoints together with 0 and 1.
    pub(crate) fn image_breakpoints(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = vec![0.0, 1.0];
        for p in &self.pieces {
            let (lo, hi) = p.image();
            ys.push(lo.clamp(0.0, 1.0));
            ys.push(hi.clamp(0.0, 1.0));
        }
        ys.sort_by(f64::total_cmp);
        ys.dedup_by(|a, b| (*a - *b).abs() <= SLIVER);
        ys
    }

    /// For a.e. `y`, the preimage densities `1/|slope|` must sum to 1.
    pub(crate) fn check_measure_preserving(&self) -> std::result::Result<(), String> {
        let ys = self.image_breakpoints();
        for w in ys.windows(2) {
            if w[1] - w[0] <= SLIVER {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let density: f64 = self
                .pieces
                .iter()
                .filter(|p| {
                    let (lo, hi) = p.image();
                    lo < mid && mid < hi
                })
                .map(AffinePiece::weight)
                .sum();
            if (density - 1.0).abs() > 1e-9 {
                return Err(format!("not measure-preserving: preimage density {density} on ({}, {})", w[0], w[1]));
            }
        }
        Ok(())
    }

    fn locate(&self, x: f64) -> usize {
        self.pieces.partition_point(|p| p.end <= x).min(self.pieces.len() - 1)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.locate(x)].eval(x)
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &PiecewiseAffineMap) -> PiecewiseAffineMap {
        Self::from_pieces_unchecked(compose(&inner.pieces, &self.pieces))
    }

    /// `C(x, y) = m{t <= x : h(t) <= y}`.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let mut total = 0.0;
        for p in &self.pieces {
            if p.start >= x {
                break;
            }
            let (lo, hi) = (p.start, p.end.min(x));
            let cut = p.preimage(y).clamp(lo, hi);
            total += if p.slope > 0.0 { cut - lo } else { hi - cut };
        }
        total
    }

    /// `∂₁C(x, y) = 1{h(x) <= y}`; the flag marks points on the graph.
    pub fn partial1(&self, x: f64, y: f64) -> (f64, bool) {
        let v = self.eval(x);
        if y > v {
            (1.0, false)
        } else if y < v {
            (0.0, false)
        } else {
            (1.0, true)
        }
    }

    /// `∂₂C(x, y) = Σ 1/|slope| over preimages of y lying left of x`.
    pub fn partial2(&self, x: f64, y: f64) -> (f64, bool) {
        let mut value = 0.0;
        let mut on_graph = false;
        for p in &self.pieces {
            let (lo, hi) = p.image();
            let inside = lo <= y && (y < hi || (y == hi && hi >= 1.0));
            if !inside {
                continue;
            }
            let t = p.preimage(y);
            if t < x {
                value += p.weight();
            } else if t == x {
                value += p.weight();
                on_graph = true;
            }
        }
        (value, on_graph)
    }

    /// Exact Sobolev norm squared of the induced copula.
    ///
    /// `∫∫ (∂₁C)² = ∫ (1 - h)`; for `∂₂C`, the inner integral over x is
    /// linear in y between consecutive image breakpoints, so the midpoint
    /// rule there is exact.
    pub fn norm_sq(&self) -> f64 {
        let first: f64 = self.pieces.iter().map(|p| p.len() * (1.0 - p.eval(0.5 * (p.start + p.end)))).sum();
        let ys = self.image_breakpoints();
        let mut second = 0.0;
        for w in ys.windows(2) {
            let dy = w[1] - w[0];
            if dy <= SLIVER {
                continue;
            }
            second += dy * self.row_energy(0.5 * (w[0] + w[1]));
        }
        first + second
    }

    /// `∫₀¹ ∂₂C(x, y)² dx` for fixed y not on an image breakpoint.
    fn row_energy(&self, y: f64) -> f64 {
        let mut energy = 0.0;
        let mut cumulative = 0.0;
        let mut last: Option<f64> = None;
        for p in &self.pieces {
            let (lo, hi) = p.image();
            if !(lo < y && y < hi) {
                continue;
            }
            let t = p.preimage(y);
            if let Some(prev) = last {
                energy += cumulative * cumulative * (t - prev);
            }
            cumulative += p.weight();
            last = Some(t);
        }
        if let Some(prev) = last {
            energy += cumulative * cumulative * (1.0 - prev);
        }
        energy
    }

    /// Mass of each cell of the n x n grid, row-major with rows indexing x.
    pub fn cell_masses(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        let mut mass = vec![0.0; n * n];
        for p in &self.pieces {
            let r0 = ((p.start * nf).floor() as usize).min(n - 1);
            let mut r = r0;
            while r < n && (r as f64) / nf < p.end {
                let lo = p.start.max(r as f64 / nf);
                let hi = p.end.min((r + 1) as f64 / nf);
                if hi - lo > 0.0 {
                    let (a, b) = (p.eval(lo), p.eval(hi));
                    let (y0, y1) = (a.min(b).max(0.0), a.max(b).min(1.0));
                    let mut c = ((y0 * nf).floor() as usize).min(n - 1);
                    while c < n && (c as f64) / nf < y1 {
                        let ov = y1.min((c + 1) as f64 / nf) - y0.max(c as f64 / nf);
                        if ov > 0.0 {
                            mass[r * n + c] += ov * p.weight();
                        }
                        c += 1;
                    }
                }
                r += 1;
            }
        }
        mass
    }

    /// `{t in [lo_x, hi_x] : h(t) in [lo, hi]}` as an interval union.
    pub fn preimage_within(&self, lo: f64, hi: f64, lo_x: f64, hi_x: f64) -> IntervalUnion {
        let mut parts = Vec::new();
        for p in &self.pieces {
            if p.end <= lo_x || p.start >= hi_x {
                continue;
            }
            let (a, b) = (p.preimage(lo), p.preimage(hi));
            let t0 = a.min(b).max(p.start).max(lo_x);
            let t1 = a.max(b).min(p.end).min(hi_x);
            if t1 - t0 > SLIVER {
                parts.push((t0.clamp(0.0, 1.0), t1.clamp(0.0, 1.0)));
            }
        }
        IntervalUnion::new(parts).expect("preimage pieces lie in [0, 1]")
    }

    pub fn is_unit_slope_bijection(&self) -> bool {
        if self.pieces.iter().any(|p| (p.slope.abs() - 1.0).abs() > EPS) {
            return false;
        }
        let mut images: Vec<(f64, f64)> = self.pieces.iter().map(AffinePiece::image).collect();
        images.sort_by(|a, b| a.0.total_cmp(&b.0));
        images.windows(2).all(|w| w[1].0 >= w[0].1 - EPS)
    }
}

/// `outer ∘ inner` for piece lists tiling `[0, 1]`.
///
/// Each inner piece is split where its image crosses an outer breakpoint.
/// Slivers below [`SLIVER`] are dropped, adjacent breakpoints are snapped
/// together and collinear neighbours merged.
pub(crate) fn compose(inner: &[AffinePiece], outer: &[AffinePiece]) -> Vec<AffinePiece> {
    let mut out = Vec::with_capacity(inner.len() + outer.len());
    for p in inner {
        let (ylo, yhi) = p.image();
        let first = outer.partition_point(|q| q.end <= ylo);
        for q in &outer[first..] {
            if q.start >= yhi {
                break;
            }
            let (y0, y1) = (ylo.max(q.start), yhi.min(q.end));
            if y1 - y0 <= SLIVER {
                continue;
            }
            let (a, b) = (p.preimage(y0), p.preimage(y1));
            let start = a.min(b).max(p.start);
            let end = a.max(b).min(p.end);
            if end - start <= SLIVER {
                continue;
            }
            out.push(AffinePiece {
                start,
                end,
                slope: q.slope * p.slope,
                intercept: q.slope * p.intercept + q.intercept,
            });
        }
    }
    normalize(out)
}

pub(crate) fn normalize(mut pieces: Vec<AffinePiece>) -> Vec<AffinePiece> {
    pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
    if let Some(first) = pieces.first_mut() {
        if first.start.abs() <= EPS {
            first.start = 0.0;
        }
    }
    if let Some(last) = pieces.last_mut() {
        if (last.end - 1.0).abs() <= EPS {
            last.end = 1.0;
        }
    }
    let mut merged: Vec<AffinePiece> = Vec::with_capacity(pieces.len());
    for mut p in pieces {
        if let Some(prev) = merged.last_mut() {
            if (p.start - prev.end).abs() <= EPS {
                p.start = prev.end;
            }
            let collinear = (p.slope - prev.slope).abs() <= EPS && (p.intercept - prev.intercept).abs() <= EPS;
            if collinear && p.start == prev.end {
                prev.end = p.end;
                continue;
            }
        }
        merged.push(p);
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_map_is_measure_preserving() {
        let h = PiecewiseAffineMap::multiply_mod_one(2).unwrap();
        assert!(PiecewiseAffineMap::new(h.pieces().to_vec()).is_ok());
        assert_eq!(h.eval(0.75), 0.5);
    }

    #[test]
    fn rejects_non_measure_preserving() {
        let squeeze = vec![AffinePiece { start: 0.0, end: 1.0, slope: 0.5, intercept: 0.0 }];
        assert!(PiecewiseAffineMap::new(squeeze).is_err());
    }

    #[test]
    fn doubling_norm_matches_piecewise_integration() {
        // ∫∫∂₁² = 1/2 and ∫∫∂₂² = 3/8, worked out by hand.
        let h = PiecewiseAffineMap::multiply_mod_one(2).unwrap();
        assert!((h.norm_sq() - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn tent_norm_equals_doubling_norm() {
        // Same row energy structure: two preimages of weight 1/2 each.
        assert!((PiecewiseAffineMap::tent().norm_sq() - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_of_doubling_map() {
        let h = PiecewiseAffineMap::multiply_mod_one(2).unwrap();
        // m{t <= 1/2 : 2t <= 1/2} = 1/4 ; m{t <= 1 : h(t) <= 1/2} = 1/2
        assert_eq!(h.cdf(0.5, 0.5), 0.25);
        assert_eq!(h.cdf(1.0, 0.5), 0.5);
        assert_eq!(h.cdf(0.75, 1.0), 0.75);
    }

    #[test]
    fn cell_masses_are_doubly_stochastic() {
        let h = PiecewiseAffineMap::multiply_mod_one(3).unwrap();
        let n = 8;
        let m = h.cell_masses(n);
        for i in 0..n {
            let row: f64 = m[i * n..(i + 1) * n].iter().sum();
            let col: f64 = (0..n).map(|r| m[r * n + i]).sum();
            assert!((row - 1.0 / 8.0).abs() < 1e-12);
            assert!((col - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_with_itself() {
        let h = PiecewiseAffineMap::multiply_mod_one(2).unwrap();
        let h4 = h.after(&h);
        assert_eq!(h4.pieces().len(), 4);
        for &t in &[0.1, 0.3, 0.6, 0.9] {
            assert!((h4.eval(t) - (4.0 * t).fract()).abs() < 1e-12);
        }
    }

    #[test]
    fn preimage_of_lower_half() {
        let h = PiecewiseAffineMap::multiply_mod_one(2).unwrap();
        let a = h.preimage_within(0.0, 0.5, 0.0, 1.0);
        assert_eq!(a.intervals(), &[(0.0, 0.25), (0.5, 0.75)]);
    }
}
