//! Interval exchanges: piecewise isometric bijections of `[0, 1]`.
//!
//! The copula supported on the graph of an exchange `f` is a shuffle of Min,
//! `C(x, y) = m{t <= x : f(t) <= y}`. Breakpoints are plain `f64`; dyadic
//! rationals with fewer than 53 significant bits are represented exactly, so
//! dyadic constructions compose and integrate without rounding.

use serde::{Deserialize, Serialize};

use crate::affine::{self, AffinePiece, PiecewiseAffineMap, EPS};
use crate::error::{CopulaError, Result};
use crate::interval::{IntervalUnion, SLIVER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Slope {
    Up,
    Down,
}

impl TryFrom<i8> for Slope {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Slope::Up),
            -1 => Ok(Slope::Down),
            other => Err(format!("slope must be 1 or -1, found {other}")),
        }
    }
}

impl From<Slope> for i8 {
    fn from(s: Slope) -> i8 {
        match s {
            Slope::Up => 1,
            Slope::Down => -1,
        }
    }
}

/// `[start, end)` mapped isometrically onto `[target, target + end - start)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "WirePiece", into = "WirePiece")]
pub struct ExchangePiece {
    pub start: f64,
    pub end: f64,
    pub target: f64,
    pub slope: Slope,
}

impl ExchangePiece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.slope {
            Slope::Up => self.target + (x - self.start),
            Slope::Down => self.target + (self.end - x),
        }
    }

    fn to_affine(self) -> AffinePiece {
        match self.slope {
            Slope::Up => {
                AffinePiece { start: self.start, end: self.end, slope: 1.0, intercept: self.target - self.start }
            }
            Slope::Down => {
                AffinePiece { start: self.start, end: self.end, slope: -1.0, intercept: self.target + self.end }
            }
        }
    }

    fn from_affine(p: &AffinePiece) -> Self {
        let (lo, _) = p.image();
        Self { start: p.start, end: p.end, target: lo, slope: if p.slope > 0.0 { Slope::Up } else { Slope::Down } }
    }
}

/// A segment of the support graph, oriented left to right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct WirePiece {
    src: [f64; 2],
    target: f64,
    slope: Slope,
}

impl From<WirePiece> for ExchangePiece {
    fn from(w: WirePiece) -> Self {
        Self { start: w.src[0], end: w.src[1], target: w.target, slope: w.slope }
    }
}

impl From<ExchangePiece> for WirePiece {
    fn from(p: ExchangePiece) -> Self {
        Self { src: [p.start, p.end], target: p.target, slope: p.slope }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireExchange")]
pub struct IntervalExchange {
    pieces: Vec<ExchangePiece>,
}

#[derive(Deserialize)]
struct WireExchange {
    pieces: Vec<ExchangePiece>,
}

impl TryFrom<WireExchange> for IntervalExchange {
    type Error = CopulaError;
    fn try_from(w: WireExchange) -> Result<Self> {
        IntervalExchange::new(w.pieces)
    }
}

impl IntervalExchange {
    /// Validates the source partition and the bijectivity of the images.
    pub fn new(mut pieces: Vec<ExchangePiece>) -> Result<Self> {
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        let candidate = Self { pieces };
        candidate.check().map_err(CopulaError::Invalid)?;
        Ok(candidate.canonical())
    }

    pub(crate) fn from_pieces_unchecked(pieces: Vec<ExchangePiece>) -> Self {
        Self { pieces }
    }

    pub fn identity() -> Self {
        Self::from_pieces_unchecked(vec![ExchangePiece { start: 0.0, end: 1.0, target: 0.0, slope: Slope::Up }])
    }

    /// `t -> 1 - t`; the shuffle it supports is W.
    pub fn reversal() -> Self {
        Self::from_pieces_unchecked(vec![ExchangePiece { start: 0.0, end: 1.0, target: 0.0, slope: Slope::Down }])
    }

    /// `x -> x + 1 - alpha (mod 1)`: the straight shuffle whose support runs
    /// along the diagonals of `[0, α]×[1-α, 1]` and `[α, 1]×[0, 1-α]`.
    pub fn cyclic_shift(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(CopulaError::Invalid(format!("shift parameter {alpha} not in [0, 1)")));
        }
        if alpha == 0.0 {
            return Ok(Self::identity());
        }
        Ok(Self::from_pieces_unchecked(vec![
            ExchangePiece { start: 0.0, end: alpha, target: 1.0 - alpha, slope: Slope::Up },
            ExchangePiece { start: alpha, end: 1.0, target: 0.0, slope: Slope::Up },
        ]))
    }

    /// Swaps `[0, 1/2)` and `[1/2, 1)`.
    pub fn half_swap() -> Self {
        Self::cyclic_shift(0.5).expect("1/2 is a valid shift")
    }

    /// Swaps two adjacent equal blocks `[lo, mid)` and `[mid, hi)`.
    pub fn block_swap(lo: f64, hi: f64) -> Result<Self> {
        let mid = 0.5 * (lo + hi);
        let mut pieces = Vec::with_capacity(4);
        Self::push_identity(&mut pieces, 0.0, lo);
        pieces.push(ExchangePiece { start: lo, end: mid, target: mid, slope: Slope::Up });
        pieces.push(ExchangePiece { start: mid, end: hi, target: lo, slope: Slope::Up });
        Self::push_identity(&mut pieces, hi, 1.0);
        Self::new(pieces)
    }

    /// Reverses `[lo, hi)` in place.
    pub fn block_reversal(lo: f64, hi: f64) -> Result<Self> {
        let mut pieces = Vec::with_capacity(3);
        Self::push_identity(&mut pieces, 0.0, lo);
        pieces.push(ExchangePiece { start: lo, end: hi, target: lo, slope: Slope::Down });
        Self::push_identity(&mut pieces, hi, 1.0);
        Self::new(pieces)
    }

    fn push_identity(pieces: &mut Vec<ExchangePiece>, lo: f64, hi: f64) {
        if hi - lo > SLIVER {
            pieces.push(ExchangePiece { start: lo, end: hi, target: lo, slope: Slope::Up });
        }
    }

    pub fn pieces(&self) -> &[ExchangePiece] {
        &self.pieces
    }

    fn check(&self) -> std::result::Result<(), String> {
        self.to_affine().check_structure()?;
        let mut images: Vec<(f64, f64)> = self.pieces.iter().map(|p| (p.target, p.target + p.len())).collect();
        images.sort_by(|a, b| a.0.total_cmp(&b.0));
        if images[0].0.abs() > EPS {
            return Err(format!("images start at {} instead of 0", images[0].0));
        }
        for w in images.windows(2) {
            if w[1].0 < w[0].1 - EPS {
                return Err(format!(
                    "images [{}, {}) and [{}, {}) overlap: not injective",
                    w[0].0, w[0].1, w[1].0, w[1].1
                ));
            }
            if w[1].0 > w[0].1 + EPS {
                return Err(format!("no piece maps onto [{}, {}): not surjective", w[0].1, w[1].0));
            }
        }
        let top = images[images.len() - 1].1;
        if (top - 1.0).abs() > EPS {
            return Err(format!("images end at {top} instead of 1"));
        }
        Ok(())
    }

    /// Merges pieces that continue one another.
    fn canonical(self) -> Self {
        let affine = affine::normalize(self.pieces.iter().map(|p| p.to_affine()).collect());
        Self::from_affine_pieces(&affine)
    }

    fn from_affine_pieces(pieces: &[AffinePiece]) -> Self {
        Self::from_pieces_unchecked(pieces.iter().map(ExchangePiece::from_affine).collect())
    }

    pub fn to_affine(&self) -> PiecewiseAffineMap {
        PiecewiseAffineMap::from_pieces_unchecked(self.pieces.iter().map(|p| p.to_affine()).collect())
    }

    /// Recovers an exchange from a map with unit slopes and disjoint images.
    pub fn from_affine(map: &PiecewiseAffineMap) -> Option<Self> {
        map.is_unit_slope_bijection().then(|| Self::from_affine_pieces(map.pieces()))
    }

    fn locate(&self, x: f64) -> usize {
        self.pieces.partition_point(|p| p.end <= x).min(self.pieces.len() - 1)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.locate(x)].eval(x)
    }

    /// `f(x-)`; at `x = 0` this is `f(0)`.
    pub fn left_limit(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.end < x).min(self.pieces.len() - 1);
        self.pieces[k].eval(x)
    }

    pub fn inverse(&self) -> Self {
        let mut pieces: Vec<ExchangePiece> = self
            .pieces
            .iter()
            .map(|p| ExchangePiece { start: p.target, end: p.target + p.len(), target: p.start, slope: p.slope })
            .collect();
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        Self::from_pieces_unchecked(pieces).canonical()
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &IntervalExchange) -> Self {
        let composed = affine::compose(self.to_affine().pieces(), outer.to_affine().pieces());
        Self::from_affine_pieces(&composed)
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].slope == Slope::Up && self.pieces[0].target == 0.0
    }

    /// Every breakpoint and target is a multiple of `1/n`.
    pub fn is_aligned(&self, n: usize) -> bool {
        let nf = n as f64;
        let on_grid = |v: f64| ((v * nf).round() - v * nf).abs() <= 1e-9;
        self.pieces.iter().all(|p| on_grid(p.start) && on_grid(p.end) && on_grid(p.target))
    }

    /// For an aligned exchange, the cell containing the image of each cell.
    pub fn cell_map(&self, n: usize) -> Option<Vec<usize>> {
        if !self.is_aligned(n) {
            return None;
        }
        let nf = n as f64;
        Some(
            (0..n)
                .map(|r| {
                    let mid = (r as f64 + 0.5) / nf;
                    ((self.eval(mid) * nf).floor() as usize).min(n - 1)
                })
                .collect(),
        )
    }

    /// Graph of the support as segments, one per piece.
    pub fn support_polyline(&self) -> Vec<Segment> {
        self.pieces
            .iter()
            .map(|p| {
                let top = p.target + p.len();
                let (y0, y1) = match p.slope {
                    Slope::Up => (p.target, top),
                    Slope::Down => (top, p.target),
                };
                Segment { x0: p.start, y0, x1: p.end, y1 }
            })
            .collect()
    }

    /// Exact `∫₀¹ |f - g|`.
    pub fn l1_distance(&self, other: &IntervalExchange) -> f64 {
        let mut cuts: Vec<f64> = self.pieces.iter().chain(other.pieces.iter()).flat_map(|p| [p.start, p.end]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let (pa, pb) = (&self.pieces[self.locate(a)], &other.pieces[other.locate(a)]);
            let da = pa.eval(a) - pb.eval(a);
            let db = pa.eval(b) - pb.eval(b);
            total += integrate_abs_linear(da, db, b - a);
        }
        total
    }

    /// Builds the sorting map `s_A` restricted to the block `[lo, hi]`:
    /// points of `A` move, in order, to the front of the block and the rest
    /// follow, also in order.
    pub fn sorting_within(set: &IntervalUnion, lo: f64, hi: f64) -> Vec<ExchangePiece> {
        let inside = set.clip(lo, hi);
        let mut front = lo;
        let mut back = lo + inside.measure();
        let mut cursor = lo;
        let mut pieces = Vec::new();
        for &(a, b) in inside.intervals() {
            if a - cursor > SLIVER {
                pieces.push(ExchangePiece { start: cursor, end: a, target: back, slope: Slope::Up });
                back += a - cursor;
            }
            pieces.push(ExchangePiece { start: a, end: b, target: front, slope: Slope::Up });
            front += b - a;
            cursor = b;
        }
        if hi - cursor > SLIVER {
            pieces.push(ExchangePiece { start: cursor, end: hi, target: back, slope: Slope::Up });
        }
        pieces
    }
}

/// `∫₀^w |d(s)| ds` for `d` linear from `da` to `db`.
fn integrate_abs_linear(da: f64, db: f64, width: f64) -> f64 {
    if da * db >= 0.0 {
        0.5 * (da.abs() + db.abs()) * width
    } else {
        0.5 * width * (da * da + db * db) / (da.abs() + db.abs())
    }
}
