//! Constructive shuffle algorithms: sorting shuffles, diagonalization,
//! approximation by straight shuffles and the self-similar example.

use serde::Serialize;

use crate::affine::PiecewiseAffineMap;
use crate::descriptor::CopulaDescriptor;
use crate::error::{invalid, CopulaError, Result};
use crate::exchange::{ExchangePiece, IntervalExchange, Slope};
use crate::grid::GridCopula;
use crate::interval::IntervalUnion;
use crate::norms::{shuffle_dist_sq, sobolev_norm_sq};
use crate::star::star;

pub const MAX_SELFSIMILAR_LEVEL: usize = 16;
pub const MAX_EXACT_DEPTH: usize = 20;

/// `s_A`: points of `A` move in order to `[0, m(A)]`, the rest follow in order.
pub fn sorting_shuffle(a: &IntervalUnion) -> IntervalExchange {
    IntervalExchange::new(IntervalExchange::sorting_within(a, 0.0, 1.0)).expect("sorting pieces tile [0, 1]")
}

/// Exchange moving cell `r` of an `n`-grid onto cell `cells[r]`.
pub fn from_cell_map(cells: &[usize]) -> Result<IntervalExchange> {
    let nf = cells.len() as f64;
    let pieces = cells
        .iter()
        .enumerate()
        .map(|(r, &c)| ExchangePiece {
            start: r as f64 / nf,
            end: (r + 1) as f64 / nf,
            target: c as f64 / nf,
            slope: Slope::Up,
        })
        .collect();
    IntervalExchange::new(pieces)
}

/// Level `level` of the self-similar construction.
///
/// Starting from the identity, level `k` reverses `f` on every stripe
/// `[(2j+1)/2^(k+1), (2j+2)/2^(k+1)]`, i.e. the upper half of each dyadic
/// interval of length `2^-k`.
pub fn selfsimilar(level: usize) -> Result<IntervalExchange> {
    if level > MAX_SELFSIMILAR_LEVEL {
        return invalid(format!("self-similar level {level} exceeds the budget of {MAX_SELFSIMILAR_LEVEL}"));
    }
    let mut f = IntervalExchange::identity();
    for k in 1..=level {
        f = stripe_reversal(k).then(&f);
    }
    Ok(f)
}

fn stripe_reversal(k: usize) -> IntervalExchange {
    let width = 1.0 / (1u64 << (k + 1)) as f64;
    let mut pieces = Vec::with_capacity(1 << (k + 1));
    for j in 0..(1usize << k) {
        let lo = 2.0 * j as f64 * width;
        pieces.push(ExchangePiece { start: lo, end: lo + width, target: lo, slope: Slope::Up });
        pieces.push(ExchangePiece { start: lo + width, end: lo + 2.0 * width, target: lo + width, slope: Slope::Down });
    }
    IntervalExchange::from_pieces_unchecked(pieces)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalStep {
    /// Support map of `S_k`.
    pub shuffle: IntervalExchange,
    pub norm_sq_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalizationTrace {
    pub initial_norm_sq: f64,
    pub steps: Vec<DiagonalStep>,
    /// Support map of `B_n = S_n * ... * S_1` (or of its mirror for right diagonalization).
    pub composed: IntervalExchange,
    #[serde(skip)]
    pub result: CopulaDescriptor,
    /// False when the input was discretized on a grid.
    pub exact: bool,
}

impl DiagonalizationTrace {
    pub fn final_norm_sq(&self) -> f64 {
        self.steps.last().map_or(self.initial_norm_sq, |s| s.norm_sq_after)
    }
}

/// Guide for the sorting steps.
enum Guide {
    Map(PiecewiseAffineMap),
    Grid(GridCopula),
}

fn guide_for(c: &CopulaDescriptor, n: usize) -> Result<Guide> {
    if let Some(m) = c.as_map() {
        return Ok(Guide::Map(m));
    }
    match c {
        CopulaDescriptor::Grid(g) => Ok(Guide::Grid(g.clone())),
        CopulaDescriptor::Convex { left, right, .. } if right.is_independence() => guide_for(left, n),
        CopulaDescriptor::Convex { left, right, .. } if left.is_independence() => guide_for(right, n),
        other => Ok(Guide::Grid(other.to_grid(n)?)),
    }
}

fn check_grid_depth(depth: usize, n: usize) -> Result<()> {
    if depth >= usize::BITS as usize || !n.is_multiple_of(1usize << depth) {
        return Err(CopulaError::ResolutionExhausted { depth, n });
    }
    Ok(())
}

/// Left diagonalization: shuffles `S_k` with `B_k * C` concentrated on the
/// `2^k` diagonal squares.
pub fn diagonalize(c: &CopulaDescriptor, depth: usize, n: usize) -> Result<DiagonalizationTrace> {
    let initial_norm_sq = sobolev_norm_sq(c, n)?.norm_sq;
    let guide = guide_for(c, n)?;
    let (maps, exact_guide) = match &guide {
        Guide::Map(h) => {
            if depth > MAX_EXACT_DEPTH {
                return invalid(format!("depth {depth} exceeds {MAX_EXACT_DEPTH} for exact inputs"));
            }
            (exact_steps(h, depth)?, true)
        }
        Guide::Grid(g) => {
            check_grid_depth(depth, g.n())?;
            (grid_steps(g, depth)?, false)
        }
    };
    let direct_grid = matches!(c, CopulaDescriptor::Grid(_));
    let mut composed = IntervalExchange::identity();
    let mut steps = Vec::with_capacity(depth);
    let mut result = c.clone();
    for s in maps {
        composed = s.then(&composed);
        result = if exact_guide || direct_grid {
            star(&CopulaDescriptor::Shuffle(s.clone()), &result, n)?.copula
        } else {
            star(&CopulaDescriptor::Shuffle(composed.clone()), c, n)?.copula
        };
        let norm_sq_after = sobolev_norm_sq(&result, n)?.norm_sq;
        steps.push(DiagonalStep { shuffle: s, norm_sq_after });
    }
    let exact = exact_guide || direct_grid;
    Ok(DiagonalizationTrace { initial_norm_sq, steps, composed, result, exact })
}

/// Mirror of [`diagonalize`]: shuffles act on the right, `C * B`.
pub fn right_diagonalize(c: &CopulaDescriptor, depth: usize, n: usize) -> Result<DiagonalizationTrace> {
    let t = diagonalize(&c.transpose(), depth, n)?;
    Ok(DiagonalizationTrace {
        initial_norm_sq: t.initial_norm_sq,
        steps: t
            .steps
            .into_iter()
            .map(|s| DiagonalStep { shuffle: s.shuffle.inverse(), norm_sq_after: s.norm_sq_after })
            .collect(),
        composed: t.composed.inverse(),
        result: t.result.transpose(),
        exact: t.exact,
    })
}

/// Support maps `s⁻¹` of the sorting shuffles for an exact map.
fn exact_steps(h: &PiecewiseAffineMap, depth: usize) -> Result<Vec<IntervalExchange>> {
    let mut g = h.clone();
    let mut out = Vec::with_capacity(depth);
    for k in 0..depth {
        let blocks = 1usize << k;
        let w = 1.0 / blocks as f64;
        let mut pieces = Vec::new();
        for j in 0..blocks {
            let beta = j as f64 * w;
            let a = g.preimage_within(beta, beta + w / 2.0, beta, beta + w);
            pieces.extend(IntervalExchange::sorting_within(&a, beta, beta + w));
        }
        let s_inv = IntervalExchange::new(pieces)?.inverse();
        g = g.after(&s_inv.to_affine());
        out.push(s_inv);
    }
    Ok(out)
}

/// Median column of a row: first cell where the cumulative mass reaches half.
fn median_cell(row: &[f64]) -> usize {
    let half = row.iter().sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for (c, &m) in row.iter().enumerate() {
        acc += m;
        if acc >= half {
            return c;
        }
    }
    row.len() - 1
}

/// Cell-level sorting: within each block, the half of the rows with the
/// lowest median cell is moved to the front, both halves keeping their order.
fn grid_steps(g: &GridCopula, depth: usize) -> Result<Vec<IntervalExchange>> {
    let n = g.n();
    let mut current = g.clone();
    let mut out = Vec::with_capacity(depth);
    for k in 0..depth {
        let size = n >> k;
        let rows = current.rows();
        let mut source = Vec::with_capacity(n);
        for start in (0..n).step_by(size) {
            let mut ranked: Vec<(usize, usize)> = (start..start + size).map(|r| (median_cell(&rows[r]), r)).collect();
            ranked.sort();
            let mut lower = vec![false; size];
            for &(_, r) in &ranked[..size / 2] {
                lower[r - start] = true;
            }
            source.extend((start..start + size).filter(|r| lower[r - start]));
            source.extend((start..start + size).filter(|r| !lower[r - start]));
        }
        current = current.permute_rows(&source);
        out.push(from_cell_map(&source)?);
    }
    Ok(out)
}

/// Mass of the checkerboard of `c` outside the `blocks` diagonal squares.
pub fn off_diagonal_mass(c: &CopulaDescriptor, blocks: usize, n: usize) -> Result<f64> {
    if blocks == 0 || !n.is_multiple_of(blocks) {
        return invalid(format!("{blocks} blocks do not divide the grid size {n}"));
    }
    let g = c.to_grid(n)?;
    let size = n / blocks;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i / size != j / size {
                total += g.get(i, j);
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShuffleApproximation {
    pub shuffle: IntervalExchange,
    pub dist_sq: f64,
    /// `2 ‖f − f_bins‖₁`.
    pub bound: f64,
    /// False when the support map was extracted from a grid by argmax transport.
    pub exact: bool,
}

/// Straight shuffle approximating a unit-norm copula with `bins` range bins.
pub fn approx_by_shuffles(c: &CopulaDescriptor, bins: usize, n: usize, eps: f64) -> Result<ShuffleApproximation> {
    if bins == 0 {
        return invalid("bins must be positive");
    }
    let norm_sq = sobolev_norm_sq(c, n)?.norm_sq;
    if norm_sq < 1.0 - eps {
        return Err(CopulaError::NotUnitNorm { norm_sq, eps });
    }
    if let Some(f) = c.as_exchange() {
        let g = straighten(&f, bins)?;
        return Ok(ShuffleApproximation {
            dist_sq: shuffle_dist_sq(&f, &g),
            bound: 2.0 * f.l1_distance(&g),
            shuffle: g,
            exact: true,
        });
    }
    let grid = match c {
        CopulaDescriptor::Grid(g) => g.clone(),
        other => other.to_grid(n)?,
    };
    approx_grid(&grid, bins)
}

/// The bins of `f⁻¹`, laid out in `x` order onto consecutive ranges.
fn straighten(f: &IntervalExchange, bins: usize) -> Result<IntervalExchange> {
    let map = f.to_affine();
    let width = 1.0 / bins as f64;
    let mut pieces = Vec::new();
    for k in 0..bins {
        let lo = k as f64 * width;
        let mut cursor = lo;
        for &(a, b) in map.preimage_within(lo, lo + width, 0.0, 1.0).intervals() {
            pieces.push(ExchangePiece { start: a, end: b, target: cursor, slope: Slope::Up });
            cursor += b - a;
        }
    }
    IntervalExchange::new(pieces)
}

fn approx_grid(grid: &GridCopula, bins: usize) -> Result<ShuffleApproximation> {
    let n = grid.n();
    if !n.is_multiple_of(bins) {
        return invalid(format!("{bins} bins do not divide the grid size {n}"));
    }
    let rows = grid.rows();
    let argmax = |row: &Vec<f64>| {
        row.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (c, &m)| if m > best.1 { (c, m) } else { best }).0
    };
    let mut order: Vec<(usize, usize)> = rows.iter().enumerate().map(|(r, row)| (argmax(row), r)).collect();
    order.sort();
    // Extracted transport: row order[p] is sent to cell p.
    let mut extracted = vec![0; n];
    for (p, &(_, r)) in order.iter().enumerate() {
        extracted[r] = p;
    }
    let per_bin = n / bins;
    let mut bin_of = vec![0; n];
    for (p, &(_, r)) in order.iter().enumerate() {
        bin_of[r] = p / per_bin;
    }
    let mut filled = vec![0; bins];
    let mut straight = vec![0; n];
    for r in 0..n {
        let b = bin_of[r];
        straight[r] = b * per_bin + filled[b];
        filled[b] += 1;
    }
    let f = from_cell_map(&extracted)?;
    let g = from_cell_map(&straight)?;
    let approx = CopulaDescriptor::Shuffle(g.clone()).to_grid(n)?;
    Ok(ShuffleApproximation {
        dist_sq: grid.dist_sq(&approx)?,
        bound: 2.0 * f.l1_distance(&g),
        shuffle: g,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::graph_l1_distance;

    #[test]
    fn sorting_examples() {
        let id = sorting_shuffle(&IntervalUnion::new(vec![(0.0, 0.5)]).unwrap());
        assert!(id.is_identity());
        let swap = sorting_shuffle(&IntervalUnion::new(vec![(0.5, 1.0)]).unwrap());
        assert_eq!(swap, IntervalExchange::half_swap());
        let s = sorting_shuffle(&IntervalUnion::new(vec![(0.25, 0.5), (0.75, 1.0)]).unwrap());
        let offsets: Vec<f64> = [0.1, 0.3, 0.6, 0.9].iter().map(|&x| s.eval(x) - x).collect();
        for (got, want) in offsets.iter().zip([0.5, -0.25, 0.25, -0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn selfsimilar_levels() {
        assert!(selfsimilar(0).unwrap().is_identity());
        let f1 = selfsimilar(1).unwrap();
        assert_eq!(f1.pieces().len(), 4);
        assert_eq!(f1.eval(0.3), 0.45);
        assert_eq!(f1.eval(0.6), 0.6);
        assert_eq!(selfsimilar(6).unwrap().pieces().len(), 128);
        assert!(selfsimilar(MAX_SELFSIMILAR_LEVEL + 1).is_err());
    }

    #[test]
    fn selfsimilar_increments() {
        let mut prev = selfsimilar(0).unwrap();
        for n in 1..=8 {
            let cur = selfsimilar(n).unwrap();
            assert_eq!(graph_l1_distance(&cur, &prev), 2f64.powi(-(n as i32 + 3)));
            assert_eq!(shuffle_dist_sq(&cur, &prev), 2f64.powi(-(n as i32 + 2)));
            prev = cur;
        }
    }

    #[test]
    fn diagonalize_half_swap() {
        let c = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        let t = diagonalize(&c, 1, 64).unwrap();
        assert_eq!(t.steps[0].shuffle, IntervalExchange::half_swap());
        assert_eq!(t.result, CopulaDescriptor::Shuffle(IntervalExchange::identity()));
        assert_eq!(t.final_norm_sq(), 1.0);
    }

    #[test]
    fn diagonalize_m_is_trivial() {
        let t = diagonalize(&CopulaDescriptor::m(), 4, 64).unwrap();
        assert!(t.steps.iter().all(|s| s.shuffle.is_identity() && s.norm_sq_after == 1.0));
    }

    #[test]
    fn diagonalize_doubling_exactly() {
        let t = diagonalize(&CopulaDescriptor::doubling(), 6, 512).unwrap();
        assert_eq!(t.initial_norm_sq, 0.875);
        for (k, s) in t.steps.iter().enumerate() {
            let want = 1.0 - 2f64.powi(-(k as i32 + 1)) / 8.0;
            assert!((s.norm_sq_after - want).abs() < 1e-12, "step {k}: {}", s.norm_sq_after);
        }
        assert!(off_diagonal_mass(&t.result, 64, 512).unwrap() < 1e-12);
    }

    #[test]
    fn diagonalize_doubling_on_grid() {
        let g = CopulaDescriptor::Grid(CopulaDescriptor::doubling().to_grid(512).unwrap());
        let t = diagonalize(&g, 6, 512).unwrap();
        assert!(!t.steps.is_empty());
        assert!(t.final_norm_sq() >= 0.95);
        assert!(t.steps.windows(2).all(|w| w[1].norm_sq_after >= w[0].norm_sq_after - 1e-9));
        assert!(diagonalize(&g, 10, 512).is_err());
    }

    #[test]
    fn right_diagonalize_quarter_cycle() {
        let q = CopulaDescriptor::Shuffle(IntervalExchange::cyclic_shift(0.75).unwrap());
        let t = right_diagonalize(&q, 2, 64).unwrap();
        assert_eq!(t.result, CopulaDescriptor::Shuffle(IntervalExchange::identity()));
        let direct = star(&q, &CopulaDescriptor::Shuffle(t.composed.clone()), 64).unwrap();
        assert_eq!(direct.copula, t.result);
    }

    #[test]
    fn right_mirror_of_transpose() {
        let d = CopulaDescriptor::doubling();
        let left = diagonalize(&d, 6, 512).unwrap();
        let right = right_diagonalize(&d.transpose(), 6, 512).unwrap();
        for (a, b) in left.steps.iter().zip(&right.steps) {
            assert_eq!(a.norm_sq_after, b.norm_sq_after);
        }
    }

    #[test]
    fn approximation_of_aligned_shuffle_is_itself() {
        let q = IntervalExchange::cyclic_shift(0.75).unwrap();
        let r = approx_by_shuffles(&CopulaDescriptor::Shuffle(q.clone()), 4, 64, 1e-9).unwrap();
        assert_eq!(r.shuffle, q);
        assert_eq!(r.dist_sq, 0.0);
    }

    #[test]
    fn approximation_rejects_non_unit_norm() {
        let err = approx_by_shuffles(&CopulaDescriptor::pi(), 4, 64, 1e-3).unwrap_err();
        assert!(matches!(err, CopulaError::NotUnitNorm { .. }));
    }

    #[test]
    fn approximation_bins_decrease_distance() {
        let c = CopulaDescriptor::Shuffle(selfsimilar(6).unwrap());
        let dists: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&b| {
                let r = approx_by_shuffles(&c, b, 64, 1e-9).unwrap();
                assert!(r.dist_sq <= r.bound + 1e-12);
                r.dist_sq
            })
            .collect();
        assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
    }

    #[test]
    fn grid_approximation_of_permutation() {
        let q = CopulaDescriptor::Shuffle(IntervalExchange::cyclic_shift(0.75).unwrap());
        let g = CopulaDescriptor::Grid(q.to_grid(16).unwrap());
        let r = approx_by_shuffles(&g, 4, 16, 0.1).unwrap();
        assert!(!r.exact);
        assert_eq!(r.dist_sq, 0.0);
    }
}
