//! The Markov *-product on copula descriptors.

use serde::Serialize;

use crate::descriptor::{CopulaDescriptor, Parametric};
use crate::error::Result;
use crate::exchange::IntervalExchange;
use crate::grid::GridCopula;

pub const DEFAULT_GRID: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Exactness {
    Exact,
    Grid { n: usize },
}

impl Exactness {
    fn and(self, other: Exactness) -> Exactness {
        match (self, other) {
            (Exactness::Exact, e) | (e, Exactness::Exact) => e,
            (Exactness::Grid { n }, Exactness::Grid { n: m }) => Exactness::Grid { n: n.max(m) },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarResult {
    pub copula: CopulaDescriptor,
    pub exactness: Exactness,
    pub provenance: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Wraps a complete dependence map, demoting it to a shuffle when possible.
fn from_map(map: crate::affine::PiecewiseAffineMap) -> CopulaDescriptor {
    match IntervalExchange::from_affine(&map) {
        Some(s) => CopulaDescriptor::Shuffle(s),
        None => CopulaDescriptor::Map(map),
    }
}

fn transposed_map(d: &CopulaDescriptor) -> Option<crate::affine::PiecewiseAffineMap> {
    match d {
        CopulaDescriptor::Transpose(inner) => inner.as_map(),
        _ => None,
    }
}

/// `a * b`. Resolution `n` is used only when a grid fallback is needed.
pub fn star(a: &CopulaDescriptor, b: &CopulaDescriptor, n: usize) -> Result<StarResult> {
    let provenance = vec![a.label(), b.label()];
    let (copula, exactness) = star_inner(a, b, n)?;
    Ok(StarResult { copula, exactness, provenance })
}

fn star_inner(a: &CopulaDescriptor, b: &CopulaDescriptor, n: usize) -> Result<(CopulaDescriptor, Exactness)> {
    use CopulaDescriptor as D;
    let exact = |d: D| Ok((d, Exactness::Exact));

    if a.is_independence() || b.is_independence() {
        return exact(D::pi());
    }
    if matches!(a, D::Parametric(Parametric::M)) {
        return exact(b.clone());
    }
    if matches!(b, D::Parametric(Parametric::M)) {
        return exact(a.clone());
    }
    if let (D::Parametric(Parametric::Fgm(s)), D::Parametric(Parametric::Fgm(t))) = (a, b) {
        return exact(D::Parametric(Parametric::Fgm(s * t / 3.0)));
    }
    if let D::Convex { alpha, left, right } = a {
        let (l, el) = star_inner(left, b, n)?;
        let (r, er) = star_inner(right, b, n)?;
        return Ok((D::convex(*alpha, l, r)?, el.and(er)));
    }
    if let D::Convex { alpha, left, right } = b {
        let (l, el) = star_inner(a, left, n)?;
        let (r, er) = star_inner(a, right, n)?;
        return Ok((D::convex(*alpha, l, r)?, el.and(er)));
    }
    if let (Some(f), Some(g)) = (a.as_exchange(), b.as_exchange()) {
        return exact(D::Shuffle(f.then(&g)));
    }
    if let (Some(h), Some(k)) = (a.as_map(), b.as_map()) {
        return exact(from_map(k.after(&h)));
    }
    if let (Some(h), Some(k)) = (transposed_map(a), b.as_map()) {
        // Cₕᵀ * Cₕ(x, y) = m{h(t) <= min(x, y)} = min(x, y).
        if h == k {
            return exact(D::m());
        }
    }
    if let (Some(f), Some(h)) = (a.as_exchange(), transposed_map(b)) {
        let m = f.inverse().to_affine().after(&h);
        return exact(from_map(m).transpose());
    }
    if let (Some(h), Some(g)) = (transposed_map(a), b.as_exchange()) {
        let m = h.after(&g.inverse().to_affine());
        return exact(from_map(m).transpose());
    }
    if let (D::Transpose(x), D::Transpose(y)) = (a, b) {
        let (inner, e) = star_inner(y, x, n)?;
        return Ok((inner.transpose(), e));
    }
    match (a, b) {
        (D::Grid(g), D::Grid(h)) => exact(D::Grid(g.star(h)?)),
        (D::Grid(g), other) => grid_with(g, other, Side::Left),
        (other, D::Grid(g)) => grid_with(g, other, Side::Right),
        _ => {
            // An aligned shuffle factor only permutes the other factor's cells.
            if a.as_exchange().is_some_and(|t| t.is_aligned(n)) {
                let (d, _) = grid_with(&b.to_grid(n)?, a, Side::Right)?;
                return Ok((d, Exactness::Grid { n }));
            }
            if b.as_exchange().is_some_and(|t| t.is_aligned(n)) {
                let (d, _) = grid_with(&a.to_grid(n)?, b, Side::Left)?;
                return Ok((d, Exactness::Grid { n }));
            }
            let g = a.to_grid(n)?.star(&b.to_grid(n)?)?;
            Ok((D::Grid(g), Exactness::Grid { n }))
        }
    }
}

/// Star of a checkerboard with an arbitrary operand, at the checkerboard's resolution.
/// `grid_side` says on which side of the product the checkerboard sits.
fn grid_with(g: &GridCopula, other: &CopulaDescriptor, grid_side: Side) -> Result<(CopulaDescriptor, Exactness)> {
    let n = g.n();
    if let Some(t) = other.as_exchange() {
        let permuted = match grid_side {
            // S_t * G: row r carries row ρ(r) of G.
            Side::Right => t.cell_map(n).map(|rho| g.permute_rows(&rho)),
            // G * S_t: column c carries column σ(c) of G, σ = cells of t⁻¹.
            Side::Left => t.inverse().cell_map(n).map(|sigma| g.permute_cols(&sigma)),
        };
        if let Some(p) = permuted {
            return Ok((CopulaDescriptor::Grid(p), Exactness::Exact));
        }
    }
    let o = other.to_grid(n)?;
    let product = match grid_side {
        Side::Left => g.star(&o)?,
        Side::Right => o.star(g)?,
    };
    Ok((CopulaDescriptor::Grid(product), Exactness::Grid { n }))
}

pub fn transpose(c: &CopulaDescriptor) -> CopulaDescriptor {
    c.transpose()
}

/// Shuffles `d` by `t`: `S_t * d` on the left, `d * S_t` on the right.
///
/// Left shuffling pushes the mass of `d` forward along `t` in the first
/// coordinate, and associates: `S_t * (A * B) = (S_t * A) * B`.
pub fn shuffle_of(d: &CopulaDescriptor, t: &IntervalExchange, side: Side, n: usize) -> Result<StarResult> {
    let s = CopulaDescriptor::Shuffle(t.clone());
    match side {
        Side::Left => star(&s, d, n),
        Side::Right => star(d, &s, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_cycle() -> IntervalExchange {
        IntervalExchange::cyclic_shift(0.75).unwrap()
    }

    #[test]
    fn shuffle_orientation_matches_grid_oracle() {
        let h = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        let q = CopulaDescriptor::Shuffle(quarter_cycle());
        for (a, b) in [(&h, &q), (&q, &h)] {
            let exact = star(a, b, 4).unwrap();
            assert_eq!(exact.exactness, Exactness::Exact);
            let oracle = a.to_grid(4).unwrap().star(&b.to_grid(4).unwrap()).unwrap();
            let got = exact.copula.to_grid(4).unwrap();
            assert!(got.max_abs_diff(&oracle) < 1e-15);
        }
    }

    #[test]
    fn identity_and_null() {
        let fgm = CopulaDescriptor::fgm(0.7).unwrap();
        assert_eq!(star(&CopulaDescriptor::pi(), &fgm, 64).unwrap().copula, CopulaDescriptor::pi());
        assert_eq!(star(&CopulaDescriptor::m(), &fgm, 64).unwrap().copula, fgm);
        let oracle = CopulaDescriptor::pi().to_grid(64).unwrap();
        let via_grid = oracle.star(&fgm.to_grid(64).unwrap()).unwrap();
        assert!(via_grid.max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn shuffled_fgm_value() {
        let s = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        let r = star(&s, &CopulaDescriptor::fgm(1.0).unwrap(), 256).unwrap();
        assert!((r.copula.eval_cdf(0.25, 0.5).unwrap() - 0.109375).abs() < 1e-12);
    }

    #[test]
    fn fgm_closed_form_matches_grid() {
        let a = CopulaDescriptor::fgm(0.9).unwrap();
        let b = CopulaDescriptor::fgm(-0.6).unwrap();
        let exact = star(&a, &b, 64).unwrap().copula.to_grid(64).unwrap();
        // Checkerboards only approximate FGM, so agreement is to discretization error.
        let grid = a.to_grid(64).unwrap().star(&b.to_grid(64).unwrap()).unwrap();
        let gap = exact.max_abs_diff(&grid);
        assert!(gap < 1e-5, "{gap}");
    }

    #[test]
    fn map_rules_match_grid_oracle() {
        let d = CopulaDescriptor::doubling();
        let h = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        let q = CopulaDescriptor::Shuffle(quarter_cycle());
        let dt = d.transpose();
        let cases = [(&h, &d), (&d, &q), (&q, &dt), (&dt, &h), (&d, &d), (&dt, &dt)];
        for (a, b) in cases {
            let r = star(a, b, 16).unwrap();
            assert_eq!(r.exactness, Exactness::Exact, "{} * {}", a.label(), b.label());
            let oracle = a.to_grid(16).unwrap().star(&b.to_grid(16).unwrap()).unwrap();
            assert!(r.copula.to_grid(16).unwrap().max_abs_diff(&oracle) < 1e-14);
        }
    }

    #[test]
    fn transposed_map_times_map_is_m() {
        let d = CopulaDescriptor::doubling();
        let r = star(&d.transpose(), &d, 16).unwrap();
        assert_eq!(r.copula, CopulaDescriptor::m());
        // Neither factor is a checkerboard, so the grid product only converges:
        // its CDF is within 1/(2n) of min(x, y) at the nodes.
        for n in [16, 64] {
            let g = d.transpose().to_grid(n).unwrap().star(&d.to_grid(n).unwrap()).unwrap();
            for i in 0..=n {
                for j in 0..=n {
                    let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                    assert!((g.cdf(x, y) - x.min(y)).abs() <= 0.5 / n as f64 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_shuffle_rearrangements() {
        let g = CopulaDescriptor::fgm(0.8).unwrap().to_grid(8).unwrap();
        let q = CopulaDescriptor::Shuffle(quarter_cycle());
        let gd = CopulaDescriptor::Grid(g.clone());
        for (a, b) in [(&q, &gd), (&gd, &q)] {
            let r = star(a, b, 8).unwrap();
            assert_eq!(r.exactness, Exactness::Exact);
            let oracle = a.to_grid(8).unwrap().star(&b.to_grid(8).unwrap()).unwrap();
            assert!(r.copula.to_grid(8).unwrap().max_abs_diff(&oracle) < 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_errors() {
        let a = CopulaDescriptor::Grid(GridCopula::independence(4));
        let b = CopulaDescriptor::Grid(GridCopula::independence(8));
        let err = star(&a, &b, 4).unwrap_err();
        assert!(err.to_string().contains("re-grid"));
    }

    #[test]
    fn convex_distributes() {
        let c = CopulaDescriptor::convex(0.3, CopulaDescriptor::m(), CopulaDescriptor::w()).unwrap();
        let r = star(&c, &c, 8).unwrap();
        assert_eq!(r.exactness, Exactness::Exact);
        let oracle = c.to_grid(8).unwrap().star(&c.to_grid(8).unwrap()).unwrap();
        assert!(r.copula.to_grid(8).unwrap().max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn shuffle_of_examples() {
        let t = quarter_cycle();
        assert_eq!(shuffle_of(&CopulaDescriptor::pi(), &t, Side::Right, 16).unwrap().copula, CopulaDescriptor::pi());
        assert_eq!(
            shuffle_of(&CopulaDescriptor::m(), &t, Side::Left, 16).unwrap().copula,
            CopulaDescriptor::Shuffle(t)
        );
    }
}
