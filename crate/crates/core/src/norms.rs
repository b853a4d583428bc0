//! Sobolev norms, inner products and distances of copulas.

use serde::Serialize;

use crate::descriptor::{CopulaDescriptor, Parametric};
use crate::error::Result;
use crate::exchange::IntervalExchange;
use crate::grid::{gradient_energy, GridCopula};

pub const NORM_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    ExactShuffle,
    ClosedForm,
    ExactPiecewise,
    Grid { n: usize },
}

impl Scheme {
    fn and(self, other: Scheme) -> Scheme {
        match (self, other) {
            (Scheme::Grid { n }, Scheme::Grid { n: m }) => Scheme::Grid { n: n.max(m) },
            (g @ Scheme::Grid { .. }, _) | (_, g @ Scheme::Grid { .. }) => g,
            (a, b) if a == b => a,
            _ => Scheme::ExactPiecewise,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Scheme::Grid { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub norm_sq: f64,
    pub scheme: Scheme,
    pub above_lower_bound: bool,
    pub below_upper_bound: bool,
}

impl NormReport {
    fn new(norm_sq: f64, scheme: Scheme) -> Self {
        Self {
            norm_sq,
            scheme,
            above_lower_bound: norm_sq >= 2.0 / 3.0 - NORM_SLACK,
            below_upper_bound: norm_sq <= 1.0 + NORM_SLACK,
        }
    }

    pub fn within_bounds(&self) -> bool {
        self.above_lower_bound && self.below_upper_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistReport {
    pub dist_sq: f64,
    pub scheme: Scheme,
}

/// Resolution to use for a pair: a checkerboard operand dictates it.
fn resolution(a: &CopulaDescriptor, b: &CopulaDescriptor, n: usize) -> usize {
    match (a, b) {
        (CopulaDescriptor::Grid(g), _) | (_, CopulaDescriptor::Grid(g)) => g.n(),
        _ => n,
    }
}

/// `‖C‖² = ∫∫ (∂₁C)² + (∂₂C)²`.
pub fn sobolev_norm_sq(d: &CopulaDescriptor, n: usize) -> Result<NormReport> {
    let (v, s) = norm_sq_inner(d, n)?;
    Ok(NormReport::new(v, s))
}

fn norm_sq_inner(d: &CopulaDescriptor, n: usize) -> Result<(f64, Scheme)> {
    use CopulaDescriptor as D;
    Ok(match d {
        D::Parametric(Parametric::Pi) => (2.0 / 3.0, Scheme::ClosedForm),
        D::Shuffle(_) | D::Parametric(Parametric::M) | D::Parametric(Parametric::W) => (1.0, Scheme::ExactShuffle),
        D::Map(m) => match IntervalExchange::from_affine(m) {
            Some(_) => (1.0, Scheme::ExactShuffle),
            None => (m.norm_sq(), Scheme::ExactPiecewise),
        },
        D::Grid(g) => (g.norm_sq(), Scheme::Grid { n: g.n() }),
        D::Transpose(inner) => norm_sq_inner(inner, n)?,
        D::Convex { alpha, left, right } => {
            let (l, sl) = norm_sq_inner(left, n)?;
            let (r, sr) = norm_sq_inner(right, n)?;
            let (lr, slr) = inner_product(left, right, n)?;
            let a = *alpha;
            (a * a * l + 2.0 * a * (1.0 - a) * lr + (1.0 - a) * (1.0 - a) * r, sl.and(sr).and(slr))
        }
        D::OrdinalSum { partition, components } => {
            let mut total = 1.0;
            let mut scheme = Scheme::ClosedForm;
            for (k, c) in components.iter().enumerate() {
                let w = partition[k + 1] - partition[k];
                let (v, s) = norm_sq_inner(c, n)?;
                total += w * w * (v - 1.0);
                scheme = scheme.and(s);
            }
            (total, scheme)
        }
        D::Parametric(Parametric::Fgm(_)) => (d.to_grid(n)?.norm_sq(), Scheme::Grid { n }),
    })
}

/// `⟨A, B⟩ = ∫∫ ∇A · ∇B`.
pub fn inner_product(a: &CopulaDescriptor, b: &CopulaDescriptor, n: usize) -> Result<(f64, Scheme)> {
    use CopulaDescriptor as D;
    if a.is_independence() || b.is_independence() {
        // ∫ ∂₁C(x, y) dx = y for every copula.
        return Ok((2.0 / 3.0, Scheme::ClosedForm));
    }
    if let (Some(f), Some(g)) = (a.as_exchange(), b.as_exchange()) {
        return Ok((1.0 - shuffle_dist_sq(&f, &g) / 2.0, Scheme::ExactShuffle));
    }
    if a == b {
        return norm_sq_inner(a, n);
    }
    match (a, b) {
        (D::Convex { alpha, left, right }, other) | (other, D::Convex { alpha, left, right }) => {
            let (l, sl) = inner_product(left, other, n)?;
            let (r, sr) = inner_product(right, other, n)?;
            Ok((alpha * l + (1.0 - alpha) * r, sl.and(sr)))
        }
        (D::Transpose(x), D::Transpose(y)) => inner_product(x, y, n),
        _ => {
            let m = resolution(a, b, n);
            Ok((grid_inner(&a.to_grid(m)?, &b.to_grid(m)?), Scheme::Grid { n: m }))
        }
    }
}

fn grid_inner(a: &GridCopula, b: &GridCopula) -> f64 {
    let sum: Vec<f64> = a.mass().iter().zip(b.mass()).map(|(x, y)| x + y).collect();
    let diff: Vec<f64> = a.mass().iter().zip(b.mass()).map(|(x, y)| x - y).collect();
    (gradient_energy(a.n(), &sum) - gradient_energy(a.n(), &diff)) / 4.0
}

/// `‖S_f − S_g‖² = ‖f − g‖₁ + ‖f⁻¹ − g⁻¹‖₁`, exact.
pub fn shuffle_dist_sq(f: &IntervalExchange, g: &IntervalExchange) -> f64 {
    f.l1_distance(g) + f.inverse().l1_distance(&g.inverse())
}

/// `‖A − B‖²`.
pub fn sobolev_dist_sq(a: &CopulaDescriptor, b: &CopulaDescriptor, n: usize) -> Result<DistReport> {
    if let (Some(f), Some(g)) = (a.as_exchange(), b.as_exchange()) {
        return Ok(DistReport { dist_sq: shuffle_dist_sq(&f, &g), scheme: Scheme::ExactShuffle });
    }
    if a == b {
        return Ok(DistReport { dist_sq: 0.0, scheme: Scheme::ClosedForm });
    }
    let (na, sa) = norm_sq_inner(a, n)?;
    if b.is_independence() {
        return Ok(DistReport { dist_sq: (na - 2.0 / 3.0).max(0.0), scheme: sa });
    }
    let (nb, sb) = norm_sq_inner(b, n)?;
    if a.is_independence() {
        return Ok(DistReport { dist_sq: (nb - 2.0 / 3.0).max(0.0), scheme: sb });
    }
    let (ab, sab) = inner_product(a, b, n)?;
    let scheme = sa.and(sb).and(sab);
    if scheme.is_exact() {
        return Ok(DistReport { dist_sq: (na + nb - 2.0 * ab).max(0.0), scheme });
    }
    let m = resolution(a, b, n);
    let (ga, gb) = (a.to_grid(m)?, b.to_grid(m)?);
    Ok(DistReport { dist_sq: ga.dist_sq(&gb)?, scheme: Scheme::Grid { n: m } })
}

/// `∫ |f₁ − f₂|`, exact.
pub fn graph_l1_distance(f1: &IntervalExchange, f2: &IntervalExchange) -> f64 {
    f1.l1_distance(f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_forms() {
        assert_eq!(sobolev_norm_sq(&CopulaDescriptor::pi(), 8).unwrap().norm_sq, 2.0 / 3.0);
        let swap = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        let r = sobolev_norm_sq(&swap, 8).unwrap();
        assert_eq!(r.norm_sq, 1.0);
        assert_eq!(r.scheme, Scheme::ExactShuffle);
        assert_eq!(sobolev_norm_sq(&CopulaDescriptor::doubling(), 8).unwrap().norm_sq, 0.875);
    }

    #[test]
    fn fgm_norm_on_grid() {
        for &theta in &[-1.0, 0.5, 1.0] {
            let r = sobolev_norm_sq(&CopulaDescriptor::fgm(theta).unwrap(), 512).unwrap();
            assert_abs_diff_eq!(r.norm_sq, 2.0 / 3.0 + theta * theta / 45.0, epsilon = 1e-5);
            assert!(r.within_bounds());
        }
    }

    #[test]
    fn distance_to_independence() {
        let c = CopulaDescriptor::fgm(0.5).unwrap();
        let d = sobolev_dist_sq(&c, &CopulaDescriptor::pi(), 256).unwrap();
        let norm = sobolev_norm_sq(&c, 256).unwrap().norm_sq;
        assert_abs_diff_eq!(d.dist_sq, norm - 2.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn shuffle_distances() {
        let id = IntervalExchange::identity();
        let h = IntervalExchange::half_swap();
        assert_eq!(graph_l1_distance(&id, &h), 0.5);
        assert_eq!(shuffle_dist_sq(&id, &h), 1.0);
        let (a, b) = (CopulaDescriptor::Shuffle(id), CopulaDescriptor::Shuffle(h));
        let grid = a.to_grid(64).unwrap().dist_sq(&b.to_grid(64).unwrap()).unwrap();
        // Diagonal cells smear the support: each direction loses 1/(3n).
        assert_abs_diff_eq!(grid, 1.0 - 2.0 / 192.0, epsilon = 1e-12);
    }

    #[test]
    fn convex_law() {
        let h = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
        for &alpha in &[0.0, 0.25, 0.5, 1.0] {
            let c = CopulaDescriptor::convex(alpha, h.clone(), CopulaDescriptor::pi()).unwrap();
            let r = sobolev_norm_sq(&c, 64).unwrap();
            assert_abs_diff_eq!(r.norm_sq, alpha * alpha / 3.0 + 2.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn ordinal_sum_norm_matches_grid() {
        let o =
            CopulaDescriptor::ordinal_sum(vec![0.0, 0.5, 1.0], vec![CopulaDescriptor::pi(), CopulaDescriptor::pi()])
                .unwrap();
        let exact = sobolev_norm_sq(&o, 64).unwrap().norm_sq;
        assert_abs_diff_eq!(exact, 0.5 + 0.5 * 2.0 / 3.0, epsilon = 1e-15);
        let grid = o.to_grid(64).unwrap().norm_sq();
        assert_abs_diff_eq!(exact, grid, epsilon = 1e-2);
    }

    #[test]
    fn map_inner_product_via_grid() {
        let d = CopulaDescriptor::doubling();
        let (v, s) = inner_product(&d, &d.transpose(), 64).unwrap();
        assert_eq!(s, Scheme::Grid { n: 64 });
        assert!(v < 0.875 && v > 2.0 / 3.0 - 1e-9);
    }
}
