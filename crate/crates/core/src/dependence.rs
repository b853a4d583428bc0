//! The dependence measures ω and ω*.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::descriptor::{CopulaDescriptor, Parametric};
use crate::engine::{diagonalize, right_diagonalize, DiagonalizationTrace};
use crate::error::{CopulaError, Result};
use crate::exchange::IntervalExchange;
use crate::norms::sobolev_norm_sq;
use crate::star::star;

/// Strict improvement needed to accept a hill-climbing proposal.
const IMPROVEMENT: f64 = 1e-12;

/// `√(3‖C‖² − 2)` clamped to `[0, 1]`.
pub fn omega_from_norm_sq(norm_sq: f64) -> f64 {
    (3.0 * norm_sq - 2.0).clamp(0.0, 1.0).sqrt()
}

pub fn omega(c: &CopulaDescriptor, n: usize) -> Result<f64> {
    Ok(omega_from_norm_sq(sobolev_norm_sq(c, n)?.norm_sq))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Number of hill-climbing proposals.
    pub budget: usize,
    pub seed: u64,
    pub grid_n: usize,
    /// Diagonalization depth for the greedy candidates.
    pub depth: usize,
    /// Swap the roles of left and right factors, so that the search on `Cᵀ`
    /// mirrors the search on `C`.
    pub mirrored: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { budget: 200, seed: 0, grid_n: crate::star::DEFAULT_GRID, depth: 8, mirrored: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependenceReport {
    pub omega: f64,
    pub omega_star_lb: f64,
    pub norm_sq: f64,
    pub best_norm_sq: f64,
    /// `U` in the best product `U * C * V`.
    pub witness_left: IntervalExchange,
    /// `V` in the best product `U * C * V`.
    pub witness_right: IntervalExchange,
    pub trace: Vec<TracePoint>,
    pub seed: u64,
    pub budget: usize,
    pub grid_n: usize,
    /// False when the copula was discretized for the search.
    pub exact: bool,
}

/// True when starring with shuffles keeps the representation exact.
fn shuffle_closed(c: &CopulaDescriptor) -> bool {
    match c {
        CopulaDescriptor::Grid(_) | CopulaDescriptor::Shuffle(_) | CopulaDescriptor::Map(_) => true,
        CopulaDescriptor::Parametric(Parametric::Fgm(t)) => *t == 0.0,
        CopulaDescriptor::Parametric(_) => true,
        CopulaDescriptor::Transpose(inner) => inner.as_map().is_some(),
        CopulaDescriptor::Convex { left, right, .. } => shuffle_closed(left) && shuffle_closed(right),
        CopulaDescriptor::OrdinalSum { .. } => false,
    }
}

fn grid_size(c: &CopulaDescriptor) -> Option<usize> {
    match c {
        CopulaDescriptor::Grid(g) => Some(g.n()),
        CopulaDescriptor::Convex { left, right, .. } => grid_size(left).or_else(|| grid_size(right)),
        CopulaDescriptor::OrdinalSum { components, .. } => components.iter().find_map(grid_size),
        CopulaDescriptor::Transpose(inner) => grid_size(inner),
        _ => None,
    }
}

struct Search {
    c: CopulaDescriptor,
    n: usize,
}

impl Search {
    fn norm_of(&self, u: &IntervalExchange, v: &IntervalExchange) -> Result<f64> {
        let right = star(&self.c, &CopulaDescriptor::Shuffle(v.clone()), self.n)?.copula;
        let both = star(&CopulaDescriptor::Shuffle(u.clone()), &right, self.n)?.copula;
        Ok(sobolev_norm_sq(&both, self.n)?.norm_sq)
    }
}

#[derive(Clone, Copy)]
enum Placement {
    Left,
    Right,
    Conjugate,
}

/// Certified lower bound for ω* from greedy diagonalization and seeded
/// hill climbing over dyadic block swaps and reversals.
pub fn omega_star_lower(c: &CopulaDescriptor, opts: &SearchOptions) -> Result<DependenceReport> {
    // Grid components fix the resolution.
    let n = grid_size(c).unwrap_or(opts.grid_n);
    let exact = shuffle_closed(c);
    let work = if exact { c.clone() } else { CopulaDescriptor::Grid(c.to_grid(n)?) };
    let is_grid = grid_size(&work).is_some();
    let search = Search { c: work, n };

    let norm_sq = sobolev_norm_sq(&search.c, n)?.norm_sq;
    let mut best = norm_sq;
    let mut best_u = IntervalExchange::identity();
    let mut best_v = IntervalExchange::identity();

    // Scales 2^-k that keep block moves aligned with the representation.
    let kmax = if is_grid { n.trailing_zeros() as usize } else { (usize::BITS - 1 - n.leading_zeros()) as usize };
    let depth = if is_grid { opts.depth.min(kmax) } else { opts.depth };

    if depth > 0 && !search.c.is_independence() {
        for (u, v) in greedy_candidates(&search.c, depth, n, opts.mirrored)? {
            let value = search.norm_of(&u, &v)?;
            if value > best + IMPROVEMENT {
                best = value;
                best_u = u;
                best_v = v;
            }
        }
    }

    let mut trace = vec![TracePoint { iteration: 0, best_norm_sq: best }];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for iteration in 1..=opts.budget {
        if kmax == 0 || search.c.is_independence() {
            trace.push(TracePoint { iteration, best_norm_sq: best });
            continue;
        }
        let (p, placement) = propose(&mut rng, kmax, opts.mirrored)?;
        let (u, v) = match placement {
            Placement::Left => (p.then(&best_u), best_v.clone()),
            Placement::Right => (best_u.clone(), best_v.then(&p)),
            Placement::Conjugate => (p.then(&best_u), best_v.then(&p.inverse())),
        };
        let value = search.norm_of(&u, &v)?;
        if value > best + IMPROVEMENT {
            best = value;
            best_u = u;
            best_v = v;
        }
        trace.push(TracePoint { iteration, best_norm_sq: best });
    }

    let omega = omega_from_norm_sq(norm_sq);
    Ok(DependenceReport {
        omega,
        omega_star_lb: omega_from_norm_sq(best).max(omega),
        norm_sq,
        best_norm_sq: best.min(1.0),
        witness_left: best_u,
        witness_right: best_v,
        trace,
        seed: opts.seed,
        budget: opts.budget,
        grid_n: n,
        exact,
    })
}

/// Witness pairs `(U, V)` from left, right and two-sided diagonalization.
fn greedy_candidates(
    c: &CopulaDescriptor,
    depth: usize,
    n: usize,
    mirrored: bool,
) -> Result<Vec<(IntervalExchange, IntervalExchange)>> {
    // Inputs without an exact guide are diagonalized on the grid, where the
    // depth is capped by the resolution.
    let run = |d: &CopulaDescriptor, left: bool| -> Result<DiagonalizationTrace> {
        let go = |k: usize| if left { diagonalize(d, k, n) } else { right_diagonalize(d, k, n) };
        match go(depth) {
            Err(CopulaError::ResolutionExhausted { .. }) => go(depth.min(n.trailing_zeros() as usize)),
            other => other,
        }
    };
    let first = |d: &CopulaDescriptor| run(d, !mirrored);
    let second = |d: &CopulaDescriptor| run(d, mirrored);
    let id = IntervalExchange::identity;
    let place = |t: &DiagonalizationTrace, left: bool| {
        if left {
            (t.composed.clone(), id())
        } else {
            (id(), t.composed.clone())
        }
    };
    let one = first(c)?;
    let other = second(c)?;
    let two = second(&one.result)?;
    let mut out = vec![place(&one, !mirrored), place(&other, mirrored)];
    let (u, v) = if mirrored {
        (two.composed.clone(), one.composed.clone())
    } else {
        (one.composed.clone(), two.composed.clone())
    };
    out.push((u, v));
    Ok(out)
}

/// A sibling block swap or a block reversal at a random dyadic scale.
fn propose(rng: &mut ChaCha8Rng, kmax: usize, mirrored: bool) -> Result<(IntervalExchange, Placement)> {
    let k = rng.gen_range(1..=kmax);
    let parents = 1usize << (k - 1);
    let j = rng.gen_range(0..parents);
    let width = 1.0 / parents as f64;
    let (lo, hi) = (j as f64 * width, (j + 1) as f64 * width);
    let p = if rng.gen_bool(0.5) {
        IntervalExchange::block_swap(lo, hi)?
    } else {
        IntervalExchange::block_reversal(lo, hi)?
    };
    let placement = match rng.gen_range(0..3) {
        0 if mirrored => Placement::Right,
        0 => Placement::Left,
        1 if mirrored => Placement::Left,
        1 => Placement::Right,
        _ => Placement::Conjugate,
    };
    Ok((p, placement))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub norm_sq_before: f64,
    pub norm_sq_after: f64,
    pub independence_before: bool,
    pub independence_after: bool,
    /// For shuffle inputs: whether the shuffled copula still has norm one.
    pub unit_norm_preserved: Option<bool>,
    pub omega_star_lb_before: f64,
    pub omega_star_lb_after: f64,
    /// Set when the two lower bounds disagree by more than `tolerance`.
    pub flagged: bool,
    pub tolerance: f64,
}

/// Compares `C` with `U * C * V`: independence, unit norm and the ω* bounds.
pub fn check_shuffle_invariance(
    c: &CopulaDescriptor,
    u: &IntervalExchange,
    v: &IntervalExchange,
    opts: &SearchOptions,
    tolerance: f64,
) -> Result<InvarianceReport> {
    let n = opts.grid_n;
    let right = star(c, &CopulaDescriptor::Shuffle(v.clone()), n)?.copula;
    let shuffled = star(&CopulaDescriptor::Shuffle(u.clone()), &right, n)?.copula;
    let norm_sq_before = sobolev_norm_sq(c, n)?.norm_sq;
    let norm_sq_after = sobolev_norm_sq(&shuffled, n)?.norm_sq;
    let is_pi = |d: &CopulaDescriptor, norm_sq: f64| d.is_independence() || (norm_sq - 2.0 / 3.0).abs() < 1e-9;
    let before = omega_star_lower(c, opts)?.omega_star_lb;
    let after = omega_star_lower(&shuffled, opts)?.omega_star_lb;
    Ok(InvarianceReport {
        norm_sq_before,
        norm_sq_after,
        independence_before: is_pi(c, norm_sq_before),
        independence_after: is_pi(&shuffled, norm_sq_after),
        unit_norm_preserved: c.as_exchange().map(|_| (norm_sq_after - 1.0).abs() < 1e-12),
        omega_star_lb_before: before,
        omega_star_lb_after: after,
        flagged: (before - after).abs() > tolerance,
        tolerance,
    })
}
