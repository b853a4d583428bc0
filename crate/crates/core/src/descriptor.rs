//! Copula descriptors: evaluation, validation, discretization, transposition.

use serde::Serialize;

use crate::affine::PiecewiseAffineMap;
use crate::error::{invalid, CopulaError, Result};
use crate::exchange::IntervalExchange;
use crate::grid::GridCopula;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Parametric {
    /// Upper Fréchet bound `min(x, y)`.
    M,
    /// Lower Fréchet bound `max(x + y - 1, 0)`.
    W,
    /// Independence `xy`.
    Pi,
    /// Farlie-Gumbel-Morgenstern `xy + θ xy (1-x)(1-y)`, `θ ∈ [-1, 1]`.
    Fgm(f64),
}

impl Parametric {
    pub fn name(&self) -> &'static str {
        match self {
            Parametric::M => "M",
            Parametric::W => "W",
            Parametric::Pi => "Pi",
            Parametric::Fgm(_) => "FGM",
        }
    }

    /// The support map when the copula is a shuffle of Min.
    pub fn as_exchange(&self) -> Option<IntervalExchange> {
        match self {
            Parametric::M => Some(IntervalExchange::identity()),
            Parametric::W => Some(IntervalExchange::reversal()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CopulaDescriptor {
    Grid(GridCopula),
    Shuffle(IntervalExchange),
    Parametric(Parametric),
    Convex {
        alpha: f64,
        left: Box<CopulaDescriptor>,
        right: Box<CopulaDescriptor>,
    },
    OrdinalSum {
        partition: Vec<f64>,
        components: Vec<CopulaDescriptor>,
    },
    /// Complete dependence copula of `(U, h(U))`.
    Map(PiecewiseAffineMap),
    /// `Cᵀ(x, y) = C(y, x)`.
    Transpose(Box<CopulaDescriptor>),
}

/// A partial derivative value; `on_support` marks evaluation on the
/// (null) support graph of a singular copula, where the right limit is used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Partial {
    pub value: f64,
    pub on_support: bool,
}

impl Partial {
    fn smooth(value: f64) -> Self {
        Self { value, on_support: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, outcome: std::result::Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(Check { name: name.into(), passed, detail });
    }
}

fn check_unit(x: f64, y: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(CopulaError::OutOfDomain { x, y })
    }
}

/// Returns the block `k` with `a_k <= t < a_{k+1}` (last block includes 1).
fn block_of(partition: &[f64], t: f64) -> usize {
    let blocks = partition.len() - 1;
    partition[1..].partition_point(|&a| a <= t).min(blocks - 1)
}

impl CopulaDescriptor {
    pub fn pi() -> Self {
        Self::Parametric(Parametric::Pi)
    }

    pub fn m() -> Self {
        Self::Parametric(Parametric::M)
    }

    pub fn w() -> Self {
        Self::Parametric(Parametric::W)
    }

    pub fn fgm(theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&theta) {
            return invalid(format!("FGM parameter {theta} outside [-1, 1]"));
        }
        Ok(Self::Parametric(Parametric::Fgm(theta)))
    }

    pub fn convex(alpha: f64, left: CopulaDescriptor, right: CopulaDescriptor) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return invalid(format!("convex weight {alpha} outside [0, 1]"));
        }
        Ok(Self::Convex { alpha, left: Box::new(left), right: Box::new(right) })
    }

    pub fn ordinal_sum(partition: Vec<f64>, components: Vec<CopulaDescriptor>) -> Result<Self> {
        let d = Self::OrdinalSum { partition, components };
        d.check_local().map_err(CopulaError::Invalid)?;
        Ok(d)
    }

    /// Complete dependence copula of the doubling map `t -> 2t mod 1`.
    pub fn doubling() -> Self {
        Self::Map(PiecewiseAffineMap::multiply_mod_one(2).expect("2 is positive"))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Grid(_) => "grid",
            Self::Shuffle(_) => "shuffle",
            Self::Parametric(_) => "param",
            Self::Convex { .. } => "convex",
            Self::OrdinalSum { .. } => "ordinal",
            Self::Map(_) => "map",
            Self::Transpose(_) => "transpose",
        }
    }

    /// Short human-readable label for provenance records.
    pub fn label(&self) -> String {
        match self {
            Self::Grid(g) => format!("grid(n={})", g.n()),
            Self::Shuffle(s) => format!("shuffle({} pieces)", s.pieces().len()),
            Self::Parametric(Parametric::Fgm(t)) => format!("FGM({t})"),
            Self::Parametric(p) => p.name().to_string(),
            Self::Convex { alpha, left, right } => {
                format!("{alpha}·{} + {}·{}", left.label(), 1.0 - alpha, right.label())
            }
            Self::OrdinalSum { components, .. } => format!("ordinal({} blocks)", components.len()),
            Self::Map(m) => format!("map({} pieces)", m.pieces().len()),
            Self::Transpose(inner) => format!("transpose({})", inner.label()),
        }
    }

    /// Support map if the descriptor is a shuffle of Min (including M and W).
    pub fn as_exchange(&self) -> Option<IntervalExchange> {
        match self {
            Self::Shuffle(s) => Some(s.clone()),
            Self::Parametric(p) => p.as_exchange(),
            Self::Map(m) => IntervalExchange::from_affine(m),
            Self::Transpose(inner) => inner.as_exchange().map(|s| s.inverse()),
            _ => None,
        }
    }

    /// Support map if the descriptor is a complete dependence copula `(U, h(U))`.
    pub fn as_map(&self) -> Option<PiecewiseAffineMap> {
        match self {
            Self::Map(m) => Some(m.clone()),
            other => other.as_exchange().map(|s| s.to_affine()),
        }
    }

    pub fn is_independence(&self) -> bool {
        matches!(self, Self::Parametric(Parametric::Pi) | Self::Parametric(Parametric::Fgm(0.0)))
    }

    /// Structural invariants of this node only.
    fn check_local(&self) -> std::result::Result<String, String> {
        match self {
            Self::Parametric(Parametric::Fgm(t)) if !(-1.0..=1.0).contains(t) => {
                Err(format!("FGM parameter {t} outside [-1, 1]"))
            }
            Self::Convex { alpha, .. } if !(0.0..=1.0).contains(alpha) => {
                Err(format!("convex weight {alpha} outside [0, 1]"))
            }
            Self::OrdinalSum { partition, components } => {
                if partition.len() < 2 || partition.len() != components.len() + 1 {
                    return Err(format!(
                        "partition has {} points for {} components",
                        partition.len(),
                        components.len()
                    ));
                }
                if partition[0] != 0.0 || partition[partition.len() - 1] != 1.0 {
                    return Err("partition must start at 0 and end at 1".into());
                }
                if partition.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                    return Err("partition must be strictly increasing".into());
                }
                Ok(format!("{} blocks", components.len()))
            }
            Self::Grid(g) => match g.stochastic_violation() {
                Some(problem) => Err(problem),
                None => Ok(format!("n = {}, rows and columns sum to 1/n", g.n())),
            },
            Self::Shuffle(s) => IntervalExchange::new(s.pieces().to_vec())
                .map(|_| format!("{} pieces, bijective and measure-preserving", s.pieces().len()))
                .map_err(|e| e.to_string()),
            Self::Map(m) => m
                .check_structure()
                .and_then(|_| m.check_measure_preserving())
                .map(|_| format!("{} pieces, measure-preserving", m.pieces().len())),
            _ => Ok("ok".into()),
        }
    }

    /// Checks every structural invariant, then the copula axioms on a lattice.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.validate_into("$", &mut report);
        if report.passed() {
            report.push("boundary conditions", self.check_boundary());
            report.push("2-increasing", self.check_two_increasing(8));
        }
        report
    }

    fn validate_into(&self, path: &str, report: &mut ValidationReport) {
        report.push(format!("{path}: {}", self.kind()), self.check_local());
        match self {
            Self::Convex { left, right, .. } => {
                left.validate_into(&format!("{path}.left"), report);
                right.validate_into(&format!("{path}.right"), report);
            }
            Self::OrdinalSum { components, .. } => {
                for (k, c) in components.iter().enumerate() {
                    c.validate_into(&format!("{path}.components[{k}]"), report);
                }
            }
            Self::Transpose(inner) => inner.validate_into(&format!("{path}.inner"), report),
            _ => {}
        }
    }

    fn check_boundary(&self) -> std::result::Result<String, String> {
        const TOL: f64 = 1e-9;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let values = [
                (self.cdf_unchecked(t, 0.0), 0.0, "C(t,0)"),
                (self.cdf_unchecked(0.0, t), 0.0, "C(0,t)"),
                (self.cdf_unchecked(t, 1.0), t, "C(t,1)"),
                (self.cdf_unchecked(1.0, t), t, "C(1,t)"),
            ];
            for (got, want, what) in values {
                if (got - want).abs() > TOL {
                    return Err(format!("{what} = {got} at t = {t}, expected {want}"));
                }
            }
        }
        Ok("C(u,0)=0=C(0,v), C(u,1)=u, C(1,v)=v".into())
    }

    fn check_two_increasing(&self, lattice: usize) -> std::result::Result<String, String> {
        let nodes: Vec<f64> = (0..=lattice).map(|k| k as f64 / lattice as f64).collect();
        let values: Vec<Vec<f64>> =
            nodes.iter().map(|&x| nodes.iter().map(|&y| self.cdf_unchecked(x, y)).collect()).collect();
        for i in 0..lattice {
            for j in 0..lattice {
                let mass = values[i + 1][j + 1] - values[i + 1][j] - values[i][j + 1] + values[i][j];
                if mass < -1e-12 {
                    return Err(format!("negative rectangle mass {mass} at cell ({i}, {j})"));
                }
            }
        }
        Ok(format!("rectangle masses nonnegative on a {lattice}x{lattice} lattice"))
    }

    pub fn eval_cdf(&self, x: f64, y: f64) -> Result<f64> {
        check_unit(x, y)?;
        Ok(self.cdf_unchecked(x, y))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Grid(g) => g.cdf(x, y),
            Self::Shuffle(s) => s.to_affine().cdf(x, y),
            Self::Map(m) => m.cdf(x, y),
            Self::Parametric(p) => match p {
                Parametric::M => x.min(y),
                Parametric::W => (x + y - 1.0).max(0.0),
                Parametric::Pi => x * y,
                Parametric::Fgm(t) => x * y + t * x * y * (1.0 - x) * (1.0 - y),
            },
            Self::Convex { alpha, left, right } => {
                alpha * left.cdf_unchecked(x, y) + (1.0 - alpha) * right.cdf_unchecked(x, y)
            }
            Self::OrdinalSum { partition, components } => {
                let (bx, by) = (block_of(partition, x), block_of(partition, y));
                if bx != by {
                    return x.min(y);
                }
                let (a, w) = (partition[bx], partition[bx + 1] - partition[bx]);
                a + w * components[bx].cdf_unchecked(((x - a) / w).clamp(0.0, 1.0), ((y - a) / w).clamp(0.0, 1.0))
            }
            Self::Transpose(inner) => inner.cdf_unchecked(y, x),
        }
    }

    pub fn partial1(&self, x: f64, y: f64) -> Result<Partial> {
        check_unit(x, y)?;
        Ok(self.partial_unchecked(x, y, false))
    }

    pub fn partial2(&self, x: f64, y: f64) -> Result<Partial> {
        check_unit(x, y)?;
        Ok(self.partial_unchecked(x, y, true))
    }

    /// `∂₁C(x, y)`, or `∂₂C(x, y)` when `second` is set.
    fn partial_unchecked(&self, x: f64, y: f64, second: bool) -> Partial {
        match self {
            Self::Grid(g) => Partial::smooth(if second { g.partial2(x, y) } else { g.partial1(x, y) }),
            Self::Shuffle(_) | Self::Map(_) | Self::Parametric(Parametric::M) | Self::Parametric(Parametric::W) => {
                let map = self.as_map().expect("singular variants carry a support map");
                let (value, on_support) = if second { map.partial2(x, y) } else { map.partial1(x, y) };
                Partial { value, on_support }
            }
            Self::Parametric(Parametric::Pi) => Partial::smooth(if second { x } else { y }),
            Self::Parametric(Parametric::Fgm(t)) => {
                let (u, v) = if second { (y, x) } else { (x, y) };
                Partial::smooth(v + t * v * (1.0 - v) * (1.0 - 2.0 * u))
            }
            Self::Convex { alpha, left, right } => {
                let l = left.partial_unchecked(x, y, second);
                let r = right.partial_unchecked(x, y, second);
                Partial { value: alpha * l.value + (1.0 - alpha) * r.value, on_support: l.on_support || r.on_support }
            }
            Self::OrdinalSum { partition, components } => {
                let (bx, by) = (block_of(partition, x), block_of(partition, y));
                if bx != by {
                    // min(x, y) off the diagonal blocks.
                    let grows = if second { bx > by } else { bx < by };
                    return Partial::smooth(if grows { 1.0 } else { 0.0 });
                }
                let (a, w) = (partition[bx], partition[bx + 1] - partition[bx]);
                components[bx].partial_unchecked(((x - a) / w).clamp(0.0, 1.0), ((y - a) / w).clamp(0.0, 1.0), second)
            }
            Self::Transpose(inner) => inner.partial_unchecked(y, x, !second),
        }
    }

    /// Checkerboard with the exact cell masses of this copula.
    pub fn to_grid(&self, n: usize) -> Result<GridCopula> {
        if n < 2 {
            return invalid(format!("grid resolution {n} must be at least 2"));
        }
        let grid = match self {
            Self::Grid(g) if g.n() == n => g.clone(),
            Self::Grid(g) => return Err(CopulaError::ResolutionMismatch { left: g.n(), right: n }),
            Self::Parametric(Parametric::Pi) => GridCopula::independence(n),
            Self::Shuffle(_) | Self::Map(_) | Self::Parametric(Parametric::M) | Self::Parametric(Parametric::W) => {
                let map = self.as_map().expect("singular variants carry a support map");
                GridCopula::from_raw(n, map.cell_masses(n))?
            }
            Self::Convex { alpha, left, right } => left.to_grid(n)?.combine(*alpha, &right.to_grid(n)?)?,
            Self::Transpose(inner) => inner.to_grid(n)?.transpose(),
            Self::Parametric(Parametric::Fgm(_)) | Self::OrdinalSum { .. } => self.grid_by_inclusion_exclusion(n)?,
        };
        Ok(grid)
    }

    fn grid_by_inclusion_exclusion(&self, n: usize) -> Result<GridCopula> {
        let nodes: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values: Vec<f64> = nodes
            .iter()
            .flat_map(|&x| nodes.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.cdf_unchecked(x, y))
            .collect();
        let at = |i: usize, j: usize| values[i * (n + 1) + j];
        let mut mass = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let m = at(i + 1, j + 1) - at(i + 1, j) - at(i, j + 1) + at(i, j);
                mass.push(m.max(0.0));
            }
        }
        GridCopula::from_raw(n, mass)
    }

    pub fn transpose(&self) -> Self {
        match self {
            Self::Grid(g) => Self::Grid(g.transpose()),
            Self::Shuffle(s) => Self::Shuffle(s.inverse()),
            Self::Parametric(p) => Self::Parametric(*p),
            Self::Convex { alpha, left, right } => {
                Self::Convex { alpha: *alpha, left: Box::new(left.transpose()), right: Box::new(right.transpose()) }
            }
            Self::OrdinalSum { partition, components } => Self::OrdinalSum {
                partition: partition.clone(),
                components: components.iter().map(Self::transpose).collect(),
            },
            Self::Map(_) => Self::Transpose(Box::new(self.clone())),
            Self::Transpose(inner) => (**inner).clone(),
        }
    }

    /// Shuffle support polyline; only shuffles of Min have one.
    pub fn support_polyline(&self) -> Result<Vec<crate::exchange::Segment>> {
        self.as_exchange()
            .map(|s| s.support_polyline())
            .ok_or_else(|| CopulaError::Invalid(format!("{} is not a shuffle of Min", self.kind())))
    }
}
