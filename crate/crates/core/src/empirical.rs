//! Sample pairs, pseudo-observations and the empirical checkerboard copula.

use serde::Serialize;

use crate::error::{CopulaError, Result};
use crate::grid::{GridCopula, STOCHASTIC_TOL};

pub const MAX_SWEEPS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePairs {
    pub rows: Vec<(f64, f64)>,
}

impl SamplePairs {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(CopulaError::EmptyInput);
        }
        if let Some(k) = rows.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(CopulaError::Parse { line: k + 1, message: "non-finite value".into() });
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Two numeric columns separated by a comma or whitespace; the first
    /// line may be a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> =
                trimmed.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            let parsed: Vec<std::result::Result<f64, _>> = fields.iter().map(|f| f.parse::<f64>()).collect();
            if rows.is_empty() && line == first_content_line(text) && parsed.iter().any(|p| p.is_err()) {
                continue;
            }
            if fields.len() != 2 {
                return Err(CopulaError::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let mut values = [0.0; 2];
            for (k, p) in parsed.into_iter().enumerate() {
                values[k] =
                    p.map_err(|_| CopulaError::Parse { line, message: format!("not a number: {:?}", fields[k]) })?;
                if !values[k].is_finite() {
                    return Err(CopulaError::Parse { line, message: format!("non-finite value {:?}", fields[k]) });
                }
            }
            rows.push((values[0], values[1]));
        }
        Self::new(rows)
    }
}

fn first_content_line(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty()).map_or(0, |k| k + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoObservations {
    pub points: Vec<(f64, f64)>,
    /// Set when ties had to be broken by input order.
    pub ties: bool,
}

/// Ranks in `1..=n` with ties broken by input order.
fn ranks(values: &[f64]) -> (Vec<usize>, bool) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let ties = order.windows(2).any(|w| values[w[0]] == values[w[1]]);
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    (rank, ties)
}

/// `(rank(x)/(n+1), rank(y)/(n+1))`, strictly inside the unit square.
pub fn pseudo_observations(s: &SamplePairs) -> Result<PseudoObservations> {
    if s.is_empty() {
        return Err(CopulaError::EmptyInput);
    }
    let xs: Vec<f64> = s.rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = s.rows.iter().map(|r| r.1).collect();
    let (rx, tx) = ranks(&xs);
    let (ry, ty) = ranks(&ys);
    let denom = (s.len() + 1) as f64;
    Ok(PseudoObservations {
        points: rx.iter().zip(&ry).map(|(&a, &b)| (a as f64 / denom, b as f64 / denom)).collect(),
        ties: tx || ty,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCopula {
    pub grid: GridCopula,
    pub sweeps: usize,
    pub ties: bool,
}

fn max_deviation(mass: &[f64], n: usize) -> f64 {
    let target = 1.0 / n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row: f64 = mass[i * n..(i + 1) * n].iter().sum();
        let col: f64 = (0..n).map(|r| mass[r * n + i]).sum();
        worst = worst.max((row - target).abs()).max((col - target).abs());
    }
    worst
}

/// Histogram of the pseudo-observations on an `n`-grid, rescaled by
/// alternating row and column normalization until doubly stochastic.
pub fn checkerboard(s: &SamplePairs, n: usize) -> Result<EmpiricalCopula> {
    if n < 2 {
        return Err(CopulaError::Invalid(format!("number of bins {n} must be at least 2")));
    }
    let obs = pseudo_observations(s)?;
    let nf = n as f64;
    let mut mass = vec![0.0; n * n];
    let unit = 1.0 / obs.points.len() as f64;
    for &(u, v) in &obs.points {
        let i = ((u * nf) as usize).min(n - 1);
        let j = ((v * nf) as usize).min(n - 1);
        mass[i * n + j] += unit;
    }
    let target = 1.0 / nf;
    let mut sweeps = 0;
    while max_deviation(&mass, n) > STOCHASTIC_TOL {
        if sweeps == MAX_SWEEPS {
            return Err(CopulaError::Normalization(format!(
                "no doubly stochastic rescaling after {MAX_SWEEPS} sweeps; lower the number of bins"
            )));
        }
        for i in 0..n {
            let row = &mut mass[i * n..(i + 1) * n];
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                return Err(empty("row", i, n));
            }
            row.iter_mut().for_each(|m| *m *= target / sum);
        }
        for j in 0..n {
            let sum: f64 = (0..n).map(|r| mass[r * n + j]).sum();
            if sum == 0.0 {
                return Err(empty("column", j, n));
            }
            (0..n).for_each(|r| mass[r * n + j] *= target / sum);
        }
        sweeps += 1;
    }
    Ok(EmpiricalCopula { grid: GridCopula::new(n, mass)?, sweeps, ties: obs.ties })
}

fn empty(what: &str, k: usize, n: usize) -> CopulaError {
    CopulaError::Normalization(format!("{what} {k} of the {n}-bin histogram is empty; lower the number of bins"))
}
