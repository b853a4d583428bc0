//! Descriptor JSON, report JSON and CSV output.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::{AffinePiece, PiecewiseAffineMap};
use crate::descriptor::{CopulaDescriptor, Parametric};
use crate::engine::DiagonalizationTrace;
use crate::error::{CopulaError, Result};
use crate::exchange::{ExchangePiece, IntervalExchange, Segment};
use crate::grid::GridCopula;

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Wire {
    Grid {
        n: usize,
        mass: Vec<Vec<f64>>,
    },
    Shuffle {
        pieces: Vec<ExchangePiece>,
    },
    Param {
        name: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Convex {
        alpha: f64,
        left: Box<Wire>,
        right: Box<Wire>,
    },
    Ordinal {
        partition: Vec<f64>,
        components: Vec<Wire>,
    },
    Map {
        pieces: Vec<AffinePiece>,
    },
    Transpose {
        inner: Box<Wire>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridIn {
    n: usize,
    mass: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShuffleIn {
    pieces: Vec<ExchangePiece>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamIn {
    name: String,
    #[serde(default)]
    theta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvexIn {
    alpha: f64,
    left: Value,
    right: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrdinalIn {
    partition: Vec<f64>,
    components: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapIn {
    pieces: Vec<AffinePiece>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransposeIn {
    inner: Value,
}

fn schema<T>(path: &str, message: impl Into<String>) -> Result<T> {
    Err(CopulaError::Schema { path: path.to_string(), message: message.into() })
}

/// Deserializes `value` into `T`, reporting failures relative to `path`.
fn typed<T: DeserializeOwned>(value: Value, path: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let suffix = match inner.as_str() {
            "." | "" => String::new(),
            p if p.starts_with('[') => p.to_string(),
            p => format!(".{p}"),
        };
        CopulaError::Schema { path: format!("{path}{suffix}"), message: e.into_inner().to_string() }
    })
}

fn sorted_exchange(mut pieces: Vec<ExchangePiece>) -> IntervalExchange {
    pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
    IntervalExchange::from_pieces_unchecked(pieces)
}

fn sorted_map(mut pieces: Vec<AffinePiece>) -> PiecewiseAffineMap {
    pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
    PiecewiseAffineMap::from_pieces_unchecked(pieces)
}

/// Structural decoding only; semantic invariants are left to `validate`.
fn decode(value: Value, path: &str) -> Result<CopulaDescriptor> {
    let Value::Object(mut obj) = value else {
        return schema(path, "expected a JSON object");
    };
    let kind = match obj.remove("type") {
        Some(Value::String(s)) => s,
        Some(_) => return schema(&format!("{path}.type"), "expected a string"),
        None => return schema(path, "missing field `type`"),
    };
    let value = Value::Object(obj);
    Ok(match kind.as_str() {
        "grid" => {
            let GridIn { n, mass } = typed(value, path)?;
            if mass.len() != n {
                return schema(&format!("{path}.mass"), format!("expected {n} rows, found {}", mass.len()));
            }
            let grid = GridCopula::from_rows(&mass).map_err(|e| match e {
                CopulaError::Schema { path: p, message } => {
                    CopulaError::Schema { path: format!("{path}.{p}"), message }
                }
                other => other,
            })?;
            CopulaDescriptor::Grid(grid)
        }
        "shuffle" => {
            let ShuffleIn { pieces } = typed(value, path)?;
            if pieces.is_empty() {
                return schema(&format!("{path}.pieces"), "a shuffle needs at least one piece");
            }
            CopulaDescriptor::Shuffle(sorted_exchange(pieces))
        }
        "map" => {
            let MapIn { pieces } = typed(value, path)?;
            if pieces.is_empty() {
                return schema(&format!("{path}.pieces"), "a map needs at least one piece");
            }
            CopulaDescriptor::Map(sorted_map(pieces))
        }
        "param" => {
            let ParamIn { name, theta } = typed(value, path)?;
            let p = match (name.as_str(), theta) {
                ("M", None) => Parametric::M,
                ("W", None) => Parametric::W,
                ("Pi", None) => Parametric::Pi,
                ("FGM", Some(t)) => Parametric::Fgm(t),
                ("FGM", None) => return schema(&format!("{path}.theta"), "FGM requires theta"),
                ("M" | "W" | "Pi", Some(_)) => {
                    return schema(&format!("{path}.theta"), format!("{name} takes no parameter"))
                }
                _ => {
                    return schema(
                        &format!("{path}.name"),
                        format!("unknown family {name:?}; expected M, W, Pi or FGM"),
                    )
                }
            };
            CopulaDescriptor::Parametric(p)
        }
        "convex" => {
            let ConvexIn { alpha, left, right } = typed(value, path)?;
            CopulaDescriptor::Convex {
                alpha,
                left: Box::new(decode(left, &format!("{path}.left"))?),
                right: Box::new(decode(right, &format!("{path}.right"))?),
            }
        }
        "ordinal" => {
            let OrdinalIn { partition, components } = typed(value, path)?;
            CopulaDescriptor::OrdinalSum {
                partition,
                components: components
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| decode(c, &format!("{path}.components[{k}]")))
                    .collect::<Result<_>>()?,
            }
        }
        "transpose" => {
            let TransposeIn { inner } = typed(value, path)?;
            CopulaDescriptor::Transpose(Box::new(decode(inner, &format!("{path}.inner"))?))
        }
        other => {
            return schema(
                &format!("{path}.type"),
                format!("unknown type {other:?}; expected grid, shuffle, param, convex, ordinal, map or transpose"),
            )
        }
    })
}

fn encode(d: &CopulaDescriptor) -> Wire {
    match d {
        CopulaDescriptor::Grid(g) => Wire::Grid { n: g.n(), mass: g.rows() },
        CopulaDescriptor::Shuffle(s) => Wire::Shuffle { pieces: s.pieces().to_vec() },
        CopulaDescriptor::Map(m) => Wire::Map { pieces: m.pieces().to_vec() },
        CopulaDescriptor::Parametric(p) => Wire::Param {
            name: p.name().to_string(),
            theta: match p {
                Parametric::Fgm(t) => Some(*t),
                _ => None,
            },
        },
        CopulaDescriptor::Convex { alpha, left, right } => {
            Wire::Convex { alpha: *alpha, left: Box::new(encode(left)), right: Box::new(encode(right)) }
        }
        CopulaDescriptor::OrdinalSum { partition, components } => {
            Wire::Ordinal { partition: partition.clone(), components: components.iter().map(encode).collect() }
        }
        CopulaDescriptor::Transpose(inner) => Wire::Transpose { inner: Box::new(encode(inner)) },
    }
}

/// Parses a descriptor; malformed JSON and schema violations carry a field path.
pub fn parse_descriptor(text: &str) -> Result<CopulaDescriptor> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CopulaError::Schema { path: "$".into(), message: e.to_string() })?;
    decode(value, "$")
}

pub fn descriptor_to_json(d: &CopulaDescriptor) -> String {
    serde_json::to_string_pretty(&encode(d)).expect("descriptor serializes")
}

pub fn read_descriptor(path: &Path) -> Result<CopulaDescriptor> {
    parse_descriptor(&std::fs::read_to_string(path)?)
}

pub fn write_descriptor(path: &Path, d: &CopulaDescriptor) -> Result<()> {
    let mut text = descriptor_to_json(d);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// CSV with columns `step,norm_sq`; step 0 is the input.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &DiagonalizationTrace) -> Result<()> {
    writeln!(out, "step,norm_sq")?;
    writeln!(out, "0,{}", trace.initial_norm_sq)?;
    for (k, s) in trace.steps.iter().enumerate() {
        writeln!(out, "{},{}", k + 1, s.norm_sq_after)?;
    }
    Ok(())
}

/// CSV with columns `iteration,best_norm_sq`.
pub fn write_search_trace_csv<W: Write>(out: &mut W, trace: &[crate::dependence::TracePoint]) -> Result<()> {
    writeln!(out, "iteration,best_norm_sq")?;
    for p in trace {
        writeln!(out, "{},{}", p.iteration, p.best_norm_sq)?;
    }
    Ok(())
}

/// CSV with columns `x0,y0,x1,y1`, one row per support segment.
pub fn write_polyline_csv<W: Write>(out: &mut W, segments: &[Segment]) -> Result<()> {
    writeln!(out, "x0,y0,x1,y1")?;
    for s in segments {
        writeln!(out, "{},{},{},{}", s.x0, s.y0, s.x1, s.y1)?;
    }
    Ok(())
}
