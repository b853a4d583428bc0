use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use starcop::io::{write_polyline_csv, write_search_trace_csv, write_trace_csv};
use starcop::*;

#[derive(Parser)]
#[command(name = "starcop", version, about = "Copulas, the *-product, Sobolev norms and shuffle-based dependence")]
struct Cli {
    /// Grid resolution for operations without a closed form.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Subcommand)]
enum Command {
    /// Check a descriptor and print every check.
    Validate { desc: String },
    /// Squared Sobolev norm.
    Norm {
        desc: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Squared Sobolev distance.
    Dist {
        a: String,
        b: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// The *-product A*B.
    Star {
        a: String,
        b: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    Transpose {
        desc: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Shuffle a copula on one side by a shuffle of Min.
    ShuffleOf {
        desc: String,
        #[arg(long)]
        by: String,
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Shuffle moving a set of intervals `a1,b1;a2,b2` to the front.
    SortingShuffle {
        #[arg(long)]
        set: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Diagonalize by dyadic shuffles and write the norm trace as CSV.
    Diagonalize {
        desc: String,
        #[arg(long)]
        depth: usize,
        /// Shuffle the second coordinate instead of the first.
        #[arg(long)]
        right: bool,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the diagonalized copula.
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Approximate a unit-norm copula by a straight shuffle of Min.
    ApproxShuffles {
        desc: String,
        #[arg(long)]
        bins: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Level of the self-similar shuffle sequence.
    Selfsimilar {
        #[arg(long)]
        level: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    Omega {
        desc: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lower bound for the shuffle-invariant dependence measure.
    OmegaStar {
        desc: String,
        #[arg(long, default_value_t = SearchOptions::default().budget)]
        budget: usize,
        /// Greedy diagonalization depth; defaults to 0 when the budget is 0.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        mirrored: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Search trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Checkerboard copula of a two-column sample file.
    Empirical {
        samples: PathBuf,
        #[arg(long)]
        bins: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Support graph of a shuffle of Min as CSV segments.
    Support {
        desc: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Validation failure, reported with exit code 1.
struct Rejected;

fn builtin(name: &str) -> Option<CopulaDescriptor> {
    let d = match name {
        "Pi" | "pi" => CopulaDescriptor::pi(),
        "M" => CopulaDescriptor::m(),
        "W" => CopulaDescriptor::w(),
        "doubling" => CopulaDescriptor::doubling(),
        "tent" => CopulaDescriptor::Map(PiecewiseAffineMap::tent()),
        "halfswap" => CopulaDescriptor::Shuffle(IntervalExchange::half_swap()),
        "quartercycle" => CopulaDescriptor::Shuffle(IntervalExchange::cyclic_shift(0.75).ok()?),
        "reversal" => CopulaDescriptor::Shuffle(IntervalExchange::reversal()),
        _ => {
            if let Some(level) = name.strip_prefix("selfsimilar") {
                return selfsimilar(level.parse().ok()?).ok().map(CopulaDescriptor::Shuffle);
            }
            // fgm05 is 0.5, fgm1 is 1, fgm-0.3 is -0.3.
            let rest = name.strip_prefix("fgm")?;
            let theta = match rest.strip_prefix('0') {
                Some(frac) if !frac.is_empty() && !frac.contains('.') => format!("0.{frac}").parse().ok()?,
                _ => rest.parse().ok()?,
            };
            return CopulaDescriptor::fgm(theta).ok();
        }
    };
    Some(d)
}

fn load_unchecked(arg: &str) -> Result<CopulaDescriptor> {
    if arg.trim_start().starts_with('{') {
        return Ok(parse_descriptor(arg)?);
    }
    if let Some(d) = builtin(arg) {
        return Ok(d);
    }
    read_descriptor(Path::new(arg)).with_context(|| format!("reading descriptor {arg}"))
}

fn print_report(report: &ValidationReport) {
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {} {}", c.name, c.detail);
    }
}

fn load(arg: &str) -> Result<std::result::Result<CopulaDescriptor, Rejected>> {
    let d = load_unchecked(arg)?;
    let report = d.validate();
    if report.passed() {
        Ok(Ok(d))
    } else {
        print_report(&report);
        Ok(Err(Rejected))
    }
}

macro_rules! load {
    ($arg:expr) => {
        match load($arg)? {
            Ok(d) => d,
            Err(Rejected) => return Ok(ExitCode::from(1)),
        }
    };
}

fn load_shuffle(arg: &str) -> Result<std::result::Result<IntervalExchange, Rejected>> {
    Ok(match load(arg)? {
        Ok(d) => match d.as_exchange() {
            Some(s) => Ok(s),
            None => bail!("{arg} is a {} descriptor, not a shuffle of Min", d.kind()),
        },
        Err(r) => Err(r),
    })
}

/// Six significant digits, trailing zeros dropped.
fn fmt(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (5 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `kind` of a tagged enum, with its grid size when present.
fn tag(value: &impl serde::Serialize) -> String {
    let v = serde_json::to_value(value).unwrap_or_default();
    let kind = v["kind"].as_str().unwrap_or("unknown");
    match v["n"].as_u64() {
        Some(n) => format!("{kind}:{n}"),
        None => kind.to_string(),
    }
}

fn write_json(path: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    if let Some(p) = path {
        write_report(p, value).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn csv_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let n = cli.grid;
    match cli.command {
        Command::Validate { desc } => {
            let d = load_unchecked(&desc)?;
            let report = d.validate();
            print_report(&report);
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
            println!("valid {}", d.label());
        }
        Command::Norm { desc, output } => {
            let r = sobolev_norm_sq(&load!(&desc), n)?;
            println!("norm_sq {} scheme {}", fmt(r.norm_sq), tag(&r.scheme));
            write_json(&output, &r)?;
        }
        Command::Dist { a, b, output } => {
            let r = sobolev_dist_sq(&load!(&a), &load!(&b), n)?;
            println!("dist_sq {} scheme {}", fmt(r.dist_sq), tag(&r.scheme));
            write_json(&output, &r)?;
        }
        Command::Star { a, b, output } => {
            let r = star(&load!(&a), &load!(&b), n)?;
            write_descriptor(&output, &r.copula)?;
            println!("star {} exactness {}", r.copula.kind(), tag(&r.exactness));
        }
        Command::Transpose { desc, output } => {
            let t = transpose(&load!(&desc));
            write_descriptor(&output, &t)?;
            println!("transpose {}", t.kind());
        }
        Command::ShuffleOf { desc, by, side, output } => {
            let d = load!(&desc);
            let t = match load_shuffle(&by)? {
                Ok(t) => t,
                Err(Rejected) => return Ok(ExitCode::from(1)),
            };
            let side = match side {
                SideArg::Left => Side::Left,
                SideArg::Right => Side::Right,
            };
            let r = shuffle_of(&d, &t, side, n)?;
            write_descriptor(&output, &r.copula)?;
            println!("shuffle-of {} exactness {}", r.copula.kind(), tag(&r.exactness));
        }
        Command::SortingShuffle { set, output } => {
            let a = IntervalUnion::parse(&set)?;
            let s = sorting_shuffle(&a);
            write_descriptor(&output, &CopulaDescriptor::Shuffle(s.clone()))?;
            println!("sorting-shuffle pieces {} measure {}", s.pieces().len(), fmt(a.measure()));
        }
        Command::Diagonalize { desc, depth, right, output, result } => {
            let d = load!(&desc);
            let t = if right { right_diagonalize(&d, depth, n)? } else { diagonalize(&d, depth, n)? };
            let mut out = csv_file(&output)?;
            write_trace_csv(&mut out, &t)?;
            if let Some(p) = result {
                write_descriptor(&p, &t.result)?;
            }
            println!(
                "norm_sq {} -> {} steps {} exact {}",
                fmt(t.initial_norm_sq),
                fmt(t.final_norm_sq()),
                t.steps.len(),
                t.exact
            );
        }
        Command::ApproxShuffles { desc, bins, eps, output } => {
            let r = approx_by_shuffles(&load!(&desc), bins, n, eps)?;
            write_descriptor(&output, &CopulaDescriptor::Shuffle(r.shuffle.clone()))?;
            println!("dist_sq {} bound {} exact {}", fmt(r.dist_sq), fmt(r.bound), r.exact);
        }
        Command::Selfsimilar { level, output } => {
            let s = selfsimilar(level)?;
            write_descriptor(&output, &CopulaDescriptor::Shuffle(s.clone()))?;
            println!("selfsimilar level {level} pieces {}", s.pieces().len());
        }
        Command::Omega { desc, output } => {
            let w = omega(&load!(&desc), n)?;
            println!("omega {}", fmt(w));
            write_json(&output, &json!({ "omega": w, "grid_n": n }))?;
        }
        Command::OmegaStar { desc, budget, depth, mirrored, output, trace } => {
            let d = load!(&desc);
            let defaults = SearchOptions::default();
            let depth = depth.unwrap_or(if budget == 0 { 0 } else { defaults.depth });
            let opts = SearchOptions { budget, seed: cli.seed, grid_n: n, depth, mirrored };
            let r = omega_star_lower(&d, &opts)?;
            println!("omega_star_lb {} omega {}", fmt(r.omega_star_lb), fmt(r.omega));
            write_json(&output, &r)?;
            if let Some(p) = trace {
                write_search_trace_csv(&mut csv_file(&p)?, &r.trace)?;
            }
        }
        Command::Empirical { samples, bins, output } => {
            let text = std::fs::read_to_string(&samples).with_context(|| format!("reading {}", samples.display()))?;
            let e = checkerboard(&SamplePairs::parse_csv(&text)?, bins)?;
            let d = CopulaDescriptor::Grid(e.grid);
            write_descriptor(&output, &d)?;
            let norm = sobolev_norm_sq(&d, bins)?.norm_sq;
            println!(
                "norm_sq {} omega {} sweeps {} ties {}",
                fmt(norm),
                fmt(omega_from_norm_sq(norm)),
                e.sweeps,
                e.ties
            );
        }
        Command::Support { desc, output } => {
            let segments = load!(&desc).support_polyline()?;
            write_polyline_csv(&mut csv_file(&output)?, &segments)?;
            println!("segments {}", segments.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
