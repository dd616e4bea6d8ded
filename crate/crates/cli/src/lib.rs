//! Command-line front end for the `gaheights` library.

pub mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gaheights::boundary::{clemens_complex, ClemensReport};
use gaheights::catalog::ModelDescription;
use gaheights::census::{self, CensusOptions, EquiReport, PoissonCheck, Region};
use gaheights::density::{self, ThetaOptions};
use gaheights::localfield::{parse_rational, residue_c, zeta_local};
use gaheights::oscillatory::decay_report;
use gaheights::{
    AsymptoticFit, BumpFunction, CompactificationModel, Complex64, CountTable, DecayReport, EulerProductValue, Metric, Place,
    StepFunction, TestFunction, ThetaReport,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;

const SUBCOMMANDS: &[&str] = &["zeta-local", "osc", "clemens", "density", "theta", "count", "fit", "poisson", "equi", "model"];

#[derive(Parser, Debug)]
#[command(
    name = "gaheights",
    version,
    about = "Local densities, leading constants and point counts for compactifications of vector groups",
    args_override_self = true
)]
pub struct Cli {
    /// Flat key = value file; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for JSON, CSV and summary files; without it JSON goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format written to stdout when --out is absent.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Local zeta function ζ_v(s) and the constant c_v.
    ZetaLocal {
        #[arg(long, default_value = "inf")]
        place: String,
        /// Comma-separated complex values, e.g. `1,2+1i`.
        #[arg(long, default_value = "1")]
        s: String,
    },
    /// Decay of oscillatory integrals in |a|.
    Osc {
        #[arg(long, default_value = "inf")]
        place: String,
        /// Test functions separated by `;`: `bump`, `bump:center,radius,amplitude`, `ball`, `units`, `indicator:center:n`.
        #[arg(long, default_value = "bump")]
        phi: String,
        #[arg(long, default_value = "1")]
        d: String,
        #[arg(long, default_value = "1")]
        s: String,
        /// Grid of |a|: `lo:hi:step` as exponents (of ten, or of p at a finite place), or a comma list.
        #[arg(long, default_value = "1:6:1")]
        grid: String,
    },
    /// Clemens complex of a model at a place.
    Clemens {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "inf")]
        place: String,
    },
    /// Local densities Ĥ_v(a; sλ), or Ĥ(0; sλ) over a set of places S.
    Density {
        #[arg(long)]
        model: String,
        /// A single place; omit and give --S for the global value.
        #[arg(long)]
        place: Option<String>,
        #[arg(long = "S")]
        places: Option<String>,
        /// Character coordinates, comma-separated rationals (default 0).
        #[arg(long)]
        a: Option<String>,
        #[arg(long, default_value = "2")]
        s: String,
        /// Drop the integrality condition at a finite place.
        #[arg(long)]
        unrestricted: bool,
        #[arg(long, default_value_t = 10_000)]
        truncation: u64,
        /// `max` or `smoothed:k`.
        #[arg(long, default_value = "max")]
        metric: String,
    },
    /// Leading constant Θ and exponent b.
    Theta {
        #[arg(long)]
        model: String,
        #[arg(long = "S", default_value = "inf")]
        places: String,
        #[arg(long, default_value_t = 10_000)]
        truncation: u64,
        #[arg(long, default_value = "max")]
        metric: String,
    },
    /// Exact counts N(B).
    Count {
        #[arg(long)]
        model: String,
        #[arg(long = "S", default_value = "inf")]
        places: String,
        /// A single bound; overrides --grid.
        #[arg(long = "B")]
        bound: Option<f64>,
        #[arg(long, default_value = "2:6:0.5")]
        grid: String,
        #[arg(long, default_value_t = CensusOptions::default().node_cap)]
        node_cap: u64,
    },
    /// Counts over a grid and a fit to Θ B (log B)^{b-1}.
    Fit {
        #[arg(long)]
        model: String,
        #[arg(long = "S", default_value = "inf")]
        places: String,
        #[arg(long, default_value = "2:6:0.5")]
        grid: String,
        /// Log power b; defaults to the model's value.
        #[arg(long)]
        logpow: Option<usize>,
        #[arg(long, default_value_t = CensusOptions::default().node_cap)]
        node_cap: u64,
    },
    /// Both sides of the Poisson formula Z(s) = Σ_a Ĥ(a; s).
    Poisson {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 3.0)]
        s: f64,
        #[arg(long, default_value_t = 100)]
        cutoff: u64,
    },
    /// Region fractions among points of bounded height against the limiting measure.
    Equi {
        #[arg(long)]
        model: String,
        #[arg(long = "S", default_value = "inf")]
        places: String,
        #[arg(long = "B", default_value_t = 1e5)]
        bound: f64,
        /// Regions separated by `;`, atoms joined by `&` (default: quadrants, or x1>0 in dimension 1).
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
    },
    /// Catalog models.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelAction {
    /// Divisors, ρ, λ and boundary of one model.
    Describe {
        #[arg(long)]
        model: String,
    },
    /// All catalog models.
    List,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub s: Complex64,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaOutput {
    pub place: Place,
    pub residue_c: f64,
    pub values: Vec<ZetaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOutput {
    pub model: String,
    pub places: Vec<Place>,
    pub a: Vec<String>,
    pub s: Vec<Complex64>,
    pub values: Vec<Complex64>,
    /// `exact`, `quadrature` or `euler-product`.
    pub exactness: String,
    pub tail_bound: f64,
    pub rational_function: Option<String>,
    pub euler: Vec<EulerProductValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaOutput {
    #[serde(flatten)]
    pub report: ThetaReport,
    /// The same constant from the boundary measures, where they apply.
    pub factorization: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub table: CountTable,
    pub fit: AsymptoticFit,
}

/// What one subcommand produced.
struct Artifact {
    name: &'static str,
    json: String,
    csv: Option<String>,
    summary: String,
}

fn parse_places(s: &str) -> Result<Vec<Place>> {
    let mut v: Vec<Place> = s.split(',').map(|p| p.parse().map_err(anyhow::Error::from)).collect::<Result<_>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

fn parse_complex_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<Complex64>().map_err(|_| anyhow!(gaheights::Error::Invalid(format!("bad complex number {t:?}"))))
        })
        .collect()
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(gaheights::Error::Invalid(msg.into()))
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, step] => {
            let f = |x: &str| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad grid {s:?}")));
            let (lo, hi, step) = (f(lo)?, f(hi)?, f(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(invalid(format!("bad grid {s:?}")));
            }
            census::geometric_grid(lo, hi, step)
        }
        [_] => s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad grid {s:?}")))).collect::<Result<_>>()?,
        _ => return Err(invalid(format!("bad grid {s:?}"))),
    };
    if grid.is_empty() {
        return Err(invalid("empty grid"));
    }
    Ok(grid)
}

fn parse_model(id: &str, metric: &str) -> Result<CompactificationModel> {
    let model = CompactificationModel::catalog(id)?;
    let metric = match metric.split_once(':') {
        None if metric == "max" => Metric::Max,
        Some(("smoothed", k)) => Metric::Smoothed { k: k.parse().map_err(|_| invalid(format!("bad metric {metric:?}")))? },
        _ => return Err(invalid(format!("bad metric {metric:?}"))),
    };
    Ok(model.with_metric(metric)?)
}

fn parse_phi(text: &str, place: Place) -> Result<TestFunction> {
    let (kind, args) = text.trim().split_once(':').unwrap_or((text.trim(), ""));
    let p = place.prime();
    let need_p = || p.ok_or_else(|| invalid(format!("{kind} lives on a finite place")));
    Ok(match kind {
        "bump" if args.is_empty() => TestFunction::Bump(BumpFunction::standard()),
        "bump" => {
            let v: Vec<f64> = args.split(',').map(|x| x.trim().parse().map_err(|_| invalid(format!("bad bump {text:?}")))).collect::<Result<_>>()?;
            let [c, r, a] = v.as_slice() else {
                return Err(invalid("bump takes center,radius,amplitude"));
            };
            TestFunction::Bump(BumpFunction::new(*c, *r, *a)?)
        }
        "ball" => TestFunction::Step(StepFunction::unit_ball(need_p()?)?),
        "units" => TestFunction::Step(StepFunction::units(need_p()?)?),
        "indicator" => {
            let (center, n) = args.split_once(':').ok_or_else(|| invalid("indicator takes center:n"))?;
            let n: i32 = n.parse().map_err(|_| invalid(format!("bad exponent in {text:?}")))?;
            TestFunction::Step(StepFunction::indicator(need_p()?, &parse_rational(center)?, n)?)
        }
        _ => return Err(invalid(format!("unknown test function {text:?}"))),
    })
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn execute(cli: &Cli) -> Result<Artifact> {
    Ok(match &cli.command {
        Command::ZetaLocal { place, s } => {
            let place: Place = place.parse()?;
            let values = parse_complex_list(s)?
                .into_iter()
                .map(|s| Ok(ZetaRow { s, value: zeta_local(place, s)? }))
                .collect::<Result<Vec<_>>>()?;
            let out = ZetaOutput { place, residue_c: residue_c(place), values };
            let summary = out.values.iter().map(|r| format!("zeta_{place}({}) = {}", r.s, r.value)).collect::<Vec<_>>().join("\n");
            Artifact { name: "zeta-local", json: json(&out)?, csv: None, summary }
        }
        Command::Osc { place, phi, d, s, grid } => {
            let place: Place = place.parse()?;
            let d: Vec<u32> = d.split(',').map(|x| x.trim().parse().map_err(|_| invalid(format!("bad degree {x:?}")))).collect::<Result<_>>()?;
            let s = parse_complex_list(s)?;
            let mut phis: Vec<TestFunction> = phi.split(';').map(|f| parse_phi(f, place)).collect::<Result<_>>()?;
            while phis.len() < d.len() {
                phis.push(phis.last().expect("at least one test function").clone());
            }
            let s = if s.len() == 1 && d.len() > 1 { vec![s[0]; d.len()] } else { s };
            let grid = match (place, grid.contains(':')) {
                // exponents of p rather than of ten
                (Place::Finite(p), true) => parse_grid(grid)?.iter().map(|g| (p as f64).powf(g.log10().round())).collect(),
                _ => parse_grid(grid)?,
            };
            let rep: DecayReport = decay_report(place, &phis, &d, &s, &grid)?;
            let summary = format!(
                "kappa = {:.4}, fitted exponent = {:.4}, envelope constant = {:.4e}, stability ratio = {:.3}",
                rep.kappa, rep.fitted_exponent, rep.fitted_c, rep.stability_ratio
            );
            Artifact { name: "osc", csv: Some(rep.to_csv()), json: json(&rep)?, summary }
        }
        Command::Clemens { model, place } => {
            let model = CompactificationModel::catalog(model)?;
            let place: Place = place.parse()?;
            let rep = ClemensReport::new(&model, &clemens_complex(&model, place, true));
            let summary = format!("{} at {place}: dimension {}, faces {:?}", rep.model, rep.dimension, rep.faces);
            Artifact { name: "clemens", json: json(&rep)?, csv: None, summary }
        }
        Command::Density { model, place, places, a, s, unrestricted, truncation, metric } => {
            let model = parse_model(model, metric)?;
            let s = parse_complex_list(s)?;
            let a = match a {
                Some(a) => a.split(',').map(|x| parse_rational(x.trim()).map_err(anyhow::Error::from)).collect::<Result<Vec<_>>>()?,
                None => vec![gaheights::Rational::from_integer(0); model.dim()],
            };
            let out = match (place, places) {
                (Some(place), None) => {
                    let place: Place = place.parse()?;
                    let ld = density::local_density(&model, place, &a, &s, !unrestricted)?;
                    DensityOutput {
                        model: ld.model,
                        places: vec![place],
                        a: ld.a,
                        s: ld.s,
                        values: ld.values,
                        exactness: if ld.exact { "exact".into() } else { "quadrature".into() },
                        tail_bound: ld.error,
                        rational_function: ld.rational_function,
                        euler: Vec::new(),
                    }
                }
                (None, Some(places)) => {
                    if a.iter().any(|x| *x != gaheights::Rational::from_integer(0)) {
                        bail!(invalid("the global value is computed for the trivial character"));
                    }
                    let places = parse_places(places)?;
                    let mut values = Vec::new();
                    let mut euler = Vec::new();
                    let mut tail: f64 = 0.0;
                    for sv in &s {
                        if sv.im != 0.0 {
                            bail!(invalid("the global value is computed for real s"));
                        }
                        let (v, e) = density::height_transform_at_zero(&model, &places, sv.re, *truncation)?;
                        tail = tail.max(v.abs() * e.tail_estimate / e.partial_product.abs());
                        values.push(Complex64::new(v, 0.0));
                        euler.push(e);
                    }
                    DensityOutput {
                        model: model.id.clone(),
                        places,
                        a: a.iter().map(|x| x.to_string()).collect(),
                        s,
                        values,
                        exactness: "euler-product".into(),
                        tail_bound: tail,
                        rational_function: None,
                        euler,
                    }
                }
                _ => bail!(invalid("give exactly one of --place and --S")),
            };
            let summary = out.s.iter().zip(&out.values).map(|(s, v)| format!("H^({s}) = {v}")).collect::<Vec<_>>().join("\n");
            Artifact { name: "density", json: json(&out)?, csv: None, summary }
        }
        Command::Theta { model, places, truncation, metric } => {
            let model = parse_model(model, metric)?;
            let places = parse_places(places)?;
            let opts = ThetaOptions { truncation: *truncation, ..ThetaOptions::default() };
            let report = density::theta_constant_with(&model, &places, &opts)?;
            let factorization = density::theta_factorization(&model, &places, *truncation).ok();
            let mut summary = format!("{}: b = {}, theta = {:.8}", report.model, report.b, report.theta);
            if report.unstable {
                summary.push_str(" (extrapolation unstable)");
            }
            if let Some(f) = factorization {
                summary.push_str(&format!(", boundary-measure factorization = {f:.8}"));
            }
            Artifact { name: "theta", json: json(&ThetaOutput { report, factorization })?, csv: None, summary }
        }
        Command::Count { model, places, bound, grid, node_cap } => {
            let model = CompactificationModel::catalog(model)?;
            let places = parse_places(places)?;
            let grid = match bound {
                Some(b) => vec![*b],
                None => parse_grid(grid)?,
            };
            let table = census::count_table(&model, &places, &grid, &CensusOptions { node_cap: *node_cap })?;
            let summary = table.rows.iter().map(|r| format!("N({}) = {}", r.b, r.n)).collect::<Vec<_>>().join("\n");
            Artifact { name: "count", csv: Some(csv_of(&census::csv_rows(&table, None))?), json: json(&table)?, summary }
        }
        Command::Fit { model, places, grid, logpow, node_cap } => {
            let model = CompactificationModel::catalog(model)?;
            let places = parse_places(places)?;
            let grid = parse_grid(grid)?;
            let b = match logpow {
                Some(b) => *b,
                None => gaheights::boundary::exponent_b(&model, &places)?,
            };
            let table = census::count_table(&model, &places, &grid, &CensusOptions { node_cap: *node_cap })?;
            let fit = census::fit_asymptotic(&table, b)?;
            let summary = format!(
                "{}: b = {}, theta_hat = {:.6} ± {:.2e}, rms residual = {:.3e}",
                table.model, fit.b, fit.theta_hat, fit.half_width, fit.rms_residual
            );
            let csv = csv_of(&census::csv_rows(&table, Some(&fit)))?;
            Artifact { name: "fit", json: json(&FitOutput { table, fit })?, csv: Some(csv), summary }
        }
        Command::Poisson { model, s, cutoff } => {
            let model = CompactificationModel::catalog(model)?;
            let out: PoissonCheck = census::poisson_crosscheck(&model, *s, *cutoff)?;
            let summary = format!(
                "lhs = {:.10}, rhs = {:.10}, relative gap = {:.3e} (tails {:.1e}, {:.1e}){}",
                out.lhs,
                out.rhs,
                out.relative_gap,
                out.lhs_tail,
                out.rhs_tail,
                if out.flagged { " [tail above tolerance]" } else { "" }
            );
            Artifact { name: "poisson", json: json(&out)?, csv: None, summary }
        }
        Command::Equi { model, places, bound, region, samples } => {
            let model = CompactificationModel::catalog(model)?;
            let places = parse_places(places)?;
            let regions: Vec<Region> = match region {
                Some(r) => r.split(';').map(|x| x.parse().map_err(anyhow::Error::from)).collect::<Result<_>>()?,
                None if model.dim() >= 2 => census::quadrants(),
                None => vec!["x1>0".parse()?],
            };
            let rep: EquiReport = census::equidistribution_test(&model, &places, *bound, &regions, cli.seed, *samples)?;
            let summary = rep
                .rows
                .iter()
                .map(|r| format!("{:<20} empirical {:.5}  predicted {:.5} ± {:.1e}", r.region, r.empirical, r.predicted, r.predicted_error))
                .collect::<Vec<_>>()
                .join("\n");
            Artifact { name: "equi", csv: Some(csv_of(&rep.rows)?), json: json(&rep)?, summary }
        }
        Command::Model { action } => match action {
            ModelAction::Describe { model } => {
                let d: ModelDescription = CompactificationModel::catalog(model)?.describe();
                let summary = format!("{}: {} (lambda = {:?})", d.id, d.description, d.lambda);
                Artifact { name: "model", json: json(&d)?, csv: None, summary }
            }
            ModelAction::List => {
                let all: Vec<ModelDescription> = CompactificationModel::all().iter().map(|m| m.describe()).collect();
                let summary = all.iter().map(|d| format!("{}  {}", d.id, d.description)).collect::<Vec<_>>().join("\n");
                Artifact { name: "models", json: json(&all)?, csv: None, summary }
            }
        },
    })
}

/// Exit status for an error: 2 invalid input, 3 budget, 4 numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use gaheights::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Budget(_) | E::DepthOverflow { .. }) => 3,
        Some(E::Pole(_) | E::NonConvergence(_) | E::Quadrature { .. } | E::Unstable(_)) => 4,
        _ => 2,
    }
}

fn deliver(cli: &Cli, art: &Artifact, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join(format!("{}.json", art.name)), &art.json)?;
            if let Some(csv) = &art.csv {
                std::fs::write(dir.join(format!("{}.csv", art.name)), csv)?;
            }
            std::fs::write(dir.join(format!("{}.txt", art.name)), format!("{}\n", art.summary))?;
            writeln!(stdout, "{}", art.summary)?;
        }
        None => {
            match (cli.format, &art.csv) {
                (Format::Csv, Some(csv)) => stdout.write_all(csv.as_bytes())?,
                (Format::Csv, None) => bail!(invalid(format!("{} has no CSV form", art.name))),
                (Format::Json, _) => stdout.write_all(art.json.as_bytes())?,
            }
            writeln!(stderr, "{}", art.summary)?;
        }
    }
    Ok(())
}

/// Runs the program on `argv` and returns the exit status.
pub fn run(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match config::merge_args(argv, SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let result = pool.install(|| execute(&cli)).and_then(|art| deliver(&cli, &art, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            exit_code(&e)
        }
    }
}
