//! `helicity`: runs one experiment and writes its results as CSV.
//!
//! Exit status: 0 on success, 1 if `selftest` finds a failing criterion,
//! 2 on usage errors, 3 when a computation fails.

mod config;
mod fieldspec;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use helicity_core::acceptance;
use helicity_core::constructor::{smoothness_order, standard_junctions, theorem2_pair};
use helicity_core::fields::lemma1_extension;
use helicity_core::flow::{map_distance, PoincareMap};
use helicity_core::geometry::disk_samples;
use helicity_core::invariants::{calabi, form_helicity, helicity, quantization_check, MapCheck, QuadratureGrid};
use helicity_core::linking::asymptotic_linking;
use helicity_core::report::{write_csv, Row};
use helicity_core::{Disk, HamiltonianField};

use fieldspec::{Defaults, FieldSpec};

#[derive(Parser, Debug)]
#[command(name = "helicity", version, about = "Helicity-type invariants of periodic Hamiltonian flows on a disk")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true, env = "HELICITY_WORKERS")]
    workers: Option<usize>,

    /// File of `key = value` lines read as extra flags; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the CSV here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct FieldArgs {
    /// Field spec: zero | linear[:W] | twist[:C2|C3] | lemma1[:N,EPS] | theorem2:BASE,n=N[,k=1|3]
    #[arg(long)]
    field: FieldSpec,

    /// Rotation rate for `--field linear`.
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,

    /// Quadratic coefficient for `--field twist`.
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,

    /// Cubic coefficient for `--field twist`.
    #[arg(long, allow_negative_numbers = true)]
    c3: Option<f64>,

    /// Turn count for `--field lemma1`.
    #[arg(long, allow_negative_numbers = true)]
    n: Option<i64>,

    /// Collar width for `--field lemma1`.
    #[arg(long)]
    eps: Option<f64>,

    /// Disk `I <= I0`; a field with its own invariant disk uses that one.
    #[arg(long, default_value_t = 1.0)]
    i0: f64,
}

#[derive(Args, Debug, Clone)]
struct GridArg {
    /// Quadrature nodes in action, angle and time: `A,B,C` or one number for all three.
    #[arg(long, default_value = "64,64,64", value_parser = parse_grid)]
    grid: QuadratureGrid,
}

fn parse_grid(s: &str) -> Result<QuadratureGrid, String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad node count `{p}`")))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = match parts[..] {
        [n] => QuadratureGrid::cube(n),
        [a, b, c] => QuadratureGrid::new(a, b, c),
        _ => return Err(format!("expected A,B,C or N, got `{s}`")),
    };
    grid.map_err(|e| e.to_string())
}

fn parse_order(s: &str) -> Result<u32, String> {
    match s.trim() {
        "1" => Ok(1),
        "3" => Ok(3),
        _ => Err(format!("smoothing order must be 1 or 3, got `{s}`")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Helicity of a field over the solid torus.
    #[command(args_override_self = true)]
    Helicity {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        grid: GridArg,
    },
    /// Helicity computed from the 1-form `p dq - H dt`; equals -2 x helicity.
    #[command(args_override_self = true)]
    FormHelicity {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        grid: GridArg,
    },
    /// Calabi invariant of a field that is flat at the boundary.
    #[command(args_override_self = true)]
    Calabi {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        grid: GridArg,
    },
    /// Helicity difference of two flows with the same period map, on the lattice S^2/2.
    #[command(args_override_self = true)]
    Quantize {
        #[arg(long)]
        field1: FieldSpec,
        #[arg(long)]
        field2: FieldSpec,
        #[arg(long, default_value_t = 1.0)]
        i0: f64,
        #[command(flatten)]
        grid: GridArg,
        /// Sample points for the period-map comparison.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        /// Largest accepted distance between the two period maps.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Smooth flows with the period map of `--field` and shifted helicity.
    #[command(args_override_self = true)]
    Theorem2 {
        /// Base field (2 pi periodic).
        #[arg(long)]
        field: FieldSpec,
        /// Turn counts, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
        n: Vec<i64>,
        /// Smoothing order at the junctions (1 or 3).
        #[arg(long, default_value_t = 1, value_parser = parse_order)]
        k: u32,
        #[arg(long, default_value_t = 1.0)]
        i0: f64,
        #[command(flatten)]
        grid: GridArg,
    },
    /// Calabi invariant of the cap extension as the collar width shrinks.
    #[command(args_override_self = true)]
    Lemma1Limit {
        #[arg(long, allow_negative_numbers = true)]
        n: i64,
        #[arg(long, default_value_t = 1.0)]
        i0: f64,
        /// Collar widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
        #[command(flatten)]
        grid: GridArg,
    },
    /// Monte-Carlo asymptotic linking of trajectory pairs.
    #[command(args_override_self = true)]
    Linking {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 16)]
        periods: usize,
        #[arg(long, default_value_t = 64)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Period map on a deterministic set of disk points.
    #[command(args_override_self = true)]
    Poincare {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        periods: usize,
    },
    /// Runs the acceptance suite; exits with 1 if a criterion fails.
    Selftest,
}

enum Failure {
    Usage(String),
    Numerical(helicity_core::Error),
    Selftest,
}

impl From<helicity_core::Error> for Failure {
    fn from(e: helicity_core::Error) -> Self {
        Failure::Numerical(e)
    }
}

struct Prepared {
    spec: FieldSpec,
    field: HamiltonianField,
    disk: Disk,
}

fn prepare(spec: &FieldSpec, defaults: &Defaults, i0: f64, flag: &str) -> Result<Prepared, Failure> {
    let spec = spec.resolve(defaults).map_err(|e| Failure::Usage(format!("{flag}: {e}")))?;
    let field = spec.build(i0)?;
    let disk = match field.invariant_disk() {
        Some(d) => d,
        None => Disk::new(i0)?,
    };
    Ok(Prepared { spec, field, disk })
}

fn prepare_args(a: &FieldArgs) -> Result<Prepared, Failure> {
    let defaults = Defaults {
        omega: a.omega,
        c2: a.c2,
        c3: a.c3,
        n: a.n,
        eps: a.eps,
    };
    prepare(&a.field, &defaults, a.i0, "--field")
}

fn run(command: &Command) -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    match command {
        Command::Helicity { field, grid } => {
            let p = prepare_args(field)?;
            let r = helicity(&p.field, p.disk, grid.grid)?;
            rows.push(
                Row::new("helicity", p.spec.to_string(), p.disk.i0(), r.value)
                    .grid(r.grid)
                    .err_proxy(r.refinement_delta),
            );
        }
        Command::FormHelicity { field, grid } => {
            let p = prepare_args(field)?;
            let form = form_helicity(&p.field, p.disk, grid.grid)?;
            let hel = helicity(&p.field, p.disk, grid.grid)?.value;
            rows.push(
                Row::new("form-helicity", p.spec.to_string(), p.disk.i0(), form)
                    .grid(grid.grid)
                    .err_proxy((form + 2.0 * hel).abs())
                    .extra_float("helicity", hel),
            );
        }
        Command::Calabi { field, grid } => {
            let p = prepare_args(field)?;
            let r = calabi(&p.field, p.disk, grid.grid)?;
            rows.push(
                Row::new("calabi", p.spec.to_string(), p.disk.i0(), r.value)
                    .grid(r.grid)
                    .err_proxy(r.refinement_delta),
            );
        }
        Command::Quantize {
            field1,
            field2,
            i0,
            grid,
            samples,
            tolerance,
        } => {
            let a = prepare(field1, &Defaults::default(), *i0, "--field1")?;
            let b = prepare(field2, &Defaults::default(), *i0, "--field2")?;
            if (a.disk.i0() - b.disk.i0()).abs() > 1e-12 * a.disk.i0() {
                return Err(Failure::Usage("--field1 and --field2 live on different disks".into()));
            }
            let check = MapCheck {
                samples: *samples,
                tolerance: *tolerance,
                ..MapCheck::default()
            };
            let q = quantization_check(&a.field, &b.field, a.disk, grid.grid, &check)?;
            rows.push(
                Row::new("quantize", format!("{}|{}", a.spec, b.spec), a.disk.i0(), q.delta)
                    .grid(grid.grid)
                    .err_proxy(q.residual)
                    .extra("n", q.n_nearest)
                    .extra_float("lattice_unit", q.lattice_unit)
                    .extra_float("map_distance", q.map_distance),
            );
        }
        Command::Theorem2 { field, n, k, i0, grid } => {
            let base = prepare(field, &Defaults::default(), *i0, "--field")?;
            let base_helicity = helicity(&base.field, base.disk, grid.grid)?.value;
            let m1 = PoincareMap::new(base.field.clone());
            let s2 = base.disk.area() * base.disk.area();
            for &turns in n {
                let h2 = theorem2_pair(&base.field, turns, base.disk, *k)?;
                let shift = helicity(&h2, base.disk, grid.grid)?.value - base_helicity;
                let dist = map_distance(&m1, &PoincareMap::new(h2.clone()), base.disk, 50)?;
                let order = smoothness_order(&h2, &standard_junctions(), 4);
                rows.push(
                    Row::new("theorem2", format!("theorem2:{},n={turns},k={k}", base.spec), base.disk.i0(), shift)
                        .grid(grid.grid)
                        .err_proxy((shift.abs() - turns.unsigned_abs() as f64 * s2 / 2.0).abs())
                        .extra("n", turns)
                        .extra("k", k)
                        .extra_float("map_distance", dist)
                        .extra("smoothness", order),
                );
            }
        }
        Command::Lemma1Limit { n, i0, eps, grid } => {
            let limit = -2.0 * std::f64::consts::PI.powi(2) * *n as f64 * i0 * i0;
            let mut prev: Option<(f64, f64)> = None;
            for &e in eps {
                let h = lemma1_extension(*n, *i0, e)?;
                let r = calabi(&h, Disk::new(i0 + e)?, grid.grid)?;
                let err = (r.value - limit).abs();
                let mut row = Row::new("lemma1-limit", format!("lemma1:{n},{e}"), *i0, r.value)
                    .grid(r.grid)
                    .err_proxy(err)
                    .extra("n", n)
                    .extra_float("eps", e)
                    .extra_float("limit", limit);
                if let Some((pe, perr)) = prev {
                    row = row.extra_float("order", (perr / err).ln() / (pe / e).ln());
                }
                prev = Some((e, err));
                rows.push(row);
            }
        }
        Command::Linking {
            field,
            periods,
            pairs,
            seed,
        } => {
            let p = prepare_args(field)?;
            let est = asymptotic_linking(&p.field, p.disk, *periods, *pairs, *seed)?;
            let twice = 2.0 * helicity(&p.field, p.disk, QuadratureGrid::default())?.value;
            rows.push(
                Row::new("linking", p.spec.to_string(), p.disk.i0(), est.mean_total)
                    .err_proxy(est.std_error)
                    .extra_float("calibrated", est.calibrated())
                    .extra_float("twice_helicity", twice)
                    .extra("orientation_sign", est.orientation_sign)
                    .extra("periods", periods)
                    .extra("pairs", pairs)
                    .extra("seed", seed),
            );
        }
        Command::Poincare { field, points, periods } => {
            let p = prepare_args(field)?;
            let map = PoincareMap::new(p.field.clone()).with_periods(*periods);
            for x in disk_samples(p.disk, *points) {
                let y = map.apply(x)?;
                let det = map.jacobian_determinant(x, 1e-5)?;
                rows.push(
                    Row::new("poincare", p.spec.to_string(), p.disk.i0(), x.distance(y))
                        .err_proxy((det - 1.0).abs())
                        .extra_float("p", x.p)
                        .extra_float("q", x.q)
                        .extra_float("p_image", y.p)
                        .extra_float("q_image", y.q)
                        .extra("periods", periods),
                );
            }
        }
        Command::Selftest => {
            let outcomes = acceptance::run_all();
            for o in &outcomes {
                eprintln!("{o}");
            }
            rows.extend(outcomes.iter().flat_map(|o| o.rows.iter().cloned()));
            if outcomes.iter().any(|o| !o.passed) {
                emit(&rows, None).map_err(Failure::Numerical)?;
                return Err(Failure::Selftest);
            }
        }
    }
    Ok(rows)
}

fn emit(rows: &[Row], out: Option<&PathBuf>) -> helicity_core::Result<()> {
    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| helicity_core::Error::Output(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            write_csv(rows, &mut w)?;
            w.flush().map_err(|e| helicity_core::Error::Output(e.to_string()))
        }
        None => write_csv(rows, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: could not start workers: {e}");
            return ExitCode::from(3);
        }
    };
    let result = pool.install(|| run(&cli.command));
    let result = result.and_then(|rows| emit(&rows, cli.out.as_ref()).map_err(Failure::Numerical));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Selftest) => ExitCode::from(1),
    }
}
