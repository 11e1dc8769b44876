//! Command-line front end for the `finsler` binary.
//!
//! Every JSON report carries a [`RunManifest`] with the resolved settings.
//! Exit codes: 0 on success, 2 for invalid input, 3 for numerical failures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::averaging::{averaged_metric, QuadConfig};
use crate::bundle::bundle_examples;
use crate::calculus::FdConfig;
use crate::connection::classify;
use crate::error::{FinslerError, Result};
use crate::gap::{full_gap_report, GapConfig};
use crate::metric::{parse_vector, CurveSpec, MetricSpec};
use crate::search::{landscape_scan, nelder_mead, scan_to_csv, unicorn_candidates, FamilySpec, SearchConfig};
use crate::tensor::matrix_to_rows;
use crate::transport::{parallel_transport, OdeConfig};

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "finsler", version, about = "Numerical Finsler geometry on a single chart")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for every sampled quantity.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "FINSLER_THREADS")]
    threads: Option<usize>,
    /// Report path (stdout when absent). For `bundle`, the target directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra CSV table: the fixed-differential profile for `gap`, the grid for `scan`.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// JSON file of defaults; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base finite-difference step.
    #[arg(long = "fd-h0", global = true)]
    fd_h0: Option<f64>,
    /// Richardson extrapolation levels.
    #[arg(long = "fd-levels", global = true)]
    fd_levels: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Largest sampled Berwald and Landsberg tensor norms.
    Classify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Parallel transport of one vector along a curve.
    Transport {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        y: String,
        /// Also report the transport differential at this vector.
        #[arg(long)]
        nu: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        refine_check: bool,
    },
    /// Averaged Riemannian metric at a point.
    Average {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        point: String,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Every transport identity check on one metric, curve and reference vector.
    Gap {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        nu: String,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        fiber_samples: Option<usize>,
        #[arg(long)]
        nu_samples: Option<usize>,
        #[arg(long)]
        unit_ball_samples: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Nelder–Mead minimization of the Landsberg deviation over a family.
    Search {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        theta0: String,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Deviations on a regular parameter grid. `--out x.csv` writes CSV.
    Scan {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Write the bundled metrics, curves and families into `--out`.
    Bundle,
}

/// Defaults read from `--config`. Keys mirror the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    fd_h0: Option<f64>,
    fd_levels: Option<usize>,
    steps: Option<usize>,
    refine_check: Option<bool>,
    order: Option<usize>,
    samples: Option<usize>,
    fiber_samples: Option<usize>,
    nu_samples: Option<usize>,
    unit_ball_samples: Option<usize>,
    budget: Option<usize>,
    tol: Option<f64>,
    grid: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: Value,
    pub version: String,
    pub timestamp: String,
}

/// `SOURCE_DATE_EPOCH` when set, so that reports can be reproduced byte for
/// byte; the current time otherwise.
fn timestamp() -> Result<String> {
    let when = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(raw) => {
            let secs: i64 = raw
                .trim()
                .parse()
                .map_err(|_| FinslerError::invalid("SOURCE_DATE_EPOCH", "must be an integer"))?;
            chrono::DateTime::from_timestamp(secs, 0)
                .ok_or_else(|| FinslerError::invalid("SOURCE_DATE_EPOCH", "out of range"))?
        }
        Err(_) => chrono::Utc::now(),
    };
    Ok(when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FinslerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load<T>(path: &Path, what: &str, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
    parse(&read(path)?).map_err(|e| e.context(format!("{what} {}", path.display())))
}

fn vector_arg(raw: &str, field: &str) -> Result<Vec<f64>> {
    parse_vector(raw).map_err(|_| FinslerError::invalid(field, format!("cannot parse `{raw}` as comma-separated numbers")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| FinslerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Session {
    global: GlobalArgs,
    file: ConfigFile,
    inputs: BTreeMap<String, String>,
}

impl Session {
    fn seed(&self) -> u64 {
        self.global.seed.or(self.file.seed).unwrap_or(0)
    }

    fn fd(&self) -> Result<FdConfig> {
        let def = FdConfig::default();
        let cfg = FdConfig {
            h0: self.global.fd_h0.or(self.file.fd_h0).unwrap_or(def.h0),
            richardson_levels: self.global.fd_levels.or(self.file.fd_levels).unwrap_or(def.richardson_levels),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn ode(&self, steps: Option<usize>, refine_check: bool) -> Result<OdeConfig> {
        let def = OdeConfig::default();
        let cfg = OdeConfig {
            steps: steps.or(self.file.steps).unwrap_or(def.steps),
            refine_check: refine_check || self.file.refine_check.unwrap_or(def.refine_check),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn quad(&self, order: Option<usize>) -> Result<QuadConfig> {
        let cfg = QuadConfig {
            angular_order: order.or(self.file.order).unwrap_or(QuadConfig::default().angular_order),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn input(&mut self, key: &str, value: impl Into<String>) {
        self.inputs.insert(key.to_string(), value.into());
    }

    fn spec(&mut self, path: &Path) -> Result<MetricSpec> {
        self.input("spec", path.display().to_string());
        load(path, "spec", MetricSpec::from_json)
    }

    fn curve(&mut self, path: &Path) -> Result<CurveSpec> {
        self.input("curve", path.display().to_string());
        load(path, "curve", CurveSpec::from_json)
    }

    fn family(&mut self, path: &Path) -> Result<FamilySpec> {
        self.input("family", path.display().to_string());
        load(path, "family", FamilySpec::from_json)
    }

    fn emit(&self, command: &str, config: Value, result: Value) -> Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            inputs: self.inputs.clone(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp()?,
        };
        let report = json!({ "manifest": manifest, "result": result });
        let text = serde_json::to_string_pretty(&report)? + "\n";
        match &self.global.out {
            Some(path) => write_text(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn execute(command: Command, s: &mut Session) -> Result<()> {
    let seed = s.seed();
    match command {
        Command::Classify { spec, samples } => {
            let fd = s.fd()?;
            let spec = s.spec(&spec)?;
            let samples = samples.or(s.file.samples).unwrap_or(16);
            let class = classify(&spec, samples, seed, &fd)?;
            s.emit(
                "classify",
                json!({ "fd": fd, "seed": seed, "samples": samples }),
                serde_json::to_value(class)?,
            )
        }
        Command::Transport {
            spec,
            curve,
            y,
            nu,
            steps,
            refine_check,
        } => {
            let fd = s.fd()?;
            let ode = s.ode(steps, refine_check)?;
            let spec = s.spec(&spec)?;
            let curve = s.curve(&curve)?;
            s.input("y", y.as_str());
            let y = vector_arg(&y, "y")?;
            let tr = parallel_transport(&spec, &curve, &y, &ode, &fd)?;
            let mut result = json!({
                "endpoint": tr.endpoint,
                "differential": matrix_to_rows(&tr.differential),
                "f_drift": tr.f_drift,
                "refine_delta": tr.refine_delta,
                "path": tr.path,
            });
            if let Some(raw) = nu {
                s.input("nu", raw.as_str());
                let nu = vector_arg(&raw, "nu")?;
                let d = parallel_transport(&spec, &curve, &nu, &ode, &fd)?.differential;
                result["nu_differential"] = json!(matrix_to_rows(&d));
            }
            s.emit("transport", json!({ "fd": fd, "ode": ode, "seed": seed }), result)
        }
        Command::Average { spec, point, order } => {
            let fd = s.fd()?;
            let quad = s.quad(order)?;
            let spec = s.spec(&spec)?;
            s.input("point", point.as_str());
            let x = vector_arg(&point, "point")?;
            let avg = averaged_metric(&spec, &x, &quad, &fd)?;
            s.emit(
                "average",
                json!({ "fd": fd, "quad": quad, "seed": seed }),
                json!({
                    "point": x,
                    "g_bar": matrix_to_rows(&avg.g_bar),
                    "total_measure": avg.total_measure,
                    "refine_delta": avg.refine_delta,
                    "angular_order": avg.angular_order,
                }),
            )
        }
        Command::Gap {
            spec,
            curve,
            nu,
            steps,
            order,
            fiber_samples,
            nu_samples,
            unit_ball_samples,
            samples,
        } => {
            let def = GapConfig::default();
            let config = GapConfig {
                fd: s.fd()?,
                ode: s.ode(steps, false)?,
                quad: s.quad(order)?,
                fiber_samples: fiber_samples.or(s.file.fiber_samples).unwrap_or(def.fiber_samples),
                nu_samples: nu_samples.or(s.file.nu_samples).unwrap_or(def.nu_samples),
                unit_ball_samples: unit_ball_samples
                    .or(s.file.unit_ball_samples)
                    .unwrap_or(def.unit_ball_samples),
                classify_samples: samples.or(s.file.samples).unwrap_or(def.classify_samples),
                seed,
            };
            let spec = s.spec(&spec)?;
            let curve = s.curve(&curve)?;
            s.input("nu", nu.as_str());
            let nu = vector_arg(&nu, "nu")?;
            let report = full_gap_report(&spec, &curve, &nu, &config)?;
            if let Some(path) = &s.global.csv {
                write_text(path, &report.profile_csv())?;
            }
            let mut result = serde_json::to_value(&report)?;
            if let Value::Object(map) = &mut result {
                map.remove("config");
            }
            s.emit("gap", serde_json::to_value(config)?, result)
        }
        Command::Search {
            family,
            theta0,
            budget,
            tol,
            samples,
        } => {
            let fd = s.fd()?;
            let def = SearchConfig::default();
            let search = SearchConfig {
                samples: samples.or(s.file.samples).unwrap_or(def.samples),
                seed,
                budget: budget.or(s.file.budget).unwrap_or(def.budget),
                tol: tol.or(s.file.tol).unwrap_or(def.tol),
            };
            let family = s.family(&family)?;
            s.input("theta0", theta0.as_str());
            let theta0 = vector_arg(&theta0, "theta0")?;
            if theta0.len() != family.num_params() {
                return Err(FinslerError::invalid(
                    "theta0",
                    format!("expected {} parameters", family.num_params()),
                ));
            }
            let trace = nelder_mead(&family, &theta0, &search, &fd)?;
            s.emit("search", json!({ "fd": fd, "search": search }), serde_json::to_value(trace)?)
        }
        Command::Scan { family, grid, samples } => {
            let fd = s.fd()?;
            let grid = grid.or(s.file.grid).unwrap_or(21);
            let samples = samples.or(s.file.samples).unwrap_or(SearchConfig::default().samples);
            let family = s.family(&family)?;
            let rows = landscape_scan(&family, grid, samples, seed, &fd)?;
            let table = scan_to_csv(&family, &rows);
            if let Some(path) = &s.global.csv {
                write_text(path, &table)?;
            }
            let candidates = unicorn_candidates(&rows, 1e-5, 1e-3);
            for c in &candidates {
                eprintln!(
                    "NOTICE: grid point {:?} has landsberg_dev < 1e-5 but berwald_dev > 1e-3",
                    c.theta
                );
            }
            let to_csv = s.global.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
            if to_csv {
                return write_text(s.global.out.as_ref().expect("checked"), &table);
            }
            let candidates: Vec<_> = candidates.into_iter().cloned().collect();
            s.emit(
                "scan",
                json!({ "fd": fd, "seed": seed, "samples": samples, "grid": grid }),
                json!({ "rows": rows, "landsberg_small_berwald_large": candidates }),
            )
        }
        Command::Bundle => {
            let dir = s
                .global
                .out
                .clone()
                .ok_or_else(|| FinslerError::invalid("out", "bundle needs a target directory"))?;
            for path in bundle_examples(&dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn exit_code(err: &FinslerError) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let file = match &cli.global.config {
        Some(path) => match load(path, "config", |t| Ok(serde_json::from_str::<ConfigFile>(t)?)) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
        },
        None => ConfigFile::default(),
    };
    let threads = cli.global.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INVALID;
        }
    };
    let mut session = Session {
        global: cli.global,
        file,
        inputs: BTreeMap::new(),
    };
    match pool.install(|| execute(cli.command, &mut session)) {
        Ok(()) => 0,
        Err(e) => {
            let kind = if e.is_numerical() { "numerical failure" } else { "error" };
            eprintln!("{kind}: {e}");
            exit_code(&e)
        }
    }
}
