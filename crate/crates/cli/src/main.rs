//! `canondae`: command-line front end.
//!
//! Exit status is 0 on success, 2 when the input is rejected or a check
//! fails (diagnostics go to stderr as JSON), 1 on internal errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use canondae::hypotheses::{certify_self_adjoint, check_index1, Mode};
use canondae::io::{self, Stack};
use canondae::maxwell::{assemble, band_structure};
use canondae::propagation::{monodromy_at, solve_ivp};
use canondae::selftest::{self, SelftestOptions};
use canondae::spectral::{band_scan, floquet, point_spectrum, point_spectrum_candidates, translate_family};
use canondae::{Error, Tolerances};

const STACK_SCHEMA: &str = "stack.json: { \"period\"?: d, \"n\"?: n, \"J\": n x n, \"V\"?: n x n, \
\"layers\": [ { \"thickness\": t, \"H\": n x n, \"W\": n x n } ] }; entries are [re, im] or reals";
const MATERIALS_SCHEMA: &str = "materials.json: { \"period\"?: d, \"layers\": [ { \"thickness\": t, \
\"eps\": 3 x 3, \"mu\": 3 x 3, \"xi\"?: 3 x 3 } ], \"mode\"?: \"eigenfrequency\" | \"disorder\" | \"lossy\", \"omega\"?: w }";
const SOURCE_SCHEMA: &str = "source.json: { \"pieces\": [ { \"kind\": \"constant\" | \"exponential\", \
\"coeff\": [..], \"rate\"?: [re, im] } ] }, one piece per layer";

#[derive(Parser, Debug)]
#[command(name = "canondae", version, about = "Periodic canonical DAEs: hypotheses, reduction, bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for band scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Skew-Hermitian, Hermitian and rank tolerance.
    #[arg(long, global = true)]
    tol_struct: Option<f64>,

    /// Relative singular-value threshold for invertibility.
    #[arg(long, global = true)]
    tol_sing: Option<f64>,

    /// Unit-circle tolerance for multipliers (also CANONDAE_TOL_CIRCLE).
    #[arg(long, global = true)]
    tol_circle: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structure of a stack file.
    Validate {
        #[arg(long)]
        stack: PathBuf,
    },
    /// Index-1 hypotheses at a shift z0.
    Check {
        #[arg(long)]
        stack: PathBuf,
        /// Shift as "re,im".
        #[arg(long, default_value = "0,1")]
        z0: String,
        /// definition, simplified, pencil or sufficient.
        #[arg(long, default_value = "definition")]
        mode: String,
    },
    /// Self-adjointness certificate.
    Certify {
        #[arg(long)]
        stack: PathBuf,
        /// Non-real shift as "re,im".
        #[arg(long)]
        z0: Option<String>,
    },
    /// Monodromy matrix and Floquet multipliers.
    Monodromy {
        #[arg(long)]
        stack: PathBuf,
        /// Spectral parameter as "re,im".
        #[arg(long)]
        lambda: String,
    },
    /// Initial value problem, CSV trajectory.
    Ivp {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        /// Initial value file: [..] or { "f0": [..] }.
        #[arg(long)]
        f0: PathBuf,
        /// Optional source file.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Spectral parameter as "re,im".
        #[arg(long)]
        lambda: String,
        /// Number of uniformly spaced output points.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Band scan over real lambda, CSV rows.
    Bands {
        #[arg(long, required_unless_present = "materials", conflicts_with = "materials")]
        stack: Option<PathBuf>,
        /// Build the stack from a Maxwell materials file instead.
        #[arg(long)]
        materials: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        lmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        lmax: f64,
        #[arg(long)]
        num: usize,
        /// Tangential wavenumbers, used with --materials.
        #[arg(long, allow_hyphen_values = true, requires = "materials")]
        k1: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "materials")]
        k2: Option<f64>,
        /// Also write edges and flagged points as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Infinite-multiplicity eigenvalue test at a real lambda.
    Pointspec {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Period translates used for the independence check.
        #[arg(long, default_value_t = 4)]
        translates: usize,
    },
    /// Maxwell dispersion table, CSV rows.
    MaxwellBands {
        #[arg(long)]
        materials: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        k1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k2: Option<f64>,
        #[arg(long)]
        wmin: f64,
        #[arg(long)]
        wmax: f64,
        #[arg(long)]
        num: usize,
    },
    /// Assemble a Maxwell materials file into a stack file.
    MaxwellStack {
        #[arg(long)]
        materials: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        k1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k2: Option<f64>,
    },
    /// Invariant suite on seeded random systems.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Smaller suite.
        #[arg(long)]
        quick: bool,
    },
}

enum Failure {
    /// Rejected input or failed check: JSON diagnostics, exit 2.
    Rejected(Value),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::EigensolverFailure
            | Error::NonFiniteGenerator
            | Error::StepUnderflow { .. }
            | Error::GridMisaligned(_) => Failure::Internal(e.to_string()),
            other => Failure::Rejected(diagnostic(&other, None)),
        }
    }
}

fn diagnostic(e: &Error, schema: Option<&str>) -> Value {
    let kind = format!("{e:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    let mut v = json!({ "error": kind, "message": e.to_string() });
    if let Some(s) = schema {
        v["schema"] = json!(s);
    }
    v
}

fn with_schema<T>(r: canondae::Result<T>, schema: &str) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Parse(_) | Error::ShapeMismatch(_) | Error::UnsupportedSource(_) => {
            Failure::Rejected(diagnostic(&e, Some(schema)))
        }
        other => other.into(),
    })
}

fn parse_complex(s: &str) -> Result<Complex64, Failure> {
    let bad = || {
        Failure::Rejected(json!({
            "error": "Parse",
            "message": format!("expected a complex number as \"re,im\", got \"{s}\""),
        }))
    };
    let mut parts = s.split(',').map(str::trim);
    let re: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let im: f64 = match parts.next() {
        Some(p) => p.parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn tolerances(cli: &Cli) -> Result<Tolerances, Failure> {
    let mut tol = Tolerances::default();
    if let Some(t) = cli.tol_struct {
        tol.structure = t;
    }
    if let Some(t) = cli.tol_sing {
        tol.singular = t;
    }
    let env = std::env::var("CANONDAE_TOL_CIRCLE").ok();
    if let Some(t) = cli.tol_circle {
        tol.circle = t;
    } else if let Some(s) = env {
        tol.circle = s.trim().parse().map_err(|_| {
            Failure::Rejected(json!({
                "error": "Parse",
                "message": format!("CANONDAE_TOL_CIRCLE is not a number: \"{s}\""),
            }))
        })?;
    }
    if !tol.is_valid() {
        return Err(Failure::Rejected(json!({
            "error": "InvalidTolerance",
            "message": "tolerances must be positive and finite",
        })));
    }
    Ok(tol)
}

fn load_stack(path: &Path, tol: &Tolerances) -> Result<Stack, Failure> {
    with_schema(io::read_text(path).and_then(|t| io::parse_stack(&t, tol)), STACK_SCHEMA)
}

fn load_materials(path: &Path, k1: Option<f64>, k2: Option<f64>) -> Result<canondae::MaxwellProblem, Failure> {
    with_schema(
        io::read_text(path).and_then(|t| io::parse_materials(&t, k1, k2)),
        MATERIALS_SCHEMA,
    )
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Output text plus an optional diagnostic that turns the run into exit 2.
struct Outcome {
    text: String,
    failed: Option<Value>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, failed: None }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Validate { stack } => {
            let s = load_stack(stack, &tol)?;
            let report = s.coeffs.validate(&tol);
            let out = json!({
                "n": s.coeffs.dim(),
                "rank_j": s.splitting.n1(),
                "period": s.coeffs.period(),
                "layers": s.coeffs.len(),
                "validation": io::validation_json(&report),
            });
            let failed = (!report.passed).then(|| {
                json!({ "error": "ValidationFailed", "message": "H not Hermitian or W not positive definite on some layer" })
            });
            Ok(Outcome { text: pretty(&out), failed })
        }
        Command::Check { stack, z0, mode } => {
            let z0 = parse_complex(z0)?;
            let mode: Mode = mode.parse()?;
            let s = load_stack(stack, &tol)?;
            let report = check_index1(&s.coeffs, &s.splitting, z0, mode, &tol)?;
            let failed = (!report.passed).then(|| {
                let failures: Vec<String> = report
                    .failures()
                    .map(|c| match c.layer {
                        Some(k) => format!("layer {k}: {} fails", c.label),
                        None => format!("{} fails", c.label),
                    })
                    .collect();
                json!({ "error": "Index1Failed", "message": "index-1 hypotheses fail", "failures": failures })
            });
            Ok(Outcome {
                text: pretty(&io::index1_json(&report)),
                failed,
            })
        }
        Command::Certify { stack, z0 } => {
            let z0 = z0.as_deref().map(parse_complex).transpose()?;
            let s = load_stack(stack, &tol)?;
            let cert = certify_self_adjoint(&s.coeffs, &s.splitting, z0, &tol)?;
            let candidates = point_spectrum_candidates(&s.coeffs, &s.splitting, &tol)?;
            let failed = (!cert.certified()).then(|| {
                json!({ "error": "NotCertified", "message": "self-adjointness could not be certified" })
            });
            Ok(Outcome {
                text: pretty(&io::certificate_json(&cert, &candidates)),
                failed,
            })
        }
        Command::Monodromy { stack, lambda } => {
            let lambda = parse_complex(lambda)?;
            let s = load_stack(stack, &tol)?;
            let m = monodromy_at(&s.coeffs, &s.splitting, lambda, &tol)?;
            let f = floquet(&m, s.coeffs.period(), &tol)?;
            Ok(Outcome::ok(pretty(&io::monodromy_json(&m, &f))))
        }
        Command::Ivp {
            stack,
            t0,
            t1,
            f0,
            source,
            lambda,
            samples,
        } => {
            let z = parse_complex(lambda)?;
            let s = load_stack(stack, &tol)?;
            let f0 = with_schema(io::read_text(f0).and_then(|t| io::parse_vector(&t)), "f0.json: [..] or { \"f0\": [..] }")?;
            let source = source
                .as_deref()
                .map(|p| with_schema(io::read_text(p).and_then(|t| io::parse_source(&t)), SOURCE_SCHEMA))
                .transpose()?;
            let sol = solve_ivp(&s.coeffs, &s.splitting, z, source.as_ref(), *t0, *t1, &f0, &tol)?;
            Ok(Outcome::ok(io::ivp_csv(&sol.uniform_samples(*samples)?)))
        }
        Command::Bands {
            stack,
            materials,
            lmin,
            lmax,
            num,
            k1,
            k2,
            summary,
        } => {
            let (coeffs, splitting) = match (stack, materials) {
                (Some(p), _) => {
                    let s = load_stack(p, &tol)?;
                    (s.coeffs, s.splitting)
                }
                (None, Some(p)) => {
                    let sys = assemble(&load_materials(p, *k1, *k2)?, &tol)?;
                    (sys.coeffs, sys.splitting)
                }
                (None, None) => unreachable!("clap requires one of --stack, --materials"),
            };
            let scan = band_scan(&coeffs, &splitting, *lmin, *lmax, *num, &tol)?;
            if let Some(path) = summary {
                write(Some(path), &pretty(&io::band_summary_json(&scan)))?;
            }
            Ok(Outcome::ok(io::bands_csv(&scan)))
        }
        Command::Pointspec {
            stack,
            lambda,
            translates,
        } => {
            let s = load_stack(stack, &tol)?;
            let finding = point_spectrum(&s.coeffs, &s.splitting, *lambda, &tol)?;
            let check = translate_family(&s.coeffs, &s.splitting, &finding, *translates, &tol);
            Ok(Outcome::ok(pretty(&io::point_spectrum_json(&finding, check.as_ref()))))
        }
        Command::MaxwellBands {
            materials,
            k1,
            k2,
            wmin,
            wmax,
            num,
        } => {
            let problem = load_materials(materials, *k1, *k2)?;
            let table = band_structure(&problem, *wmin, *wmax, *num, &tol)?;
            Ok(Outcome::ok(io::dispersion_csv(&table)))
        }
        Command::MaxwellStack { materials, k1, k2 } => {
            let sys = assemble(&load_materials(materials, *k1, *k2)?, &tol)?;
            let out = io::stack_json(sys.j.matrix(), &sys.coeffs, Some(sys.splitting.v()));
            Ok(Outcome::ok(pretty(&out)))
        }
        Command::Selftest { seed, quick } => {
            let opts = if *quick {
                SelftestOptions::quick(*seed)
            } else {
                SelftestOptions::full(*seed)
            };
            let report = selftest::run(&opts, &tol)?;
            let checks: Vec<Value> = report
                .checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "passed": c.passed,
                        "worst": c.worst,
                        "bound": c.bound,
                        "detail": c.detail,
                    })
                })
                .collect();
            let out = json!({ "seed": seed, "quick": quick, "passed": report.passed(), "checks": checks });
            let failed = (!report.passed()).then(|| json!({ "error": "SelftestFailed", "message": "invariant suite failed" }));
            Ok(Outcome { text: pretty(&out), failed })
        }
    }
}

fn write(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| {
            Failure::Rejected(json!({ "error": "Io", "message": format!("{}: {e}", p.display()) }))
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Internal(format!("stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({ "error": "Internal", "message": e.to_string() }));
            return ExitCode::from(1);
        }
    }
    let result = run(&cli).and_then(|outcome| {
        write(cli.output.as_ref(), &outcome.text)?;
        Ok(outcome.failed)
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(diag)) | Err(Failure::Rejected(diag)) => {
            eprintln!("{diag}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("{}", json!({ "error": "Internal", "message": msg }));
            ExitCode::from(1)
        }
    }
}
