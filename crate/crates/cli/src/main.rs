//! `landau` command-line driver.
//!
//! Exit codes: 0 success, 1 compile error, 2 input error, 3 verification
//! failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landau_core::codegen::{emit_c, Machine};
use landau_core::harness::native::build_native;
use landau_core::harness::{check_jacobian, report_stats, JacobianReport, Step};
use landau_core::inputs::{bind_inputs, read_inputs, render_outputs, Inputs};
use landau_core::{adplan, codegen, compile, Compilation, CompileOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Parser)]
#[command(
    name = "landau",
    version,
    about = "Compiler for the Landau differentiable-system language"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Source file.
    file: PathBuf,
    /// Override a `const int` declaration.
    #[arg(long = "define", short = 'D', value_name = "NAME=VAL")]
    defines: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    C,
    Lir,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Interp,
    C,
}

#[derive(Subcommand)]
enum Command {
    /// Compile to C or to the lowered intermediate form.
    Build {
        #[command(flatten)]
        src: Source,
        #[arg(long, value_enum, default_value = "c")]
        emit: Emit,
        /// Output file (standard output if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the function on inputs from a JSON file.
    Run {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, value_enum, default_value = "interp")]
        target: Target,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare every exported derivative against central finite differences.
    Check {
        #[command(flatten)]
        src: Source,
        /// Check at this point only; otherwise at random points in [0.5, 1.5].
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Fixed finite-difference step (automatic if omitted).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-entry table as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print packed versus dense derivative storage.
    Stats {
        #[command(flatten)]
        src: Source,
    },
    /// Print intermediate artifacts.
    Dump {
        #[command(flatten)]
        src: Source,
        /// Reversed action trace.
        #[arg(long)]
        actions: bool,
        /// Derivative storage plan.
        #[arg(long)]
        plan: bool,
        /// Per-statement differentiation.
        #[arg(long)]
        diff: bool,
    },
}

enum Failure {
    Compile(String),
    Input(String),
    Verify(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Compile(_) => 1,
            Failure::Input(_) => 2,
            Failure::Verify(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Compile(m) | Failure::Input(m) | Failure::Verify(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn parse_defines(defs: &[String]) -> Result<BTreeMap<String, i64>, Failure> {
    let mut out = BTreeMap::new();
    for d in defs {
        let (name, val) = d.split_once('=').ok_or_else(|| {
            Failure::Input(format!("error: malformed define `{d}`, expected NAME=VAL"))
        })?;
        let v: i64 = val
            .trim()
            .parse()
            .map_err(|_| Failure::Input(format!("error: define `{d}` needs an integer value")))?;
        out.insert(name.trim().to_string(), v);
    }
    Ok(out)
}

fn load(src: &Source) -> Result<Compilation, Failure> {
    let defines = parse_defines(&src.defines)?;
    let text = std::fs::read_to_string(&src.file).map_err(|e| {
        Failure::Input(if e.kind() == std::io::ErrorKind::NotFound {
            format!("error: source file not found: {}", src.file.display())
        } else {
            format!("error: cannot read {}: {e}", src.file.display())
        })
    })?;
    compile(&text, &CompileOptions { defines }).map_err(|d| {
        Failure::Compile(
            d.render(&src.file.display().to_string())
                .trim_end()
                .to_string(),
        )
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Input(format!("error: cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn inputs_from(path: &Path) -> Result<Inputs, Failure> {
    read_inputs(path).map_err(|e| Failure::Input(format!("error: {e}")))
}

fn random_inputs(c: &Compilation, rng: &mut StdRng) -> Inputs {
    c.lir
        .args
        .iter()
        .map(|&a| {
            let v = &c.lir.vars[a];
            (
                v.name.clone(),
                (0..v.size).map(|_| rng.gen_range(0.5..1.5)).collect(),
            )
        })
        .collect()
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Build { src, emit, output } => {
            let c = load(&src)?;
            let text = match emit {
                Emit::C => emit_c(&c.lir),
                Emit::Lir => c.lir.to_string(),
            };
            write_out(output.as_deref(), &text)
        }
        Command::Run {
            src,
            inputs,
            target,
            output,
        } => {
            let c = load(&src)?;
            let inputs = inputs_from(&inputs)?;
            let values = match target {
                Target::Interp => Machine::new(&c.lir)
                    .run(&inputs)
                    .map_err(|e| Failure::Input(format!("error: {e}")))?,
                Target::C => {
                    let args = bind_inputs(&c.lir, &inputs)
                        .map_err(|e| Failure::Input(format!("error: {e}")))?;
                    let build = build_native(&c.lir)
                        .map_err(|e| Failure::Compile(format!("error: {e}")))?;
                    let mut rows = build
                        .run(&[args])
                        .map_err(|e| Failure::Compile(format!("error: {e}")))?;
                    rows.pop().unwrap_or_default()
                }
            };
            write_out(output.as_deref(), &render_outputs(&c.lir.name, &values))
        }
        Command::Check {
            src,
            inputs,
            tol,
            step,
            points,
            seed,
            report,
        } => {
            let c = load(&src)?;
            if tol.is_nan() || tol < 0.0 {
                return Err(Failure::Input(format!(
                    "error: tolerance must be non-negative, got {tol}"
                )));
            }
            let step = step.map_or(Step::Auto, Step::Fixed);
            let points: Vec<Inputs> = match inputs {
                Some(p) => vec![inputs_from(&p)?],
                None => {
                    let mut rng = StdRng::seed_from_u64(seed);
                    (0..points).map(|_| random_inputs(&c, &mut rng)).collect()
                }
            };
            let mut reports: Vec<JacobianReport> = Vec::new();
            for pt in &points {
                let r = check_jacobian(&c, pt, tol, step).map_err(|e| match e {
                    landau_core::harness::FdError::Input(e) => {
                        Failure::Input(format!("error: {e}"))
                    }
                    e => Failure::Verify(format!("error: {e}")),
                })?;
                reports.push(r);
            }
            let mut csv = String::from("point,cell,param,ad,fd,relerr,pass\n");
            let mut text = String::new();
            for (k, r) in reports.iter().enumerate() {
                if reports.len() > 1 {
                    text.push_str(&format!("point {k}\n"));
                }
                text.push_str(&r.render_text());
                for line in r.render_csv().lines().skip(1) {
                    csv.push_str(&format!("{k},{line}\n"));
                }
            }
            let failed: usize = reports.iter().map(JacobianReport::failures).sum();
            let total: usize = reports.iter().map(|r| r.entries.len()).sum();
            text.push_str(&format!(
                "checked {total} entries at {} points, {failed} failed\n",
                reports.len()
            ));
            print!("{text}");
            if let Some(p) = report {
                write_out(Some(&p), &csv)?;
            }
            if failed > 0 {
                return Err(Failure::Verify(format!(
                    "error: {failed} of {total} Jacobian entries exceed tolerance {tol:e}"
                )));
            }
            Ok(())
        }
        Command::Stats { src } => {
            let c = load(&src)?;
            write_out(None, &report_stats(&c.program, &c.lir.plan).render())
        }
        Command::Dump {
            src,
            actions,
            plan,
            diff,
        } => {
            if !(actions || plan || diff) {
                return Err(Failure::Input(
                    "error: dump needs --actions, --plan or --diff".into(),
                ));
            }
            let c = load(&src)?;
            let mut text = String::new();
            if actions {
                text.push_str(&c.trace.render_reversed(&c.program));
            }
            if plan {
                text.push_str(&adplan::render_plan(&c.program, &c.lir.plan));
            }
            if diff {
                text.push_str(&codegen::lir::render_differentiation(
                    &c.program,
                    &c.lir.plan,
                ));
            }
            write_out(None, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
        Err(_) => {
            eprintln!("error: internal compiler error");
            ExitCode::from(70)
        }
    }
}
