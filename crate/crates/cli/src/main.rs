use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use simlab_cli::compare::compare;
use simlab_cli::config::{ConfigError, Scenario};
use simlab_cli::{exit, ll, output, presets, run_scenario};
use simlab_core::lasry_lions::{EnvelopeMode, LipKind, LipschitzFunction};
use simlab_core::rng::pool_from_env;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "simlab",
    version,
    about = "Monte Carlo checks of functional inequalities for dissipative SPDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a preset) and write its artifacts.
    Run {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Overrides the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lasry–Lions property suite on a function corpus.
    LlTest {
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.5])]
        eps_grid: Vec<f64>,
        /// `default` or a JSON file of `{dim, name, kind}` entries.
        #[arg(long, default_value = "default")]
        corpus: String,
        #[arg(long, value_enum, default_value_t = Mode::Grid)]
        mode: Mode,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out/ll")]
        out: PathBuf,
    },
    /// Diff two report.json files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets, or print one as a scenario file.
    Presets { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Grid,
    Descent,
}

#[derive(Deserialize)]
struct CorpusEntry {
    dim: usize,
    name: String,
    kind: LipKind,
}

fn config_error(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    exit::CONFIG
}

fn finish_reports(dir: &Path, reports: &[simlab_core::InequalityReport]) -> Result<(), i32> {
    std::fs::create_dir_all(dir).map_err(config_error)?;
    output::write_reports(&dir.join("report.json"), reports).map_err(config_error)?;
    let file = std::fs::File::create(dir.join("summary.csv")).map_err(config_error)?;
    output::write_summary(file, reports).map_err(config_error)
}

fn print_verdicts(reports: &[simlab_core::InequalityReport]) {
    for r in reports {
        let mark = match (r.verdict.is_fail(), r.expected_failure) {
            (true, true) => "xfail",
            (false, true) => "XPASS",
            (true, false) => "FAIL",
            (false, false) => r.verdict.as_str(),
        };
        let degraded = if r.degraded { " (degraded)" } else { "" };
        println!("{mark:>17}  {}  margin={:.4e}{degraded}", r.check, r.margin);
    }
}

fn run(config: Option<PathBuf>, preset: Option<String>, out: Option<PathBuf>) -> i32 {
    let loaded = match (config, preset) {
        (Some(path), None) => Scenario::load(&path),
        (None, Some(name)) => match presets::preset(&name) {
            Some(cfg) => Scenario::from_config(cfg),
            None => Err(ConfigError::Invalid(format!("unknown preset {name:?}"))),
        },
        _ => Err(ConfigError::Invalid(
            "give a config file or --preset".into(),
        )),
    };
    let scenario = match loaded {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let outcome = match run_scenario(&scenario) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::FAIL;
        }
    };
    let dir = out.unwrap_or_else(|| scenario.config.output_dir.clone());
    if let Err(e) = output::write_outcome(&dir, &outcome) {
        return config_error(e);
    }
    print_verdicts(&outcome.reports);
    let code = outcome.exit_code();
    println!(
        "{} reports written to {} (exit {code})",
        outcome.reports.len(),
        dir.display()
    );
    code
}

fn ll_test(eps_grid: Vec<f64>, corpus: String, mode: Mode, seed: u64, out: PathBuf) -> i32 {
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0)) {
        return config_error("eps grid must be positive");
    }
    let mode = match mode {
        Mode::Grid => EnvelopeMode::Grid,
        Mode::Descent => EnvelopeMode::Descent,
    };
    let (m1, m2) = match (ll::unit_model(1), ll::unit_model(2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return config_error(e),
    };
    let functions = if corpus == "default" {
        simlab_core::lasry_lions::default_corpus(&m1, &m2, seed)
    } else {
        let text = match std::fs::read_to_string(&corpus) {
            Ok(t) => t,
            Err(e) => return config_error(format!("{corpus}: {e}")),
        };
        let entries: Vec<CorpusEntry> = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return config_error(format!("{corpus}: {e}")),
        };
        let mut fs = Vec::with_capacity(entries.len());
        for e in entries {
            let model = match e.dim {
                1 => &m1,
                2 => &m2,
                d => {
                    return config_error(format!(
                        "corpus entry {} has dim {d}; only 1 and 2 are supported",
                        e.name
                    ))
                }
            };
            fs.push((e.dim, LipschitzFunction::new(e.name, model, e.kind)));
        }
        fs
    };
    let reports = match pool_from_env()
        .install(|| ll::run_corpus(&functions, &m1, &m2, &eps_grid, mode, seed))
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::FAIL;
        }
    };
    if let Err(code) = finish_reports(&out, &reports) {
        return code;
    }
    print_verdicts(&reports);
    let failed = reports.iter().filter(|r| r.is_unexpected()).count();
    println!(
        "{} reports, {failed} failed, written to {}",
        reports.len(),
        out.display()
    );
    if failed > 0 {
        exit::FAIL
    } else {
        exit::OK
    }
}

fn compare_cmd(a: PathBuf, b: PathBuf, out: Option<PathBuf>) -> i32 {
    let (ra, rb) = match (output::read_reports(&a), output::read_reports(&b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) => return config_error(format!("{}: {e}", a.display())),
        (_, Err(e)) => return config_error(format!("{}: {e}", b.display())),
    };
    let doc = match compare(&ra, &rb) {
        Ok(d) => d,
        Err(e) => return config_error(e),
    };
    let text = serde_json::to_string_pretty(&doc).expect("diff serializes");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text + "\n") {
                return config_error(e);
            }
        }
        None => println!("{text}"),
    }
    if doc.flips > 0 {
        exit::FAIL
    } else {
        exit::OK
    }
}

fn presets_cmd(name: Option<String>) -> i32 {
    match name {
        None => {
            for (name, about) in presets::PRESETS {
                println!("{name:<26}{about}");
            }
            exit::OK
        }
        Some(name) => match presets::preset(&name) {
            Some(cfg) => match toml::to_string(&cfg) {
                Ok(text) => {
                    print!("{text}");
                    exit::OK
                }
                Err(e) => config_error(e),
            },
            None => config_error(format!("unknown preset {name:?}")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            preset,
            out,
        } => run(config, preset, out),
        Command::LlTest {
            eps_grid,
            corpus,
            mode,
            seed,
            out,
        } => ll_test(eps_grid, corpus, mode, seed, out),
        Command::Compare { a, b, out } => compare_cmd(a, b, out),
        Command::Presets { name } => presets_cmd(name),
    };
    ExitCode::from(code as u8)
}
