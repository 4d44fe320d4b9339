//! Command-line front end. Exit codes: 0 when every check passes, 1 when a
//! check fails or a run ends early, 2 on configuration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::linear::analyze as analyze_linear;
use crate::report::{render_svg, verdict_report, write_csv, write_derivs_csv};
use crate::scenario::{run_scenario, Scenario, SystemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "funnel", version, about = "Funnel control scenarios, linear analysis and a-priori bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario, check it and write CSV, verdicts and SVG.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Relative degree, high-frequency gain and zero dynamics of a linear plant.
    Analyze { file: PathBuf },
    /// A-priori error envelopes of a funnel scenario.
    Bounds {
        scenario: PathBuf,
        #[arg(long, env = "FUNNEL_OUT_DIR", default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run scenario files, or every `.toml` in the given directories, in parallel.
    Batch {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    #[arg(long, env = "FUNNEL_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Factor applied to the solver tolerances in the margin-stability rerun.
    #[arg(long, default_value_t = 0.5)]
    tolerance_scale: f64,
    #[arg(long)]
    no_svg: bool,
    /// Also write `<id>.derivs.csv` with every derivative level of y and e.
    #[arg(long)]
    derivatives: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { scenario, out } => {
            let (code, text) = run_file(&scenario, &out);
            print!("{text}");
            code
        }
        Command::Analyze { file } => analyze_file(&file),
        Command::Bounds { scenario, out_dir } => bounds_file(&scenario, &out_dir),
        Command::Batch { paths, out } => batch(&paths, &out),
    }
}

fn config_error(msg: impl std::fmt::Display) -> (i32, String) {
    (EXIT_CONFIG, format!("error: {msg}\n"))
}

/// Runs one scenario and returns the exit code and the text to print.
fn run_file(path: &Path, out: &OutputArgs) -> (i32, String) {
    let scn = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if !(out.tolerance_scale > 0.0 && out.tolerance_scale.is_finite()) {
        return config_error("--tolerance-scale must be positive");
    }
    let outcome = match run_scenario(&scn, out.tolerance_scale) {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    if let Err(e) = fs::create_dir_all(&out.out_dir) {
        return config_error(format!("cannot create {}: {e}", out.out_dir.display()));
    }
    let id = &outcome.id;
    let mut text = verdict_report(id, &outcome.verdicts);
    let write_err = |what: &str, e: &dyn std::fmt::Display| config_error(format!("cannot write {what}: {e}"));
    if let Some(traj) = &outcome.trajectory {
        let _ = writeln!(
            text,
            "status {:?}, {} samples, {} accepted steps, {} rejected",
            traj.status,
            traj.len(),
            traj.stats.accepted,
            traj.stats.rejected
        );
        let csv_path = out.out_dir.join(format!("{id}.csv"));
        if let Err(e) = fs::File::create(&csv_path).map_err(csv::Error::from).and_then(|f| write_csv(traj, f)) {
            return write_err(&csv_path.display().to_string(), &e);
        }
        if out.derivatives {
            let path = out.out_dir.join(format!("{id}.derivs.csv"));
            if let Err(e) = fs::File::create(&path).map_err(csv::Error::from).and_then(|f| write_derivs_csv(traj, f)) {
                return write_err(&path.display().to_string(), &e);
            }
        }
        if let Some(b) = &outcome.baseline {
            let path = out.out_dir.join(format!("{id}.baseline.csv"));
            if let Err(e) = fs::File::create(&path).map_err(csv::Error::from).and_then(|f| write_csv(b, f)) {
                return write_err(&path.display().to_string(), &e);
            }
        }
        if !out.no_svg {
            let path = out.out_dir.join(format!("{id}.svg"));
            if let Err(e) = fs::write(&path, render_svg(traj, outcome.baseline.as_ref())) {
                return write_err(&path.display().to_string(), &e);
            }
        }
    }
    if let Some(c) = &outcome.comparison {
        for m in [&c.a, &c.b] {
            let _ = writeln!(
                text,
                "{}: max |u| = {:.4e}, L2 effort = {:.4e}, epsilon = {:.6}",
                m.label, m.max_u, m.l2_effort, m.epsilon
            );
        }
        let _ = writeln!(text, "max error gap = {:.4e}", c.max_error_gap);
    }
    let path = out.out_dir.join(format!("{id}.verdicts.txt"));
    if let Err(e) = fs::write(&path, &text) {
        return write_err(&path.display().to_string(), &e);
    }
    (if outcome.passed() { EXIT_OK } else { EXIT_FAIL }, text)
}

/// Any file with a `[system]` table; other keys are ignored.
#[derive(Deserialize)]
struct SystemFile {
    system: SystemSpec,
}

fn analyze_file(path: &Path) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return report(config_error(format!("cannot read {}: {e}", path.display()))),
    };
    let spec = match toml::from_str::<SystemFile>(&text) {
        Ok(f) => f.system,
        Err(e) => return report(config_error(format!("cannot parse {}: {e}", path.display()))),
    };
    let ss = match spec.state_space() {
        Ok(Some(ss)) => ss,
        Ok(None) => return report(config_error("analyze needs a linear or mass-on-car system")),
        Err(e) => return report(config_error(e)),
    };
    match analyze_linear(&ss) {
        Ok(r) => {
            print!("{r}");
            EXIT_OK
        }
        Err(e) => report((EXIT_FAIL, format!("analysis failed: {e}\n"))),
    }
}

fn report((code, text): (i32, String)) -> i32 {
    if code == EXIT_OK {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    code
}

const ENVELOPE_POINTS: usize = 1001;

fn bounds_file(path: &Path, out_dir: &Path) -> i32 {
    let scn = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return report(config_error(e)),
    };
    let result = scn.build().and_then(|b| scn.bounds(&b));
    let b = match result {
        Ok(b) => b,
        Err(e) => return report(config_error(e)),
    };
    println!("scenario {}", scn.id);
    println!("mu0 = {:.12}", b.mu0);
    for k in 0..b.c.len() {
        println!("k={} c={:.12} mu={:.12} envelope={:.12}", k + 1, b.c[k], b.mu[k], b.envelopes[k]);
    }
    let mut csv = String::from("t,phi");
    for k in 0..b.envelopes.len() {
        let _ = write!(csv, ",bound_e{k}");
    }
    csv.push('\n');
    for i in 0..ENVELOPE_POINTS {
        let t = scn.sim.t_end * i as f64 / (ENVELOPE_POINTS - 1) as f64;
        let _ = write!(csv, "{t:.16e},{:.16e}", b.phi.eval(t));
        for k in 0..b.envelopes.len() {
            let _ = write!(csv, ",{:.16e}", b.envelope_at(k, t));
        }
        csv.push('\n');
    }
    let file = out_dir.join(format!("{}.bounds.csv", scn.id));
    if let Err(e) = fs::create_dir_all(out_dir).and_then(|_| fs::write(&file, csv)) {
        return report(config_error(format!("cannot write {}: {e}", file.display())));
    }
    println!("envelopes written to {}", file.display());
    EXIT_OK
}

fn scenario_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| format!("cannot list {}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "toml"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn batch(paths: &[PathBuf], out: &OutputArgs) -> i32 {
    let files = match scenario_files(paths) {
        Ok(f) => f,
        Err(e) => return report(config_error(e)),
    };
    let results: Vec<(i32, String)> = files.par_iter().map(|f| run_file(f, out)).collect();
    let mut worst = EXIT_OK;
    for (f, (code, text)) in files.iter().zip(&results) {
        let tag = match *code {
            EXIT_OK => "ok",
            EXIT_FAIL => "FAILED",
            _ => "ERROR",
        };
        println!("{tag:>6}  {}", f.display());
        if *code != EXIT_OK {
            for line in text.lines() {
                println!("        {line}");
            }
        }
        worst = worst.max(*code);
    }
    worst
}
