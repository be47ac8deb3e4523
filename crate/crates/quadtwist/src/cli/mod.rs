//! Command-line front end.
//!
//! `quadtwist <command> [--config file] [--key value ...]`. Flags override the
//! config file. Exit codes: 0 pass, 1 tolerance or numerical failure, 2
//! invalid configuration.

pub mod commands;
pub mod config;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::Error;
pub use commands::{execute, report_body, Outcome};
pub use config::RunConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "quadtwist", version, about = "Moments of quadratic twists of Dirichlet L-functions")]
struct Cli {
    /// lvalue, moment1, moment2, predict, compare or verify.
    #[arg(value_parser = ["lvalue", "moment1", "moment2", "predict", "compare", "verify"])]
    command: String,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    q: Option<String>,
    /// Character label N:e1,... (default: smallest even primitive of --psi-order).
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    psi_order: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    l: Option<String>,
    /// One X, a list `a,b,c`, or a doubling sweep `2^10..2^16`.
    #[arg(long = "X")]
    x: Option<String>,
    /// A number or `auto` for ⌊X^{1/8}⌋.
    #[arg(long = "Y")]
    y: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// 1, 2 or both.
    #[arg(long)]
    moment: Option<String>,
    /// Comma list of d for `lvalue`.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// JSON report path; without it the report body goes to stdout.
    #[arg(long)]
    out: Option<String>,
    /// CSV path (default: the JSON path with a .csv extension).
    #[arg(long)]
    csv: Option<String>,
    /// Comma list of suites for `verify`.
    #[arg(long)]
    suites: Option<String>,
    #[arg(long)]
    diag_convention: Option<String>,
    #[arg(long)]
    nondiag_phase: Option<String>,
    /// Deliberately corrupt one case of the named suite.
    #[arg(long)]
    inject_fault: Option<String>,
    /// Tolerance override, `name=value`.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Any other config key, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn resolve(&self) -> crate::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.set("command", &self.command)?;
        let flags = [
            ("q", &self.q),
            ("psi", &self.psi),
            ("psi_order", &self.psi_order),
            ("r", &self.r),
            ("h", &self.h),
            ("l", &self.l),
            ("X", &self.x),
            ("Y", &self.y),
            ("delta", &self.delta),
            ("moment", &self.moment),
            ("d", &self.d),
            ("workers", &self.workers),
            ("out", &self.out),
            ("csv", &self.csv),
            ("suites", &self.suites),
            ("diag_convention", &self.diag_convention),
            ("nondiag_phase", &self.nondiag_phase),
            ("inject_fault", &self.inject_fault),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        for (prefix, list) in [("tol.", &self.tol), ("", &self.set)] {
            for kv in list {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {kv}")))?;
                cfg.set(&format!("{prefix}{}", k.trim()), v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The report body as written, and its SHA-256.
pub fn render_body(cfg: &RunConfig, outcome: &Outcome) -> (String, String) {
    let body = serde_json::to_string_pretty(&report_body(cfg, outcome)).expect("report serializes");
    let digest = Sha256::digest(body.as_bytes());
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    (body, hex)
}

fn csv_path(cfg: &RunConfig) -> Option<PathBuf> {
    match (&cfg.csv, &cfg.out) {
        (Some(c), _) => Some(PathBuf::from(c)),
        (None, Some(o)) => Some(Path::new(o).with_extension("csv")),
        _ => None,
    }
}

fn write_csv(path: &Path, table: &commands::CsvTable) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// Writes the JSON report (body plus runtime section) and the CSV table.
pub fn write_reports(cfg: &RunConfig, outcome: &Outcome, elapsed: f64) -> std::io::Result<String> {
    let (body, digest) = render_body(cfg, outcome);
    let csv = csv_path(cfg);
    let runtime = json!({
        "workers": cfg.workers,
        "elapsed_seconds": elapsed,
        "stage_seconds": outcome.timings,
        "body_sha256": digest,
        "csv": csv.as_ref().map(|p| p.display().to_string()),
    });
    // the body is spliced in verbatim so its bytes, and hence its digest, are
    // exactly those of the rendered body
    let runtime = serde_json::to_string_pretty(&runtime).expect("runtime serializes");
    let doc = format!("{{\n\"body\": {body},\n\"runtime\": {runtime}\n}}\n");
    if let Some(out) = &cfg.out {
        std::fs::write(out, doc)?;
    } else {
        println!("{body}");
    }
    if let Some(p) = csv {
        write_csv(&p, &outcome.csv)?;
    }
    Ok(digest)
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::NotInvertible { .. } => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start {} workers: {e}", cfg.workers);
            return EXIT_CONFIG;
        }
    };
    let t0 = Instant::now();
    let outcome = match pool.install(|| execute(&cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{:?} failed: {e}", cfg.command);
            return exit_for(&e);
        }
    };
    for line in &outcome.summary {
        eprintln!("{line}");
    }
    match write_reports(&cfg, &outcome, t0.elapsed().as_secs_f64()) {
        Ok(digest) => eprintln!("report body sha256 {digest}"),
        Err(e) => {
            eprintln!("cannot write report: {e}");
            return EXIT_FAIL;
        }
    }
    if outcome.passed {
        return EXIT_PASS;
    }
    if let Some(s) = outcome.results.get("first_failure").and_then(|v| v.as_str()) {
        eprintln!("verify failed: first failing suite is {s}");
    } else {
        eprintln!("{:?}: tolerance checks failed", cfg.command);
    }
    EXIT_FAIL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_configuration_exits_2() {
        assert_eq!(run(["quadtwist", "lvalue", "--r", "36"]), EXIT_CONFIG);
        assert_eq!(run(["quadtwist", "lvalue", "--h", "17"]), EXIT_CONFIG);
        // 17:3 has order 16 and is odd
        assert_eq!(run(["quadtwist", "lvalue", "--psi", "17:3"]), EXIT_CONFIG);
        assert_eq!(run(["quadtwist", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["quadtwist", "verify", "--suites", "nope"]), EXIT_CONFIG);
        assert_eq!(run(["quadtwist", "lvalue", "--tol", "afe"]), EXIT_CONFIG);
    }

    #[test]
    fn flags_override_the_file() {
        let dir = std::env::temp_dir().join(format!("quadtwist-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.cfg");
        std::fs::write(&file, "q = 17\nr = 34\nh = 3\nd = 3\n").unwrap();
        let cli = Cli::try_parse_from(["quadtwist", "lvalue", "--config", file.to_str().unwrap(), "--h", "5", "--tol", "afe=1e-3"]).unwrap();
        let cfg = cli.resolve().unwrap();
        assert_eq!((cfg.h, cfg.d.clone(), cfg.tol("afe")), (5, vec![3], 1e-3));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn report_files_and_fault_exit() {
        let dir = std::env::temp_dir().join(format!("quadtwist-rep-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("r.json");
        let o = out.to_str().unwrap();
        assert_eq!(run(["quadtwist", "verify", "--suites", "omega", "--out", o]), EXIT_PASS);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["body"]["config"]["q"], 17);
        assert!(doc["runtime"]["body_sha256"].as_str().unwrap().len() == 64);
        assert!(std::fs::read_to_string(dir.join("r.csv")).unwrap().starts_with("suite,check"));
        assert_eq!(run(["quadtwist", "verify", "--suites", "omega", "--inject-fault", "omega", "--out", o]), EXIT_FAIL);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["body"]["results"]["first_failure"], "omega");
        std::fs::remove_dir_all(dir).unwrap();
    }
}
