//! Configuration, orchestration and artifact output for the `vseed` driver.

pub mod config;
pub mod run;

use std::path::Path;
use std::time::Instant;

/// Passed (or only advisories).
pub const EXIT_OK: i32 = 0;
/// Invalid input or solver failure.
pub const EXIT_ERROR: i32 = 1;
/// A check failed.
pub const EXIT_FAILED: i32 = 2;

/// Loads, validates and runs a config file; `mode_override` replaces the configured mode.
/// Returns the exit status and prints the summary.
pub fn run_file(path: &Path, mode_override: Option<config::RunMode>) -> i32 {
    let started = Instant::now();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return EXIT_ERROR;
        }
    };
    let validated = match config::from_text(&text, path.parent().unwrap_or(Path::new("."))) {
        Ok(v) => v,
        Err(e) => {
            eprint!("{e}");
            return EXIT_ERROR;
        }
    };
    let mut cfg = validated.config;
    if let Some(m) = mode_override {
        cfg.mode = m;
    }
    for a in &validated.advisories {
        eprintln!("advisory: {a}");
    }
    let out = run::output_dir(&cfg);
    let persist = |artifacts: &[String], status: i32| {
        let mut all = artifacts.to_vec();
        if std::fs::create_dir_all(&out).and_then(|_| std::fs::write(out.join("config.txt"), &text)).is_ok() {
            all.push("config.txt".into());
        }
        if let Err(e) = run::write_manifest(&out, &text, &all, started, status) {
            eprintln!("cannot write manifest: {e}");
        }
    };
    match run::execute(&cfg, &out) {
        Ok(o) => {
            print!("{}", o.summary);
            let status = if o.passed { EXIT_OK } else { EXIT_FAILED };
            // a partial sweep is a solver failure, persisted before reporting it
            let status = match &o.detail {
                run::Detail::Sweep(r) if r.partial() => EXIT_ERROR,
                _ => status,
            };
            persist(&o.artifacts, status);
            println!("artifacts in {}", out.display());
            status
        }
        Err(e) => {
            eprintln!("solver error: {e}");
            persist(&[], EXIT_ERROR);
            EXIT_ERROR
        }
    }
}

/// Prints the validation report; 0 when valid, 1 otherwise.
pub fn validate_file(path: &Path) -> i32 {
    match config::from_file(path) {
        Ok(v) => {
            println!("valid");
            if v.advisories.is_empty() {
                println!("advisories: none");
            } else {
                println!("advisories:");
                for a in &v.advisories {
                    println!("  - {a}");
                }
            }
            EXIT_OK
        }
        Err(e) => {
            print!("{e}");
            if !e.to_string().ends_with('\n') {
                println!();
            }
            EXIT_ERROR
        }
    }
}

pub fn audit(dir: &Path) -> i32 {
    match run::audit_dir(dir) {
        Ok((verdict, text)) => {
            print!("{text}");
            match verdict {
                run::AuditVerdict::Consistent => {
                    println!("consistent");
                    EXIT_OK
                }
                run::AuditVerdict::Mismatch(_) => EXIT_FAILED,
            }
        }
        Err(e) => {
            eprintln!("cannot audit {}: {e}", dir.display());
            EXIT_ERROR
        }
    }
}
