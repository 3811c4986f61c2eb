use std::process::ExitCode;
use std::time::Instant;

use hyperdistill::config::{parse_config, ConfigError, Invocation};
use hyperdistill::protocol::transcript;
use hyperdistill::report::{emit_report, execute_run, render_sweep, run_sweep, write_text};

const EXIT_AUDIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let inv = match parse_config(std::env::args_os()) {
        Ok(inv) => inv,
        Err(ConfigError::Cli(e)) => {
            // --help and --version land here too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if inv.entropy_seed {
        eprintln!("seed: {}", inv.run.seed);
    }
    match run(&inv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed");
            if inv.allow_audit_fail {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_AUDIT_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn output(inv: &Invocation, text: &str) -> hyperdistill::Result<()> {
    match &inv.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns whether every audit passed.
fn run(inv: &Invocation) -> hyperdistill::Result<bool> {
    let started = Instant::now();
    if let Some(n) = inv.sweep {
        let sweep = run_sweep(&inv.run, n)?;
        output(inv, &render_sweep(&sweep, inv.run.format)?)?;
        eprintln!(
            "sweep: {n} seeds, max |z| = {:.3}, {:.3}s",
            sweep.max_abs_z,
            started.elapsed().as_secs_f64()
        );
        return Ok(sweep.all_audits_passed);
    }
    let mut out = execute_run(&inv.run)?;
    let elapsed = started.elapsed().as_secs_f64();
    if inv.timing {
        out.report.wall_clock_seconds = Some(elapsed);
    }
    if let Some(path) = &inv.transcript {
        write_text(path, &transcript::to_text(&out.transcript))?;
    }
    let text = emit_report(&out.report, inv.run.format, inv.out.as_deref())?;
    if inv.out.is_none() {
        print!("{text}");
    }
    if !inv.timing {
        eprintln!("run {} finished in {elapsed:.3}s", out.report.config.run_id);
    }
    Ok(out.report.audit.passed)
}
