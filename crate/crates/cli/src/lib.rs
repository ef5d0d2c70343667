//! Command-line front end for `nearwall-core`.
//!
//! Exit codes: 0 success, 2 configuration, 3 parse, 4 capacity,
//! 5 validation failure, 6 I/O.

pub mod config;
mod error;
pub mod run;
pub mod sweep;
pub mod validate;
pub mod vtk;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};

use clap::Parser;

pub use config::{Args, Mode, RunConfig};
pub use error::CliError;

/// Parses `argv`, runs the selected mode, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(args: Args) -> Result<(), CliError> {
    let cfg = RunConfig::from_args(args)?;
    let stdout = std::io::stdout();
    match &cfg.mode {
        Mode::Run => run::run(&cfg, stdout.lock()),
        Mode::Validate => {
            let g = run::load_geometry(&cfg)?;
            let checks = validate::validate(&cfg, &g)?;
            validate::write_checks(&checks, stdout.lock())
                .map_err(|e| CliError::io("<stdout>", e))?;
            match checks.iter().find(|c| !c.passed) {
                Some(c) => Err(CliError::Validation(c.name.to_string())),
                None => Ok(()),
            }
        }
        Mode::Sweep(list) => {
            let g = run::load_geometry(&cfg)?;
            let rows = sweep::sweep(&cfg, &g, list);
            let written = match &cfg.out_csv {
                Some(path) => File::create(path)
                    .and_then(|f| {
                        let mut w = BufWriter::new(f);
                        sweep::write_sweep_csv(&rows, &mut w)?;
                        w.flush()
                    })
                    .map_err(|e| CliError::io(path, e)),
                None => sweep::write_sweep_csv(&rows, stdout.lock())
                    .map_err(|e| CliError::io("<stdout>", e)),
            };
            written?;
            for (b, row) in &rows {
                if let Err(e) = row {
                    eprintln!("B={b}: {e}");
                }
            }
            match rows.into_iter().find_map(|(_, r)| r.err()) {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
    }
}
