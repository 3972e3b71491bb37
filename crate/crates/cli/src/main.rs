use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ivmeasure_cli::{run, RunConfig, EXIT_ERROR};

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            // status 2 is reserved for findings about the data
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let out = run(&cfg);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(out.code as u8)
}
