use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;

use centerkit::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out).and_then(|()| {
        out.flush()
            .map_err(|e| centerkit::CliError::Io { path: "<stdout>".into(), source: e })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("centerkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
