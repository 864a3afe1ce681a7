use clap::Parser;

use geomint::cli::{dispatch, Cli};

/// Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_usage() { 1 } else { 2 });
    }
}
