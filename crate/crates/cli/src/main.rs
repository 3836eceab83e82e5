use std::io::ErrorKind;
use std::process::ExitCode;

use bessel_flow_cli::CliError;

fn main() -> ExitCode {
    match bessel_flow_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                // reader went away, as with `| head`
                CliError::Io(io) if io.kind() == ErrorKind::BrokenPipe => return ExitCode::SUCCESS,
                CliError::Usage(msg) => eprintln!("{}", msg.trim_end()),
                other => eprintln!("bflow: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
