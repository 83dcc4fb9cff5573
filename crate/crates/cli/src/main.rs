use mrvox_cli::CliError;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let mut out = std::io::stdout();
    match mrvox_cli::run(&args, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
