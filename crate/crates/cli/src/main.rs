use std::process::ExitCode;

fn main() -> ExitCode {
    match leech_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(leech_cli::CliError::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("leechsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
