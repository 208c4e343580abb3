use std::process::ExitCode;

fn main() -> ExitCode {
    match kgstitch::cli::run(std::env::args_os()) {
        Ok(outcome) => {
            for line in outcome.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kgstitch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
