use std::process::ExitCode;

fn main() -> ExitCode {
    let result = combidose_cli::parse_cli(std::env::args_os()).and_then(|cfg| combidose_cli::run(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(combidose_cli::CliError::Info(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
