use clap::error::ErrorKind;
use clap::Parser;
use meanfield_cli::cli::{run, Cli};
use meanfield_cli::CliError;

fn main() {
    let code = match Cli::try_parse() {
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            0
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
        Ok(cli) => {
            let stdout = std::io::stdout();
            match run(cli, &mut stdout.lock()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("{}", e.to_json());
                    e.exit_code()
                }
            }
        }
    };
    std::process::exit(code);
}
