use clap::Parser;
use sevfit_cli::{execute_with_threads, Cli};

fn main() {
    let cli = Cli::parse();
    let result = cli.global.resolve().and_then(|cfg| execute_with_threads(cli.command, &cfg, cli.global.threads));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
