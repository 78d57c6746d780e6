use clap::Parser;
use treedyn_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    let code = treedyn_cli::run_cli(
        &cli,
        |k| std::env::var(k).ok(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
