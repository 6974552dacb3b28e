use clap::Parser;

fn main() {
    let cli = eca_gateway::cli::Cli::parse();
    if let Err(e) = eca_gateway::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
