use clap::Parser;

fn main() {
    let cli = catrep::cli::Cli::parse();
    std::process::exit(catrep::cli::run(cli));
}
