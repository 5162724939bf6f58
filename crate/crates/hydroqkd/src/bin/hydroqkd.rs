use clap::Parser;

fn main() {
    let cli = hydroqkd::cli::Cli::parse();
    std::process::exit(hydroqkd::cli::run(cli));
}
