use clap::Parser;

fn main() {
    let cli = mfpo::cli::Cli::parse();
    std::process::exit(mfpo::cli::run(cli));
}
