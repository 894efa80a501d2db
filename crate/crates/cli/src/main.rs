use clap::Parser;

fn main() {
    let cli = nmd_cli::Cli::parse();
    std::process::exit(nmd_cli::run(cli));
}
