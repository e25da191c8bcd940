use clap::Parser;

fn main() {
    let args = qbdc::cli::Cli::parse();
    if let Err(e) = qbdc::cli::run(args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
