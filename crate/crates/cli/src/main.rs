use clap::Parser;

fn main() {
    let cli = rfaffect::Cli::parse();
    if let Err(e) = rfaffect::run(cli) {
        eprintln!("rfaffect: {e}");
        std::process::exit(e.exit_code());
    }
}
