use clap::Parser;

fn main() {
    let cli = stochinv_cli::Cli::parse();
    if let Err(e) = stochinv_cli::run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
