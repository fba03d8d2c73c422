use clap::Parser;

fn main() {
    let cli = advcal::app::Cli::parse();
    let outcome = advcal::app::run(&cli);
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    std::process::exit(outcome.code);
}
