use clap::Parser;

fn main() {
    let cli = moyal_cli::Cli::parse();
    let code = moyal_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
