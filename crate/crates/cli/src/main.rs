fn main() {
    let code = gaheights_cli::run(std::env::args().collect(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
