fn main() {
    let code =
        noharm::cli::main_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
