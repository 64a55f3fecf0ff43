fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = orbitforge::cli::run_with(std::env::args_os(), None, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
