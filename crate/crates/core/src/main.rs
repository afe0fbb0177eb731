fn main() {
    let verbosity = std::env::args().filter(|a| a.starts_with("-v") && a.chars().skip(1).all(|c| c == 'v')).map(|a| a.len() - 1).sum::<usize>();
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = ctsat::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
