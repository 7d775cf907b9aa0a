use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SAMPLER_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = sampler_cli::Cli::parse();
    if let Err(e) = sampler_cli::run(cli) {
        log::error!("{e}");
        std::process::exit(sampler_cli::exit_code(&e));
    }
}
