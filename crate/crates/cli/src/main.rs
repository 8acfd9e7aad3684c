fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TTE_LOG", "warn")).init();
    std::process::exit(tte_estimand_cli::run_command(std::env::args_os()));
}
