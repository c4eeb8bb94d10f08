use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp_millis()
        .init();
    // Unlocked handles: the logger writes from worker threads while a
    // long-running command such as `serve` is still inside `run`.
    slr_core::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr()).into()
}
