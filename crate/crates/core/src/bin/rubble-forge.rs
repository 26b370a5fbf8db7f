use rubble_forge::cli;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

fn main() {
    let args: Vec<_> = std::env::args_os().collect();
    let verbose = args.iter().filter(|a| *a == "-v" || *a == "--verbose").count()
        + args.iter().filter(|a| *a == "-vv").count() * 2;
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    cli::configure_threads();

    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        if let Err(e) = ctrlc::set_handler(move || cancel.store(true, Ordering::SeqCst)) {
            log::warn!("cannot install interrupt handler: {e}");
        }
    }
    let code = cli::main_with_args(args, &mut std::io::stdout(), cancel);
    std::process::exit(code);
}
