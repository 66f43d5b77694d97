use std::process::ExitCode;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let mut args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    // Installed under the name `pdl-worker`, the binary is the worker.
    let invoked_as = args
        .first()
        .and_then(|a| std::path::Path::new(a).file_stem().map(|s| s.to_os_string()));
    if invoked_as.as_deref() == Some("pdl-worker".as_ref()) {
        args.insert(1, "pdl-worker".into());
    }
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    ExitCode::from(runtime.block_on(parlogue::cli::run(args)))
}
