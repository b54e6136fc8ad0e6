use clap::Parser;

use ratiodual_cli::{run, Cli, EXIT_ERROR};

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("THREADS")
        .ok()
        .and_then(|t| t.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: THREADS={threads}: {e}");
            std::process::exit(EXIT_ERROR);
        }
    }
    let code = run(
        cli,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
