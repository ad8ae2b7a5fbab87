use clap::Parser;
use qpi_cli::{exit_code, run, thread_count, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = thread_count(&cli).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let Err(e) = run(&cli) {
        eprintln!("qpi: {e}");
        std::process::exit(exit_code(&e));
    }
}
