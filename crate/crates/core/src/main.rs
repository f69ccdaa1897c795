use clap::Parser;
use splitprune_core::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    let stdout = std::io::stdout();
    if let Err(f) = run(cli, &mut stdout.lock()) {
        eprintln!("error: {f}");
        std::process::exit(f.code);
    }
}
