use clap::Parser;

use tempalign_service::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    if let Err(e) = run(cli, &mut out) {
        eprintln!("error: {e}");
        std::process::exit(i32::from(e.exit_code()));
    }
    Ok(())
}
