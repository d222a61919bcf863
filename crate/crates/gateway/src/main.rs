use clap::Parser;

use persona_gateway::cli::{run, Cli};

/// Joins the error chain, skipping causes whose text an outer error already
/// embeds.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cli.log_level.as_str())).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", render(&e));
        std::process::exit(1);
    }
}
