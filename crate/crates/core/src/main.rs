use balanced_embed::cli;

fn main() {
    let threads =
        std::env::var("BALANCED_EMBED_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config = match cli::parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    std::process::exit(cli::run(config));
}
