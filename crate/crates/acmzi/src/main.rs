use std::env;

fn main() {
    let args: Vec<String> = env::args().skip(1).collect();
    std::process::exit(acmzi::cli::run_main(&args));
}
