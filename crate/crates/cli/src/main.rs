use clap::Parser;
use geodrat_cli::{init_threads, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_threads();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            std::process::exit(out.exit);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
