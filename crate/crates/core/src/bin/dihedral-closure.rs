use std::io::Write;

use clap::Parser;
use dihedral_closure::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let out = run(&cli);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    std::process::exit(out.code);
}
