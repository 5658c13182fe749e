use clap::Parser;

use acband::cli::{self, Cli};
use acband::Error;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = cli::run(&cli) {
        // A reader that stops consuming our stdout (`head`, a closed
        // pager) ends the conversation, it doesn't fail it.
        if let Error::Io(io) = &err {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("error: {err}");
        std::process::exit(cli::exit_code(&err));
    }
}
