//! `euler-shell` executable.

fn main() {
    std::process::exit(euler_shell_cli::run(std::env::args_os()));
}
