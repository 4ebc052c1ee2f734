//! Sandbox child process. See `lgpgi::harness::child_main`.

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    lgpgi::harness::child_main(&args)
}
