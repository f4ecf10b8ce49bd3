//! Standalone subject-test runner. The analyzer spawns one of these per
//! test execution; it never shares state with the parent process.

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(stubscope_core::runner::subject_main(args));
}
