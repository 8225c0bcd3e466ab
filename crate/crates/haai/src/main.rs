//! `haai` binary. Deeply recursive programs expand the graph through native
//! recursion, so the interpreter runs on a thread with a large stack.

fn main() {
    let code = std::thread::Builder::new()
        .name("haai-engine".to_string())
        .stack_size(512 * 1024 * 1024)
        .spawn(haai::cli::run)
        .expect("spawn engine thread")
        .join()
        .expect("engine thread panicked");
    std::process::exit(code);
}
