fn main() {
    let code = llm_norms::cli::run(std::env::args_os());
    std::process::exit(code);
}
