fn main() -> std::process::ExitCode {
    mtms_core::cli::main()
}
