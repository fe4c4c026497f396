fn main() -> std::process::ExitCode {
    severity_nn::cli::main()
}
