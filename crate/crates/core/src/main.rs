fn main() -> std::process::ExitCode {
    mlscx::cli::main()
}
