fn main() -> std::process::ExitCode {
    contrarian::cli::main()
}
