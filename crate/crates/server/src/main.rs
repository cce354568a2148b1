fn main() -> std::process::ExitCode {
    featurelens_server::cli::main()
}
