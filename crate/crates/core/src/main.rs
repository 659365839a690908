fn main() -> std::process::ExitCode {
    boxpose::cli::run()
}
