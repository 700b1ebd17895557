fn main() {
    std::process::exit(theta_interp::cli::main_with_env());
}
