fn main() {
    std::process::exit(asg_cdi::cli::main_with_args(std::env::args_os()));
}
