fn main() {
    std::process::exit(partition_power::cli::run(std::env::args_os()));
}
