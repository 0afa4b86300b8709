fn main() { std::process::exit(posemine::cli::main()); }
