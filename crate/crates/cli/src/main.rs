fn main() {
    std::process::exit(sdde_lyap::main_with_args(std::env::args_os()));
}
