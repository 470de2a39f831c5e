fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let seed_env = std::env::var("MAXBERN_SEED").ok();
    std::process::exit(maxbern_cli::main_with(args, seed_env));
}
