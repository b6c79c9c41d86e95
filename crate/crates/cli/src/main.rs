use std::process::ExitCode;

fn main() -> ExitCode {
    volstab_cli::main_with(std::env::args_os())
}
