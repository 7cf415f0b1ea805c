use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(iiot_netsim_cli::run(std::env::args_os()))
}
