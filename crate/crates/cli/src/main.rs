use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use sharpfield_cli::Cli;

/// Keeps freed tensor buffers on the heap between training steps instead of
/// returning the pages to the kernel.
#[cfg(all(target_os = "linux", target_env = "gnu"))]
fn retain_heap() {
    // SAFETY: mallopt only adjusts allocator thresholds; called before any threads exist.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}

#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
fn retain_heap() {}

fn main() -> ExitCode {
    retain_heap();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match sharpfield_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
