//! Child-process control for subject test execution. Every subject run is a
//! fresh process so subject state can never leak into the analyzer; a hung
//! run is killed at the configured deadline.

use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct SpawnResult {
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub duration: Duration,
}

pub fn run_with_timeout(cmd: &[String], timeout: Duration) -> Result<SpawnResult> {
    let (program, args) = cmd
        .split_first()
        .ok_or_else(|| Error::Config("empty runner command".into()))?;
    let started = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Subject(format!("cannot spawn runner `{program}`: {e}")))?;

    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                return Ok(SpawnResult {
                    exit_code: status.code(),
                    timed_out: false,
                    duration: started.elapsed(),
                })
            }
            Ok(None) => {
                if started.elapsed() >= timeout {
                    child.kill().ok();
                    child.wait().ok();
                    return Ok(SpawnResult {
                        exit_code: None,
                        timed_out: true,
                        duration: started.elapsed(),
                    });
                }
                std::thread::sleep(Duration::from_millis(1));
            }
            Err(e) => return Err(Error::Subject(format!("waiting for runner: {e}"))),
        }
    }
}
