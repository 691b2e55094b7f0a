use std::fs::File;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

use super::{ExecutionResult, RunRequest, ScriptRunner, FORCED_TERMINATION};

/// Runs scripts as child processes: `<prefix...> <interpreter...> <script>`,
/// with the execution directory as working directory and stdout/stderr
/// captured into `stdout.txt` / `stderr.txt` there.
#[derive(Debug, Clone)]
pub struct ProcessRunner {
    command: Vec<String>,
}

impl ProcessRunner {
    pub fn new(prefix: &[String], interpreter: &[String]) -> Result<Self> {
        let command: Vec<String> = prefix.iter().chain(interpreter).cloned().collect();
        if command.is_empty() {
            return Err(Error::Config("empty interpreter command".into()));
        }
        Ok(Self { command })
    }

    pub fn python() -> Self {
        Self {
            command: vec!["python3".into()],
        }
    }
}

impl ScriptRunner for ProcessRunner {
    fn run(&self, request: &RunRequest<'_>) -> Result<ExecutionResult> {
        let out_path = request.output_dir.join("stdout.txt");
        let err_path = request.output_dir.join("stderr.txt");
        let stdout = File::create(&out_path)
            .map_err(Error::io(format!("creating {}", out_path.display())))?;
        let stderr = File::create(&err_path)
            .map_err(Error::io(format!("creating {}", err_path.display())))?;

        let mut command = Command::new(&self.command[0]);
        command
            .args(&self.command[1..])
            .arg(request.script_path)
            .current_dir(request.output_dir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr);
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            command.process_group(0);
        }

        let started = Instant::now();
        let mut child = command
            .spawn()
            .map_err(|e| Error::SpawnFailure(format!("{}: {e}", self.command[0])))?;
        let pid = child.id();

        let mut poll = Duration::from_millis(2);
        let (status, timed_out) = loop {
            match child.try_wait() {
                Ok(Some(status)) => break (Some(status), false),
                Ok(None) => {}
                Err(e) => return Err(Error::SpawnFailure(format!("waiting on child: {e}"))),
            }
            let elapsed = started.elapsed();
            if elapsed >= request.timeout {
                kill_group(pid);
                let _ = child.kill();
                let _ = child.wait();
                break (None, true);
            }
            std::thread::sleep(poll.min(request.timeout - elapsed));
            poll = (poll * 2).min(Duration::from_millis(50));
        };
        let duration = started.elapsed();
        // Reap anything the script left running in its process group.
        kill_group(pid);

        let exit_status = match status {
            Some(status) => exit_code(status),
            None => FORCED_TERMINATION,
        };
        let read = |path: &std::path::Path| -> Result<String> {
            let bytes =
                std::fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        };
        Ok(ExecutionResult {
            stdout: read(&out_path)?,
            stderr: read(&err_path)?,
            exit_status,
            duration,
            timed_out,
        })
    }
}

#[cfg(unix)]
fn kill_group(pid: u32) {
    // SAFETY: kill(2) with a negative pid signals the process group created
    // for this child; it has no memory-safety preconditions.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(_pid: u32) {}

fn exit_code(status: std::process::ExitStatus) -> i32 {
    if let Some(code) = status.code() {
        return code;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(signal) = status.signal() {
            return 128 + signal;
        }
    }
    -1
}
