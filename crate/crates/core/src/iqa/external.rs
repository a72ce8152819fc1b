//! Adapter for quality scorers that run as external processes.
//!
//! The command template is run through `sh -c` with `{image}` replaced by the
//! (shell-quoted) path of a temporary PNG. Standard output must hold a single
//! decimal number; exit status 0 means success.

use std::io::Read;
use std::process::{Child, Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::image::{save_image, Image};
use crate::iqa::{Orientation, QualityScore, Scorer, ScorerConfig};

/// Placeholder replaced by the image path.
pub const IMAGE_PLACEHOLDER: &str = "{image}";

/// Counting semaphore bounding concurrent scorer processes.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct ExternalScorer {
    command: String,
    timeout: Duration,
    orientation: Orientation,
    eval_downscale: Option<usize>,
    slots: Slots,
}

impl ExternalScorer {
    pub fn new(config: &ScorerConfig) -> Result<Self> {
        config.validate()?;
        let command = config
            .command
            .clone()
            .ok_or_else(|| Error::Config("external scorer requires a command".into()))?;
        Ok(Self {
            command,
            timeout: Duration::from_secs_f64(config.timeout_secs),
            orientation: config.orientation,
            eval_downscale: config.eval_downscale,
            slots: Slots::new(config.max_in_flight),
        })
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn drain(mut pipe: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn spawn_isolated(cmd: &mut Command) -> std::io::Result<Child> {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0).spawn()
}

#[cfg(not(unix))]
fn spawn_isolated(cmd: &mut Command) -> std::io::Result<Child> {
    cmd.spawn()
}

/// Kills the child and, on unix, every process in its group so that
/// grandchildren holding the output pipes die too.
fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        let pgid = child.id() as libc::pid_t;
        // SAFETY: plain syscall on a process group we created.
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Parses scorer output: exactly one finite decimal number.
pub fn parse_score_output(stdout: &str) -> Result<f64> {
    let mut tokens = stdout.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some(token), None) => token
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::ScorerParse(stdout.to_string())),
        _ => Err(Error::ScorerParse(stdout.to_string())),
    }
}

impl Scorer for ExternalScorer {
    fn score(&self, image: &Image) -> Result<QualityScore> {
        let _permit = self.slots.acquire();
        let file = tempfile::Builder::new()
            .prefix("evoimage-")
            .suffix(".png")
            .tempfile()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        match self.eval_downscale {
            Some(side) => save_image(&image.fit_within(side), file.path())?,
            None => save_image(image, file.path())?,
        }
        let path = file.path().to_string_lossy();
        let line = self.command.replace(IMAGE_PLACEHOLDER, &shell_quote(&path));

        let mut child = spawn_isolated(
            Command::new("sh")
                .arg("-c")
                .arg(&line)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .stderr(Stdio::piped()),
        )
        .map_err(|e| Error::ScorerProcess {
            status: "spawn failed".into(),
            stderr: e.to_string(),
        })?;
        let stdout = drain(child.stdout.take().expect("stdout is piped"));
        let stderr = drain(child.stderr.take().expect("stderr is piped"));

        let status = match child.wait_timeout(self.timeout) {
            Ok(Some(status)) => status,
            Ok(None) => {
                kill_tree(&mut child);
                return Err(Error::ScorerTimeout(self.timeout.as_secs_f64()));
            }
            Err(e) => {
                kill_tree(&mut child);
                return Err(Error::ScorerProcess {
                    status: "wait failed".into(),
                    stderr: e.to_string(),
                });
            }
        };
        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::ScorerProcess {
                status: status.to_string(),
                stderr: err.trim().to_string(),
            });
        }
        Ok(QualityScore::new(
            parse_score_output(&out)?,
            self.orientation,
        ))
    }

    fn orientation(&self) -> Orientation {
        self.orientation
    }
}
