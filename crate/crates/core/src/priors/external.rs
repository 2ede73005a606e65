use std::process::Command;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Denoise through an external program run as `<command> <in.png> <out.png>`.
///
/// The command string is split on whitespace (no shell). The image goes
/// through 8-bit PNG in both directions.
pub fn run_external(command: &str, x: &ImageTensor) -> Result<ImageTensor> {
    let fail = |reason: String| Error::ExternalDenoiser {
        command: command.to_string(),
        reason,
    };
    let mut words = command.split_whitespace();
    let program = words.next().ok_or_else(|| fail("empty command".into()))?;
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    x.write_png(&input)?;
    let status = Command::new(program)
        .args(words)
        .arg(&input)
        .arg(&output)
        .status()
        .map_err(|e| fail(e.to_string()))?;
    if !status.success() {
        return Err(fail(format!("exited with {status}")));
    }
    let out = ImageTensor::read_png(&output).map_err(|e| fail(e.to_string()))?;
    if out.shape() != x.shape() {
        return Err(fail(format!("returned a {} image for a {} input", out.shape(), x.shape())));
    }
    Ok(out)
}
