//! Atomic file output and readers for previously written artifacts.

use std::io::Write;
use std::path::Path;

use mfl_core::diagnostics::Report;
use mfl_core::oracle::{Frame, FRAMES_HEADER};
use mfl_core::snapshot::load_grid;
use serde::Serialize;

use crate::CliError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic_io(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic_io(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_reports(path: &Path, reports: &[Report]) -> Result<(), CliError> {
    let text: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    write_atomic(path, text.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.txt")
}

/// Rebuilds frames from `frames.csv` and the per-frame grid dumps next to it.
pub fn read_frames(dir: &Path) -> Result<Vec<Frame>, CliError> {
    let path = dir.join("frames.csv");
    let text = read_text(&path)?;
    let parse_err = |line: usize, msg: String| CliError::Core(mfl_core::Error::Parse { line, msg });
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == FRAMES_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header `{FRAMES_HEADER}`"))),
    }
    let mut frames = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let fields = fields.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if fields.len() != 6 {
            return Err(parse_err(idx + 1, format!("expected 6 fields, found {}", fields.len())));
        }
        let grid = load_grid(&dir.join(frame_file_name(frames.len())))?;
        frames.push(Frame {
            t: fields[0],
            tau: fields[1],
            grid,
            g: fields[2],
            h: fields[3],
            f: fields[4],
            fisher: fields[5],
        });
    }
    Ok(frames)
}
