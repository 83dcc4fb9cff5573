//! Scenario container: a line-oriented text index of frames whose point
//! clouds live in sibling binary files.
//!
//! ```text
//! # comment
//! frame <timestamp_us> <ego_id>
//! vehicle <id> <9 rotation floats, row major> <3 translation floats> <cloud path>
//! ```
//!
//! Cloud paths are resolved relative to the scenario file. Floats are written
//! with Rust's shortest round-trip formatting, so a written pose reads back
//! bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::grid::{read_point_cloud_file, write_point_cloud_file, Pose};

use super::{ScenarioFrame, SimError, Vehicle};

fn bad_line(lineno: usize, why: impl std::fmt::Display) -> SimError {
    SimError::InvalidScenario(format!("line {lineno}: {why}"))
}

fn parse_num<T: std::str::FromStr>(
    tok: Option<&str>,
    lineno: usize,
    what: &str,
) -> Result<T, SimError> {
    let tok = tok.ok_or_else(|| bad_line(lineno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| bad_line(lineno, format!("bad {what} `{tok}`")))
}

/// Writes `frames` under `dir` as `<name>.scn` plus one `.pcf` cloud file per
/// vehicle per frame. Returns the scenario file path.
pub fn write_scenario(
    dir: &Path,
    name: &str,
    frames: &[ScenarioFrame],
) -> Result<PathBuf, SimError> {
    let mut text = String::new();
    for (fi, frame) in frames.iter().enumerate() {
        let _ = writeln!(text, "frame {} {}", frame.timestamp_us, frame.ego_id);
        for v in &frame.vehicles {
            let cloud_name = format!("{name}_f{fi}_v{}.pcf", v.id);
            write_point_cloud_file(&dir.join(&cloud_name), &v.cloud)?;
            let (rot, trans) = v.pose.to_wire_f64();
            let _ = write!(text, "vehicle {}", v.id);
            for x in rot.iter().chain(trans.iter()) {
                let _ = write!(text, " {x}");
            }
            let _ = writeln!(text, " {cloud_name}");
        }
    }
    let path = dir.join(format!("{name}.scn"));
    std::fs::write(&path, text).map_err(crate::codec::CodecError::from)?;
    Ok(path)
}

/// Parses a scenario file and loads every referenced cloud.
pub fn read_scenario(path: &Path) -> Result<Vec<ScenarioFrame>, SimError> {
    let text = std::fs::read_to_string(path).map_err(crate::codec::CodecError::from)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut frames: Vec<ScenarioFrame> = Vec::new();
    let mut current: Option<(u64, u32, Vec<Vehicle>)> = None;
    let close = |cur: Option<(u64, u32, Vec<Vehicle>)>,
                 frames: &mut Vec<ScenarioFrame>|
     -> Result<(), SimError> {
        if let Some((t, ego, vehicles)) = cur {
            frames.push(ScenarioFrame::new(t, ego, vehicles)?);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("frame") => {
                close(current.take(), &mut frames)?;
                let t: u64 = parse_num(toks.next(), lineno, "timestamp")?;
                let ego: u32 = parse_num(toks.next(), lineno, "ego id")?;
                if toks.next().is_some() {
                    return Err(bad_line(lineno, "trailing tokens after frame header"));
                }
                current = Some((t, ego, Vec::new()));
            }
            Some("vehicle") => {
                let (_, _, vehicles) = current
                    .as_mut()
                    .ok_or_else(|| bad_line(lineno, "vehicle before any frame header"))?;
                let id: u32 = parse_num(toks.next(), lineno, "vehicle id")?;
                let mut pose_vals = [0f64; 12];
                for (k, slot) in pose_vals.iter_mut().enumerate() {
                    *slot = parse_num(toks.next(), lineno, &format!("pose value {k}"))?;
                }
                let cloud_rel = toks
                    .next()
                    .ok_or_else(|| bad_line(lineno, "missing cloud path"))?;
                if toks.next().is_some() {
                    return Err(bad_line(lineno, "trailing tokens after cloud path"));
                }
                let mut rot = [0f64; 9];
                rot.copy_from_slice(&pose_vals[..9]);
                let mut trans = [0f64; 3];
                trans.copy_from_slice(&pose_vals[9..]);
                let pose = Pose::from_wire_f64(rot, trans)
                    .map_err(|e| bad_line(lineno, e))?;
                let cloud = read_point_cloud_file(&base.join(cloud_rel), pose)?;
                vehicles.push(Vehicle { id, pose, cloud });
            }
            Some(other) => return Err(bad_line(lineno, format!("unknown directive `{other}`"))),
            None => unreachable!("empty lines are skipped"),
        }
    }
    close(current.take(), &mut frames)?;
    if frames.is_empty() {
        return Err(SimError::InvalidScenario("scenario holds no frames".into()));
    }
    Ok(frames)
}
