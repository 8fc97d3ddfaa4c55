//! File formats: range-stream CSV, cost-surface CSV, and XYZ / PLY point
//! clouds.
//!
//! All writers are deterministic: identical inputs produce byte-identical
//! files. The CSV data formats write the shortest decimal that parses back
//! to the same f64, so stream and cost-surface round trips are lossless;
//! point-cloud exports use fixed decimal with 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::calibration::{CostCell, CostSurface};
use crate::error::{Error, Result};
use crate::geometry::CartesianPoint;
use crate::simulator::RangeStream;

/// Point-cloud output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// One `x y z` line per point.
    Xyz,
    /// ASCII PLY with float x/y/z vertex properties.
    PlyAscii,
}

impl std::str::FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::invalid_field(
                "format",
                format!("unknown point-cloud format {other:?}, expected xyz or ply"),
            )),
        }
    }
}

/// Shortest decimal that parses back to exactly the same f64. Used for the
/// CSV data formats, where read(write(x)) must equal x.
fn fmt_exact(value: f64) -> String {
    format!("{value}")
}

/// Fixed decimal with 9 significant digits. Used for point-cloud exports,
/// which have no round-trip requirement.
fn fmt_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 17) as usize;
    format!("{value:.decimals$}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Serializes a range stream. Layout: `#`-prefixed header comments carrying
/// `delta_t` and `pulses_per_frame`, a `frame,pulse,range_m` header line, one
/// row per pulse with the range field left empty for invalid echoes.
pub fn write_range_stream(stream: &RangeStream, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# delta_t={}", fmt_exact(stream.delta_t));
    let _ = writeln!(out, "# pulses_per_frame={}", stream.pulses_per_frame);
    out.push_str("frame,pulse,range_m\n");
    for (frame_index, frame) in stream.frames.iter().enumerate() {
        for (pulse_index, sample) in frame.iter().enumerate() {
            match sample {
                Some(range) => {
                    let _ = writeln!(out, "{frame_index},{pulse_index},{}", fmt_exact(*range));
                }
                None => {
                    let _ = writeln!(out, "{frame_index},{pulse_index},");
                }
            }
        }
    }
    write_file(path, &out)
}

pub fn read_range_stream(path: &Path) -> Result<RangeStream> {
    let text = read_file(path)?;
    let path_str = path.display().to_string();
    let parse_err = |line: usize, reason: String| Error::DataParse {
        path: path_str.clone(),
        line,
        reason,
    };

    let mut delta_t: Option<f64> = None;
    let mut pulses_per_frame: Option<usize> = None;
    let mut frames: Vec<Vec<Option<f64>>> = Vec::new();
    let mut header_seen = false;

    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("delta_t=") {
                delta_t = Some(
                    v.parse()
                        .map_err(|_| parse_err(line_no, format!("bad delta_t {v:?}")))?,
                );
            } else if let Some(v) = comment.strip_prefix("pulses_per_frame=") {
                pulses_per_frame = Some(
                    v.parse()
                        .map_err(|_| parse_err(line_no, format!("bad pulses_per_frame {v:?}")))?,
                );
            }
            continue;
        }
        if !header_seen {
            if line != "frame,pulse,range_m" {
                return Err(parse_err(
                    line_no,
                    format!("expected header 'frame,pulse,range_m', got {line:?}"),
                ));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let (frame_field, pulse_field, range_field) =
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(f), Some(p), Some(r), None) => (f, p, r),
                _ => return Err(parse_err(line_no, "expected 3 comma-separated fields".into())),
            };
        let frame_index: usize = frame_field
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad frame index {frame_field:?}")))?;
        let pulse_index: usize = pulse_field
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad pulse index {pulse_field:?}")))?;
        let range = if range_field.is_empty() {
            None
        } else {
            Some(
                range_field
                    .parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("non-numeric range {range_field:?}")))?,
            )
        };
        if frame_index != frames.len().saturating_sub(1) && frame_index != frames.len() {
            return Err(parse_err(
                line_no,
                format!("frame index {frame_index} out of order"),
            ));
        }
        if frame_index == frames.len() {
            frames.push(Vec::new());
        }
        let frame = frames.last_mut().expect("just ensured non-empty");
        if pulse_index != frame.len() {
            return Err(parse_err(
                line_no,
                format!("pulse index {pulse_index} out of order, expected {}", frame.len()),
            ));
        }
        frame.push(range);
    }

    let delta_t =
        delta_t.ok_or_else(|| parse_err(0, "missing '# delta_t=' header".into()))?;
    let pulses_per_frame = pulses_per_frame
        .ok_or_else(|| parse_err(0, "missing '# pulses_per_frame=' header".into()))?;
    RangeStream::new(frames, pulses_per_frame, delta_t)
}

/// Writes a point cloud as XYZ or ASCII PLY.
pub fn write_point_cloud(
    points: &[CartesianPoint],
    path: &Path,
    format: CloudFormat,
) -> Result<()> {
    let mut out = String::new();
    if format == CloudFormat::PlyAscii {
        let _ = writeln!(out, "ply");
        let _ = writeln!(out, "format ascii 1.0");
        let _ = writeln!(out, "element vertex {}", points.len());
        let _ = writeln!(out, "property float x");
        let _ = writeln!(out, "property float y");
        let _ = writeln!(out, "property float z");
        let _ = writeln!(out, "end_header");
    }
    for p in points {
        let _ = writeln!(out, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
    }
    write_file(path, &out)
}

/// Writes a cost surface as CSV: `m,k,cost,valid_pairs`, with an empty cost
/// field for inadmissible cells.
pub fn write_cost_surface(surface: &CostSurface, path: &Path) -> Result<()> {
    let mut out = String::from("m,k,cost,valid_pairs\n");
    for (m, k, cell) in surface.iter() {
        match cell.cost {
            Some(cost) => {
                let _ = writeln!(out, "{m},{k},{},{}", fmt_exact(cost), cell.valid_pairs);
            }
            None => {
                let _ = writeln!(out, "{m},{k},,{}", cell.valid_pairs);
            }
        }
    }
    write_file(path, &out)
}

pub fn read_cost_surface(path: &Path) -> Result<CostSurface> {
    let text = read_file(path)?;
    let path_str = path.display().to_string();
    let parse_err = |line: usize, reason: String| Error::DataParse {
        path: path_str.clone(),
        line,
        reason,
    };

    let mut entries: Vec<(usize, usize, CostCell)> = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if index == 0 {
            if line != "m,k,cost,valid_pairs" {
                return Err(parse_err(line_no, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, "expected 4 fields".into()));
        }
        let m: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad m {:?}", fields[0])))?;
        let k: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad k {:?}", fields[1])))?;
        let cost = if fields[2].is_empty() {
            None
        } else {
            Some(
                fields[2]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("bad cost {:?}", fields[2])))?,
            )
        };
        let valid_pairs: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad valid_pairs {:?}", fields[3])))?;
        entries.push((m, k, CostCell { cost, valid_pairs }));
    }

    let mut m_values: Vec<usize> = entries.iter().map(|(m, _, _)| *m).collect();
    m_values.dedup();
    let mut k_values: Vec<usize> = entries
        .iter()
        .take_while(|(m, _, _)| *m == entries[0].0)
        .map(|(_, k, _)| *k)
        .collect();
    k_values.dedup();
    let cells: Vec<CostCell> = entries.iter().map(|(_, _, c)| *c).collect();
    CostSurface::new(m_values, k_values, cells)
}
