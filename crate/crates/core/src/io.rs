//! File formats: binary PGM images, ASCII PLY clouds, CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point3;
use crate::matcher::{DisparityMap, GrayImage};
use crate::reconstruction::PointCloud;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

fn parse_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.display().to_string(), message: message.into() }
}

/// Writes a binary PGM (P5, maxval 255); intensities map linearly from
/// [0, 1] to [0, 255].
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(img.width() * img.height() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.extend(img.data().iter().map(|v| (v * 255.0).round() as u8));
    fs::write(path, out)?;
    Ok(())
}

/// Reads a binary PGM written by [`write_pgm`] (or any P5/maxval-255
/// file; `#` comment lines are skipped).
pub fn read_pgm(path: &Path) -> Result<GrayImage, IoError> {
    let raw = fs::read(path)?;
    let mut pos = 0usize;
    let mut fields: Vec<u64> = Vec::new();
    if raw.len() < 2 || &raw[0..2] != b"P5" {
        return Err(parse_err(path, "missing P5 magic"));
    }
    pos += 2;
    while fields.len() < 3 {
        // Skip whitespace and comments.
        while pos < raw.len() && (raw[pos].is_ascii_whitespace() || raw[pos] == b'#') {
            if raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < raw.len() && raw[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, "truncated header"));
        }
        let text = std::str::from_utf8(&raw[start..pos]).unwrap();
        fields.push(text.parse().map_err(|_| parse_err(path, "bad header field"))?);
    }
    pos += 1; // single whitespace byte after maxval
    let (w, h, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if maxval != 255 {
        return Err(parse_err(path, format!("unsupported maxval {maxval}")));
    }
    if raw.len() < pos + w * h {
        return Err(parse_err(path, "truncated pixel data"));
    }
    let data: Vec<f64> = raw[pos..pos + w * h].iter().map(|&b| b as f64 / 255.0).collect();
    GrayImage::new(w, h, data).map_err(|e| parse_err(path, e.to_string()))
}

/// Disparity map as CSV: one row per image row, invalid pixels as empty
/// cells.
pub fn write_disparity_csv(map: &DisparityMap, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for v in 0..map.height() {
        let row: Vec<String> = (0..map.width())
            .map(|u| map.get(u, v).map(|d| d.to_string()).unwrap_or_default())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_disparity_csv(path: &Path) -> Result<DisparityMap, IoError> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0usize;
    for line in text.lines() {
        let row: Vec<Option<u32>> = line
            .split(',')
            .map(|cell| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<u32>()
                        .map(Some)
                        .map_err(|_| parse_err(path, format!("bad disparity cell {cell:?}")))
                }
            })
            .collect::<Result<_, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(path, "ragged rows"));
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| parse_err(path, "empty file"))?;
    Ok(DisparityMap::new(width, height, values))
}

/// Disparity map scaled to [0, 255] for visual inspection; invalid pixels
/// render black.
pub fn write_disparity_pgm(map: &DisparityMap, path: &Path) -> Result<(), IoError> {
    let max = map.values().iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
    let img = GrayImage::from_fn(map.width(), map.height(), |u, v| {
        map.get(u, v).map(|d| d as f64 / max).unwrap_or(0.0)
    });
    write_pgm(&img, path)
}

/// ASCII PLY with double-precision vertex coordinates, millimeters.
pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in &cloud.points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(parse_err(path, "missing ply magic"));
    }
    let mut count: Option<usize> = None;
    let mut in_vertex_element = false;
    let mut xyz_props = 0usize;
    for line in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", _] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| parse_err(path, "bad vertex count"))?);
                in_vertex_element = true;
            }
            ["element", ..] => in_vertex_element = false,
            ["property", _, name] if in_vertex_element => {
                if ["x", "y", "z"][xyz_props.min(2)] == *name {
                    xyz_props += 1;
                }
            }
            ["comment", ..] | ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(parse_err(path, format!("unexpected header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| parse_err(path, "no vertex element"))?;
    if xyz_props < 3 {
        return Err(parse_err(path, "vertex element lacks x, y, z properties"));
    }
    let mut points = Vec::with_capacity(count);
    for line in lines.take(count) {
        let mut it = line.split_whitespace();
        let mut coord = [0.0f64; 3];
        for c in &mut coord {
            *c = it
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| parse_err(path, format!("bad vertex line {line:?}")))?;
        }
        points.push(Point3::new(coord[0], coord[1], coord[2]));
    }
    if points.len() != count {
        return Err(parse_err(path, "fewer vertices than declared"));
    }
    Ok(PointCloud::from_points(points))
}

/// Cloud as CSV with an `x,y,z` header.
pub fn write_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("x,y,z\n");
    for p in &cloud.points {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    fs::write(path, out)?;
    Ok(())
}
