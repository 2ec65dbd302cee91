//! File formats: state snapshots, raster images, and mask directories.
//!
//! Snapshot schema (plain text, line-delimited, `#` comments):
//!
//! ```text
//! # shakingbot snapshot v1
//! # time 1.25
//! # rim_perimeter_rest 0.608
//! x y z label          (one line per particle; label in
//!                       {handle_l, handle_r, rim, body})
//! ```
//!
//! Depth rasters are written as 16-bit binary PGM in millimeters; RGB and
//! mask rasters as PNG.

use std::io::Write;
use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::bag::{BagState, ParticleLabel, Vec3};
use crate::error::{Error, Result};
use crate::perception::Raster;

fn label_str(l: ParticleLabel) -> &'static str {
    match l {
        ParticleLabel::HandleL => "handle_l",
        ParticleLabel::HandleR => "handle_r",
        ParticleLabel::Rim => "rim",
        ParticleLabel::Body => "body",
    }
}

fn parse_label(s: &str) -> Result<ParticleLabel> {
    match s {
        "handle_l" => Ok(ParticleLabel::HandleL),
        "handle_r" => Ok(ParticleLabel::HandleR),
        "rim" => Ok(ParticleLabel::Rim),
        "body" => Ok(ParticleLabel::Body),
        other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
    }
}

/// Serialize particle positions and labels.
pub fn write_snapshot(state: &BagState) -> String {
    let mut out = String::new();
    out.push_str("# shakingbot snapshot v1\n");
    out.push_str(&format!("# time {}\n", state.time));
    out.push_str(&format!("# rim_perimeter_rest {}\n", state.rim_perimeter_rest));
    for (p, l) in state.positions.iter().zip(&state.labels) {
        out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, label_str(*l)));
    }
    out
}

pub fn save_snapshot(state: &BagState, path: &Path) -> Result<()> {
    std::fs::write(path, write_snapshot(state))?;
    Ok(())
}

/// Positions and labels parsed back from a snapshot (geometry only; springs
/// and triangles are not part of the format).
pub struct SnapshotPoints {
    pub positions: Vec<Vec3>,
    pub labels: Vec<ParticleLabel>,
    pub time: f64,
    pub rim_perimeter_rest: f64,
}

pub fn read_snapshot(text: &str) -> Result<SnapshotPoints> {
    let mut points = SnapshotPoints {
        positions: Vec::new(),
        labels: Vec::new(),
        time: 0.0,
        rim_perimeter_rest: 0.0,
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("time") => {
                    points.time = it.next().and_then(|v| v.parse().ok()).unwrap_or(0.0)
                }
                Some("rim_perimeter_rest") => {
                    points.rim_perimeter_rest =
                        it.next().and_then(|v| v.parse().ok()).unwrap_or(0.0)
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "bad snapshot line: `{line}`"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{s}`")))
        };
        points.positions.push(Vec3::new(
            parse(fields[0])?,
            parse(fields[1])?,
            parse(fields[2])?,
        ));
        points.labels.push(parse_label(fields[3])?);
    }
    Ok(points)
}

pub fn load_snapshot(path: &Path) -> Result<SnapshotPoints> {
    read_snapshot(&std::fs::read_to_string(path)?)
}

pub fn save_rgb_png(rgb: &Raster<[u8; 3]>, path: &Path) -> Result<()> {
    let mut img = RgbImage::new(rgb.width as u32, rgb.height as u32);
    for y in 0..rgb.height {
        for x in 0..rgb.width {
            img.put_pixel(x as u32, y as u32, Rgb(*rgb.get(x, y)));
        }
    }
    img.save(path)?;
    Ok(())
}

pub fn save_mask_png(mask: &Raster<bool>, path: &Path) -> Result<()> {
    let mut img = GrayImage::new(mask.width as u32, mask.height as u32);
    for y in 0..mask.height {
        for x in 0..mask.width {
            img.put_pixel(x as u32, y as u32, Luma([if *mask.get(x, y) { 255 } else { 0 }]));
        }
    }
    img.save(path)?;
    Ok(())
}

pub fn load_mask_png(path: &Path) -> Result<Raster<bool>> {
    let img = image::open(path)?.into_luma8();
    let mut out = Raster::new(img.width() as usize, img.height() as usize, false);
    for y in 0..out.height {
        for x in 0..out.width {
            out.set(x, y, img.get_pixel(x as u32, y as u32).0[0] >= 128);
        }
    }
    Ok(out)
}

/// 16-bit binary PGM, depth in millimeters.
pub fn save_depth_pgm(depth: &Raster<f64>, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{} {}\n65535\n", depth.width, depth.height)?;
    let mut buf = Vec::with_capacity(depth.data.len() * 2);
    for v in &depth.data {
        let mm = (v * 1000.0).round().clamp(0.0, 65535.0) as u16;
        buf.extend_from_slice(&mm.to_be_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_depth_pgm(path: &Path) -> Result<Raster<f64>> {
    let bytes = std::fs::read(path)?;
    let header_err = || Error::InvalidArgument("bad PGM header".into());
    // Parse "P5\nW H\nMAX\n" allowing arbitrary whitespace.
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| header_err())?);
    }
    if fields.len() != 4 || fields[0] != "P5" || fields[3] != "65535" {
        return Err(header_err());
    }
    let width: usize = fields[1].parse().map_err(|_| header_err())?;
    let height: usize = fields[2].parse().map_err(|_| header_err())?;
    pos += 1; // single whitespace after maxval
    let mut out = Raster::new(width, height, 0.0);
    for (k, chunk) in bytes[pos..].chunks_exact(2).take(width * height).enumerate() {
        let mm = u16::from_be_bytes([chunk[0], chunk[1]]);
        out.data[k] = mm as f64 / 1000.0;
    }
    Ok(out)
}

/// Splat-based render of snapshot points (no mesh needed): depth from
/// particle heights, labels painted as in the live renderer.
pub fn render_snapshot_points(
    points: &SnapshotPoints,
    cam: &crate::perception::Camera,
) -> (Raster<f64>, Raster<[u8; 3]>) {
    use crate::perception::{COLOR_BAG, COLOR_HANDLE, COLOR_RIM, COLOR_TABLE};
    let mut depth = Raster::new(cam.width_px, cam.height_px, 0.0f64);
    let mut rgb = Raster::new(cam.width_px, cam.height_px, COLOR_TABLE);
    let radius = 2isize;
    for (p, l) in points.positions.iter().zip(&points.labels) {
        let [px, py] = cam.world_to_px(p.x, p.y);
        let (cx, cy) = (px.round() as isize, py.round() as isize);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if !depth.in_bounds(x, y) {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if p.z >= *depth.get(x, y) {
                    depth.set(x, y, p.z);
                    let color = match l {
                        ParticleLabel::HandleL | ParticleLabel::HandleR => COLOR_HANDLE,
                        ParticleLabel::Rim => COLOR_RIM,
                        ParticleLabel::Body => COLOR_BAG,
                    };
                    rgb.set(x, y, color);
                }
            }
        }
    }
    (depth, rgb)
}
