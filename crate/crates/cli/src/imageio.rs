//! Image and volume files: binary PGM/PPM (8 or 16 bit) and little-endian
//! PFM, plus a JSON manifest for frame stacks.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use diner_core::numerics::Grid;
use image::codecs::pnm::PnmDecoder;
use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;

/// Reads a 2D grid from a PGM/PPM (values scaled to `[0, 1]` by the
/// maxval) or PFM file, chosen by the magic bytes.
pub fn read_image(path: &Path) -> Result<Grid> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    match bytes.get(..2) {
        Some(b"Pf") | Some(b"PF") => parse_pfm(path, &bytes),
        Some(b"P5") | Some(b"P6") => parse_pnm(path, &bytes),
        _ => Err(CliError::format(path, "not a binary PGM/PPM or PFM file")),
    }
}

fn parse_pnm(path: &Path, bytes: &[u8]) -> Result<Grid> {
    let decoder = PnmDecoder::new(BufReader::new(bytes))
        .map_err(|e| CliError::format(path, e.to_string()))?;
    let img =
        DynamicImage::from_decoder(decoder).map_err(|e| CliError::format(path, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (
            1,
            b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageRgb8(b) => (
            3,
            b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(b) => (
            1,
            b.into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect(),
        ),
        DynamicImage::ImageRgb16(b) => (
            3,
            b.into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect(),
        ),
        other => {
            return Err(CliError::format(
                path,
                format!("unsupported pixel layout {:?}", other.color()),
            ));
        }
    };
    Ok(Grid::new(vec![h, w], channels, data)?)
}

fn parse_pfm(path: &Path, bytes: &[u8]) -> Result<Grid> {
    let bad = |msg: &str| CliError::format(path, msg.to_string());
    // Three whitespace-terminated header tokens follow the magic line.
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PFM header"));
        }
        tokens.push(
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII PFM header"))?,
        );
    }
    pos += 1; // single whitespace byte before the raster
    let channels = match tokens[0] {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(bad("bad PFM magic")),
    };
    let w: usize = tokens[1].parse().map_err(|_| bad("bad PFM width"))?;
    let h: usize = tokens[2].parse().map_err(|_| bad("bad PFM height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad PFM scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("bad PFM scale"));
    }
    let little = scale < 0.0;
    let n = w * h * channels;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != n * 4 {
        return Err(bad(&format!(
            "expected {} raster bytes, found {}",
            n * 4,
            raster.len()
        )));
    }
    let mut data = vec![0.0; n];
    // Rows are stored bottom to top.
    for (r, row) in raster.chunks_exact(w * channels * 4).enumerate() {
        let y = h - 1 - r;
        for (i, b) in row.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            data[y * w * channels + i] = v as f64;
        }
    }
    Grid::new(vec![h, w], channels, data).map_err(|e| CliError::format(path, e.to_string()))
}

fn check_2d(path: &Path, grid: &Grid, allowed: &[usize]) -> Result<(usize, usize)> {
    if grid.ndim() != 2 || !allowed.contains(&grid.channels()) {
        return Err(CliError::Usage(format!(
            "{}: cannot store a {}D grid with {} channels",
            path.display(),
            grid.ndim(),
            grid.channels()
        )));
    }
    Ok((grid.shape()[0], grid.shape()[1]))
}

/// Writes a PFM (little-endian, bottom-to-top rows). Values are stored as
/// 32-bit floats, so only f32-representable grids round-trip exactly.
pub fn write_pfm(path: &Path, grid: &Grid) -> Result<()> {
    let (h, w) = check_2d(path, grid, &[1, 3])?;
    let c = grid.channels();
    let mut out = format!("{}\n{w} {h}\n-1.0\n", if c == 1 { "Pf" } else { "PF" }).into_bytes();
    for y in (0..h).rev() {
        for v in &grid.as_slice()[y * w * c..(y + 1) * w * c] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    write_atomic(path, |f| f.write_all(&out))
}

/// Writes a binary PGM/PPM, quantizing `clamp(v, 0, 1)·maxval` to the
/// nearest level. `maxval` is 255 or 65535; 16-bit samples are big-endian.
pub fn write_pnm(path: &Path, grid: &Grid, maxval: u16) -> Result<()> {
    let (h, w) = check_2d(path, grid, &[1, 3])?;
    if maxval != 255 && maxval != 65535 {
        return Err(CliError::Usage(format!(
            "maxval must be 255 or 65535, got {maxval}"
        )));
    }
    let magic = if grid.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    for v in grid.as_slice() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    write_atomic(path, |f| f.write_all(&out))
}

/// Writes `<stem>.pfm` (exact) and a 16-bit `<stem>.pgm`/`.ppm` preview.
pub fn write_image_pair(dir: &Path, stem: &str, grid: &Grid) -> Result<()> {
    write_pfm(&dir.join(format!("{stem}.pfm")), grid)?;
    let ext = if grid.channels() == 1 { "pgm" } else { "ppm" };
    write_pnm(&dir.join(format!("{stem}.{ext}")), grid, 65535)
}

/// `{"frames": [...]}`: one PFM per frame, paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoManifest {
    pub frames: Vec<PathBuf>,
}

pub fn read_video(manifest_path: &Path) -> Result<Grid> {
    let manifest: VideoManifest = read_json(manifest_path)?;
    if manifest.frames.is_empty() {
        return Err(CliError::format(manifest_path, "manifest lists no frames"));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut data = Vec::new();
    let mut first: Option<Grid> = None;
    for f in &manifest.frames {
        let frame_path = dir.join(f);
        let frame = read_image(&frame_path)?;
        if let Some(g) = &first {
            if !g.same_layout(&frame) {
                return Err(CliError::format(
                    frame_path,
                    "frame differs in size from the first frame",
                ));
            }
        }
        data.extend_from_slice(frame.as_slice());
        first.get_or_insert(frame);
    }
    let first = first.expect("at least one frame");
    let mut shape = vec![manifest.frames.len()];
    shape.extend_from_slice(first.shape());
    Ok(Grid::new(shape, first.channels(), data)?)
}

pub fn write_video(dir: &Path, stem: &str, volume: &Grid) -> Result<PathBuf> {
    if volume.ndim() != 3 {
        return Err(CliError::Usage("video output needs a 3D grid".into()));
    }
    let (t, h, w) = (volume.shape()[0], volume.shape()[1], volume.shape()[2]);
    let c = volume.channels();
    let per = h * w * c;
    let mut frames = Vec::with_capacity(t);
    for f in 0..t {
        let name = PathBuf::from(format!("{stem}_{f:03}.pfm"));
        let frame = Grid::new(
            vec![h, w],
            c,
            volume.as_slice()[f * per..(f + 1) * per].to_vec(),
        )?;
        write_pfm(&dir.join(&name), &frame)?;
        frames.push(name);
    }
    let manifest_path = dir.join(format!("{stem}.json"));
    write_json(&manifest_path, &VideoManifest { frames })?;
    Ok(manifest_path)
}

/// Loads an image, or a frame stack when given a `.json` manifest.
pub fn read_signal(path: &Path) -> Result<Grid> {
    if path.extension().is_some_and(|e| e == "json") {
        read_video(path)
    } else {
        read_image(path)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}
