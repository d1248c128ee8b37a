//! Seeded synthetic signals for experiments and tests.

use crate::numerics::{Grid, Rng};

/// Dead-leaves RGB image: occluding discs with radii drawn from a `r⁻³`
/// law, which gives the scale-invariant spectrum and sharp edges typical
/// of natural photographs.
pub fn dead_leaves(height: usize, width: usize, seed: u64) -> Grid {
    let canvas = leaves(height, width, seed);
    Grid::new(vec![height, width], 3, canvas).expect("every pixel is painted")
}

/// `frames` windows sliding `shift` pixels per frame across a wider
/// dead-leaves canvas, stacked as a `frames × height × width` RGB volume.
pub fn panning_video(frames: usize, height: usize, width: usize, shift: usize, seed: u64) -> Grid {
    let wide = width + shift * frames.saturating_sub(1);
    let canvas = leaves(height, wide, seed);
    let mut data = Vec::with_capacity(frames * height * width * 3);
    for f in 0..frames {
        for y in 0..height {
            let start = (y * wide + f * shift) * 3;
            data.extend_from_slice(&canvas[start..start + width * 3]);
        }
    }
    Grid::new(vec![frames, height, width], 3, data).expect("every pixel is painted")
}

fn leaves(height: usize, width: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    let mut img = vec![f64::NAN; height * width * 3];
    let mut painted = 0;
    let r_min = 1.5f64;
    let r_max = 0.25 * height.max(width) as f64;
    let (a, b) = (r_min.powi(-2), r_max.powi(-2));
    // Front to back: a pixel keeps the first disc that covers it.
    while painted < height * width {
        let r = (a - rng.next_f64() * (a - b)).powf(-0.5);
        let cx = rng.uniform(-r, width as f64 + r);
        let cy = rng.uniform(-r, height as f64 + r);
        let l = rng.next_f64();
        let colour = [
            l,
            (l + 0.3 * rng.uniform(-1.0, 1.0)).clamp(0.0, 1.0),
            (l + 0.3 * rng.uniform(-1.0, 1.0)).clamp(0.0, 1.0),
        ];
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil().max(0.0) as usize).min(width);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil().max(0.0) as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let i = (y * width + x) * 3;
                if dx * dx + dy * dy <= r * r && img[i].is_nan() {
                    img[i..i + 3].copy_from_slice(&colour);
                    painted += 1;
                }
            }
        }
    }
    img
}

/// Single-channel `0.5 + 0.5·cos(k·r²)` zone plate on `n × n`.
pub fn zone_plate(n: usize, k: f64) -> Grid {
    let mut data = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let u = (x as f64 + 0.5) / n as f64 - 0.5;
            let v = (y as f64 + 0.5) / n as f64 - 0.5;
            data.push(0.5 + 0.5 * (k * (u * u + v * v)).cos());
        }
    }
    Grid::new(vec![n, n], 1, data).expect("finite")
}
