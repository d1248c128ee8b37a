//! Radix-2 decimation-in-time FFT, applied along rows then columns.
//!
//! Forward transforms use the `exp(-2πi·kn/N)` kernel and are unnormalized;
//! inverse transforms use `exp(+2πi·kn/N)` and divide by `height·width`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ComplexGrid;
use crate::error::{Error, Result};

struct Radix2 {
    n: usize,
    bits: u32,
    // exp(-2πi k/n) for k < n/2
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Self {
            n,
            bits: n.trailing_zeros(),
            twiddles,
        }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        if n < 2 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - self.bits);
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Precomputed twiddle tables for repeated transforms of one extent.
pub struct Fft2Plan {
    height: usize,
    width: usize,
    rows: Radix2,
    cols: Radix2,
}

impl Fft2Plan {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        for (name, n) in [("height", height), ("width", width)] {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::Size(format!(
                    "{name} {n} is not a power of two; pad the grid first"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            rows: Radix2::new(width),
            cols: Radix2::new(height),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn execute(&self, grid: &mut ComplexGrid, inverse: bool) -> Result<()> {
        if grid.height() != self.height || grid.width() != self.width {
            return Err(Error::shape(format!(
                "plan is {}x{} but grid is {}x{}",
                self.height,
                self.width,
                grid.height(),
                grid.width()
            )));
        }
        let (h, w) = (self.height, self.width);
        let data = grid.as_mut_slice();
        for row in data.chunks_exact_mut(w) {
            self.rows.run(row, inverse);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..w {
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = data[r * w + c];
            }
            self.cols.run(&mut column, inverse);
            for (r, v) in column.iter().enumerate() {
                data[r * w + c] = *v;
            }
        }
        if inverse {
            let scale = 1.0 / (h * w) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(())
    }
}

pub fn fft2_in_place(grid: &mut ComplexGrid, inverse: bool) -> Result<()> {
    Fft2Plan::new(grid.height(), grid.width())?.execute(grid, inverse)
}

pub fn fft2(grid: &ComplexGrid, inverse: bool) -> Result<ComplexGrid> {
    let mut out = grid.clone();
    fft2_in_place(&mut out, inverse)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn random_grid(h: usize, w: usize, seed: u64) -> ComplexGrid {
        let mut rng = Rng::new(seed);
        let data = (0..h * w)
            .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect();
        ComplexGrid::from_vec(h, w, data).unwrap()
    }

    /// Direct O(n²) evaluation of the 2D DFT.
    fn dft_oracle(g: &ComplexGrid) -> Vec<Complex64> {
        let (h, w) = (g.height(), g.width());
        let mut out = vec![Complex64::new(0.0, 0.0); h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0
                            * PI
                            * (((u * y) % h) as f64 / h as f64 + ((v * x) % w) as f64 / w as f64);
                        acc += g.as_slice()[y * w + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[u * w + v] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_grid_is_pure_dc() {
        let g = ComplexGrid::filled(4, 4, Complex64::new(1.0, 0.0));
        let f = fft2(&g, false).unwrap();
        assert!((f.as_slice()[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
        assert!(f.as_slice()[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn impulse_is_flat() {
        let mut g = ComplexGrid::zeros(4, 4);
        g.as_mut_slice()[0] = Complex64::new(1.0, 0.0);
        let f = fft2(&g, false).unwrap();
        assert!(f
            .as_slice()
            .iter()
            .all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn matches_direct_dft() {
        let g = random_grid(16, 16, 7);
        let fast = fft2(&g, false).unwrap();
        let slow = dft_oracle(&g);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn rectangular_matches_direct_dft() {
        let g = random_grid(4, 8, 11);
        let fast = fft2(&g, false).unwrap();
        let slow = dft_oracle(&g);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            fft2(&ComplexGrid::zeros(3, 4), false),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            fft2(&ComplexGrid::zeros(4, 6), true),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn plan_rejects_other_extents() {
        let plan = Fft2Plan::new(4, 4).unwrap();
        assert!(plan.execute(&mut ComplexGrid::zeros(8, 4), false).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(log_h in 0u32..6, log_w in 0u32..6, seed in any::<u64>()) {
            let g = random_grid(1 << log_h, 1 << log_w, seed);
            let f = fft2(&g, false).unwrap();
            let back = fft2(&f, true).unwrap();
            let err = g.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12);
            let n = (g.height() * g.width()) as f64;
            let lhs = g.energy();
            let rhs = f.energy() / n;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        }
    }
}
