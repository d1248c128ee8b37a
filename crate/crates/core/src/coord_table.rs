//! Full-resolution learnable coordinate table.
//!
//! One `d_in`-wide row per signal element, addressed directly by the
//! element's flat (row-major) index, so there are no collisions. Rows are
//! optimized with a lazy per-row Adam: a row's moments and step counter only
//! change when that row receives a gradient, which keeps the per-iteration
//! cost proportional to the number of rows touched.

use serde::{Deserialize, Serialize};

use crate::error::{first_non_finite, Error, Result};
use crate::numerics::{adam_update, AdamConfig, Rng, Tensor2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableInit {
    /// Every row starts at the origin.
    Zero,
    /// Rows start at the normalized lattice coordinates of `shape`.
    Grid { shape: Vec<usize> },
    /// Rows drawn from `U(-scale, scale)`.
    Uniform { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordTable {
    n: usize,
    d_in: usize,
    entries: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: Vec<u64>,
    adam: AdamConfig,
}

/// Position of lattice index `i` on an axis of `n` samples, mapped to
/// `[-1, 1]`; a single-sample axis sits at 0.
#[inline]
pub fn lattice_coord(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

/// Normalized coordinates of every lattice element, in flat index order.
pub fn lattice_coords(shape: &[usize]) -> Tensor2D {
    let n: usize = shape.iter().product();
    let d = shape.len();
    let mut out = Tensor2D::zeros(n, d);
    let mut idx = vec![0usize; d];
    for r in 0..n {
        for (a, (&i, &extent)) in idx.iter().zip(shape).enumerate() {
            out.set(r, a, lattice_coord(i, extent));
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Row-major flattening, last axis fastest.
pub fn flatten_coord(coord: &[usize], shape: &[usize]) -> Result<usize> {
    if coord.len() != shape.len() {
        return Err(Error::shape(format!(
            "{}-d coordinate for {}-d extents",
            coord.len(),
            shape.len()
        )));
    }
    let mut flat = 0;
    for (&c, &n) in coord.iter().zip(shape) {
        if c >= n {
            return Err(Error::Index { index: c, len: n });
        }
        flat = flat * n + c;
    }
    Ok(flat)
}

/// Checks that `perm` is a bijection on `0..n`.
pub(crate) fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::config(format!(
            "permutation of length {} for {n} rows",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::config(format!(
                "permutation is not a bijection (entry {p})"
            )));
        }
    }
    Ok(())
}

impl CoordTable {
    pub fn new(n: usize, d_in: usize, init: &TableInit, rng: &mut Rng) -> Result<Self> {
        if n == 0 || d_in == 0 {
            return Err(Error::config(format!(
                "table needs n >= 1 and d_in >= 1 (got {n}x{d_in})"
            )));
        }
        let entries = match init {
            TableInit::Zero => vec![0.0; n * d_in],
            TableInit::Grid { shape } => {
                if shape.len() != d_in || shape.iter().product::<usize>() != n {
                    return Err(Error::config(format!(
                        "grid init extents {shape:?} do not describe {n} rows of width {d_in}"
                    )));
                }
                lattice_coords(shape).into_vec()
            }
            TableInit::Uniform { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::config(format!("uniform init scale {scale}")));
                }
                (0..n * d_in).map(|_| rng.uniform(-scale, *scale)).collect()
            }
        };
        Ok(Self {
            n,
            d_in,
            entries,
            m: vec![0.0; n * d_in],
            v: vec![0.0; n * d_in],
            steps: vec![0; n],
            adam: AdamConfig::default(),
        })
    }

    /// Reassembles a table from stored parts (checkpoint loading).
    pub fn from_parts(
        d_in: usize,
        entries: Vec<f64>,
        m: Vec<f64>,
        v: Vec<f64>,
        steps: Vec<u64>,
        adam: AdamConfig,
    ) -> Result<Self> {
        let n = steps.len();
        if n == 0
            || d_in == 0
            || [entries.len(), m.len(), v.len()]
                .iter()
                .any(|&l| l != n * d_in)
        {
            return Err(Error::shape("table parts have inconsistent lengths"));
        }
        if let Some(i) = first_non_finite(&entries) {
            return Err(Error::non_finite(i, "table entry"));
        }
        Ok(Self {
            n,
            d_in,
            entries,
            m,
            v,
            steps,
            adam,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn first_moments(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.v
    }

    /// Per-row count of applied optimizer steps.
    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn adam_config(&self) -> AdamConfig {
        self.adam
    }

    pub fn set_adam_config(&mut self, adam: AdamConfig) {
        self.adam = adam;
    }

    pub fn lookup(&self, flat_index: usize) -> Result<&[f64]> {
        if flat_index >= self.n {
            return Err(Error::Index {
                index: flat_index,
                len: self.n,
            });
        }
        Ok(self.row(flat_index))
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d_in..(i + 1) * self.d_in]
    }

    /// Copies the rows at `indices` into a `len × d_in` batch.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor2D> {
        let mut out = Tensor2D::zeros(indices.len(), self.d_in);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.lookup(i)?);
        }
        Ok(out)
    }

    /// Applies one lazy Adam step to row `flat_index` only.
    pub fn accumulate_and_step(&mut self, flat_index: usize, grad: &[f64], lr: f64) -> Result<()> {
        if flat_index >= self.n {
            return Err(Error::Index {
                index: flat_index,
                len: self.n,
            });
        }
        if grad.len() != self.d_in {
            return Err(Error::shape(format!(
                "row gradient has {} entries, table width is {}",
                grad.len(),
                self.d_in
            )));
        }
        if let Some(i) = first_non_finite(grad) {
            return Err(Error::non_finite(
                i,
                format!("gradient for table row {flat_index}"),
            ));
        }
        self.step_row_unchecked(flat_index, grad, lr);
        Ok(())
    }

    /// Steps every row in `indices` with the matching row of `grads`.
    /// Indices must be distinct. Returns the number of rows touched.
    pub fn step_rows(&mut self, indices: &[usize], grads: &Tensor2D, lr: f64) -> Result<usize> {
        if grads.rows() != indices.len() || grads.cols() != self.d_in {
            return Err(Error::shape(format!(
                "{}x{} gradient for {} rows of width {}",
                grads.rows(),
                grads.cols(),
                indices.len(),
                self.d_in
            )));
        }
        if let Some(i) = first_non_finite(grads.as_slice()) {
            return Err(Error::non_finite(
                indices[i / self.d_in],
                "table row gradient",
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::Index {
                index: bad,
                len: self.n,
            });
        }
        for (r, &i) in indices.iter().enumerate() {
            self.step_row_unchecked(i, grads.row(r), lr);
        }
        Ok(indices.len())
    }

    fn step_row_unchecked(&mut self, i: usize, grad: &[f64], lr: f64) {
        let span = i * self.d_in..(i + 1) * self.d_in;
        self.steps[i] += 1;
        adam_update(
            &mut self.entries[span.clone()],
            grad,
            &mut self.m[span.clone()],
            &mut self.v[span],
            self.steps[i],
            lr,
            &self.adam,
        );
    }

    /// Returns a table whose row `i` is this table's row `perm[i]`
    /// (optimizer state travels with its row).
    pub fn apply_permutation(&self, perm: &[usize]) -> Result<CoordTable> {
        validate_permutation(perm, self.n)?;
        let d = self.d_in;
        let pick = |src: &[f64]| -> Vec<f64> {
            perm.iter()
                .flat_map(|&p| src[p * d..(p + 1) * d].iter().copied())
                .collect()
        };
        Ok(CoordTable {
            n: self.n,
            d_in: d,
            entries: pick(&self.entries),
            m: pick(&self.m),
            v: pick(&self.v),
            steps: perm.iter().map(|&p| self.steps[p]).collect(),
            adam: self.adam,
        })
    }

    /// Per-axis `(min, max)` over all rows.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.d_in];
        for row in self.entries.chunks_exact(self.d_in) {
            for (bounds, &v) in b.iter_mut().zip(row) {
                bounds.0 = bounds.0.min(v);
                bounds.1 = bounds.1.max(v);
            }
        }
        b
    }
}
