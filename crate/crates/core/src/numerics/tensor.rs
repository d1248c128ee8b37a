use crate::error::{first_non_finite, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps `data` as a `rows × cols` matrix, rejecting bad lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = first_non_finite(&data) {
            return Err(Error::non_finite(i, "matrix entry"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }
}

/// Returns `w · x + b`.
pub fn dense_affine(w: &Tensor2D, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if w.cols != x.len() {
        return Err(Error::shape(format!(
            "weight has {} columns but input has {} entries",
            w.cols,
            x.len()
        )));
    }
    if w.rows != b.len() {
        return Err(Error::shape(format!(
            "weight has {} rows but bias has {} entries",
            w.rows,
            b.len()
        )));
    }
    Ok((0..w.rows)
        .map(|r| {
            w.row(r)
                .iter()
                .zip(x)
                .fold(b[r], |acc, (wi, xi)| acc + wi * xi)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

impl Transpose {
    fn dims(self, t: &Tensor2D) -> (usize, usize, isize, isize) {
        match self {
            Transpose::No => (t.rows, t.cols, t.cols as isize, 1),
            Transpose::Yes => (t.cols, t.rows, 1, t.cols as isize),
        }
    }
}

/// `c ← op(a)·op(b) + beta·c`, dispatched to a blocked SIMD kernel.
///
/// Panics on mismatched dimensions; callers own the shape bookkeeping.
pub fn matmul_into(
    a: &Tensor2D,
    ta: Transpose,
    b: &Tensor2D,
    tb: Transpose,
    beta: f64,
    c: &mut Tensor2D,
) {
    let (m, k, rsa, csa) = ta.dims(a);
    let (kb, n, rsb, csb) = tb.dims(b);
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (m, n), "output has the wrong shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.data.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: the strides above address exactly the `rows × cols` buffers
    // owned by `a`, `b` and `c`, whose lengths are guaranteed by `Tensor2D`,
    // and `c` is borrowed mutably so it cannot alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}
