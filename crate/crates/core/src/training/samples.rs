use serde::{Deserialize, Serialize};

use crate::coord_table::lattice_coords;
use crate::error::{Error, Result};
use crate::numerics::{seeded_permutation, Grid, Rng, Tensor2D};

/// A signal to fit: values on a regular lattice whose coordinates are
/// implicit (normalized to `[-1, 1]` per axis).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    grid: Grid,
}

impl SampleSet {
    pub fn new(grid: Grid) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn shape(&self) -> &[usize] {
        self.grid.shape()
    }

    pub fn d_in(&self) -> usize {
        self.grid.ndim()
    }

    pub fn d_out(&self) -> usize {
        self.grid.channels()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        self.grid.as_slice()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        self.grid.element(i)
    }

    pub fn coords(&self) -> Tensor2D {
        lattice_coords(self.grid.shape())
    }

    /// Scalar intensity used for sorting: Rec. 601 luma for RGB, the value
    /// itself for one channel, and the channel mean otherwise.
    pub fn luminance(&self, i: usize) -> f64 {
        let v = self.value(i);
        match v.len() {
            1 => v[0],
            3 => 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2],
            n => v.iter().sum::<f64>() / n as f64,
        }
    }

    /// Sample indices sorted by value (lexicographic over channels, ties by
    /// index). Used as the canonical summation order during training.
    pub(crate) fn value_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.value(a)
                .iter()
                .zip(self.value(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }

    /// Histogram of values over `bins` equal bins in `[0, 1]`, per channel.
    pub fn histogram(&self, bins: usize) -> Vec<Vec<usize>> {
        let mut h = vec![vec![0; bins]; self.d_out()];
        for e in self.values().chunks_exact(self.d_out()) {
            for (c, &v) in e.iter().enumerate() {
                let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
                h[c][b] += 1;
            }
        }
        h
    }
}

/// How to rearrange the elements of a signal on its lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arrangement {
    Identity,
    /// Ascending luminance, ties broken by original flat index.
    SortedByIntensity,
    Random {
        seed: u64,
    },
}

impl Arrangement {
    pub fn name(&self) -> String {
        match self {
            Arrangement::Identity => "identity".into(),
            Arrangement::SortedByIntensity => "sorted".into(),
            Arrangement::Random { seed } => format!("random({seed})"),
        }
    }

    /// Parses `identity`, `sorted` or `random`; `random` uses `seed`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Arrangement::Identity),
            "sorted" => Ok(Arrangement::SortedByIntensity),
            "random" => Ok(Arrangement::Random { seed }),
            other => Err(Error::config(format!("unknown arrangement {other:?}"))),
        }
    }
}

/// Rearranges `data` onto the same lattice. Returns the permuted signal and
/// `perm`, where element `i` of the result is element `perm[i]` of `data`.
pub fn rearrange(data: &SampleSet, order: Arrangement) -> (SampleSet, Vec<usize>) {
    let n = data.len();
    let perm: Vec<usize> = match order {
        Arrangement::Identity => (0..n).collect(),
        Arrangement::SortedByIntensity => {
            let mut p: Vec<usize> = (0..n).collect();
            p.sort_by(|&a, &b| {
                data.luminance(a)
                    .total_cmp(&data.luminance(b))
                    .then(a.cmp(&b))
            });
            p
        }
        Arrangement::Random { seed } => {
            seeded_permutation(&mut Rng::new(seed), n).expect("signals are never empty")
        }
    };
    let values = perm
        .iter()
        .flat_map(|&p| data.value(p).iter().copied())
        .collect();
    let grid = Grid::new(data.shape().to_vec(), data.d_out(), values).expect("same layout");
    (SampleSet::new(grid), perm)
}
