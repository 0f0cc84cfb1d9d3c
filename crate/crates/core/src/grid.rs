//! Axis-aligned partition of the unit hypercube into `q^n` cells of side `1/q`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{invalid_input, Result};
use crate::math;

/// Largest number of cells a grid may have.
pub const MAX_CELLS: u64 = 1_000_000_000;

/// Grid over `[0,1]^n` with `q` cells per axis. The side is always exactly
/// `1/q`, so the cells tile the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    n: usize,
    q: u32,
}

impl GridSpec {
    pub fn new(n: usize, q: u32) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(invalid_input!("grid needs n >= 1 and q >= 1 (got n={n}, q={q})"));
        }
        let mut total: u64 = 1;
        for _ in 0..n {
            total = total.saturating_mul(u64::from(q));
            if total > MAX_CELLS {
                return Err(invalid_input!("grid with q={q}, n={n} exceeds {MAX_CELLS} cells"));
            }
        }
        Ok(Self { n, q })
    }

    /// Builds a grid from a side length, which must be the reciprocal of an
    /// integer.
    pub fn from_side(n: usize, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(invalid_input!("side length {s} outside (0, 1]"));
        }
        let inv = 1.0 / s;
        let q = libm::round(inv);
        if (inv - q).abs() > 1e-9 * q.max(1.0) || q > f64::from(u32::MAX) {
            return Err(invalid_input!("side length {s} is not 1/q for an integer q"));
        }
        Self::new(n, q as u32)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn cells_per_axis(&self) -> u32 {
        self.q
    }

    pub fn side(&self) -> f64 {
        1.0 / f64::from(self.q)
    }

    pub fn cell_count(&self) -> u64 {
        u64::from(self.q).pow(self.n as u32)
    }

    /// Proximity scale `s / sqrt(n)` used by the cluster test.
    pub fn gamma(&self) -> f64 {
        self.side() / math::sqrt(self.n as f64)
    }

    /// Cell diameter `s * sqrt(n)`.
    pub fn diameter(&self) -> f64 {
        self.side() * math::sqrt(self.n as f64)
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(invalid_input!("point has dimension {}, grid has {}", p.len(), self.n));
        }
        if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(invalid_input!("coordinate {x} outside [0, 1]"));
        }
        Ok(())
    }

    pub fn check_cell(&self, c: &CellIndex) -> Result<()> {
        if c.0.len() != self.n {
            return Err(invalid_input!("cell has dimension {}, grid has {}", c.0.len(), self.n));
        }
        if let Some(i) = c.0.iter().find(|&&i| i >= self.q) {
            return Err(invalid_input!("cell coordinate {i} outside [0, {})", self.q));
        }
        Ok(())
    }

    /// Cell containing `p`. The upper face `p_i = 1` belongs to the last cell.
    pub fn cell_of(&self, p: &[f64]) -> Result<CellIndex> {
        self.check_point(p)?;
        Ok(self.cell_of_unchecked(p))
    }

    pub(crate) fn cell_of_unchecked(&self, p: &[f64]) -> CellIndex {
        let q = f64::from(self.q);
        CellIndex(
            p.iter()
                .map(|&x| (math::floor(x * q) as u32).min(self.q - 1))
                .collect(),
        )
    }

    pub fn center_of(&self, c: &CellIndex) -> Result<Point> {
        self.check_cell(c)?;
        Ok(self.center_unchecked(c))
    }

    pub(crate) fn center_unchecked(&self, c: &CellIndex) -> Point {
        let s = self.side();
        Point(c.0.iter().map(|&i| (f64::from(i) + 0.5) * s).collect())
    }

    /// Moore neighbourhood of `c`: every in-bounds cell differing by at most
    /// one in each coordinate, excluding `c`. Ordered lexicographically by
    /// coordinate delta, which is also lexicographic by cell.
    pub fn neighbors(&self, c: &CellIndex) -> Result<Vec<CellIndex>> {
        self.check_cell(c)?;
        Ok(self.neighbors_unchecked(c))
    }

    pub(crate) fn neighbors_unchecked(&self, c: &CellIndex) -> Vec<CellIndex> {
        let n = self.n;
        let mut out = Vec::new();
        let mut delta = alloc::vec![-1i64; n];
        loop {
            if delta.iter().any(|&d| d != 0) {
                let coords: Option<Vec<u32>> = c
                    .0
                    .iter()
                    .zip(&delta)
                    .map(|(&i, &d)| {
                        let j = i64::from(i) + d;
                        (j >= 0 && j < i64::from(self.q)).then_some(j as u32)
                    })
                    .collect();
                if let Some(coords) = coords {
                    out.push(CellIndex(coords));
                }
            }
            // odometer over {-1,0,1}^n, last axis fastest
            let mut axis = n;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if delta[axis] < 1 {
                    delta[axis] += 1;
                    break;
                }
                delta[axis] = -1;
            }
        }
    }

    /// Tally of sample points per occupied cell.
    pub fn occupied_cells<P: AsRef<[f64]>>(&self, sample: &[P]) -> Result<BTreeMap<CellIndex, usize>> {
        let mut counts = BTreeMap::new();
        for p in sample {
            *counts.entry(self.cell_of(p.as_ref())?).or_insert(0) += 1;
        }
        Ok(counts)
    }
}

/// Integer coordinates of a grid cell. Orders lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellIndex(pub Vec<u32>);

impl CellIndex {
    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    /// Euclidean distance between the centers of two cells of `g`.
    pub fn center_distance(&self, other: &CellIndex, g: &GridSpec) -> f64 {
        let s = g.side();
        let sq: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let d = (f64::from(a) - f64::from(b)) * s;
                d * d
            })
            .sum();
        math::sqrt(sq)
    }

    /// True when the cells touch (differ by at most one on every axis).
    pub fn is_adjacent(&self, other: &CellIndex) -> bool {
        self != other && self.0.iter().zip(&other.0).all(|(&a, &b)| a.abs_diff(b) <= 1)
    }
}

impl From<Vec<u32>> for CellIndex {
    fn from(v: Vec<u32>) -> Self {
        CellIndex(v)
    }
}

/// A point of the input space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}
