//! Cluster property test and the one-hot cluster representation.
//!
//! The test links sample points closer than `gamma = s / sqrt(n)`, takes the
//! connected components of that graph and turns each component into the
//! union of grid cells its points fall in. It passes when at least two such
//! regions exist; every sample point then lies in a region by construction,
//! so the empirical uncovered fraction is zero.
//!
//! Two components can touch the same cell, because a cell's diameter
//! `s * sqrt(n)` exceeds `gamma`. Such components are merged into a single
//! region so that regions stay disjoint.
//!
//! Known gaps, left as they are: separation by more than `gamma` is only
//! guaranteed between *sample* points of different regions, not between all
//! points of the regions' cells, and a point of a region cell is only
//! guaranteed to be within the cell diameter of a sample point, not within
//! `gamma`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::learners::FeatureMap;
use crate::math;
use crate::union_find::DisjointSet;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterTestResult {
    pub passed: bool,
    pub grid: GridSpec,
    /// Edge threshold of the proximity graph.
    pub gamma: f64,
    /// Disjoint cell sets, ordered by their smallest cell.
    pub regions: Vec<BTreeSet<CellIndex>>,
    /// Connected components of the proximity graph before cell merging.
    pub components: usize,
    /// Empirical fraction of the sample outside every region; `Some(0.0)` on
    /// pass, `None` when the test fails.
    pub r_a_hat: Option<f64>,
    /// Region index of every sample point, in sample order.
    pub component_of: Vec<usize>,
}

impl ClusterTestResult {
    pub fn k(&self) -> usize {
        self.regions.len()
    }
}

/// Runs the cluster property test on `sample`.
pub fn cluster_property_test<P: AsRef<[f64]>>(grid: &GridSpec, sample: &[P]) -> Result<ClusterTestResult> {
    if sample.is_empty() {
        return Err(invalid_input!("cluster test needs a non-empty sample"));
    }
    for p in sample {
        grid.check_point(p.as_ref())?;
    }
    let gamma = grid.gamma();
    let labels = proximity_components(sample, gamma);
    let components = labels.iter().copied().max().map_or(0, |m| m + 1);

    // cells per component, then merge components sharing a cell
    let mut comp_cells: Vec<BTreeSet<CellIndex>> = alloc::vec![BTreeSet::new(); components];
    for (p, &c) in sample.iter().zip(&labels) {
        comp_cells[c].insert(grid.cell_of_unchecked(p.as_ref()));
    }
    let mut merge = DisjointSet::new(components);
    let mut owner: BTreeMap<&CellIndex, usize> = BTreeMap::new();
    for (c, cells) in comp_cells.iter().enumerate() {
        for cell in cells {
            if let Some(&other) = owner.get(cell) {
                merge.union(c, other);
            } else {
                owner.insert(cell, c);
            }
        }
    }
    let (group_of, groups) = merge.labels();
    let mut group_cells: Vec<BTreeSet<CellIndex>> = alloc::vec![BTreeSet::new(); groups];
    for (c, cells) in comp_cells.into_iter().enumerate() {
        group_cells[group_of[c]].extend(cells);
    }

    let mut order: Vec<usize> = (0..groups).collect();
    order.sort_by(|&a, &b| group_cells[a].first().cmp(&group_cells[b].first()));
    let mut region_of_group = alloc::vec![0; groups];
    for (region, &g) in order.iter().enumerate() {
        region_of_group[g] = region;
    }
    let mut regions: Vec<BTreeSet<CellIndex>> = alloc::vec![BTreeSet::new(); groups];
    for (g, cells) in group_cells.into_iter().enumerate() {
        regions[region_of_group[g]] = cells;
    }
    let component_of = labels.iter().map(|&c| region_of_group[group_of[c]]).collect();

    let passed = regions.len() >= 2;
    Ok(ClusterTestResult {
        passed,
        grid: *grid,
        gamma,
        regions,
        components,
        r_a_hat: passed.then_some(0.0),
        component_of,
    })
}

/// Component label of every point in the graph joining points at distance
/// `<= gamma`. Only pairs in adjacent buckets of side `gamma` can be joined,
/// so the pruning is exact.
fn proximity_components<P: AsRef<[f64]>>(sample: &[P], gamma: f64) -> Vec<usize> {
    let gamma_sq = gamma * gamma;
    // slightly wider buckets keep rounding from separating a pair at exactly gamma
    let width = gamma * (1.0 + 1e-9);
    let mut buckets: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, p) in sample.iter().enumerate() {
        let key = p.as_ref().iter().map(|&x| math::floor(x / width) as i64).collect();
        buckets.entry(key).or_default().push(i);
    }
    let n = sample[0].as_ref().len();
    let mut ds = DisjointSet::new(sample.len());
    let mut other = alloc::vec![0i64; n];
    for (key, members) in &buckets {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if math::dist_sq(sample[i].as_ref(), sample[j].as_ref()) <= gamma_sq {
                    ds.union(i, j);
                }
            }
        }
        // visit each unordered pair of distinct buckets once: only forward deltas
        for_each_forward_delta(n, |delta| {
            for ((o, k), d) in other.iter_mut().zip(key).zip(delta) {
                *o = k + d;
            }
            if let Some(others) = buckets.get(&other) {
                for &i in members {
                    for &j in others {
                        if math::dist_sq(sample[i].as_ref(), sample[j].as_ref()) <= gamma_sq {
                            ds.union(i, j);
                        }
                    }
                }
            }
        });
    }
    ds.labels().0
}

/// Calls `f` for every delta in `{-1,0,1}^n` that is lexicographically
/// positive (first non-zero entry is +1).
fn for_each_forward_delta(n: usize, mut f: impl FnMut(&[i64])) {
    let mut delta = alloc::vec![-1i64; n];
    loop {
        if delta.iter().find(|&&d| d != 0) == Some(&1) {
            f(&delta);
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
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

/// One-hot code over the regions of a passed cluster test; the zero vector
/// off the regions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFeatureMap {
    grid: GridSpec,
    region_of_cell: BTreeMap<CellIndex, usize>,
    k: usize,
}

impl ClusterFeatureMap {
    pub fn new(result: &ClusterTestResult) -> Result<Self> {
        if !result.passed {
            return Err(Error::InvalidState(
                "cluster feature map requires a passed cluster test".to_string(),
            ));
        }
        let mut region_of_cell = BTreeMap::new();
        for (i, cells) in result.regions.iter().enumerate() {
            for c in cells {
                region_of_cell.insert(c.clone(), i);
            }
        }
        Ok(Self {
            grid: result.grid,
            region_of_cell,
            k: result.k(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn region_of_cell(&self, cell: &CellIndex) -> Option<usize> {
        self.region_of_cell.get(cell).copied()
    }

    pub fn region_of(&self, p: &[f64]) -> Result<Option<usize>> {
        let cell = self.grid.cell_of(p)?;
        Ok(self.region_of_cell.get(&cell).copied())
    }

    pub fn map_point(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut z = alloc::vec![0.0; self.k];
        if let Some(i) = self.region_of(p)? {
            z[i] = 1.0;
        }
        Ok(z)
    }

    /// Kernel of the dual form: 1 iff both points lie in the same region.
    pub fn kernel(&self, p: &[f64], p2: &[f64]) -> Result<f64> {
        Ok(match (self.region_of(p)?, self.region_of(p2)?) {
            (Some(a), Some(b)) if a == b => 1.0,
            _ => 0.0,
        })
    }
}

impl FeatureMap for ClusterFeatureMap {
    fn output_dim(&self) -> usize {
        self.k
    }

    fn map(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.map_point(p)
    }
}
