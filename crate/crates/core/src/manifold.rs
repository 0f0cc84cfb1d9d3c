//! One-dimensional manifold property test and the arc-length representation.
//!
//! The test searches, depth first, for a single chain of occupied cells
//! whose consecutive members are Moore neighbours, that visits every
//! occupied cell and whose center-to-center length stays within the budget
//! `gamma_len`. Start cells are tried in lexicographic order and neighbours
//! are expanded in lexicographic order, so the result is deterministic.
//!
//! The search also carries the revisit check of the original procedure,
//! which compares the last cell only against path positions
//! `1..=len-n` (1-indexed). Since expansion only ever appends cells that are
//! not on the path, the check cannot fire during the search; it is kept,
//! together with a strict variant, for conformance.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::learners::FeatureMap;

pub const DEFAULT_MAX_EXPANSIONS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifoldOptions {
    /// Reject any revisit instead of only those the literal loop bound sees.
    pub strict_revisit: bool,
    /// Node-expansion cap across all start cells.
    pub max_expansions: u64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            strict_revisit: false,
            max_expansions: DEFAULT_MAX_EXPANSIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ManifoldVerdict {
    Passed,
    /// No chain satisfies the budget and coverage constraints.
    Failed,
    /// The expansion cap was hit before the search finished.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifoldTestResult {
    pub verdict: ManifoldVerdict,
    pub grid: GridSpec,
    pub gamma_len: f64,
    /// Cells of the curve in order; empty unless passed.
    pub path: Vec<CellIndex>,
    /// Sum of consecutive center distances along `path`.
    pub path_length: f64,
    /// Distance along the curve from the first center, aligned with `path`.
    pub arc_offset: Vec<f64>,
    pub r_a_hat: Option<f64>,
    pub expansions: u64,
}

impl ManifoldTestResult {
    pub fn passed(&self) -> bool {
        self.verdict == ManifoldVerdict::Passed
    }

    pub fn offset_of(&self, cell: &CellIndex) -> Option<f64> {
        self.path.iter().position(|c| c == cell).map(|i| self.arc_offset[i])
    }
}

/// The revisit check of the search, as written in the original procedure:
/// the last cell is compared with positions `1..=len-n` (1-indexed), so only
/// revisits at lag `n` or more are caught. `strict` compares against every
/// earlier position.
pub fn revisit_rejected(path: &[CellIndex], n: usize, strict: bool) -> bool {
    let Some((last, rest)) = path.split_last() else {
        return false;
    };
    let upto = if strict { rest.len() } else { path.len().saturating_sub(n) };
    rest[..upto.min(rest.len())].contains(last)
}

enum Entered {
    Fail,
    Success,
    Expand(Vec<CellIndex>),
}

struct Search<'a> {
    grid: &'a GridSpec,
    gamma_len: f64,
    opts: ManifoldOptions,
    occupied: BTreeSet<CellIndex>,
    expansions: u64,
}

impl Search<'_> {
    fn enter(&self, path: &[CellIndex], on_path: &BTreeSet<CellIndex>, distance: f64) -> Entered {
        if distance > self.gamma_len {
            return Entered::Fail;
        }
        if revisit_rejected(path, self.grid.dim(), self.opts.strict_revisit) {
            return Entered::Fail;
        }
        // the path holds distinct occupied cells only
        if on_path.len() == self.occupied.len() {
            return Entered::Success;
        }
        let last = path.last().expect("path is never empty");
        let next = self
            .grid
            .neighbors_unchecked(last)
            .into_iter()
            .filter(|c| self.occupied.contains(c) && !on_path.contains(c))
            .collect();
        Entered::Expand(next)
    }

    /// Depth-first search from `start`; `Ok(None)` when no chain exists.
    fn explore(&mut self, start: &CellIndex) -> Result<Option<(Vec<CellIndex>, Vec<f64>)>> {
        let mut path = alloc::vec![start.clone()];
        let mut offsets = alloc::vec![0.0];
        let mut on_path = BTreeSet::new();
        on_path.insert(start.clone());
        let mut frames: Vec<(Vec<CellIndex>, usize)> = Vec::new();
        match self.enter(&path, &on_path, 0.0) {
            Entered::Success => return Ok(Some((path, offsets))),
            Entered::Fail => return Ok(None),
            Entered::Expand(c) => frames.push((c, 0)),
        }
        while let Some((candidates, next)) = frames.last_mut() {
            if *next == candidates.len() {
                frames.pop();
                let cell = path.pop().expect("frame has a path cell");
                offsets.pop();
                on_path.remove(&cell);
                continue;
            }
            let cell = candidates[*next].clone();
            *next += 1;
            self.expansions += 1;
            if self.expansions > self.opts.max_expansions {
                return Err(Error::ResourceExhausted {
                    expansions: self.expansions,
                });
            }
            let last = path.last().expect("path is never empty");
            let distance = offsets.last().copied().unwrap_or(0.0) + last.center_distance(&cell, self.grid);
            path.push(cell.clone());
            offsets.push(distance);
            on_path.insert(cell);
            match self.enter(&path, &on_path, distance) {
                Entered::Success => return Ok(Some((path, offsets))),
                Entered::Fail => {
                    let cell = path.pop().expect("just pushed");
                    offsets.pop();
                    on_path.remove(&cell);
                }
                Entered::Expand(c) => frames.push((c, 0)),
            }
        }
        Ok(None)
    }
}

/// Runs the manifold property test with default options.
pub fn manifold_property_test<P: AsRef<[f64]>>(
    grid: &GridSpec,
    sample: &[P],
    gamma_len: f64,
) -> Result<ManifoldTestResult> {
    manifold_property_test_with(grid, sample, gamma_len, ManifoldOptions::default())
}

pub fn manifold_property_test_with<P: AsRef<[f64]>>(
    grid: &GridSpec,
    sample: &[P],
    gamma_len: f64,
    opts: ManifoldOptions,
) -> Result<ManifoldTestResult> {
    if sample.is_empty() {
        return Err(invalid_input!("manifold test needs a non-empty sample"));
    }
    if !(gamma_len > 0.0 && gamma_len.is_finite()) {
        return Err(invalid_input!("manifold length budget must be positive, got {gamma_len}"));
    }
    let occupied: BTreeSet<CellIndex> = grid.occupied_cells(sample)?.into_keys().collect();
    let mut search = Search {
        grid,
        gamma_len,
        opts,
        occupied,
        expansions: 0,
    };
    let starts: Vec<CellIndex> = search.occupied.iter().cloned().collect();
    let mut result = ManifoldTestResult {
        verdict: ManifoldVerdict::Failed,
        grid: *grid,
        gamma_len,
        path: Vec::new(),
        path_length: 0.0,
        arc_offset: Vec::new(),
        r_a_hat: None,
        expansions: 0,
    };
    for start in &starts {
        match search.explore(start) {
            Ok(Some((path, offsets))) => {
                result.verdict = ManifoldVerdict::Passed;
                result.path_length = offsets.last().copied().unwrap_or(0.0);
                result.path = path;
                result.arc_offset = offsets;
                result.r_a_hat = Some(0.0);
                break;
            }
            Ok(None) => {}
            Err(Error::ResourceExhausted { .. }) => {
                result.verdict = ManifoldVerdict::Exhausted;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    result.expansions = search.expansions;
    Ok(result)
}

/// Arc-length coordinate along a passed manifold test's curve; a large
/// negative constant off the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldFeatureMap {
    grid: GridSpec,
    path: Vec<CellIndex>,
    offsets: BTreeMap<CellIndex, f64>,
    off_curve_value: f64,
}

impl ManifoldFeatureMap {
    pub fn new(result: &ManifoldTestResult) -> Result<Self> {
        if !result.passed() {
            return Err(Error::InvalidState(
                "manifold feature map requires a passed manifold test".to_string(),
            ));
        }
        Ok(Self {
            grid: result.grid,
            path: result.path.clone(),
            offsets: result.path.iter().cloned().zip(result.arc_offset.iter().copied()).collect(),
            // further from every on-curve value than any two on-curve values are apart
            off_curve_value: -10.0 * result.gamma_len,
        })
    }

    pub fn off_curve_value(&self) -> f64 {
        self.off_curve_value
    }

    /// Curve cells in path order.
    pub fn curve(&self) -> &[CellIndex] {
        &self.path
    }

    pub fn offset_of_cell(&self, cell: &CellIndex) -> Option<f64> {
        self.offsets.get(cell).copied()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn map_point(&self, p: &[f64]) -> Result<f64> {
        let cell = self.grid.cell_of(p)?;
        Ok(self.offsets.get(&cell).copied().unwrap_or(self.off_curve_value))
    }
}

impl FeatureMap for ManifoldFeatureMap {
    fn output_dim(&self) -> usize {
        1
    }

    fn map(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(alloc::vec![self.map_point(p)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn cell(c: &[u32]) -> CellIndex {
        CellIndex(c.to_vec())
    }

    fn centers(g: &GridSpec, cells: &[CellIndex]) -> Vec<Vec<f64>> {
        cells.iter().map(|c| g.center_of(c).unwrap().0).collect()
    }

    #[test]
    fn single_cell_passes_with_empty_length() {
        let g = GridSpec::new(2, 10).unwrap();
        let r = manifold_property_test(&g, &[vec![0.55, 0.55], vec![0.51, 0.58]], 1.0).unwrap();
        assert!(r.passed());
        assert_eq!(r.path, vec![cell(&[5, 5])]);
        assert_eq!(r.path_length, 0.0);
        assert_eq!(r.r_a_hat, Some(0.0));
    }

    #[test]
    fn disconnected_groups_fail() {
        let g = GridSpec::new(2, 10).unwrap();
        let cells = [cell(&[0, 0]), cell(&[1, 0]), cell(&[5, 5]), cell(&[6, 5])];
        let r = manifold_property_test(&g, &centers(&g, &cells), 20.0).unwrap();
        assert_eq!(r.verdict, ManifoldVerdict::Failed);
        assert!(r.path.is_empty());
        assert!(ManifoldFeatureMap::new(&r).is_err());
    }

    #[test]
    fn straight_path_offsets() {
        let g = GridSpec::new(2, 5).unwrap();
        let cells = [cell(&[1, 2]), cell(&[2, 2]), cell(&[3, 2])];
        let r = manifold_property_test(&g, &centers(&g, &cells), 1.0).unwrap();
        assert!(r.passed());
        assert_eq!(r.path, cells.to_vec());
        for (got, want) in r.arc_offset.iter().zip([0.0, 0.2, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        let fm = ManifoldFeatureMap::new(&r).unwrap();
        assert!((fm.map_point(&[0.7, 0.5]).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(fm.map_point(&[0.3, 0.5]).unwrap(), 0.0);
        assert_eq!(fm.map_point(&[0.1, 0.1]).unwrap(), -10.0);
    }

    #[test]
    fn off_curve_sentinel_is_ten_budgets_below() {
        let g = GridSpec::new(2, 10).unwrap();
        let r = manifold_property_test(&g, &[vec![0.05, 0.05]], 20.0).unwrap();
        let fm = ManifoldFeatureMap::new(&r).unwrap();
        assert_eq!(fm.map_point(&[0.9, 0.9]).unwrap(), -200.0);
    }

    #[test]
    fn budget_is_enforced() {
        let g = GridSpec::new(2, 5).unwrap();
        let cells = [cell(&[1, 2]), cell(&[2, 2]), cell(&[3, 2])];
        let r = manifold_property_test(&g, &centers(&g, &cells), 0.39).unwrap();
        assert_eq!(r.verdict, ManifoldVerdict::Failed);
        let r = manifold_property_test(&g, &centers(&g, &cells), 0.4 + 1e-12).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn starts_in_lexicographic_order() {
        // a "T": lexicographically first cell (1,1) is an end, (2,1) the junction
        let g = GridSpec::new(2, 10).unwrap();
        let cells = [cell(&[1, 1]), cell(&[2, 1]), cell(&[3, 1]), cell(&[2, 3])];
        // (2,3) is not adjacent to anything: fail
        let r = manifold_property_test(&g, &centers(&g, &cells), 10.0).unwrap();
        assert_eq!(r.verdict, ManifoldVerdict::Failed);
        // middle start: chain (1,1),(2,1),(3,1) plus (2,2) reachable diagonally
        let cells = [cell(&[1, 1]), cell(&[2, 1]), cell(&[3, 1]), cell(&[2, 2])];
        let r = manifold_property_test(&g, &centers(&g, &cells), 10.0).unwrap();
        assert!(r.passed());
        assert_eq!(r.path, vec![cell(&[1, 1]), cell(&[2, 1]), cell(&[2, 2]), cell(&[3, 1])]);
    }

    #[test]
    fn expansion_cap_reports_exhaustion() {
        let g = GridSpec::new(2, 4).unwrap();
        // a 3x3 block minus its corner plus a detached cell can never pass
        let mut cells = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                cells.push(cell(&[i, j]));
            }
        }
        cells.push(cell(&[3, 3]));
        cells.retain(|c| c != &cell(&[2, 2]));
        let opts = ManifoldOptions {
            strict_revisit: false,
            max_expansions: 50,
        };
        let r = manifold_property_test_with(&g, &centers(&g, &cells), 100.0, opts).unwrap();
        assert_eq!(r.verdict, ManifoldVerdict::Exhausted);
        assert!(!r.passed());
    }

    #[test]
    fn literal_revisit_check_boundary() {
        // n = 2: positions 1..=len-2 are compared with the last one
        let a = cell(&[0, 0]);
        let b = cell(&[1, 0]);
        let c = cell(&[1, 1]);
        let d = cell(&[0, 1]);
        // lag 1: last equals the previous entry, not inspected by the loop
        assert!(!revisit_rejected(&[a.clone(), b.clone(), b.clone()], 2, false));
        // lag 2 = n: inspected
        assert!(revisit_rejected(&[a.clone(), b.clone(), a.clone()], 2, false));
        // lag 3 > n: inspected
        assert!(revisit_rejected(&[a.clone(), b.clone(), c.clone(), a.clone()], 2, false));
        // n = 3 misses a lag-2 revisit that the strict check catches
        assert!(!revisit_rejected(&[a.clone(), b.clone(), a.clone()], 3, false));
        assert!(revisit_rejected(&[a.clone(), b.clone(), a.clone()], 3, true));
        assert!(revisit_rejected(&[a.clone(), b.clone(), b.clone()], 2, true));
        assert!(!revisit_rejected(&[a, b, c, d], 2, true));
        assert!(!revisit_rejected(&[], 2, true));
    }

    #[test]
    fn strict_flag_does_not_change_search_results() {
        let g = GridSpec::new(2, 10).unwrap();
        let cells = [cell(&[1, 1]), cell(&[2, 1]), cell(&[3, 1]), cell(&[2, 2])];
        let loose = manifold_property_test(&g, &centers(&g, &cells), 10.0).unwrap();
        let strict = manifold_property_test_with(
            &g,
            &centers(&g, &cells),
            10.0,
            ManifoldOptions {
                strict_revisit: true,
                ..ManifoldOptions::default()
            },
        )
        .unwrap();
        assert_eq!(loose, strict);
    }

    /// Self-avoiding 4-connected walks on a 6x6 grid.
    fn walk() -> impl Strategy<Value = Vec<CellIndex>> {
        (0u32..6, 0u32..6, proptest::collection::vec(0usize..4, 0..10)).prop_map(|(x, y, moves)| {
            let mut path = vec![cell(&[x, y])];
            for m in moves {
                let last = path.last().unwrap().0.clone();
                let (dx, dy) = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)][m];
                let nx = i64::from(last[0]) + dx;
                let ny = i64::from(last[1]) + dy;
                if (0..6).contains(&nx) && (0..6).contains(&ny) {
                    let c = cell(&[nx as u32, ny as u32]);
                    if !path.contains(&c) {
                        path.push(c);
                    }
                }
            }
            path
        })
    }

    proptest! {
        #[test]
        fn passing_paths_are_well_formed(cells in walk()) {
            let g = GridSpec::new(2, 6).unwrap();
            let sample = centers(&g, &cells);
            let r = manifold_property_test(&g, &sample, 100.0).unwrap();
            // the walk itself is a valid chain, so the search must find one
            prop_assert!(r.passed());
            let occupied: BTreeSet<CellIndex> = cells.iter().cloned().collect();
            let on_path: BTreeSet<CellIndex> = r.path.iter().cloned().collect();
            prop_assert_eq!(on_path.len(), r.path.len());
            prop_assert_eq!(&occupied, &on_path);
            prop_assert!(r.path_length <= r.gamma_len);
            prop_assert_eq!(r.arc_offset[0], 0.0);
            for w in 0..r.path.len().saturating_sub(1) {
                let step = r.path[w].center_distance(&r.path[w + 1], &g);
                prop_assert!(r.arc_offset[w + 1] > r.arc_offset[w]);
                prop_assert!((r.arc_offset[w + 1] - r.arc_offset[w] - step).abs() < 1e-12);
            }
            let fm = ManifoldFeatureMap::new(&r).unwrap();
            for p in &sample {
                let f = fm.map_point(p).unwrap();
                prop_assert!((0.0..=r.gamma_len).contains(&f));
            }
            let again = manifold_property_test(&g, &sample, 100.0).unwrap();
            prop_assert_eq!(r, again);
        }
    }
}
