//! Synthetic worlds with known supports, used to drive and check the
//! pipelines.
//!
//! A world is a finite set of axis-aligned boxes, one per grid cell, each
//! centred on its cell, carrying a probability mass and a label. Inputs are
//! uniform inside their box, so every mass integral is exact and the
//! distances `d_gamma` and `d_r` can be decided on the cells instead of
//! being approximated from samples.
//!
//! Labels are a function of the cell, and label 0 carries at least half of
//! the mass in every factory world.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterFeatureMap;
use crate::error::{invalid_input, Result};
use crate::grid::{CellIndex, GridSpec, Point};
use crate::learners::{Example, Label};
use crate::manifold::ManifoldFeatureMap;
use crate::math;
use crate::union_find::DisjointSet;

/// The generator behind every random draw in the crate.
pub type WorldRng = ChaCha8Rng;

/// Generator for `(seed, stream)`; distinct streams never overlap.
pub fn rng_for(seed: u64, stream: u64) -> WorldRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCell {
    pub cell: CellIndex,
    pub mass: f64,
    pub label: Label,
    /// Half side of the support box, at most half the cell side.
    pub half_width: f64,
}

/// Support decomposition of a world: disjoint boxes with masses summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    grid: GridSpec,
    cells: Vec<SupportCell>,
    cumulative: Vec<f64>,
    index: BTreeMap<CellIndex, usize>,
}

impl Support {
    pub fn new(grid: GridSpec, cells: Vec<SupportCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(invalid_input!("a world needs at least one support cell"));
        }
        let mut index = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            grid.check_cell(&c.cell)?;
            if !(c.mass.is_finite() && c.mass > 0.0) {
                return Err(invalid_input!("support masses must be positive"));
            }
            if c.label > 1 {
                return Err(invalid_input!("label {} is not 0 or 1", c.label));
            }
            if !(c.half_width > 0.0 && c.half_width <= 0.5 * grid.side() + 1e-15) {
                return Err(invalid_input!("box half width must lie in (0, s/2]"));
            }
            if index.insert(c.cell.clone(), i).is_some() {
                return Err(invalid_input!("cell {:?} appears twice in the support", c.cell.coords()));
            }
        }
        let total: f64 = cells.iter().map(|c| c.mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid_input!("support masses sum to {total}, not 1"));
        }
        let mut acc = 0.0;
        let cumulative = cells
            .iter()
            .map(|c| {
                acc += c.mass / total;
                acc
            })
            .collect();
        Ok(Self {
            grid,
            cells,
            cumulative,
            index,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[SupportCell] {
        &self.cells
    }

    pub fn position(&self, cell: &CellIndex) -> Option<usize> {
        self.index.get(cell).copied()
    }

    /// Support cell whose box contains `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let cell = self.grid.cell_of(x).ok()?;
        let i = self.position(&cell)?;
        let center = self.grid.center_of(&cell).ok()?;
        let h = self.cells[i].half_width;
        x.iter()
            .zip(&center.0)
            .all(|(a, c)| (a - c).abs() <= h)
            .then_some(i)
    }

    pub fn label_mass(&self, label: Label) -> f64 {
        self.cells.iter().filter(|c| c.label == label).map(|c| c.mass).sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).fold(f64::INFINITY, f64::min)
    }

    /// Draws a support cell by mass, then a uniform point in its box.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Label) {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.cells.len() - 1);
        let c = &self.cells[i];
        let center = self.grid.center_unchecked(&c.cell);
        let x = center
            .0
            .iter()
            .map(|m| (m + c.half_width * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, 1.0))
            .collect();
        (x, c.label)
    }

    /// Euclidean distance between the boxes of two support cells.
    pub fn box_gap(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (&self.cells[a], &self.cells[b]);
        let s = self.grid.side();
        let mut sq = 0.0;
        for (x, y) in ca.cell.coords().iter().zip(cb.cell.coords()) {
            let centers = (f64::from(*x) - f64::from(*y)).abs() * s;
            let gap = (centers - ca.half_width - cb.half_width).max(0.0);
            sq += gap * gap;
        }
        math::sqrt(sq)
    }

    /// Components of the support under "boxes within `gamma`". Every box is
    /// convex, so two supported points are joined by a chain of supported
    /// points with steps of at most `gamma` iff their boxes share a
    /// component.
    pub fn components(&self, gamma: f64) -> Vec<usize> {
        let n = self.cells.len();
        let mut ds = DisjointSet::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if self.box_gap(a, b) <= gamma {
                    ds.union(a, b);
                }
            }
        }
        ds.labels().0
    }

    /// Shortest center-to-center path lengths from support cell `from`
    /// through Moore-adjacent support cells of mass at least `r`.
    pub fn mass_path_lengths(&self, from: usize, r: f64) -> Vec<f64> {
        let n = self.cells.len();
        let mut dist = alloc::vec![f64::INFINITY; n];
        if self.cells[from].mass < r {
            return dist;
        }
        dist[from] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Visit(0.0, from));
        while let Some(Visit(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for nb in self.grid.neighbors_unchecked(&self.cells[i].cell) {
                let Some(j) = self.position(&nb) else { continue };
                if self.cells[j].mass < r {
                    continue;
                }
                let nd = d + self.cells[i].cell.center_distance(&nb, &self.grid);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Visit(nd, j));
                }
            }
        }
        dist
    }
}

/// Min-heap entry for Dijkstra.
struct Visit(f64, usize);

impl PartialEq for Visit {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Visit {}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Anything with a known support decomposition.
pub trait World {
    fn support(&self) -> &Support;

    fn grid(&self) -> &GridSpec {
        self.support().grid()
    }
}

pub fn sample_unlabeled<W: World + ?Sized, R: Rng + ?Sized>(world: &W, m_u: usize, rng: &mut R) -> Result<Vec<Point>> {
    if m_u == 0 {
        return Err(invalid_input!("m_u must be at least 1"));
    }
    Ok((0..m_u).map(|_| Point(world.support().draw(rng).0)).collect())
}

pub fn sample_labeled<W: World + ?Sized, R: Rng + ?Sized>(world: &W, m_l: usize, rng: &mut R) -> Result<Vec<Example>> {
    if m_l == 0 {
        return Err(invalid_input!("m_l must be at least 1"));
    }
    Ok((0..m_l)
        .map(|_| {
            let (x, y) = world.support().draw(rng);
            Example::new(x, y)
        })
        .collect())
}

/// Smallest test size accepted by [`true_risk`].
pub const MIN_TEST_SIZE: usize = 10_000;

/// Monte-Carlo 0/1 risk of `h` with its standard error
/// `sqrt(p (1 - p) / m_test)`.
pub fn true_risk<W, R, H>(world: &W, h: H, m_test: usize, rng: &mut R) -> Result<(f64, f64)>
where
    W: World + ?Sized,
    R: Rng + ?Sized,
    H: Fn(&[f64]) -> Label,
{
    if m_test < MIN_TEST_SIZE {
        return Err(invalid_input!("m_test must be at least {MIN_TEST_SIZE}, got {m_test}"));
    }
    let mut errors = 0usize;
    for _ in 0..m_test {
        let (x, y) = world.support().draw(rng);
        if h(&x) != y {
            errors += 1;
        }
    }
    let p = errors as f64 / m_test as f64;
    Ok((p, math::sqrt(p * (1.0 - p) / m_test as f64)))
}

/// `0` iff `x` and `x2` are supported and joined by a chain of supported
/// points with steps of at most `gamma`, else `1`.
pub fn d_gamma<W: World + ?Sized>(world: &W, x: &[f64], x2: &[f64], gamma: f64) -> u8 {
    let s = world.support();
    match (s.locate(x), s.locate(x2)) {
        (Some(a), Some(b)) if a == b => 0,
        (Some(a), Some(b)) => {
            let comp = s.components(gamma);
            u8::from(comp[a] != comp[b])
        }
        _ => 1,
    }
}

/// Shortest path length between the cells of `x` and `x2` through support
/// cells holding mass at least `r`, measured between cell centers;
/// infinite when either end is unsupported or no such path exists.
pub fn d_r_path<W: World + ?Sized>(world: &W, x: &[f64], x2: &[f64], r: f64) -> f64 {
    let s = world.support();
    match (s.locate(x), s.locate(x2)) {
        (Some(a), Some(b)) => s.mass_path_lengths(a, r)[b],
        _ => f64::INFINITY,
    }
}

/// A blob of a cluster world: a union of cells with one label.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub cells: Vec<CellIndex>,
    pub label: Label,
    pub weight: f64,
    /// Box half width inside each cell; `None` fills the cell.
    pub half_width: Option<f64>,
}

impl Blob {
    pub fn new(cells: Vec<CellIndex>, label: Label, weight: f64) -> Self {
        Self {
            cells,
            label,
            weight,
            half_width: None,
        }
    }
}

/// Labelled blobs separated by more than `margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWorld {
    blobs: Vec<Blob>,
    margin: f64,
    support: Support,
    blob_of: Vec<usize>,
}

impl ClusterWorld {
    pub fn new(grid: GridSpec, blobs: Vec<Blob>, margin: f64) -> Result<Self> {
        if blobs.is_empty() {
            return Err(invalid_input!("a cluster world needs at least one blob"));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(invalid_input!("margin must be finite and non-negative"));
        }
        let total: f64 = blobs.iter().map(|b| b.weight).sum();
        if blobs.iter().any(|b| !(b.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid_input!("blob weights must be positive and sum to 1"));
        }
        let mut cells = Vec::new();
        let mut blob_of = Vec::new();
        for (i, b) in blobs.iter().enumerate() {
            if b.cells.is_empty() {
                return Err(invalid_input!("blob {i} has no cells"));
            }
            let h = b.half_width.unwrap_or(0.5 * grid.side());
            let mass = b.weight / b.cells.len() as f64;
            for c in &b.cells {
                cells.push(SupportCell {
                    cell: c.clone(),
                    mass,
                    label: b.label,
                    half_width: h,
                });
                blob_of.push(i);
            }
        }
        let support = Support::new(grid, cells)?;
        let world = Self {
            blobs,
            margin,
            support,
            blob_of,
        };
        let sep = world.separation();
        if world.blobs.len() > 1 && sep <= margin {
            return Err(invalid_input!("blobs are {sep} apart, not more than the margin {margin}"));
        }
        Ok(world)
    }

    pub fn blobs(&self) -> &[Blob] {
        &self.blobs
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Blob index of every support cell, aligned with `support().cells()`.
    pub fn blob_of(&self) -> &[usize] {
        &self.blob_of
    }

    /// Blob containing `x`, if `x` is supported.
    pub fn blob_at(&self, x: &[f64]) -> Option<usize> {
        self.support.locate(x).map(|i| self.blob_of[i])
    }

    /// Smallest distance between boxes of different blobs; infinite for a
    /// single blob.
    pub fn separation(&self) -> f64 {
        let n = self.support.cells().len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                if self.blob_of[a] != self.blob_of[b] {
                    best = best.min(self.support.box_gap(a, b));
                }
            }
        }
        best
    }

    /// A square ring of border cells (label 1, mass 0.45) around a filled
    /// square (label 0, mass 0.55), with one empty ring of cells between
    /// them. No line separates the two, which keeps the raw learner's risk
    /// away from zero.
    pub fn ring_and_disc(q: u32) -> Result<Self> {
        if q < 5 {
            return Err(invalid_input!("ring and disc needs at least 5 cells per axis"));
        }
        let grid = GridSpec::new(2, q)?;
        let mut ring = Vec::new();
        let mut disc = Vec::new();
        for x in 0..q {
            for y in 0..q {
                let c = CellIndex(alloc::vec![x, y]);
                if x == 0 || y == 0 || x == q - 1 || y == q - 1 {
                    ring.push(c);
                } else if (2..=q - 3).contains(&x) && (2..=q - 3).contains(&y) {
                    disc.push(c);
                }
            }
        }
        Self::new(
            grid,
            alloc::vec![Blob::new(ring, 1, 0.45), Blob::new(disc, 0, 0.55)],
            grid.gamma(),
        )
    }

    /// Two hypercube blocks in opposite corners, separated by one empty
    /// slab of cells along every axis: label 0 near the origin, label 1
    /// opposite. Linearly separable.
    pub fn two_blobs(grid: GridSpec, weights: (f64, f64)) -> Result<Self> {
        let q = grid.cells_per_axis();
        if q < 3 {
            return Err(invalid_input!("two blobs need at least 3 cells per axis"));
        }
        let half = q / 2;
        let low = block(grid.dim(), 0, half - 1);
        let high = block(grid.dim(), half + 1, q - 1);
        Self::new(
            grid,
            alloc::vec![Blob::new(low, 0, weights.0), Blob::new(high, 1, weights.1)],
            grid.gamma(),
        )
    }

    /// Four square blobs in the corners of the unit square with an XOR
    /// labelling; every pair is linearly separable on its own.
    pub fn four_corners(q: u32) -> Result<Self> {
        if q < 3 {
            return Err(invalid_input!("four corners need at least 3 cells per axis"));
        }
        let grid = GridSpec::new(2, q)?;
        let side = (q - 1) / 2;
        let lo = (0, side - 1);
        let hi = (q - side, q - 1);
        let square = |xs: (u32, u32), ys: (u32, u32)| -> Vec<CellIndex> {
            let mut v = Vec::new();
            for x in xs.0..=xs.1 {
                for y in ys.0..=ys.1 {
                    v.push(CellIndex(alloc::vec![x, y]));
                }
            }
            v
        };
        Self::new(
            grid,
            alloc::vec![
                Blob::new(square(lo, lo), 0, 0.25),
                Blob::new(square(hi, lo), 1, 0.25),
                Blob::new(square(lo, hi), 1, 0.25),
                Blob::new(square(hi, hi), 0, 0.25),
            ],
            grid.gamma(),
        )
    }

    /// A single blob; the cluster test cannot pass on it.
    pub fn single_blob(grid: GridSpec, cells: Vec<CellIndex>, label: Label) -> Result<Self> {
        Self::new(grid, alloc::vec![Blob::new(cells, label, 1.0)], 0.0)
    }

    /// Two blobs in neighbouring cell columns whose boxes are shrunk to
    /// leave a gap of `gap < gamma`; samples bridge it and the test sees one
    /// cluster.
    pub fn close_pair(q: u32, gap: f64) -> Result<Self> {
        let grid = GridSpec::new(2, q)?;
        let h = 0.5 * (grid.side() - gap);
        if !(h > 0.0) || gap <= 0.0 {
            return Err(invalid_input!("gap must lie in (0, s)"));
        }
        let mid = q / 2;
        let col = |x: u32| (0..q).map(|y| CellIndex(alloc::vec![x, y])).collect::<Vec<_>>();
        let mut a = Blob::new(col(mid - 1), 0, 0.5);
        let mut b = Blob::new(col(mid), 1, 0.5);
        a.half_width = Some(h);
        b.half_width = Some(h);
        Self::new(grid, alloc::vec![a, b], 0.0)
    }
}

impl World for ClusterWorld {
    fn support(&self) -> &Support {
        &self.support
    }
}

/// All cells with every coordinate in `lo..=hi`.
fn block(n: usize, lo: u32, hi: u32) -> Vec<CellIndex> {
    let mut out = Vec::new();
    let mut cur = alloc::vec![lo; n];
    loop {
        out.push(CellIndex(cur.clone()));
        let mut axis = 0;
        loop {
            if axis == n {
                return out;
            }
            if cur[axis] < hi {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo;
            axis += 1;
        }
    }
}

/// A chain of Moore-adjacent cells with a mass and a label per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub cells: Vec<CellIndex>,
    pub weights: Vec<f64>,
    pub labels: Vec<Label>,
}

impl Chain {
    /// Labels flip at each arc-length breakpoint, starting from 0. A cell
    /// takes the label of its center's offset.
    pub fn with_breaks(grid: &GridSpec, cells: Vec<CellIndex>, breaks: &[f64]) -> Self {
        let offsets = arc_offsets(grid, &cells);
        let labels = offsets
            .iter()
            .map(|&o| (breaks.iter().filter(|&&b| o >= b).count() % 2) as Label)
            .collect();
        Self {
            weights: alloc::vec![1.0; cells.len()],
            cells,
            labels,
        }
    }

    pub fn length(&self, grid: &GridSpec) -> f64 {
        arc_offsets(grid, &self.cells).last().copied().unwrap_or(0.0)
    }
}

fn arc_offsets(grid: &GridSpec, cells: &[CellIndex]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(cells.len());
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            acc += cells[i - 1].center_distance(c, grid);
        }
        out.push(acc);
    }
    out
}

/// Mass concentrated in a thin tube around one or more cell chains.
///
/// A single chain is the intended setting; several chains give worlds whose
/// support is not one curve, for negative checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldWorld {
    chains: Vec<Chain>,
    gamma_len: f64,
    tube_radius: f64,
    j: u32,
    eps_b: f64,
    support: Support,
}

impl ManifoldWorld {
    /// Weights are normalised over all chains. Points lie uniformly in a
    /// box of half width `tube_radius / sqrt(n)` around each chain cell's
    /// center, hence within `tube_radius` of the curve through the centers.
    pub fn new(grid: GridSpec, chains: Vec<Chain>, gamma_len: f64, tube_radius: f64, j: u32, eps_b: f64) -> Result<Self> {
        if chains.is_empty() {
            return Err(invalid_input!("a manifold world needs at least one chain"));
        }
        if !(tube_radius > 0.0 && tube_radius < 0.5 * grid.diameter()) {
            return Err(invalid_input!("tube radius must lie in (0, s sqrt(n) / 2)"));
        }
        if j == 0 {
            return Err(invalid_input!("j must be positive"));
        }
        if !(0.0..=1.0).contains(&eps_b) {
            return Err(invalid_input!("eps_B must lie in [0, 1]"));
        }
        let total: f64 = chains.iter().flat_map(|c| c.weights.iter()).sum();
        let h = tube_radius / math::sqrt(grid.dim() as f64);
        let mut cells = Vec::new();
        for (ci, chain) in chains.iter().enumerate() {
            if chain.cells.is_empty() || chain.weights.len() != chain.cells.len() || chain.labels.len() != chain.cells.len() {
                return Err(invalid_input!("chain {ci} has mismatched cells, weights and labels"));
            }
            if chain.cells.windows(2).any(|w| !w[0].is_adjacent(&w[1])) {
                return Err(invalid_input!("chain {ci} is not connected"));
            }
            if chain.length(&grid) > gamma_len {
                return Err(invalid_input!("chain {ci} is longer than gamma"));
            }
            for ((c, &w), &y) in chain.cells.iter().zip(&chain.weights).zip(&chain.labels) {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(invalid_input!("chain weights must be positive"));
                }
                cells.push(SupportCell {
                    cell: c.clone(),
                    mass: w / total,
                    label: y,
                    half_width: h,
                });
            }
        }
        // Support::new rejects repeated cells, i.e. self-intersections
        let support = Support::new(grid, cells)?;
        let world = Self {
            chains,
            gamma_len,
            tube_radius,
            j,
            eps_b,
            support,
        };
        let r_b = world.label_disagreement_mass(world.support.min_mass());
        if r_b > eps_b + 1e-12 {
            return Err(invalid_input!("labels disagree near {r_b} of the mass, above eps_B = {eps_b}"));
        }
        Ok(world)
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn gamma_len(&self) -> f64 {
        self.gamma_len
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn eps_b(&self) -> f64 {
        self.eps_b
    }

    /// Proximity radius `(j + 1) sqrt(n) s` of the label-agreement condition.
    pub fn proximity(&self) -> f64 {
        f64::from(self.j + 1) * self.support.grid().diameter()
    }

    /// Exact mass of cells that have a differently labelled support cell
    /// within path distance [`Self::proximity`] through cells of mass `>= r`.
    pub fn label_disagreement_mass(&self, r: f64) -> f64 {
        let cells = self.support.cells();
        let radius = self.proximity();
        (0..cells.len())
            .filter(|&i| {
                let d = self.support.mass_path_lengths(i, r);
                (0..cells.len()).any(|k| cells[k].label != cells[i].label && d[k] <= radius)
            })
            .map(|i| cells[i].mass)
            .sum()
    }

    /// Straight horizontal tube along row `row`, cells `from..=to`, one label.
    pub fn straight_tube(grid: GridSpec, row: u32, from: u32, to: u32, gamma_len: f64) -> Result<Self> {
        if grid.dim() != 2 || from > to {
            return Err(invalid_input!("straight tube needs n = 2 and from <= to"));
        }
        let cells: Vec<CellIndex> = (from..=to).map(|x| CellIndex(alloc::vec![x, row])).collect();
        let chain = Chain::with_breaks(&grid, cells, &[]);
        Self::new(grid, alloc::vec![chain], gamma_len, 0.3 * grid.diameter(), 1, 0.0)
    }

    /// Boustrophedon snake on a 10x10 grid: rows 1, 3, 5 and 7 run over
    /// columns 1..=8, joined by single connector cells at alternating ends.
    /// The empty rows between runs make the chain the only curve through
    /// its cells. Labels are 0 along the first 60% of the arc and 1 after,
    /// and cells near the label change are down-weighted so that the
    /// disagreement mass is 80% of `eps_b`.
    pub fn snake(j: u32, eps_b: f64) -> Result<Self> {
        let grid = GridSpec::new(2, 10)?;
        let cells = snake_cells();
        let mut chain = Chain::with_breaks(&grid, cells, &[]);
        let length = chain.length(&grid);
        chain = Chain::with_breaks(&grid, chain.cells, &[0.6 * length]);
        let gamma_len = 3.6;
        let tube = 0.3 * grid.diameter();
        // find the flagged cells on the unweighted chain, then rescale
        let flat = Self::new(grid, alloc::vec![chain.clone()], gamma_len, tube, j, 1.0)?;
        let cells = flat.support.cells();
        let radius = flat.proximity();
        let flagged: Vec<bool> = (0..cells.len())
            .map(|i| {
                let d = flat.support.mass_path_lengths(i, 0.0);
                (0..cells.len()).any(|k| cells[k].label != cells[i].label && d[k] <= radius)
            })
            .collect();
        let f = flagged.iter().filter(|&&b| b).count() as f64;
        let u = cells.len() as f64 - f;
        if eps_b > 0.0 && f > 0.0 {
            let target = 0.8 * eps_b;
            let w = target * u / (f * (1.0 - target));
            for (weight, &fl) in chain.weights.iter_mut().zip(&flagged) {
                if fl {
                    *weight = w;
                }
            }
        } else if f > 0.0 {
            return Err(invalid_input!("a labelled snake needs eps_B > 0"));
        }
        Self::new(grid, alloc::vec![chain], gamma_len, tube, j, eps_b)
    }

    /// Two straight tubes far apart; the manifold test cannot cover both
    /// with a single curve.
    pub fn two_tubes() -> Result<Self> {
        let grid = GridSpec::new(2, 10)?;
        let a: Vec<CellIndex> = (1..=8).map(|x| CellIndex(alloc::vec![x, 2])).collect();
        let b: Vec<CellIndex> = (1..=8).map(|x| CellIndex(alloc::vec![x, 7])).collect();
        let chains = alloc::vec![Chain::with_breaks(&grid, a, &[]), Chain::with_breaks(&grid, b, &[])];
        Self::new(grid, chains, 3.6, 0.3 * grid.diameter(), 3, 0.0)
    }
}

/// Cells of the 10x10 snake, in curve order.
pub fn snake_cells() -> Vec<CellIndex> {
    let mut cells = Vec::new();
    for (k, row) in [1u32, 3, 5, 7].into_iter().enumerate() {
        let run: Vec<u32> = if k % 2 == 0 { (1..=8).collect() } else { (1..=8).rev().collect() };
        for x in run {
            cells.push(CellIndex(alloc::vec![x, row]));
        }
        if row < 7 {
            let end = if k % 2 == 0 { 8 } else { 1 };
            cells.push(CellIndex(alloc::vec![end, row + 1]));
        }
    }
    cells
}

impl World for ManifoldWorld {
    fn support(&self) -> &Support {
        &self.support
    }
}

/// Which condition risks to estimate, and against which feature map.
#[derive(Debug, Clone, Copy)]
pub enum ConditionModel<'a> {
    Cluster {
        map: Option<&'a ClusterFeatureMap>,
    },
    Manifold {
        map: Option<&'a ManifoldFeatureMap>,
        j: Option<u32>,
        /// Mass threshold of the path distance; defaults to the smallest
        /// support-cell mass, under which every support cell qualifies.
        r: Option<f64>,
    },
}

/// Monte-Carlo estimates of the condition risks. `r_a` and `r_c` need a
/// feature map.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionRisks {
    pub r_a_hat: Option<f64>,
    pub r_b_hat: f64,
    pub r_c_hat: Option<f64>,
    pub r_e_hat: f64,
}

/// Estimates the condition risks from `m_pairs` draws (pairs for the
/// cluster label-agreement risk). Per-cell losses are decided exactly on
/// the support; only the expectation is sampled.
///
/// Points off every region (off the curve) count as feature-map failures,
/// which matches how the feature-map lemmas charge them. Comparison points
/// `x'` in the feature-map risk range over supported points only.
pub fn condition_risks<W, R>(world: &W, model: ConditionModel<'_>, m_pairs: usize, rng: &mut R) -> Result<ConditionRisks>
where
    W: World + ?Sized,
    R: Rng + ?Sized,
{
    if m_pairs == 0 {
        return Err(invalid_input!("m_pairs must be at least 1"));
    }
    let s = world.support();
    let cells = s.cells();
    let minority: Label = if s.label_mass(1) <= s.label_mass(0) { 1 } else { 0 };

    let (a_loss, b_loss, c_loss): (Option<Vec<bool>>, Option<Vec<bool>>, Option<Vec<bool>>) = match model {
        ConditionModel::Cluster { map } => {
            let comp = s.components(s.grid().gamma());
            let c = map.map(|m| {
                let region: Vec<Option<usize>> = cells.iter().map(|c| m.region_of_cell(&c.cell)).collect();
                (0..cells.len())
                    .map(|i| match region[i] {
                        None => true,
                        Some(r) => (0..cells.len()).any(|k| region[k] == Some(r) && comp[k] != comp[i]),
                    })
                    .collect()
            });
            let a = map.map(|m| cells.iter().map(|c| m.region_of_cell(&c.cell).is_none()).collect());
            // label agreement is a pair risk, sampled below
            (a, None, c)
        }
        ConditionModel::Manifold { map, j, r } => {
            let j = j.ok_or_else(|| invalid_input!("the manifold condition risks need j"))?;
            let r = r.unwrap_or_else(|| s.min_mass());
            let g = s.grid();
            let radius = f64::from(j + 1) * g.diameter();
            let dist: Vec<Vec<f64>> = (0..cells.len()).map(|i| s.mass_path_lengths(i, r)).collect();
            let b = (0..cells.len())
                .map(|i| (0..cells.len()).any(|k| cells[k].label != cells[i].label && dist[i][k] <= radius))
                .collect();
            let c = map.map(|m| {
                let f: Vec<Option<f64>> = cells.iter().map(|c| m.offset_of_cell(&c.cell)).collect();
                let js = f64::from(j) * g.side();
                (0..cells.len())
                    .map(|i| match f[i] {
                        None => true,
                        Some(fi) => (0..cells.len())
                            .any(|k| f[k].is_some_and(|fk| (fi - fk).abs() <= js) && dist[i][k] > radius),
                    })
                    .collect()
            });
            (None, Some(b), c)
        }
    };

    let mut a_hits = 0usize;
    let mut b_hits = 0usize;
    let mut c_hits = 0usize;
    let mut e_hits = 0usize;
    let manifold_curve = match model {
        ConditionModel::Manifold { map: Some(m), .. } => Some(curve_centers(m)),
        _ => None,
    };
    let cluster_comp = match model {
        ConditionModel::Cluster { .. } => Some(s.components(s.grid().gamma())),
        _ => None,
    };
    for _ in 0..m_pairs {
        let (x, y) = s.draw(rng);
        let i = s.locate(&x).expect("drawn points are supported");
        if y == minority {
            e_hits += 1;
        }
        if let Some(c) = &c_loss {
            c_hits += usize::from(c[i]);
        }
        match (&a_loss, &manifold_curve) {
            (Some(a), _) => a_hits += usize::from(a[i]),
            (None, Some(curve)) => {
                let far = distance_to_polyline(&x, curve) > 0.5 * s.grid().diameter();
                a_hits += usize::from(far);
            }
            _ => {}
        }
        match (&b_loss, &cluster_comp) {
            (Some(b), _) => b_hits += usize::from(b[i]),
            (None, Some(comp)) => {
                let (x2, y2) = s.draw(rng);
                let k = s.locate(&x2).expect("drawn points are supported");
                b_hits += usize::from(comp[i] == comp[k] && y != y2);
            }
            _ => {}
        }
    }
    let m = m_pairs as f64;
    let has_map = matches!(
        model,
        ConditionModel::Cluster { map: Some(_) } | ConditionModel::Manifold { map: Some(_), .. }
    );
    Ok(ConditionRisks {
        r_a_hat: has_map.then(|| a_hits as f64 / m),
        r_b_hat: b_hits as f64 / m,
        r_c_hat: c_loss.map(|_| c_hits as f64 / m),
        r_e_hat: e_hits as f64 / m,
    })
}

fn curve_centers(m: &ManifoldFeatureMap) -> Vec<Vec<f64>> {
    m.curve().iter().map(|c| m.grid().center_unchecked(c).0).collect()
}

fn distance_to_polyline(x: &[f64], curve: &[Vec<f64>]) -> f64 {
    if curve.len() == 1 {
        return math::sqrt(math::dist_sq(x, &curve[0]));
    }
    curve
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let ab: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
            let ax: Vec<f64> = x.iter().zip(a).map(|(p, q)| p - q).collect();
            let len2 = math::dot(&ab, &ab);
            let t = if len2 > 0.0 { (math::dot(&ax, &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let closest: Vec<f64> = a.iter().zip(&ab).map(|(p, d)| p + t * d).collect();
            math::sqrt(math::dist_sq(x, &closest))
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::cluster_property_test;
    use crate::manifold::manifold_property_test;
    use alloc::vec;
    use proptest::prelude::*;

    fn cell(c: &[u32]) -> CellIndex {
        CellIndex(c.to_vec())
    }

    #[test]
    fn one_cell_blob_samples_stay_inside() {
        let g = GridSpec::new(2, 10).unwrap();
        let w = ClusterWorld::single_blob(g, vec![cell(&[3, 4])], 0).unwrap();
        let pts = sample_unlabeled(&w, 5, &mut rng_for(1, 0)).unwrap();
        assert_eq!(pts.len(), 5);
        for p in &pts {
            assert_eq!(g.cell_of(&p.0).unwrap(), cell(&[3, 4]));
        }
        let labels = sample_labeled(&w, 50, &mut rng_for(1, 1)).unwrap();
        assert!(labels.iter().all(|e| e.y == 0));
        assert!(sample_unlabeled(&w, 0, &mut rng_for(1, 0)).is_err());
    }

    #[test]
    fn same_seed_same_sample() {
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        let a = sample_labeled(&w, 100, &mut rng_for(7, 3)).unwrap();
        let b = sample_labeled(&w, 100, &mut rng_for(7, 3)).unwrap();
        let c = sample_labeled(&w, 100, &mut rng_for(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn blob_counts_follow_weights() {
        let g = GridSpec::new(2, 10).unwrap();
        let w = ClusterWorld::two_blobs(g, (0.5, 0.5)).unwrap();
        let m = 100_000;
        let pts = sample_unlabeled(&w, m, &mut rng_for(11, 0)).unwrap();
        let first = pts.iter().filter(|p| w.blob_at(&p.0) == Some(0)).count() as f64;
        let sigma = (m as f64 * 0.25).sqrt();
        assert!((first - 50_000.0).abs() <= 3.0 * sigma, "{first}");
        assert!(pts.iter().all(|p| w.blob_at(&p.0).is_some()));
    }

    #[test]
    fn same_blob_points_share_labels() {
        let w = ClusterWorld::four_corners(10).unwrap();
        let data = sample_labeled(&w, 2000, &mut rng_for(2, 0)).unwrap();
        for e in &data {
            let b = w.blob_at(&e.x).unwrap();
            assert_eq!(e.y, w.blobs()[b].label);
        }
    }

    #[test]
    fn world_constructor_checks() {
        let g = GridSpec::new(2, 10).unwrap();
        let touching = vec![Blob::new(vec![cell(&[1, 1])], 0, 0.5), Blob::new(vec![cell(&[2, 1])], 1, 0.5)];
        assert!(ClusterWorld::new(g, touching, 0.0).is_err());
        let bad_weights = vec![Blob::new(vec![cell(&[1, 1])], 0, 0.5), Blob::new(vec![cell(&[5, 5])], 1, 0.6)];
        assert!(ClusterWorld::new(g, bad_weights, 0.0).is_err());
        let overlap = vec![Blob::new(vec![cell(&[1, 1])], 0, 0.5), Blob::new(vec![cell(&[1, 1])], 1, 0.5)];
        assert!(ClusterWorld::new(g, overlap, 0.0).is_err());
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        assert!(w.separation() > g.gamma());
        assert_eq!(w.support().cells().len(), 72);
        assert!((w.support().label_mass(1) - 0.45).abs() < 1e-12);
    }

    #[test]
    fn constant_hypothesis_risks() {
        let g = GridSpec::new(2, 10).unwrap();
        let zero = ClusterWorld::single_blob(g, vec![cell(&[2, 2]), cell(&[2, 3])], 0).unwrap();
        let (r, se) = true_risk(&zero, |_| 0, 10_000, &mut rng_for(3, 0)).unwrap();
        assert_eq!((r, se), (0.0, 0.0));

        let w = ClusterWorld::two_blobs(g, (0.7, 0.3)).unwrap();
        let (r, se) = true_risk(&w, |_| 0, 100_000, &mut rng_for(3, 1)).unwrap();
        assert!((r - 0.3).abs() <= 3.0 * se, "{r} {se}");
        let (flip, _) = true_risk(&w, |_| 1, 100_000, &mut rng_for(3, 1)).unwrap();
        assert!((flip - (1.0 - r)).abs() < 1e-12);
        assert!(true_risk(&w, |_| 0, 100, &mut rng_for(3, 1)).is_err());
    }

    #[test]
    fn standard_error_shrinks_with_test_size() {
        let g = GridSpec::new(2, 10).unwrap();
        let w = ClusterWorld::two_blobs(g, (0.7, 0.3)).unwrap();
        let (_, a) = true_risk(&w, |_| 0, 50_000, &mut rng_for(4, 0)).unwrap();
        let (_, b) = true_risk(&w, |_| 0, 100_000, &mut rng_for(4, 1)).unwrap();
        let ratio = a / b;
        assert!((ratio - 2f64.sqrt()).abs() <= 0.1 * 2f64.sqrt(), "{ratio}");
    }

    #[test]
    fn d_gamma_examples() {
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        let gamma = w.grid().gamma();
        let ring = [0.05, 0.05];
        let ring_far = [0.95, 0.55];
        let disc = [0.5, 0.5];
        assert_eq!(d_gamma(&w, &ring, &ring, gamma), 0);
        assert_eq!(d_gamma(&w, &ring, &ring_far, gamma), 0);
        assert_eq!(d_gamma(&w, &ring, &disc, gamma), 1);
        assert_eq!(d_gamma(&w, &[0.15, 0.5], &[0.15, 0.5], gamma), 1);

        // two cells joined by a bridge of supported cells
        let g = GridSpec::new(2, 10).unwrap();
        let bridge: Vec<CellIndex> = (1..=6).map(|x| cell(&[x, 4])).collect();
        let w = ClusterWorld::single_blob(g, bridge, 0).unwrap();
        assert_eq!(d_gamma(&w, &[0.15, 0.45], &[0.65, 0.45], g.gamma()), 0);
    }

    #[test]
    fn d_r_path_examples() {
        let g = GridSpec::new(2, 5).unwrap();
        let w = ManifoldWorld::straight_tube(g, 2, 1, 3, 1.0).unwrap();
        let a = g.center_of(&cell(&[1, 2])).unwrap().0;
        let b = g.center_of(&cell(&[3, 2])).unwrap().0;
        assert!((d_r_path(&w, &a, &b, 0.0) - 0.4).abs() < 1e-12);
        assert_eq!(d_r_path(&w, &a, &a, 0.0), 0.0);
        assert_eq!(d_r_path(&w, &a, &b, 0.5), f64::INFINITY);

        let t = ManifoldWorld::two_tubes().unwrap();
        assert_eq!(d_r_path(&t, &[0.15, 0.25], &[0.15, 0.75], 0.0), f64::INFINITY);
    }

    #[test]
    fn manifold_world_checks() {
        let g = GridSpec::new(2, 10).unwrap();
        let gap = vec![cell(&[1, 1]), cell(&[3, 1])];
        let chain = Chain::with_breaks(&g, gap, &[]);
        assert!(ManifoldWorld::new(g, vec![chain], 5.0, 0.05, 1, 0.0).is_err());
        let cross = vec![cell(&[1, 1]), cell(&[2, 1]), cell(&[1, 1])];
        let chain = Chain::with_breaks(&g, cross, &[]);
        assert!(ManifoldWorld::new(g, vec![chain], 5.0, 0.05, 1, 0.0).is_err());
        let long: Vec<CellIndex> = (0..10).map(|x| cell(&[x, 1])).collect();
        let chain = Chain::with_breaks(&g, long, &[0.45]);
        assert!(ManifoldWorld::new(g, vec![chain.clone()], 0.5, 0.05, 1, 1.0).is_err());
        // labels change mid-tube, so eps_B = 0 is violated
        assert!(ManifoldWorld::new(g, vec![chain], 1.0, 0.05, 1, 0.0).is_err());
    }

    #[test]
    fn snake_world_is_consistent() {
        let w = ManifoldWorld::snake(3, 0.05).unwrap();
        let r_b = w.label_disagreement_mass(w.support().min_mass());
        assert!((r_b - 0.04).abs() < 1e-9, "{r_b}");
        assert!(w.support().label_mass(0) >= w.support().label_mass(1));
        let pts = sample_unlabeled(&w, 20_000, &mut rng_for(5, 0)).unwrap();
        let res = manifold_property_test(w.grid(), &pts, w.gamma_len()).unwrap();
        assert!(res.passed());
        assert_eq!(res.path, snake_cells());
    }

    #[test]
    fn sampled_labels_agree_with_the_label_function() {
        // disagreement with the arc-length labelling is a direct count
        let w = ManifoldWorld::snake(3, 0.05).unwrap();
        let chain = &w.chains()[0];
        let data = sample_labeled(&w, 100_000, &mut rng_for(6, 0)).unwrap();
        let g = w.grid();
        let wrong = data
            .iter()
            .filter(|e| {
                let c = g.cell_of(&e.x).unwrap();
                let i = chain.cells.iter().position(|x| *x == c).unwrap();
                chain.labels[i] != e.y
            })
            .count();
        assert_eq!(wrong, 0);
    }

    #[test]
    fn cluster_condition_risks() {
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        let pts = sample_unlabeled(&w, 20_000, &mut rng_for(8, 0)).unwrap();
        let res = cluster_property_test(w.grid(), &pts).unwrap();
        assert_eq!(res.k(), 2);
        let fm = ClusterFeatureMap::new(&res).unwrap();
        let r = condition_risks(&w, ConditionModel::Cluster { map: Some(&fm) }, 20_000, &mut rng_for(8, 1)).unwrap();
        assert_eq!(r.r_b_hat, 0.0);
        assert_eq!(r.r_c_hat, Some(0.0));
        assert_eq!(r.r_a_hat, Some(0.0));
        let se = (0.45f64 * 0.55 / 20_000.0).sqrt();
        assert!((r.r_e_hat - 0.45).abs() <= 4.0 * se);

        let g = GridSpec::new(2, 10).unwrap();
        let w = ClusterWorld::two_blobs(g, (0.7, 0.3)).unwrap();
        let r = condition_risks(&w, ConditionModel::Cluster { map: None }, 20_000, &mut rng_for(8, 2)).unwrap();
        assert!((r.r_e_hat - 0.3).abs() <= 4.0 * (0.21f64 / 20_000.0).sqrt());
        assert!(r.r_c_hat.is_none());
    }

    #[test]
    fn manifold_condition_risks() {
        let w = ManifoldWorld::snake(3, 0.05).unwrap();
        let none = ConditionModel::Manifold { map: None, j: None, r: None };
        assert!(condition_risks(&w, none, 100, &mut rng_for(9, 0)).is_err());
        let pts = sample_unlabeled(&w, 20_000, &mut rng_for(9, 1)).unwrap();
        let res = manifold_property_test(w.grid(), &pts, w.gamma_len()).unwrap();
        let fm = ManifoldFeatureMap::new(&res).unwrap();
        let model = ConditionModel::Manifold { map: Some(&fm), j: Some(3), r: None };
        let r = condition_risks(&w, model, 20_000, &mut rng_for(9, 2)).unwrap();
        assert_eq!(r.r_a_hat, Some(0.0));
        assert_eq!(r.r_c_hat, Some(0.0));
        assert!(r.r_b_hat <= 0.05);
    }

    #[test]
    fn close_pair_merges_under_the_test() {
        let w = ClusterWorld::close_pair(10, 0.02).unwrap();
        let pts = sample_unlabeled(&w, 5000, &mut rng_for(10, 0)).unwrap();
        let res = cluster_property_test(w.grid(), &pts).unwrap();
        assert!(!res.passed);
    }

    proptest! {
        #[test]
        fn d_gamma_symmetric_and_reflexive(a in (0.0f64..1.0, 0.0f64..1.0), b in (0.0f64..1.0, 0.0f64..1.0)) {
            let w = ClusterWorld::ring_and_disc(10).unwrap();
            let (a, b) = ([a.0, a.1], [b.0, b.1]);
            let gamma = w.grid().gamma();
            prop_assert_eq!(d_gamma(&w, &a, &b, gamma), d_gamma(&w, &b, &a, gamma));
            if w.support().locate(&a).is_some() {
                prop_assert_eq!(d_gamma(&w, &a, &a, gamma), 0);
            }
        }

        #[test]
        fn cluster_worlds_pass_with_enough_samples(seed in 0u64..1000, which in 0usize..3) {
            let g = GridSpec::new(2, 10).unwrap();
            let w = match which {
                0 => ClusterWorld::ring_and_disc(10).unwrap(),
                1 => ClusterWorld::two_blobs(g, (0.5, 0.5)).unwrap(),
                _ => ClusterWorld::four_corners(10).unwrap(),
            };
            let cells = w.support().cells().len();
            let pts = sample_unlabeled(&w, 50 * cells, &mut rng_for(seed, 0)).unwrap();
            let occupied = g.occupied_cells(&pts).unwrap();
            prop_assume!(occupied.len() == cells);
            let res = cluster_property_test(&g, &pts).unwrap();
            prop_assert!(res.passed);
            prop_assert!(res.k() >= w.blobs().len());
        }
    }
}
