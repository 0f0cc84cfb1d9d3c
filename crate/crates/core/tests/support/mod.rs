//! Fixtures and independent oracles shared by the core integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use repgap_core::learners::Example;
use repgap_core::synth::rng_for;
use repgap_core::{CellIndex, Point};

pub const Q: u32 = 10;

fn cell(x: u32, y: u32) -> CellIndex {
    CellIndex(vec![x, y])
}

/// 4x4 lattice inside a cell at spacing 0.025, so neighbouring lattice
/// points across a shared cell face are 0.025 apart, well inside
/// `gamma = 0.1 / sqrt 2`.
fn lattice(c: &CellIndex) -> Vec<Point> {
    let s = 1.0 / f64::from(Q);
    let mut out = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            let x = f64::from(c.0[0]) * s + 0.0125 + 0.025 * f64::from(i);
            let y = f64::from(c.0[1]) * s + 0.0125 + 0.025 * f64::from(j);
            out.push(Point(vec![x, y]));
        }
    }
    out
}

/// Two winding clusters with at least one empty cell between them.
pub fn figure3_regions() -> [BTreeSet<CellIndex>; 2] {
    let a = [(1, 1), (1, 2), (1, 3), (1, 4), (2, 4), (3, 4), (3, 3), (3, 2)];
    let b = [(6, 6), (7, 6), (8, 6), (8, 7), (8, 8), (7, 8), (6, 8)];
    [
        a.iter().map(|&(x, y)| cell(x, y)).collect(),
        b.iter().map(|&(x, y)| cell(x, y)).collect(),
    ]
}

/// Sample points of the cluster fixture with their cluster index.
pub fn figure3_points() -> Vec<(Point, usize)> {
    let mut out = Vec::new();
    for (r, cells) in figure3_regions().iter().enumerate() {
        for c in cells {
            out.extend(lattice(c).into_iter().map(|p| (p, r)));
        }
    }
    out
}

/// L-shaped snake from (2,8) down to (2,2) and across to (8,2).
pub fn figure7_path() -> Vec<CellIndex> {
    let mut path: Vec<CellIndex> = (2..=8).rev().map(|y| cell(2, y)).collect();
    path.extend((3..=8).map(|x| cell(x, 2)));
    path
}

/// Three points per snake cell, in shuffled cell order.
pub fn figure7_points() -> Vec<Point> {
    let s = 1.0 / f64::from(Q);
    let mut cells = figure7_path();
    cells.reverse();
    cells.rotate_left(5);
    let mut out = Vec::new();
    for c in &cells {
        for (dx, dy) in [(0.5, 0.5), (0.2, 0.7), (0.8, 0.3)] {
            out.push(Point(vec![(f64::from(c.0[0]) + dx) * s, (f64::from(c.0[1]) + dy) * s]));
        }
    }
    out
}

/// The fixture snake split into two arms with a gap.
pub fn disconnected_points() -> Vec<Point> {
    figure7_points()
        .into_iter()
        .filter(|p| {
            let x = (p.0[0] * f64::from(Q)) as u32;
            let y = (p.0[1] * f64::from(Q)) as u32;
            !(x == 2 && (3..=4).contains(&y))
        })
        .collect()
}

/// Minimum 0/1 errors over all linear dichotomies of a planar sample, by
/// enumerating every line through two distinct locations. Points strictly
/// on either side take one label each; points on the line are split by a
/// threshold along it. Every linear dichotomy is reachable this way by
/// translating and rotating a separator until it touches two locations.
pub fn brute_force_min_errors(data: &[Example]) -> usize {
    let m = data.len();
    let ones = data.iter().filter(|e| e.y == 1).count();
    let mut best = ones.min(m - ones);
    for i in 0..m {
        for j in 0..m {
            let (p, q) = (&data[i].x, &data[j].x);
            if p == q {
                continue;
            }
            let d = [q[0] - p[0], q[1] - p[1]];
            let mut pos = [0usize; 2];
            let mut neg = [0usize; 2];
            let mut on: Vec<(f64, u8)> = Vec::new();
            for e in data {
                let r = [e.x[0] - p[0], e.x[1] - p[1]];
                let cross = d[0] * r[1] - d[1] * r[0];
                let along = d[0] * r[0] + d[1] * r[1];
                if cross > 0.0 {
                    pos[e.y as usize] += 1;
                } else if cross < 0.0 {
                    neg[e.y as usize] += 1;
                } else {
                    on.push((along, e.y));
                }
            }
            on.sort_by(|a, b| a.0.total_cmp(&b.0));
            for a in 0..2usize {
                // positive side labelled a, negative side 1 - a
                let sides = pos[1 - a] + neg[a];
                for c in 0..2u8 {
                    // prefix labelled c, suffix 1 - c; cuts only between
                    // distinct positions
                    let total_c = on.iter().filter(|o| o.1 != c).count();
                    let mut prefix_err = 0;
                    let mut suffix_err = on.iter().filter(|o| o.1 == c).count();
                    let mut cut_best = suffix_err + prefix_err;
                    for k in 0..on.len() {
                        if on[k].1 != c {
                            prefix_err += 1;
                        } else {
                            suffix_err -= 1;
                        }
                        if k + 1 == on.len() || on[k + 1].0 != on[k].0 {
                            cut_best = cut_best.min(prefix_err + suffix_err);
                        }
                    }
                    debug_assert_eq!(prefix_err, total_c);
                    best = best.min(sides + cut_best);
                }
            }
        }
    }
    best
}

/// Random planar instance. Half the instances snap to a coarse dyadic
/// lattice to force duplicates and collinear triples; dyadic coordinates
/// keep the oracle's cross products exact.
pub fn random_instance(seed: u64) -> Vec<Example> {
    let mut rng = rng_for(seed, 0);
    let m = rng.gen_range(1..=25);
    let snap = rng.gen_bool(0.5);
    (0..m)
        .map(|_| {
            let mut coord = || {
                if snap {
                    f64::from(rng.gen_range(0..6u32)) / 8.0
                } else {
                    rng.gen::<f64>()
                }
            };
            let x = vec![coord(), coord()];
            Example { x, y: rng.gen_range(0..2) }
        })
        .collect()
}

/// Fraction of `trials` in which the bins a size-`m_l` sample leaves empty
/// carry more than `alpha` of the probability mass.
pub fn empty_bin_exceedance(probs: &[f64], m_l: usize, alpha: f64, trials: usize, seed: u64) -> usize {
    let mut rng = rng_for(seed, 0);
    let cum: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut exceed = 0;
    for _ in 0..trials {
        let mut hit = vec![false; probs.len()];
        for _ in 0..m_l {
            let u: f64 = rng.gen::<f64>() * cum[cum.len() - 1];
            let b = cum.partition_point(|&c| c <= u).min(probs.len() - 1);
            hit[b] = true;
        }
        let empty: f64 = probs.iter().zip(&hit).filter(|(_, &h)| !h).map(|(p, _)| p).sum();
        if empty > alpha {
            exceed += 1;
        }
    }
    exceed
}

/// Bin distributions for the empty-mass experiment: uniform, geometric, and
/// one with most bins near the maximiser `t*` of the alpha objective.
pub fn bin_distributions(k: usize, t_star: f64) -> Vec<Vec<f64>> {
    let uniform = vec![1.0 / k as f64; k];
    let geo: Vec<f64> = (0..k).map(|i| 0.5f64.powi(i as i32 + 1)).collect();
    let z: f64 = geo.iter().sum();
    let geo = geo.into_iter().map(|p| p / z).collect();
    let small = t_star.min(1.0 / k as f64);
    let mut near = vec![small; k - 1];
    near.push(1.0 - small * (k - 1) as f64);
    vec![uniform, geo, near]
}
