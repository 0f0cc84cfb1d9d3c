//! Downstream learners that run unchanged on raw inputs and on learned
//! features: exact 0/1-loss linear ERM and 1-nearest-neighbour.
//!
//! `erm_linear_01` returns a global minimiser of the empirical 0/1 loss over
//! all affine classifiers `x -> 1(w.x + b > 0)`. Some optimal hyperplane can
//! always be moved until it touches `d` of the sample locations; the solver
//! enumerates those hyperplanes by rotating a line (d = 2) or a plane (d = 3)
//! around every pivot location or pivot pair and sweeping over the angles at
//! which the side of some other location changes. Locations on the pivot
//! itself can be put on either side by an infinitesimal shift or tilt, so
//! each open angular interval contributes its best assignment of them.
//! Exact duplicates are merged first. The d = 3 solver assumes no four
//! distinct locations are coplanar; d <= 2 has no such restriction.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use crate::error::{invalid_input, Error, Result};
use crate::math;

pub type Label = u8;

/// Largest input dimension the exact ERM accepts.
pub const ERM_MAX_DIM: usize = 3;
/// Largest sample the exact ERM accepts.
pub const ERM_MAX_SAMPLES: usize = 2000;

/// A labelled input.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Label,
}

impl Example {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        Self { x, y }
    }
}

/// A learned representation `f: X -> Z` with `Z = R^output_dim`.
pub trait FeatureMap {
    fn output_dim(&self) -> usize;
    fn map(&self, p: &[f64]) -> Result<Vec<f64>>;
}

/// The representation that changes nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityMap {
    pub dim: usize,
}

impl FeatureMap for IdentityMap {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn map(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dim {
            return Err(invalid_input!("identity map expects dimension {}, got {}", self.dim, p.len()));
        }
        Ok(p.to_vec())
    }
}

/// Applies `fm` to every input of `data`, keeping labels and order.
pub fn transform_sample<F: FeatureMap + ?Sized>(fm: &F, data: &[Example]) -> Result<Vec<Example>> {
    data.iter()
        .map(|e| Ok(Example::new(fm.map(&e.x)?, e.y)))
        .collect()
}

/// `x -> 1` iff `w.x + b > 0`; the boundary predicts 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearClassifier {
    pub fn constant(label: Label) -> Self {
        Self::constant_in(0, label)
    }

    fn constant_in(dim: usize, label: Label) -> Self {
        Self {
            w: alloc::vec![0.0; dim],
            b: if label == 1 { 1.0 } else { -1.0 },
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.w.len() {
            return Err(invalid_input!("classifier has dimension {}, input {}", self.w.len(), x.len()));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        Label::from(math::dot(&self.w, x) + self.b > 0.0)
    }

    pub fn errors(&self, data: &[Example]) -> usize {
        data.iter().filter(|e| self.predict_unchecked(&e.x) != e.y).count()
    }

    /// Scaled so that `|w| = 1`, or `b = +-1` when `w = 0`.
    fn normalized(mut self) -> Self {
        let norm = math::sqrt(math::dot(&self.w, &self.w));
        let scale = if norm > 0.0 { norm } else { self.b.abs() };
        if scale > 0.0 {
            self.w.iter_mut().for_each(|v| *v /= scale);
            self.b /= scale;
        }
        self
    }

    /// Constants first, then lexicographic on `(w, b)`.
    fn lex_cmp(&self, other: &Self) -> Ordering {
        let constant = |c: &Self| c.w.iter().all(|&v| v == 0.0);
        match constant(other).cmp(&constant(self)) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.w.iter().zip(&other.w) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.b.total_cmp(&other.b)
    }
}

/// Exact empirical-risk minimiser of the 0/1 loss over affine classifiers.
/// Returns the classifier and its empirical risk. Among co-optimal
/// candidates a constant classifier wins if there is one, otherwise the
/// lexicographically smallest normalised `(w, b)`.
pub fn erm_linear_01(data: &[Example]) -> Result<(LinearClassifier, f64)> {
    let d = check_sample(data)?;
    if d > ERM_MAX_DIM || data.len() > ERM_MAX_SAMPLES {
        return Err(Error::Unsupported(alloc::format!(
            "exact ERM supports d <= {ERM_MAX_DIM} and m <= {ERM_MAX_SAMPLES}, got d = {d}, m = {}",
            data.len()
        )));
    }
    let locs = group_locations(data);
    let mut best = Best::new();
    for label in [0, 1] {
        let c = LinearClassifier::constant_in(d, label);
        best.offer(c.errors(data), || c.clone());
    }
    match d {
        0 => {}
        1 => sweep_1d(&locs, &mut best),
        2 => sweep_2d(&locs, &mut best),
        _ => sweep_3d(&locs, &mut best),
    }
    let classifier = best.take();
    // recount on the concrete classifier rather than trusting the sweep
    let risk = classifier.errors(data) as f64 / data.len() as f64;
    Ok((classifier, risk))
}

/// Minimum number of 0/1 errors a linear classifier makes on `data`.
pub fn erm_min_errors(data: &[Example]) -> Result<usize> {
    let (c, _) = erm_linear_01(data)?;
    Ok(c.errors(data))
}

fn check_sample(data: &[Example]) -> Result<usize> {
    let first = data.first().ok_or_else(|| invalid_input!("ERM needs at least one example"))?;
    let d = first.x.len();
    for e in data {
        if e.x.len() != d {
            return Err(invalid_input!("mixed input dimensions {} and {}", d, e.x.len()));
        }
        if e.y > 1 {
            return Err(invalid_input!("label {} is not 0 or 1", e.y));
        }
        if e.x.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input!("non-finite input coordinate"));
        }
    }
    Ok(d)
}

/// A distinct input location with its label counts.
#[derive(Debug, Clone)]
struct Location {
    x: Vec<f64>,
    zeros: usize,
    ones: usize,
}

impl Location {
    /// Errors when predicted `label`.
    fn errors_as(&self, label: bool) -> usize {
        if label {
            self.zeros
        } else {
            self.ones
        }
    }
}

fn group_locations(data: &[Example]) -> Vec<Location> {
    let mut order: Vec<&Example> = data.iter().collect();
    order.sort_by(|a, b| cmp_coords(&a.x, &b.x));
    let mut out: Vec<Location> = Vec::new();
    for e in order {
        match out.last_mut() {
            Some(loc) if cmp_coords(&loc.x, &e.x) == Ordering::Equal => {}
            _ => out.push(Location {
                x: e.x.clone(),
                zeros: 0,
                ones: 0,
            }),
        }
        let loc = out.last_mut().expect("just ensured");
        if e.y == 1 {
            loc.ones += 1;
        } else {
            loc.zeros += 1;
        }
    }
    out
}

fn cmp_coords(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

struct Best {
    errors: usize,
    classifier: Option<LinearClassifier>,
}

impl Best {
    fn new() -> Self {
        Self {
            errors: usize::MAX,
            classifier: None,
        }
    }

    /// Offers a candidate; `build` runs only if it can win.
    fn offer(&mut self, errors: usize, build: impl FnOnce() -> LinearClassifier) {
        if errors > self.errors {
            return;
        }
        let c = build().normalized();
        let better = errors < self.errors
            || self.classifier.as_ref().is_none_or(|cur| c.lex_cmp(cur) == Ordering::Less);
        if better {
            self.errors = errors;
            self.classifier = Some(c);
        }
    }

    fn take(self) -> LinearClassifier {
        self.classifier.expect("constant classifiers are always offered")
    }
}

/// Best affine sign pattern along a line: thresholds on the scalar `t`
/// of each location, both orientations. Returns `(errors, sign, threshold)`
/// meaning `predict 1 iff sign * (t - threshold) > 0`; sign 0 encodes a
/// constant with `threshold` holding the label.
fn best_threshold(points: &mut [(f64, usize, usize)]) -> (usize, i8, f64) {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total0: usize = points.iter().map(|p| p.1).sum();
    let total1: usize = points.iter().map(|p| p.2).sum();
    let mut best = if total1 <= total0 { (total1, 0, 0.0) } else { (total0, 0, 1.0) };
    // prefix = locations with t <= cut
    let (mut pre0, mut pre1) = (0, 0);
    for i in 0..points.len() {
        pre0 += points[i].1;
        pre1 += points[i].2;
        if i + 1 == points.len() {
            break;
        }
        let cut = 0.5 * (points[i].0 + points[i + 1].0);
        // sign +1: prefix predicted 0, suffix predicted 1
        let up = pre1 + (total0 - pre0);
        let down = pre0 + (total1 - pre1);
        if up < best.0 {
            best = (up, 1, cut);
        }
        if down < best.0 {
            best = (down, -1, cut);
        }
    }
    best
}

fn sweep_1d(locs: &[Location], best: &mut Best) {
    let mut pts: Vec<(f64, usize, usize)> = locs.iter().map(|l| (l.x[0], l.zeros, l.ones)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total0: usize = pts.iter().map(|p| p.1).sum();
    let total1: usize = pts.iter().map(|p| p.2).sum();
    let (mut pre0, mut pre1) = (0, 0);
    for i in 0..pts.len().saturating_sub(1) {
        pre0 += pts[i].1;
        pre1 += pts[i].2;
        let cut = 0.5 * (pts[i].0 + pts[i + 1].0);
        best.offer(pre1 + (total0 - pre0), || LinearClassifier {
            w: alloc::vec![1.0],
            b: -cut,
        });
        best.offer(pre0 + (total1 - pre1), || LinearClassifier {
            w: alloc::vec![-1.0],
            b: cut,
        });
    }
}

/// Location seen from a pivot: angle in `[0, 2pi)` and label counts.
struct Polar {
    angle: f64,
    zeros: usize,
    ones: usize,
}

/// Angular events merged closer than this are treated as simultaneous.
const ANGLE_EPS: f64 = 1e-12;

/// Sweeps the open angular intervals of a line rotating through the pivot
/// and reports, for each, `(errors among polar points, mid angle)` via `visit`.
/// A point at angle `phi` is on the positive side of direction `theta` iff
/// `phi - theta` lies in `(0, pi)` modulo `2 pi`.
fn angular_sweep(polar: &[Polar], mut visit: impl FnMut(usize, f64)) {
    if polar.is_empty() {
        visit(0, 0.0);
        return;
    }
    // (angle, index, entering positive side)
    let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * polar.len());
    for (i, p) in polar.iter().enumerate() {
        events.push((p.angle, i, false));
        let mut a = p.angle - PI;
        if a < 0.0 {
            a += 2.0 * PI;
        }
        events.push((a, i, true));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    // batch boundaries
    let mut starts = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if i == 0 || e.0 - events[i - 1].0 > ANGLE_EPS {
            starts.push(i);
        }
    }
    let batch_angle = |b: usize| events[starts[b]].0;
    let nb = starts.len();
    // wrap-around interval: from the last batch to the first one (+2pi)
    let mut theta = 0.5 * (batch_angle(nb - 1) + batch_angle(0) + 2.0 * PI);
    if theta >= 2.0 * PI {
        theta -= 2.0 * PI;
    }
    let mut errors: usize = polar
        .iter()
        .map(|p| {
            let mut rel = p.angle - theta;
            if rel < 0.0 {
                rel += 2.0 * PI;
            }
            if rel > 0.0 && rel < PI {
                p.zeros
            } else {
                p.ones
            }
        })
        .sum();
    visit(errors, theta);
    for b in 0..nb - 1 {
        let end = starts[b + 1];
        for &(_, i, enter) in &events[starts[b]..end] {
            let p = &polar[i];
            // entering: was predicted 0, now 1
            if enter {
                errors = errors + p.zeros - p.ones;
            } else {
                errors = errors + p.ones - p.zeros;
            }
        }
        visit(errors, 0.5 * (batch_angle(b) + batch_angle(b + 1)));
    }
}

fn sweep_2d(locs: &[Location], best: &mut Best) {
    for (pi, pivot) in locs.iter().enumerate() {
        let polar: Vec<Polar> = locs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != pi)
            .map(|(_, l)| {
                let mut angle = math::atan2(l.x[1] - pivot.x[1], l.x[0] - pivot.x[0]);
                if angle < 0.0 {
                    angle += 2.0 * PI;
                }
                if angle >= 2.0 * PI {
                    angle = 0.0;
                }
                Polar {
                    angle,
                    zeros: l.zeros,
                    ones: l.ones,
                }
            })
            .collect();
        angular_sweep(&polar, |errors, theta| {
            for side in [true, false] {
                let total = errors + pivot.errors_as(side);
                best.offer(total, || {
                    let (sin, cos) = math::sin_cos(theta);
                    let w = [-sin, cos];
                    let margin = locs
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != pi)
                        .map(|(_, l)| (w[0] * (l.x[0] - pivot.x[0]) + w[1] * (l.x[1] - pivot.x[1])).abs())
                        .fold(1.0f64, f64::min);
                    let shift = if side { 0.5 * margin } else { -0.5 * margin };
                    LinearClassifier {
                        w: w.to_vec(),
                        b: -(w[0] * pivot.x[0] + w[1] * pivot.x[1]) + shift,
                    }
                });
            }
        });
    }
}

fn sub(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = math::sqrt(math::dot(&a, &a));
    [a[0] / n, a[1] / n, a[2] / n]
}

fn sweep_3d(locs: &[Location], best: &mut Best) {
    let scale = locs
        .iter()
        .flat_map(|l| l.x.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let on_axis_tol = 1e-12 * scale;
    for (pi, p) in locs.iter().enumerate() {
        for q in &locs[pi + 1..] {
            let axis = unit(sub(&q.x, &p.x));
            // any vector not parallel to the axis seeds the orthonormal frame
            let seed = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let e1 = unit(cross(axis, seed));
            let e2 = cross(axis, e1);
            let mut on_axis: Vec<(f64, usize, usize)> = Vec::new();
            let mut polar = Vec::new();
            for l in locs {
                let v = sub(&l.x, &p.x);
                let (u1, u2) = (math::dot(&v, &e1), math::dot(&v, &e2));
                if u1.abs() <= on_axis_tol && u2.abs() <= on_axis_tol {
                    on_axis.push((math::dot(&v, &axis), l.zeros, l.ones));
                } else {
                    let mut angle = math::atan2(u2, u1);
                    if angle < 0.0 {
                        angle += 2.0 * PI;
                    }
                    polar.push((Polar {
                        angle,
                        zeros: l.zeros,
                        ones: l.ones,
                    }, v));
                }
            }
            let (axis_errors, sign, cut) = best_threshold(&mut on_axis);
            let t_span = on_axis.iter().fold(1.0f64, |m, t| m.max(t.0.abs())) + cut.abs();
            let polar_only: Vec<Polar> = polar
                .iter()
                .map(|(pp, _)| Polar {
                    angle: pp.angle,
                    zeros: pp.zeros,
                    ones: pp.ones,
                })
                .collect();
            angular_sweep(&polar_only, |errors, theta| {
                best.offer(errors + axis_errors, || {
                    let (sin, cos) = math::sin_cos(theta);
                    let normal: [f64; 3] = core::array::from_fn(|i| -sin * e1[i] + cos * e2[i]);
                    let margin = polar
                        .iter()
                        .map(|(_, v)| math::dot(&normal, v).abs())
                        .fold(1.0f64, f64::min);
                    // tilt along the axis small enough to leave off-axis sides alone
                    let eps = 0.5 * margin / (t_span + 1.0);
                    let (tilt, offset) = match sign {
                        0 => (0.0, if cut == 1.0 { eps } else { -eps }),
                        s => (f64::from(s) * eps, -f64::from(s) * eps * cut),
                    };
                    let w: [f64; 3] = core::array::from_fn(|i| normal[i] + tilt * axis[i]);
                    LinearClassifier {
                        w: w.to_vec(),
                        b: -math::dot(&w, &p.x) + offset,
                    }
                });
            });
        }
    }
}

/// 1-nearest-neighbour under Euclidean distance; ties go to the earliest
/// training example.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighborModel {
    data: Vec<Example>,
}

impl NearestNeighborModel {
    pub fn fit(data: &[Example]) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| invalid_input!("1-NN needs at least one training example"))?;
        if data.iter().any(|e| e.x.len() != first.x.len()) {
            return Err(invalid_input!("mixed input dimensions in 1-NN training data"));
        }
        Ok(Self { data: data.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.data[0].x.len()
    }

    pub fn training_data(&self) -> &[Example] {
        &self.data
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(
                "query dimension differs from the training data".to_string(),
            ));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        let mut best = (f64::INFINITY, 0);
        for e in &self.data {
            let d = math::dist_sq(&e.x, x);
            if d < best.0 {
                best = (d, e.y);
            }
        }
        best.1
    }
}

/// Convenience wrapper matching the learner-as-function view.
pub fn one_nn_fit(data: &[Example]) -> Result<NearestNeighborModel> {
    NearestNeighborModel::fit(data)
}

pub fn one_nn_predict(model: &NearestNeighborModel, x: &[f64]) -> Result<Label> {
    model.predict(x)
}

pub fn predict_linear(c: &LinearClassifier, x: &[f64]) -> Result<Label> {
    c.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ex(x: &[f64], y: Label) -> Example {
        Example::new(x.to_vec(), y)
    }

    #[test]
    fn two_points_opposite_labels_1d() {
        let (c, risk) = erm_linear_01(&[ex(&[0.2], 0), ex(&[0.8], 1)]).unwrap();
        assert_eq!(risk, 0.0);
        assert_eq!(c.predict(&[0.2]).unwrap(), 0);
        assert_eq!(c.predict(&[0.8]).unwrap(), 1);
    }

    #[test]
    fn xor_costs_a_quarter() {
        let data = [ex(&[0.0, 0.0], 0), ex(&[1.0, 0.0], 1), ex(&[0.0, 1.0], 1), ex(&[1.0, 1.0], 0)];
        let (_, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.25);
    }

    #[test]
    fn equal_labels_give_a_constant() {
        let data = [ex(&[0.1, 0.3], 1), ex(&[0.5, 0.2], 1), ex(&[0.9, 0.9], 1)];
        let (c, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.0);
        assert_eq!(c.w, vec![0.0, 0.0]);
        assert_eq!(c.b, 1.0);
        let data = [ex(&[0.1, 0.3], 0), ex(&[0.5, 0.2], 0)];
        let (c, _) = erm_linear_01(&data).unwrap();
        assert_eq!((c.w.clone(), c.b), (vec![0.0, 0.0], -1.0));
    }

    #[test]
    fn window_is_enforced() {
        let data = vec![ex(&[0.0, 0.0, 0.0, 0.0], 0)];
        assert!(matches!(erm_linear_01(&data), Err(Error::Unsupported(_))));
        let data: Vec<Example> = (0..2001).map(|i| ex(&[i as f64], (i % 2) as u8)).collect();
        assert!(matches!(erm_linear_01(&data), Err(Error::Unsupported(_))));
        assert!(matches!(erm_linear_01(&[]), Err(Error::InvalidInput(_))));
        assert!(erm_linear_01(&[ex(&[0.0], 0), ex(&[0.0, 1.0], 1)]).is_err());
        assert!(erm_linear_01(&[ex(&[0.0], 2)]).is_err());
    }

    #[test]
    fn duplicates_with_mixed_labels() {
        let data = [ex(&[0.5, 0.5], 0), ex(&[0.5, 0.5], 1), ex(&[0.5, 0.5], 1), ex(&[0.9, 0.1], 0)];
        let (_, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.25);
    }

    #[test]
    fn collinear_points_2d() {
        // alternating labels on a line: best is 1 error out of 4 with a line cut
        let data = [ex(&[0.1, 0.1], 1), ex(&[0.2, 0.2], 0), ex(&[0.3, 0.3], 0), ex(&[0.4, 0.4], 1)];
        let (_, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.25);
        let data = [ex(&[0.1, 0.1], 0), ex(&[0.2, 0.2], 0), ex(&[0.3, 0.3], 1), ex(&[0.4, 0.4], 1)];
        let (c, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.0);
        assert_eq!(c.errors(&data), 0);
    }

    #[test]
    fn one_hot_features_3d_separate() {
        // k = 3 one-hot codes plus the zero vector, any labelling is separable
        let locs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        for mask in 0u8..16 {
            let data: Vec<Example> = locs
                .iter()
                .enumerate()
                .flat_map(|(i, l)| core::iter::repeat_n(ex(l, (mask >> i) & 1), 3))
                .collect();
            let (c, risk) = erm_linear_01(&data).unwrap();
            assert_eq!(risk, 0.0, "mask {mask}");
            assert_eq!(c.errors(&data), 0);
        }
    }

    #[test]
    fn three_d_xor_like() {
        // parity on the cube corners: brute-force minimum is 2/8
        let mut data = Vec::new();
        for i in 0..8u8 {
            let x = [f64::from(i & 1), f64::from((i >> 1) & 1), f64::from((i >> 2) & 1)];
            data.push(ex(&x, (i.count_ones() % 2) as u8));
        }
        let (_, risk) = erm_linear_01(&data).unwrap();
        assert_eq!(risk, 0.25);
    }

    #[test]
    fn predict_linear_examples() {
        let c = LinearClassifier { w: vec![1.0, 0.0], b: -0.5 };
        assert_eq!(predict_linear(&c, &[0.9, 0.1]).unwrap(), 1);
        assert_eq!(predict_linear(&c, &[0.5, 0.7]).unwrap(), 0);
        assert!(predict_linear(&c, &[0.5]).is_err());
        let one = LinearClassifier { w: vec![0.0, 0.0], b: 1.0 };
        assert_eq!(one.predict(&[0.3, 0.3]).unwrap(), 1);
        assert_eq!(LinearClassifier::constant(1).predict(&[]).unwrap(), 1);
    }

    #[test]
    fn nearest_neighbor_examples() {
        let m = one_nn_fit(&[ex(&[0.1], 0), ex(&[0.9], 1)]).unwrap();
        assert_eq!(one_nn_predict(&m, &[0.1]).unwrap(), 0);
        assert_eq!(one_nn_predict(&m, &[0.7]).unwrap(), 1);
        // tie goes to the first
        assert_eq!(one_nn_predict(&m, &[0.5]).unwrap(), 0);
        assert!(one_nn_fit(&[]).is_err());
        assert!(m.predict(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn off_curve_sentinel_never_nearest_on_curve() {
        // arc values in [0, gamma] against the -10 gamma sentinel
        let gamma = 20.0;
        let train = [ex(&[-10.0 * gamma], 1), ex(&[gamma], 0), ex(&[0.0], 0)];
        let m = one_nn_fit(&train).unwrap();
        for i in 0..=200 {
            let q = gamma * f64::from(i) / 200.0;
            assert_eq!(m.predict(&[q]).unwrap(), 0);
        }
    }

    #[test]
    fn transform_keeps_labels_and_order() {
        let id = IdentityMap { dim: 2 };
        let data = vec![ex(&[0.1, 0.2], 1), ex(&[0.3, 0.4], 0)];
        assert_eq!(transform_sample(&id, &data).unwrap(), data);
        assert!(transform_sample(&IdentityMap { dim: 3 }, &data).is_err());
    }

    proptest! {
        #[test]
        fn erm_risk_invariant_under_permutation_and_scaling(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0u8..2), 1..18),
            rot in 0usize..18,
            scale in 0.1f64..10.0,
        ) {
            let data: Vec<Example> = pts.iter().map(|&(a, b, y)| ex(&[a, b], y)).collect();
            let (_, base) = erm_linear_01(&data).unwrap();
            let mut permuted = data.clone();
            permuted.rotate_left(rot % data.len());
            prop_assert_eq!(erm_linear_01(&permuted).unwrap().1, base);
            let scaled: Vec<Example> = data.iter().map(|e| ex(&[e.x[0] * scale, e.x[1] * scale], e.y)).collect();
            prop_assert_eq!(erm_linear_01(&scaled).unwrap().1, base);
        }

        #[test]
        fn one_nn_fits_distinct_training_points(
            pts in proptest::collection::btree_map((0u32..1000, 0u32..1000), 0u8..2, 1..30),
        ) {
            let data: Vec<Example> = pts
                .iter()
                .map(|(&(a, b), &y)| ex(&[f64::from(a) / 1000.0, f64::from(b) / 1000.0], y))
                .collect();
            let m = one_nn_fit(&data).unwrap();
            for e in &data {
                prop_assert_eq!(m.predict(&e.x).unwrap(), e.y);
            }
        }

        #[test]
        fn erm_1d_matches_brute_force(
            pts in proptest::collection::vec((0u32..20, 0u8..2), 1..30),
        ) {
            let data: Vec<Example> = pts.iter().map(|&(a, y)| ex(&[f64::from(a) / 20.0], y)).collect();
            // thresholds between grid values in both orientations plus constants
            let mut best = usize::MAX;
            for t in -1..=20 {
                let cut = (f64::from(t) + 0.5) / 20.0;
                for up in [true, false] {
                    let errs = data
                        .iter()
                        .filter(|e| Label::from((e.x[0] > cut) == up) != e.y)
                        .count();
                    best = best.min(errs);
                }
            }
            let (_, risk) = erm_linear_01(&data).unwrap();
            prop_assert_eq!(risk, best as f64 / data.len() as f64);
        }
    }
}
