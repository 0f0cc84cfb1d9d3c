//! Closed-form bound primitives and the two composed bound reports.
//!
//! Every logarithm here is natural.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::E;

use crate::cluster::ClusterTestResult;
use crate::error::{invalid_input, Error, Result};
use crate::learners::{erm_min_errors, Example};
use crate::math;

/// Empty-bin problem: `k_bins` equal-mass bins, `m_l` labelled
/// draws, confidence parameter `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaProblem {
    pub k_bins: f64,
    pub delta: f64,
    pub m_l: u64,
}

impl AlphaProblem {
    pub fn new(k_bins: f64, delta: f64, m_l: u64) -> Result<Self> {
        if !(k_bins.is_finite() && k_bins > 0.0) {
            return Err(invalid_input!("bin count must be positive, got {k_bins}"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid_input!("delta must be positive, got {delta}"));
        }
        if m_l == 0 {
            return Err(invalid_input!("m_l must be at least 1"));
        }
        Ok(Self { k_bins, delta, m_l })
    }

    /// `g(t) = (k - delta (1-t)^(-m_l)) t`, or `-inf` once the power overflows.
    pub fn g(&self, t: f64) -> f64 {
        let power = math::exp(-(self.m_l as f64) * math::ln_1p(-t));
        let v = (self.k_bins - self.delta * power) * t;
        if v.is_nan() || power.is_infinite() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Derivative of `g`, decreasing in `t` because `g` is concave.
    fn g_prime(&self, t: f64) -> f64 {
        let m = self.m_l as f64;
        let power = math::exp(-m * math::ln_1p(-t));
        let v = self.k_bins - self.delta * power * (1.0 + m * t / (1.0 - t));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// `(alpha, t*)` with `alpha = max_t g(t)` clamped at 0.
///
/// `g(0) = 0` and `g` is concave, so if `g'(0) = k - delta <= 0` the maximum
/// is at `t = 0`. Otherwise the stationary point lies in `(0, t0)` where
/// `t0 = 1 - (delta/k)^(1/m_l)` is the positive root of `g`, and bisection on
/// the sign of `g'` pins it to machine precision.
pub fn alpha_max(p: &AlphaProblem) -> (f64, f64) {
    if p.k_bins <= p.delta {
        return (0.0, 0.0);
    }
    let t0 = -libm::expm1(math::ln(p.delta / p.k_bins) / p.m_l as f64);
    let (mut lo, mut hi) = (0.0, t0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.g_prime(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (p.g(t).max(0.0), t)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid_input!("delta must lie in (0, 1), got {delta}"))
    }
}

/// Realisable finite-class bound `(ln|H| + ln(1/delta)) / m`.
pub fn finite_class_bound(log_h: f64, m: u64, delta: f64) -> Result<f64> {
    if !(log_h.is_finite() && log_h >= 0.0) {
        return Err(invalid_input!("ln|H| must be finite and non-negative"));
    }
    if m == 0 {
        return Err(invalid_input!("m must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid_input!("delta must lie in (0, 1], got {delta}"));
    }
    Ok((log_h - math::ln(delta)) / m as f64)
}

/// VC lower bound on the true risk of any classifier in a class of VC
/// dimension `d_vc` given its empirical risk. Returned unclamped.
pub fn vc_lower_bound(emp_risk: f64, d_vc: u64, m: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if d_vc == 0 || m == 0 {
        return Err(invalid_input!("d_vc and m must be positive"));
    }
    let ratio = 2.0 * E * m as f64 / d_vc as f64;
    if ratio <= 1.0 {
        return Err(invalid_input!("need 2em/d > 1, got {ratio}"));
    }
    let slack = (8.0 * d_vc as f64 * math::ln(ratio) + 8.0 * math::ln(4.0 / delta)) / m as f64;
    Ok(emp_risk - math::sqrt(slack))
}

/// Converts a cell side `s = 1/q` to `q`.
pub fn cells_per_axis(s: f64) -> Result<u32> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(invalid_input!("cell side must lie in (0, 1], got {s}"));
    }
    let q = libm::round(1.0 / s);
    if (q * s - 1.0).abs() > 1e-9 || q > f64::from(u32::MAX) {
        return Err(invalid_input!("1/s must be an integer, got s = {s}"));
    }
    Ok(q as u32)
}

/// `(q^n ln 2 + ln(3/delta)) / m_u`.
pub fn eps_a_cluster(s: f64, n: usize, m_u: u64, delta: f64) -> Result<f64> {
    let q = cells_per_axis(s)?;
    check_delta(delta)?;
    if n == 0 || m_u == 0 {
        return Err(invalid_input!("n and m_u must be positive"));
    }
    let cells = libm::pow(f64::from(q), n as f64);
    if !cells.is_finite() {
        return Err(invalid_input!("q^n overflows for q = {q}, n = {n}"));
    }
    Ok((cells * core::f64::consts::LN_2 + math::ln(3.0 / delta)) / m_u as f64)
}

/// `((n gamma / s) ln 3 - n ln s + ln(3/delta)) / m_u`.
pub fn eps_a_manifold(s: f64, n: usize, gamma_len: f64, m_u: u64, delta: f64) -> Result<f64> {
    cells_per_axis(s)?;
    check_delta(delta)?;
    if n == 0 || m_u == 0 {
        return Err(invalid_input!("n and m_u must be positive"));
    }
    if !(gamma_len.is_finite() && gamma_len > 0.0) {
        return Err(invalid_input!("gamma must be positive, got {gamma_len}"));
    }
    let n = n as f64;
    Ok(((n * gamma_len / s) * math::ln(3.0) - n * math::ln(s) + math::ln(3.0 / delta)) / m_u as f64)
}

/// `eps_c + alpha(k + 1, delta / 3, m_l)`.
pub fn eps_max_z_cluster(eps_c: f64, k: usize, m_l: u64, delta: f64) -> Result<f64> {
    let p = AlphaProblem::new(k as f64 + 1.0, delta / 3.0, m_l)?;
    Ok(eps_c + alpha_max(&p).0)
}

/// Number of arc-length bins `gamma / (j s)`; may be fractional.
pub fn manifold_bins(gamma_len: f64, j: u32, s: f64) -> Result<f64> {
    if j == 0 {
        return Err(invalid_input!("j must be positive"));
    }
    let bins = gamma_len / (f64::from(j) * s);
    if !(bins.is_finite() && bins >= 1.0) {
        return Err(invalid_input!("gamma / (j s) must be at least 1, got {bins}"));
    }
    Ok(bins)
}

/// `eps_a + eps_b + alpha(gamma / (j s), delta / 3, m_l)`.
pub fn eps_max_z_manifold(eps_a: f64, eps_b: f64, gamma_len: f64, j: u32, s: f64, m_l: u64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps_b) {
        return Err(invalid_input!("eps_B must lie in [0, 1], got {eps_b}"));
    }
    let bins = manifold_bins(gamma_len, j, s)?;
    let p = AlphaProblem::new(bins, delta / 3.0, m_l)?;
    Ok(eps_a + eps_b + alpha_max(&p).0)
}

/// Theorem-level lower bound on the raw learner's risk:
/// `vc_lower_bound(beta, n + 1, m_u, delta / 3)`.
pub fn eps_min_cluster(beta: f64, n: usize, m_u: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    vc_lower_bound(beta, n as u64 + 1, m_u, delta / 3.0)
}

fn pair_subsets<'a, P: AsRef<[f64]>>(
    result: &ClusterTestResult,
    sample: &'a [P],
) -> Result<Vec<Vec<(&'a [f64], u8, usize)>>> {
    if !result.passed || result.k() < 2 {
        return Err(Error::InvalidState(alloc::format!(
            "beta needs a passed cluster test with k >= 2, got k = {}",
            result.k()
        )));
    }
    if sample.len() != result.component_of.len() {
        return Err(invalid_input!(
            "sample has {} points but the test saw {}",
            sample.len(),
            result.component_of.len()
        ));
    }
    let k = result.k();
    let mut by_region: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    for (i, &r) in result.component_of.iter().enumerate() {
        by_region[r].push(i);
    }
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            // merge in sample order so that blocks are random subsets
            let mut pair: Vec<(&[f64], u8, usize)> = by_region[a]
                .iter()
                .map(|&i| (sample[i].as_ref(), 1, i))
                .chain(by_region[b].iter().map(|&i| (sample[i].as_ref(), 0, i)))
                .collect();
            pair.sort_by_key(|e| e.2);
            out.push(pair);
        }
    }
    Ok(out)
}

fn min_errors(points: &[(&[f64], u8, usize)]) -> Result<usize> {
    let data: Vec<Example> = points.iter().map(|(x, y, _)| Example::new(x.to_vec(), *y)).collect();
    erm_min_errors(&data)
}

/// Minimum over region pairs of the exact linear-ERM error count on that
/// pair (one region labelled 1, the other 0), divided by `m_u`.
pub fn beta_pairwise<P: AsRef<[f64]>>(result: &ClusterTestResult, sample: &[P]) -> Result<f64> {
    let m_u = sample.len() as f64;
    let mut best = usize::MAX;
    for pair in pair_subsets(result, sample)? {
        best = best.min(min_errors(&pair)?);
    }
    Ok(best as f64 / m_u)
}

/// Certified lower bound on [`beta_pairwise`] for samples too large for the
/// exact solver. Each pair subset is cut into consecutive blocks of at most
/// `block` points; the optimum on the whole subset restricted to a block is
/// feasible for that block, so the sum of exact block minima never exceeds
/// the subset minimum.
pub fn beta_pairwise_blocked<P: AsRef<[f64]>>(result: &ClusterTestResult, sample: &[P], block: usize) -> Result<f64> {
    if block == 0 || block > crate::learners::ERM_MAX_SAMPLES {
        return Err(invalid_input!("block size must lie in 1..={}", crate::learners::ERM_MAX_SAMPLES));
    }
    let m_u = sample.len() as f64;
    let mut best = usize::MAX;
    for pair in pair_subsets(result, sample)? {
        let mut total = 0;
        for chunk in pair.chunks(block) {
            total += min_errors(chunk)?;
            if total >= best {
                break;
            }
        }
        best = best.min(total);
    }
    Ok(best as f64 / m_u)
}

/// `P[Bin(m, p) >= c]`.
pub fn binomial_upper_tail(m: u64, p: f64, c: u64) -> f64 {
    if c == 0 || p >= 1.0 {
        return if c <= m { 1.0 } else { 0.0 };
    }
    if c > m || p <= 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    let log_pmf = |i: u64| {
        let i = i as f64;
        math::ln_gamma(mf + 1.0) - math::ln_gamma(i + 1.0) - math::ln_gamma(mf - i + 1.0)
            + i * math::ln(p)
            + (mf - i) * math::ln_1p(-p)
    };
    let odds = p / (1.0 - p);
    if c as f64 >= mf * p {
        // upper side beyond the mode: terms decrease
        let mut term = math::exp(log_pmf(c));
        let mut sum = 0.0;
        let mut i = c;
        loop {
            sum += term;
            if i == m || term < sum * 1e-17 {
                break;
            }
            term *= (mf - i as f64) / (i as f64 + 1.0) * odds;
            i += 1;
        }
        sum.min(1.0)
    } else {
        // complement: lower side below the mode, terms decrease going down
        let mut i = c - 1;
        let mut term = math::exp(log_pmf(i));
        let mut sum = 0.0;
        loop {
            sum += term;
            if i == 0 || term < sum * 1e-17 {
                break;
            }
            term *= i as f64 / (mf - i as f64 + 1.0) / odds;
            i -= 1;
        }
        (1.0 - sum).clamp(0.0, 1.0)
    }
}

/// Smallest `p` with `P[Bin(m_u, p) >= c] >= tau`, minimised over the
/// occupied-cell counts. The tail falls as `c` grows, so the smallest count
/// decides. Bisection stops at width `1e-13` and returns the upper end.
pub fn binomial_r<I: IntoIterator<Item = u64>>(m_u: u64, counts: I, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid_input!("tau must lie in (0, 1), got {tau}"));
    }
    let Some(c) = counts.into_iter().min() else {
        return Err(invalid_input!("no occupied cells"));
    };
    if c > m_u {
        return Err(invalid_input!("count {c} exceeds m_u = {m_u}"));
    }
    if c == 0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail(m_u, mid, c) >= tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Labelled-sample size `ceil((ln|H'| + ln(2/delta)) / eps)`.
pub fn ssl_sample_complexity(log_h_pruned: f64, eps: f64, delta: f64) -> Result<u64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid_input!("eps must lie in (0, 1], got {eps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid_input!("delta must lie in (0, 1), got {delta}"));
    }
    if !(log_h_pruned.is_finite() && log_h_pruned >= 0.0) {
        return Err(invalid_input!("ln|H'| must be finite and non-negative"));
    }
    let x = (log_h_pruned + math::ln(2.0 / delta)) / eps;
    // absorb rounding so that exact integers are not pushed up by one
    Ok(math::ceil(x - 1e-9 * x.max(1.0)).max(0.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExampleKind {
    Cluster,
    Manifold,
}

/// How the beta in a cluster report was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BetaSource {
    /// Supplied by the caller.
    External,
    /// Exact pairwise ERM.
    Exact,
    /// Block-decomposed lower bound with the given block size.
    Blocked { block: usize },
}

/// Domain-expert inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainAssumptions {
    pub eps_b: f64,
    pub eps_e: f64,
}

impl DomainAssumptions {
    pub fn new(eps_b: f64, eps_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps_b) {
            return Err(invalid_input!("eps_B must lie in [0, 1], got {eps_b}"));
        }
        if !(eps_e > 0.0 && eps_e <= 0.5) {
            return Err(invalid_input!("eps_E must lie in (0, 0.5], got {eps_e}"));
        }
        Ok(Self { eps_b, eps_e })
    }
}

/// Inputs echoed into every report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundParams {
    pub m_u: u64,
    pub m_l: u64,
    pub s: f64,
    pub n: usize,
    pub delta: f64,
    /// Cluster count (cluster example).
    pub k: Option<usize>,
    /// Curve length budget (manifold example).
    pub gamma_len: Option<f64>,
    pub j: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub example: ExampleKind,
    pub eps_a_hat: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
    pub eps_e: Option<f64>,
    pub alpha_term: f64,
    pub alpha_t_star: f64,
    pub eps_max_z: f64,
    pub beta: Option<f64>,
    pub beta_source: Option<BetaSource>,
    pub eps_min: Option<f64>,
    pub delta_r_lower: Option<f64>,
    pub delta: f64,
    pub params: BoundParams,
    /// Set when `eps_max_z >= 1`, `eps_min <= 0` or `delta_r_lower <= 0`.
    pub vacuous: bool,
    pub warnings: Vec<String>,
}

impl BoundReport {
    /// Recomputes `eps_max_z` from `params` alone.
    pub fn recompute_eps_max_z(&self) -> Result<f64> {
        let p = &self.params;
        match self.example {
            ExampleKind::Cluster => {
                let k = p.k.ok_or_else(|| invalid_input!("cluster report without k"))?;
                let eps_c = eps_a_cluster(p.s, p.n, p.m_u, p.delta)?;
                eps_max_z_cluster(eps_c, k, p.m_l, p.delta)
            }
            ExampleKind::Manifold => {
                let (gamma, j) = p
                    .gamma_len
                    .zip(p.j)
                    .ok_or_else(|| invalid_input!("manifold report without gamma and j"))?;
                let eps_a = eps_a_manifold(p.s, p.n, gamma, p.m_u, p.delta)?;
                eps_max_z_manifold(eps_a, self.eps_b, gamma, j, p.s, p.m_l, p.delta)
            }
        }
    }
}

/// Parameters of the cluster risk-gap bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterBoundInput {
    pub s: f64,
    pub n: usize,
    pub k: usize,
    pub m_u: u64,
    pub m_l: u64,
    pub delta: f64,
    pub eps_e: Option<f64>,
}

/// Composes the cluster report: `eps_c = eps_a`, `eps_max_z = eps_c + alpha`,
/// and, given beta, `eps_min` and the risk-gap lower bound.
pub fn cluster_bound_report(input: &ClusterBoundInput, beta: Option<(f64, BetaSource)>) -> Result<BoundReport> {
    let ClusterBoundInput { s, n, k, m_u, m_l, delta, eps_e } = *input;
    if k < 2 {
        return Err(invalid_input!("the cluster bound needs k >= 2, got {k}"));
    }
    if let Some(e) = eps_e {
        DomainAssumptions::new(0.0, e)?;
    }
    let eps_a = eps_a_cluster(s, n, m_u, delta)?;
    let eps_c = eps_a;
    let (alpha, t_star) = alpha_max(&AlphaProblem::new(k as f64 + 1.0, delta / 3.0, m_l)?);
    let eps_max_z = eps_c + alpha;
    let eps_min = match beta {
        Some((b, _)) => {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid_input!("beta must lie in [0, 1], got {b}"));
            }
            Some(eps_min_cluster(b, n, m_u, delta)?)
        }
        None => None,
    };
    let delta_r_lower = eps_min.map(|e| e - eps_max_z);
    let vacuous = eps_max_z >= 1.0 || eps_min.is_some_and(|e| e <= 0.0) || delta_r_lower.is_some_and(|d| d <= 0.0);
    Ok(BoundReport {
        example: ExampleKind::Cluster,
        eps_a_hat: 0.0,
        eps_a,
        eps_b: 0.0,
        eps_c,
        eps_e,
        alpha_term: alpha,
        alpha_t_star: t_star,
        eps_max_z,
        beta: beta.map(|b| b.0),
        beta_source: beta.map(|b| b.1),
        eps_min,
        delta_r_lower,
        delta,
        params: BoundParams {
            m_u,
            m_l,
            s,
            n,
            delta,
            k: Some(k),
            gamma_len: None,
            j: None,
        },
        vacuous,
        warnings: Vec::new(),
    })
}

/// Parameters of the manifold risk cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldBoundInput {
    pub s: f64,
    pub n: usize,
    pub gamma_len: f64,
    pub j: u32,
    pub eps_b: f64,
    pub m_u: u64,
    pub m_l: u64,
    pub delta: f64,
}

/// Composes the manifold report: `eps_c = eps_a` and
/// `eps_max_z = eps_a + eps_b + alpha`. There is no gap bound here.
pub fn manifold_bound_report(input: &ManifoldBoundInput) -> Result<BoundReport> {
    let ManifoldBoundInput { s, n, gamma_len, j, eps_b, m_u, m_l, delta } = *input;
    let eps_a = eps_a_manifold(s, n, gamma_len, m_u, delta)?;
    if !(0.0..=1.0).contains(&eps_b) {
        return Err(invalid_input!("eps_B must lie in [0, 1], got {eps_b}"));
    }
    let bins = manifold_bins(gamma_len, j, s)?;
    let mut warnings = Vec::new();
    if (bins - libm::round(bins)).abs() > 1e-9 {
        warnings.push(alloc::format!("gamma / (j s) = {bins} is not an integer; used as a real bin count"));
    }
    let (alpha, t_star) = alpha_max(&AlphaProblem::new(bins, delta / 3.0, m_l)?);
    let eps_max_z = eps_a + eps_b + alpha;
    Ok(BoundReport {
        example: ExampleKind::Manifold,
        eps_a_hat: 0.0,
        eps_a,
        eps_b,
        eps_c: eps_a,
        eps_e: None,
        alpha_term: alpha,
        alpha_t_star: t_star,
        eps_max_z,
        beta: None,
        beta_source: None,
        eps_min: None,
        delta_r_lower: None,
        delta,
        params: BoundParams {
            m_u,
            m_l,
            s,
            n,
            delta,
            k: None,
            gamma_len: Some(gamma_len),
            j: Some(j),
        },
        vacuous: eps_max_z >= 1.0,
        warnings,
    })
}
