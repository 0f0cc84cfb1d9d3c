//! End-to-end composition: property test, feature map, bound report and
//! trained learners for both examples; bound-driven choice of a feature
//! learner; and the per-trial checks behind the validation harness.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::{self, BetaSource, BoundReport, ClusterBoundInput, ManifoldBoundInput};
use crate::cluster::{cluster_property_test, ClusterFeatureMap, ClusterTestResult};
use crate::error::{invalid_input, Error, Result};
use crate::grid::{GridSpec, Point};
use crate::learners::{erm_linear_01, transform_sample, Example, LinearClassifier, NearestNeighborModel};
use crate::manifold::{manifold_property_test_with, ManifoldFeatureMap, ManifoldOptions, ManifoldTestResult, ManifoldVerdict};
use crate::math;
use crate::synth::{rng_for, sample_labeled, sample_unlabeled, true_risk, ClusterWorld, ManifoldWorld, World};

/// Where the cluster report's beta comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BetaMode {
    /// Use this value as is.
    External(f64),
    /// Exact pairwise ERM; fails on pair subsets beyond the exact window.
    Exact,
    /// Exact per block of `block` points, summed: a lower bound on the exact
    /// value, equal to it when every pair subset fits in one block.
    Blocked { block: usize },
    /// No beta; the report carries no gap bound.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSettings {
    pub m_u: usize,
    pub m_l: usize,
    pub delta: f64,
    pub eps_e: Option<f64>,
    pub beta: BetaMode,
}

#[derive(Debug, Clone)]
pub struct ClusterArtifacts {
    pub feature_map: ClusterFeatureMap,
    /// ERM on raw inputs.
    pub h: LinearClassifier,
    /// ERM on one-hot features.
    pub h_z: LinearClassifier,
    pub unlabeled: Vec<Point>,
    pub labeled: Vec<Example>,
}

impl ClusterArtifacts {
    pub fn predict_raw(&self, x: &[f64]) -> u8 {
        self.h.predict_unchecked(x)
    }

    pub fn predict_composed(&self, x: &[f64]) -> Result<u8> {
        let z = self.feature_map.map_point(x)?;
        Ok(self.h_z.predict_unchecked(&z))
    }
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub test: ClusterTestResult,
    /// `None` when the test failed and the theorem does not apply.
    pub report: Option<BoundReport>,
    pub artifacts: Option<ClusterArtifacts>,
}

impl ClusterRun {
    pub fn applicable(&self) -> bool {
        self.report.is_some()
    }
}

/// Draws `S_u`, runs the cluster test and, if it passes, composes the
/// risk-gap report, draws `S_l` and trains both linear learners.
pub fn run_cluster_theorem<W, R>(world: &W, st: &ClusterSettings, rng: &mut R) -> Result<ClusterRun>
where
    W: World + ?Sized,
    R: Rng + ?Sized,
{
    let grid = *world.grid();
    let unlabeled = sample_unlabeled(world, st.m_u, rng)?;
    let test = cluster_property_test(&grid, &unlabeled)?;
    if !test.passed {
        return Ok(ClusterRun {
            test,
            report: None,
            artifacts: None,
        });
    }
    let beta = match st.beta {
        BetaMode::External(b) => Some((b, BetaSource::External)),
        BetaMode::Exact => Some((bounds::beta_pairwise(&test, &unlabeled)?, BetaSource::Exact)),
        BetaMode::Blocked { block } => Some((
            bounds::beta_pairwise_blocked(&test, &unlabeled, block)?,
            BetaSource::Blocked { block },
        )),
        BetaMode::Skip => None,
    };
    let input = ClusterBoundInput {
        s: grid.side(),
        n: grid.dim(),
        k: test.k(),
        m_u: st.m_u as u64,
        m_l: st.m_l as u64,
        delta: st.delta,
        eps_e: st.eps_e,
    };
    let report = bounds::cluster_bound_report(&input, beta)?;
    let feature_map = ClusterFeatureMap::new(&test)?;
    let labeled = sample_labeled(world, st.m_l, rng)?;
    let (h, _) = erm_linear_01(&labeled)?;
    let (h_z, _) = erm_linear_01(&transform_sample(&feature_map, &labeled)?)?;
    Ok(ClusterRun {
        test,
        report: Some(report),
        artifacts: Some(ClusterArtifacts {
            feature_map,
            h,
            h_z,
            unlabeled,
            labeled,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSettings {
    pub m_u: usize,
    pub m_l: usize,
    pub delta: f64,
    pub gamma_len: f64,
    pub j: u32,
    pub eps_b: f64,
    pub options: ManifoldOptions,
}

#[derive(Debug, Clone)]
pub struct ManifoldArtifacts {
    pub feature_map: ManifoldFeatureMap,
    /// 1-NN on raw inputs.
    pub h: NearestNeighborModel,
    /// 1-NN on arc-length features.
    pub h_z: NearestNeighborModel,
    /// Largest admissible mass threshold `r` from the binomial inversion at
    /// `tau = s delta / (3 gamma)`.
    pub r_hat: f64,
    pub unlabeled: Vec<Point>,
    pub labeled: Vec<Example>,
}

impl ManifoldArtifacts {
    pub fn predict_raw(&self, x: &[f64]) -> u8 {
        self.h.predict_unchecked(x)
    }

    pub fn predict_composed(&self, x: &[f64]) -> Result<u8> {
        let z = self.feature_map.map_point(x)?;
        Ok(self.h_z.predict_unchecked(&[z]))
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldRun {
    pub test: ManifoldTestResult,
    pub report: Option<BoundReport>,
    pub artifacts: Option<ManifoldArtifacts>,
}

impl ManifoldRun {
    pub fn applicable(&self) -> bool {
        self.report.is_some()
    }

    pub fn exhausted(&self) -> bool {
        self.test.verdict == ManifoldVerdict::Exhausted
    }
}

/// Draws `S_u`, runs the manifold test and, if it passes, composes the risk
/// cap, draws `S_l` and trains both 1-NN learners. A search that hits its
/// expansion cap comes back with verdict `Exhausted` and no report.
pub fn run_manifold_theorem<W, R>(world: &W, st: &ManifoldSettings, rng: &mut R) -> Result<ManifoldRun>
where
    W: World + ?Sized,
    R: Rng + ?Sized,
{
    let grid = *world.grid();
    let unlabeled = sample_unlabeled(world, st.m_u, rng)?;
    let test = manifold_property_test_with(&grid, &unlabeled, st.gamma_len, st.options)?;
    if !test.passed() {
        return Ok(ManifoldRun {
            test,
            report: None,
            artifacts: None,
        });
    }
    let input = ManifoldBoundInput {
        s: grid.side(),
        n: grid.dim(),
        gamma_len: st.gamma_len,
        j: st.j,
        eps_b: st.eps_b,
        m_u: st.m_u as u64,
        m_l: st.m_l as u64,
        delta: st.delta,
    };
    let report = bounds::manifold_bound_report(&input)?;
    let counts = grid.occupied_cells(&unlabeled)?;
    let tau = grid.side() * st.delta / (3.0 * st.gamma_len);
    let r_hat = bounds::binomial_r(st.m_u as u64, counts.values().map(|&c| c as u64), tau.min(0.5))?;
    let feature_map = ManifoldFeatureMap::new(&test)?;
    let labeled = sample_labeled(world, st.m_l, rng)?;
    let h = NearestNeighborModel::fit(&labeled)?;
    let h_z = NearestNeighborModel::fit(&transform_sample(&feature_map, &labeled)?)?;
    Ok(ManifoldRun {
        test,
        report: Some(report),
        artifacts: Some(ManifoldArtifacts {
            feature_map,
            h,
            h_z,
            r_hat,
            unlabeled,
            labeled,
        }),
    })
}

/// Named world factories, so that scenarios can be written down as data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum WorldSpec {
    RingAndDisc { q: u32 },
    TwoBlobs { q: u32, weight0: f64 },
    FourCorners { q: u32 },
    SingleBlob { q: u32 },
    ClosePair { q: u32, gap: f64 },
    Snake { j: u32, eps_b: f64 },
    StraightTube { q: u32, row: u32, from: u32, to: u32, gamma_len: f64 },
    TwoTubes,
}

#[derive(Debug, Clone)]
pub enum BuiltWorld {
    Cluster(ClusterWorld),
    Manifold(ManifoldWorld),
}

impl World for BuiltWorld {
    fn support(&self) -> &crate::synth::Support {
        match self {
            BuiltWorld::Cluster(w) => w.support(),
            BuiltWorld::Manifold(w) => w.support(),
        }
    }
}

impl WorldSpec {
    pub fn build(&self) -> Result<BuiltWorld> {
        Ok(match *self {
            WorldSpec::RingAndDisc { q } => BuiltWorld::Cluster(ClusterWorld::ring_and_disc(q)?),
            WorldSpec::TwoBlobs { q, weight0 } => {
                if !(weight0 > 0.0 && weight0 < 1.0) {
                    return Err(invalid_input!("blob weight must lie in (0, 1)"));
                }
                BuiltWorld::Cluster(ClusterWorld::two_blobs(GridSpec::new(2, q)?, (weight0, 1.0 - weight0))?)
            }
            WorldSpec::FourCorners { q } => BuiltWorld::Cluster(ClusterWorld::four_corners(q)?),
            WorldSpec::SingleBlob { q } => {
                let grid = GridSpec::new(2, q)?;
                let lo = q / 4;
                let hi = (3 * q / 4).max(lo);
                let mut cells = Vec::new();
                for x in lo..=hi {
                    for y in lo..=hi {
                        cells.push(crate::grid::CellIndex(alloc::vec![x, y]));
                    }
                }
                BuiltWorld::Cluster(ClusterWorld::single_blob(grid, cells, 0)?)
            }
            WorldSpec::ClosePair { q, gap } => BuiltWorld::Cluster(ClusterWorld::close_pair(q, gap)?),
            WorldSpec::Snake { j, eps_b } => BuiltWorld::Manifold(ManifoldWorld::snake(j, eps_b)?),
            WorldSpec::StraightTube { q, row, from, to, gamma_len } => {
                BuiltWorld::Manifold(ManifoldWorld::straight_tube(GridSpec::new(2, q)?, row, from, to, gamma_len)?)
            }
            WorldSpec::TwoTubes => BuiltWorld::Manifold(ManifoldWorld::two_tubes()?),
        })
    }

    pub fn is_manifold(&self) -> bool {
        matches!(self, WorldSpec::Snake { .. } | WorldSpec::StraightTube { .. } | WorldSpec::TwoTubes)
    }
}

/// Everything a trial needs. Manifold-only fields default to the world's
/// own values when absent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub world: WorldSpec,
    pub m_u: usize,
    pub m_l: usize,
    pub delta: f64,
    pub eps_e: Option<f64>,
    pub beta: BetaMode,
    pub gamma_len: Option<f64>,
    pub j: Option<u32>,
    pub eps_b: Option<f64>,
    pub m_test: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_u == 0 || self.m_l == 0 {
            return Err(invalid_input!("m_u and m_l must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid_input!("delta must lie in (0, 1)"));
        }
        if self.m_test < crate::synth::MIN_TEST_SIZE {
            return Err(invalid_input!("m_test must be at least {}", crate::synth::MIN_TEST_SIZE));
        }
        let manifold_extras = self.gamma_len.is_some() || self.j.is_some() || self.eps_b.is_some();
        if manifold_extras && !self.world.is_manifold() {
            return Err(invalid_input!("gamma, j and eps_B only apply to manifold worlds"));
        }
        Ok(())
    }

    fn cluster_settings(&self) -> ClusterSettings {
        ClusterSettings {
            m_u: self.m_u,
            m_l: self.m_l,
            delta: self.delta,
            eps_e: self.eps_e,
            beta: self.beta,
        }
    }

    fn manifold_settings(&self, w: &ManifoldWorld) -> ManifoldSettings {
        ManifoldSettings {
            m_u: self.m_u,
            m_l: self.m_l,
            delta: self.delta,
            gamma_len: self.gamma_len.unwrap_or(w.gamma_len()),
            j: self.j.unwrap_or(w.j()),
            eps_b: self.eps_b.unwrap_or(w.eps_b()),
            options: ManifoldOptions::default(),
        }
    }
}

/// Outcome of one validation trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub trial: u64,
    pub test_passed: bool,
    pub exhausted: bool,
    pub vacuous: bool,
    pub eps_max_z: Option<f64>,
    pub delta_r_lower: Option<f64>,
    pub beta: Option<f64>,
    /// Risk of the raw learner and its standard error.
    pub risk_h: Option<(f64, f64)>,
    /// Risk of the feature-based learner and its standard error.
    pub risk_hz: Option<(f64, f64)>,
    pub upper_violation: bool,
    pub gap_violation: bool,
}

impl TrialRecord {
    fn not_applicable(trial: u64, exhausted: bool) -> Self {
        Self {
            trial,
            test_passed: false,
            exhausted,
            vacuous: false,
            eps_max_z: None,
            delta_r_lower: None,
            beta: None,
            risk_h: None,
            risk_hz: None,
            upper_violation: false,
            gap_violation: false,
        }
    }

    /// Point estimate of the risk gap.
    pub fn gap(&self) -> Option<f64> {
        Some(self.risk_h?.0 - self.risk_hz?.0)
    }
}

/// Runs trial `trial` of `cfg`. The pipeline draws from stream `2 trial`
/// and risk estimation from stream `2 trial + 1`, both learners being scored
/// on the same test points; a trial therefore depends only on
/// `(cfg.seed, trial)`.
///
/// Violations are judged conservatively: a risk counts as above the cap
/// only if it is still above after subtracting three standard errors, and
/// a gap counts as below the bound only if its most favourable three-error
/// value is.
pub fn run_trial(cfg: &ScenarioConfig, world: &BuiltWorld, trial: u64) -> Result<TrialRecord> {
    let mut rng = rng_for(cfg.seed, 2 * trial);
    let risk_rng = rng_for(cfg.seed, 2 * trial + 1);
    match world {
        BuiltWorld::Cluster(w) => {
            let run = run_cluster_theorem(w, &cfg.cluster_settings(), &mut rng)?;
            let (Some(report), Some(art)) = (run.report, run.artifacts) else {
                return Ok(TrialRecord::not_applicable(trial, false));
            };
            let risk_h = true_risk(w, |x| art.predict_raw(x), cfg.m_test, &mut risk_rng.clone())?;
            let risk_hz = true_risk(
                w,
                |x| art.predict_composed(x).unwrap_or(u8::MAX),
                cfg.m_test,
                &mut risk_rng.clone(),
            )?;
            let upper_violation = risk_hz.0 - 3.0 * risk_hz.1 > report.eps_max_z;
            let gap_violation = report
                .delta_r_lower
                .is_some_and(|bound| (risk_h.0 + 3.0 * risk_h.1) - (risk_hz.0 - 3.0 * risk_hz.1) < bound);
            Ok(TrialRecord {
                trial,
                test_passed: true,
                exhausted: false,
                vacuous: report.vacuous,
                eps_max_z: Some(report.eps_max_z),
                delta_r_lower: report.delta_r_lower,
                beta: report.beta,
                risk_h: Some(risk_h),
                risk_hz: Some(risk_hz),
                upper_violation,
                gap_violation,
            })
        }
        BuiltWorld::Manifold(w) => {
            let run = run_manifold_theorem(w, &cfg.manifold_settings(w), &mut rng)?;
            let exhausted = run.exhausted();
            let (Some(report), Some(art)) = (run.report, run.artifacts) else {
                return Ok(TrialRecord::not_applicable(trial, exhausted));
            };
            let risk_h = true_risk(w, |x| art.predict_raw(x), cfg.m_test, &mut risk_rng.clone())?;
            let risk_hz = true_risk(
                w,
                |x| art.predict_composed(x).unwrap_or(u8::MAX),
                cfg.m_test,
                &mut risk_rng.clone(),
            )?;
            Ok(TrialRecord {
                trial,
                test_passed: true,
                exhausted: false,
                vacuous: report.vacuous,
                eps_max_z: Some(report.eps_max_z),
                delta_r_lower: None,
                beta: None,
                risk_h: Some(risk_h),
                risk_hz: Some(risk_hz),
                upper_violation: risk_hz.0 - 3.0 * risk_hz.1 > report.eps_max_z,
                gap_violation: false,
            })
        }
    }
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * math::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rate {
    pub count: usize,
    pub of: usize,
    pub rate: f64,
    pub wilson_95: (f64, f64),
}

impl Rate {
    pub fn new(count: usize, of: usize) -> Self {
        Self {
            count,
            of,
            rate: if of == 0 { 0.0 } else { count as f64 / of as f64 },
            wilson_95: wilson_interval(count, of, Z_95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub config: ScenarioConfig,
    pub trials: usize,
    pub test_pass_count: usize,
    pub exhausted_count: usize,
    pub vacuous_count: usize,
    /// Passed, non-vacuous trials; the denominator of both violation rates.
    pub considered: usize,
    pub upper_bound_violations: usize,
    pub gap_violations: usize,
    pub upper_rate: Rate,
    pub gap_rate: Rate,
    /// Passed trials whose estimated risk gap is positive.
    pub positive_gap: Rate,
    pub records: Vec<TrialRecord>,
}

impl ValidationReport {
    /// Order-independent: records are sorted by trial index first.
    pub fn aggregate(config: ScenarioConfig, mut records: Vec<TrialRecord>) -> Self {
        records.sort_by_key(|r| r.trial);
        let passed: Vec<&TrialRecord> = records.iter().filter(|r| r.test_passed).collect();
        let considered: Vec<&&TrialRecord> = passed.iter().filter(|r| !r.vacuous).collect();
        let upper = considered.iter().filter(|r| r.upper_violation).count();
        let gap = considered.iter().filter(|r| r.gap_violation).count();
        let positive = passed.iter().filter(|r| r.gap().is_some_and(|g| g > 0.0)).count();
        Self {
            trials: records.len(),
            test_pass_count: passed.len(),
            exhausted_count: records.iter().filter(|r| r.exhausted).count(),
            vacuous_count: passed.iter().filter(|r| r.vacuous).count(),
            considered: considered.len(),
            upper_bound_violations: upper,
            gap_violations: gap,
            upper_rate: Rate::new(upper, considered.len()),
            gap_rate: Rate::new(gap, considered.len()),
            positive_gap: Rate::new(positive, passed.len()),
            config,
            records,
        }
    }
}

/// Minimum number of trials for a validation run.
pub const MIN_TRIALS: usize = 100;

/// Sequential validation; see the std companion crate for a threaded one
/// with identical output.
pub fn validate(cfg: &ScenarioConfig, trials: usize) -> Result<ValidationReport> {
    if trials < MIN_TRIALS {
        return Err(invalid_input!("validation needs at least {MIN_TRIALS} trials"));
    }
    cfg.validate()?;
    let world = cfg.world.build()?;
    let records = (0..trials as u64)
        .map(|t| run_trial(cfg, &world, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport::aggregate(cfg.clone(), records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureLearnerId {
    Identity,
    Cluster,
    Manifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HypothesisLearnerId {
    ErmLinear,
    OneNn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PropertyTestId {
    None,
    Cluster,
    Manifold,
}

/// Entry-specific parameters; which ones are required depends on the
/// feature learner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EntryParams {
    /// Constant bound of the identity entry; 1 when absent.
    pub bound: Option<f64>,
    /// Cells per axis of the test grid.
    pub q: Option<u32>,
    pub gamma_len: Option<f64>,
    pub j: Option<u32>,
    pub eps_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundEntry {
    pub name: String,
    pub feature_learner: FeatureLearnerId,
    pub hypothesis_learner: HypothesisLearnerId,
    pub test: PropertyTestId,
    #[cfg_attr(feature = "serde", serde(default))]
    pub params: EntryParams,
}

impl BoundEntry {
    pub fn identity(name: &str, h: HypothesisLearnerId, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            feature_learner: FeatureLearnerId::Identity,
            hypothesis_learner: h,
            test: PropertyTestId::None,
            params: EntryParams {
                bound: Some(bound),
                ..EntryParams::default()
            },
        }
    }

    pub fn cluster(name: &str, q: u32) -> Self {
        Self {
            name: name.to_string(),
            feature_learner: FeatureLearnerId::Cluster,
            hypothesis_learner: HypothesisLearnerId::ErmLinear,
            test: PropertyTestId::Cluster,
            params: EntryParams {
                q: Some(q),
                ..EntryParams::default()
            },
        }
    }

    pub fn manifold(name: &str, q: u32, gamma_len: f64, j: u32, eps_b: f64) -> Self {
        Self {
            name: name.to_string(),
            feature_learner: FeatureLearnerId::Manifold,
            hypothesis_learner: HypothesisLearnerId::OneNn,
            test: PropertyTestId::Manifold,
            params: EntryParams {
                q: Some(q),
                gamma_len: Some(gamma_len),
                j: Some(j),
                eps_b: Some(eps_b),
                ..EntryParams::default()
            },
        }
    }

    fn check(&self) -> Result<()> {
        use FeatureLearnerId as F;
        use HypothesisLearnerId as H;
        use PropertyTestId as T;
        let ok = match self.feature_learner {
            F::Identity => self.test == T::None,
            F::Cluster => self.test == T::Cluster && self.hypothesis_learner == H::ErmLinear && self.params.q.is_some(),
            F::Manifold => {
                let p = &self.params;
                self.test == T::Manifold
                    && self.hypothesis_learner == H::OneNn
                    && p.q.is_some()
                    && p.gamma_len.is_some()
                    && p.j.is_some()
                    && p.eps_b.is_some()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid_input!("registry entry '{}' does not resolve to a known bound", self.name))
        }
    }

    /// The entry's risk cap on `sample`, or `None` when its property test
    /// fails (an infinite bound).
    pub fn evaluate<P: AsRef<[f64]>>(&self, sample: &[P], m_l: u64, delta: f64) -> Result<Option<f64>> {
        self.check()?;
        let n = sample.first().map(|p| p.as_ref().len()).ok_or_else(|| invalid_input!("empty sample"))?;
        let m_u = sample.len() as u64;
        let p = &self.params;
        match self.feature_learner {
            FeatureLearnerId::Identity => Ok(Some(p.bound.unwrap_or(1.0))),
            FeatureLearnerId::Cluster => {
                let grid = GridSpec::new(n, p.q.unwrap_or(1))?;
                let test = cluster_property_test(&grid, sample)?;
                if !test.passed {
                    return Ok(None);
                }
                let eps_c = bounds::eps_a_cluster(grid.side(), n, m_u, delta)?;
                Ok(Some(bounds::eps_max_z_cluster(eps_c, test.k(), m_l, delta)?))
            }
            FeatureLearnerId::Manifold => {
                let grid = GridSpec::new(n, p.q.unwrap_or(1))?;
                let gamma = p.gamma_len.unwrap_or(0.0);
                let test = manifold_property_test_with(&grid, sample, gamma, ManifoldOptions::default())?;
                match test.verdict {
                    ManifoldVerdict::Passed => {}
                    ManifoldVerdict::Failed => return Ok(None),
                    ManifoldVerdict::Exhausted => {
                        return Err(Error::ResourceExhausted {
                            expansions: test.expansions,
                        })
                    }
                }
                let eps_a = bounds::eps_a_manifold(grid.side(), n, gamma, m_u, delta)?;
                let v = bounds::eps_max_z_manifold(
                    eps_a,
                    p.eps_b.unwrap_or(0.0),
                    gamma,
                    p.j.unwrap_or(1),
                    grid.side(),
                    m_l,
                    delta,
                )?;
                Ok(Some(v))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    /// Registry index of the winner.
    pub best: usize,
    pub name: String,
    pub bound: f64,
    /// `(registry index, bound)` of every entry matching the hypothesis
    /// learner; `None` marks a failed property test.
    pub evaluated: Vec<(usize, Option<f64>)>,
}

/// Picks the feature learner with the smallest risk cap among the entries
/// for hypothesis learner `h`. A failed property test counts as an infinite
/// bound; ties go to the earlier entry.
pub fn select_feature_learner<P: AsRef<[f64]>>(
    registry: &[BoundEntry],
    sample: &[P],
    h: HypothesisLearnerId,
    m_l: u64,
    delta: f64,
) -> Result<Selection> {
    if registry.is_empty() {
        return Err(invalid_input!("empty registry"));
    }
    if !registry.iter().any(|e| e.feature_learner == FeatureLearnerId::Identity) {
        return Err(invalid_input!("the registry must contain an identity entry"));
    }
    let mut evaluated = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in registry.iter().enumerate() {
        if e.hypothesis_learner != h {
            continue;
        }
        let b = e.evaluate(sample, m_l, delta)?;
        evaluated.push((i, b));
        let v = b.unwrap_or(f64::INFINITY);
        if best.is_none_or(|(_, cur)| v < cur) {
            best = Some((i, v));
        }
    }
    let (i, bound) = best.ok_or_else(|| invalid_input!("no registry entry for hypothesis learner {h:?}"))?;
    Ok(Selection {
        best: i,
        name: registry[i].name.clone(),
        bound,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cluster_cfg(world: WorldSpec, beta: BetaMode) -> ScenarioConfig {
        ScenarioConfig {
            world,
            m_u: 4000,
            m_l: 100,
            delta: 0.05,
            eps_e: Some(0.3),
            beta,
            gamma_len: None,
            j: None,
            eps_b: None,
            m_test: 10_000,
            seed: 17,
        }
    }

    #[test]
    fn separable_blobs_give_zero_beta_and_a_vacuous_gap() {
        let g = GridSpec::new(2, 10).unwrap();
        let w = ClusterWorld::two_blobs(g, (0.5, 0.5)).unwrap();
        let st = ClusterSettings {
            m_u: 1500,
            m_l: 100,
            delta: 0.05,
            eps_e: None,
            beta: BetaMode::Exact,
        };
        let run = run_cluster_theorem(&w, &st, &mut rng_for(1, 0)).unwrap();
        let r = run.report.unwrap();
        assert_eq!(r.beta, Some(0.0));
        assert!(r.vacuous && r.delta_r_lower.unwrap() < 0.0);
        assert_eq!(r.recompute_eps_max_z().unwrap(), r.eps_max_z);
    }

    #[test]
    fn single_blob_is_not_applicable() {
        let world = WorldSpec::SingleBlob { q: 10 }.build().unwrap();
        let st = ClusterSettings {
            m_u: 2000,
            m_l: 50,
            delta: 0.05,
            eps_e: None,
            beta: BetaMode::Skip,
        };
        let run = run_cluster_theorem(&world, &st, &mut rng_for(2, 0)).unwrap();
        assert!(!run.applicable() && run.artifacts.is_none());
    }

    #[test]
    fn ring_and_disc_run_has_a_positive_gap_bound() {
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        let st = ClusterSettings {
            m_u: 20_000,
            m_l: 100,
            delta: 0.05,
            eps_e: Some(0.3),
            beta: BetaMode::Blocked { block: 500 },
        };
        let run = run_cluster_theorem(&w, &st, &mut rng_for(3, 0)).unwrap();
        let r = run.report.unwrap();
        assert!(r.beta.unwrap() > 0.25, "{:?}", r.beta);
        assert!(r.delta_r_lower.unwrap() > 0.0);
        let art = run.artifacts.unwrap();
        assert_eq!(art.h_z.errors(&transform_sample(&art.feature_map, &art.labeled).unwrap()), 0);
    }

    #[test]
    fn straight_tube_map_is_monotone() {
        let g = GridSpec::new(2, 10).unwrap();
        let w = ManifoldWorld::straight_tube(g, 4, 1, 8, 1.0).unwrap();
        let st = ManifoldSettings {
            m_u: 2000,
            m_l: 50,
            delta: 0.05,
            gamma_len: 1.0,
            j: 1,
            eps_b: 0.0,
            options: ManifoldOptions::default(),
        };
        let run = run_manifold_theorem(&w, &st, &mut rng_for(4, 0)).unwrap();
        let art = run.artifacts.as_ref().unwrap();
        let xs: Vec<f64> = (1..=8).map(|c| (f64::from(c) + 0.5) / 10.0).collect();
        let f: Vec<f64> = xs.iter().map(|&x| art.feature_map.map_point(&[x, 0.45]).unwrap()).collect();
        let increasing = f.windows(2).all(|p| p[1] > p[0]);
        let decreasing = f.windows(2).all(|p| p[1] < p[0]);
        assert!(increasing || decreasing, "{f:?}");
        assert!(art.r_hat > 0.0 && art.r_hat < 1.0);
    }

    #[test]
    fn two_tubes_are_not_applicable() {
        let w = ManifoldWorld::two_tubes().unwrap();
        let st = ManifoldSettings {
            m_u: 2000,
            m_l: 50,
            delta: 0.05,
            gamma_len: 3.6,
            j: 3,
            eps_b: 0.0,
            options: ManifoldOptions::default(),
        };
        let run = run_manifold_theorem(&w, &st, &mut rng_for(5, 0)).unwrap();
        assert!(!run.applicable() && !run.exhausted());
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = cluster_cfg(WorldSpec::RingAndDisc { q: 10 }, BetaMode::Blocked { block: 500 });
        let world = cfg.world.build().unwrap();
        let a = run_trial(&cfg, &world, 3).unwrap();
        let b = run_trial(&cfg, &world, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.test_passed && !a.upper_violation && !a.gap_violation);
    }

    #[test]
    fn aggregate_ignores_order() {
        let cfg = cluster_cfg(WorldSpec::RingAndDisc { q: 10 }, BetaMode::Skip);
        let mut recs: Vec<TrialRecord> = (0..5).map(|t| TrialRecord::not_applicable(t, false)).collect();
        recs[2].test_passed = true;
        recs[2].upper_violation = true;
        let a = ValidationReport::aggregate(cfg.clone(), recs.clone());
        recs.reverse();
        let b = ValidationReport::aggregate(cfg, recs);
        assert_eq!(a, b);
        assert_eq!((a.considered, a.upper_bound_violations), (1, 1));
    }

    #[test]
    fn wilson_examples() {
        // reference values from the closed form
        let (lo, hi) = wilson_interval(0, 200, Z_95);
        assert!(lo < 1e-12);
        assert!((hi - 0.018_846).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(10, 100, Z_95);
        assert!((lo - 0.055_229).abs() < 1e-5 && (hi - 0.174_366).abs() < 1e-5, "{lo} {hi}");
    }

    #[test]
    fn selection_prefers_cluster_on_clusters() {
        let w = ClusterWorld::ring_and_disc(10).unwrap();
        let sample = sample_unlabeled(&w, 20_000, &mut rng_for(6, 0)).unwrap();
        let registry = vec![
            BoundEntry::identity("identity", HypothesisLearnerId::ErmLinear, 1.0),
            BoundEntry::cluster("cluster", 10),
        ];
        let sel = select_feature_learner(&registry, &sample, HypothesisLearnerId::ErmLinear, 100, 0.05).unwrap();
        assert_eq!(sel.name, "cluster");
        assert!(sel.bound < 0.1);

        let blob = WorldSpec::SingleBlob { q: 10 }.build().unwrap();
        let sample = sample_unlabeled(&blob, 5000, &mut rng_for(6, 1)).unwrap();
        let sel = select_feature_learner(&registry, &sample, HypothesisLearnerId::ErmLinear, 100, 0.05).unwrap();
        assert_eq!(sel.name, "identity");
        assert_eq!(sel.evaluated[1].1, None);

        assert!(select_feature_learner(&registry, &sample, HypothesisLearnerId::OneNn, 100, 0.05).is_err());
        assert!(select_feature_learner(&registry[1..], &sample, HypothesisLearnerId::ErmLinear, 100, 0.05).is_err());
        let only = &registry[..1];
        assert_eq!(
            select_feature_learner(only, &sample, HypothesisLearnerId::ErmLinear, 100, 0.05).unwrap().best,
            0
        );
    }

    #[test]
    fn mismatched_entries_are_rejected() {
        let mut e = BoundEntry::cluster("c", 10);
        e.hypothesis_learner = HypothesisLearnerId::OneNn;
        let sample = vec![Point(vec![0.5, 0.5])];
        assert!(e.evaluate(&sample, 10, 0.05).is_err());
    }
}
