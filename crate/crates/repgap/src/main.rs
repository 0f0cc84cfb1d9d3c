use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};

use repgap::figures::{emit_figures, Figure};
use repgap::points::{self, read_points_file};
use repgap::records::{emit, read_json_file, to_json, AlphaRecord};
use repgap_core::bounds::{self, AlphaProblem, BetaSource, ClusterBoundInput, ManifoldBoundInput};
use repgap_core::cluster::cluster_property_test;
use repgap_core::manifold::{manifold_property_test_with, ManifoldOptions, ManifoldVerdict, DEFAULT_MAX_EXPANSIONS};
use repgap_core::synth::{rng_for, sample_labeled, sample_unlabeled, World};
use repgap_core::theorem::{select_feature_learner, BetaMode, BoundEntry, HypothesisLearnerId, ScenarioConfig, WorldSpec};
use repgap_core::GridSpec;

const EXIT_USAGE: u8 = 1;
const EXIT_TEST_FAILED: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

/// Property tests, risk bounds and validation studies for representation
/// learning on synthetic worlds.
#[derive(Debug, Parser)]
#[command(name = "repgap", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the cluster property test on a CSV sample.
    ClusterTest {
        #[command(flatten)]
        input: SampleInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the one-dimensional manifold test on a CSV sample.
    ManifoldTest {
        #[command(flatten)]
        input: SampleInput,
        /// Curve length budget.
        #[arg(long)]
        gamma: f64,
        /// Reject every revisit, not only those at lag >= n.
        #[arg(long)]
        strict_revisit: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_EXPANSIONS)]
        max_expansions: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a bound report from parameters alone.
    Bounds {
        #[command(subcommand)]
        which: BoundsCmd,
    },
    /// Cap on the mass of bins a labeled sample leaves empty.
    Alpha {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "m-l")]
        m_l: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick the feature learner with the smallest risk bound.
    Select {
        /// JSON list of registry entries.
        #[arg(long)]
        registry: PathBuf,
        #[command(flatten)]
        input: OptionalDim,
        #[arg(long, value_enum)]
        learner: LearnerArg,
        #[arg(long = "m-l")]
        m_l: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a sample from a synthetic world.
    Synth {
        #[command(flatten)]
        world: WorldArgs,
        /// Sample size.
        #[arg(long)]
        m: usize,
        /// Include the label column.
        #[arg(long)]
        labeled: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the full pipeline and count bound violations.
    Validate {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long = "m-u")]
        m_u: usize,
        #[arg(long = "m-l")]
        m_l: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long = "m-test", default_value_t = 100_000)]
        m_test: usize,
        /// `exact`, `skip`, `blocked:<size>` or a number in [0, 1].
        #[arg(long, default_value = "blocked:500", value_parser = parse_beta)]
        beta: BetaMode,
        #[arg(long = "eps-e")]
        eps_e: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write figure data files.
    Figures {
        #[arg(long, value_enum, num_args = 1.., required = true)]
        which: Vec<FigureArg>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum BoundsCmd {
    Cluster {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "m-u")]
        m_u: u64,
        #[arg(long = "m-l")]
        m_l: u64,
        #[arg(long)]
        delta: f64,
        /// Externally supplied beta; without it no gap bound is reported.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long = "eps-e")]
        eps_e: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Manifold {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        j: u32,
        #[arg(long = "eps-b")]
        eps_b: f64,
        #[arg(long = "m-u")]
        m_u: u64,
        #[arg(long = "m-l")]
        m_l: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SampleInput {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dim: usize,
    /// Cells per axis.
    #[arg(long)]
    cells: u32,
}

#[derive(Debug, Args)]
struct OptionalDim {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LearnerArg {
    ErmLinear,
    OneNn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FigureArg {
    AlphaCurve,
    AlphaSurface,
    ManifoldSurface,
    ClusterGapSurface,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WorldKind {
    RingAndDisc,
    TwoBlobs,
    FourCorners,
    SingleBlob,
    ClosePair,
    Snake,
    StraightTube,
    TwoTubes,
}

#[derive(Debug, Args)]
struct WorldArgs {
    #[arg(long, value_enum)]
    world: WorldKind,
    /// Cells per axis for grid-parameterised worlds.
    #[arg(long, default_value_t = 10)]
    q: u32,
    /// Mass of the first blob (two-blobs).
    #[arg(long, default_value_t = 0.5)]
    weight0: f64,
    /// Separation in cells (close-pair).
    #[arg(long, default_value_t = 1.0)]
    gap: f64,
    /// Bin width in cells (snake), and the j of manifold bounds.
    #[arg(long)]
    j: Option<u32>,
    /// Label-disagreement budget (snake), and the eps_B of manifold bounds.
    #[arg(long = "eps-b")]
    eps_b: Option<f64>,
    /// Curve budget of manifold worlds.
    #[arg(long)]
    gamma: Option<f64>,
    /// Tube row, first and last column (straight-tube).
    #[arg(long, default_value_t = 5)]
    row: u32,
    #[arg(long, default_value_t = 1)]
    from: u32,
    #[arg(long, default_value_t = 8)]
    to: u32,
}

impl WorldArgs {
    fn spec(&self) -> WorldSpec {
        match self.world {
            WorldKind::RingAndDisc => WorldSpec::RingAndDisc { q: self.q },
            WorldKind::TwoBlobs => WorldSpec::TwoBlobs {
                q: self.q,
                weight0: self.weight0,
            },
            WorldKind::FourCorners => WorldSpec::FourCorners { q: self.q },
            WorldKind::SingleBlob => WorldSpec::SingleBlob { q: self.q },
            WorldKind::ClosePair => WorldSpec::ClosePair { q: self.q, gap: self.gap },
            WorldKind::Snake => WorldSpec::Snake {
                j: self.j.unwrap_or(3),
                eps_b: self.eps_b.unwrap_or(0.05),
            },
            WorldKind::StraightTube => {
                let s = 1.0 / f64::from(self.q.max(1));
                WorldSpec::StraightTube {
                    q: self.q,
                    row: self.row,
                    from: self.from,
                    to: self.to,
                    gamma_len: self.gamma.unwrap_or(s * f64::from(self.to.saturating_sub(self.from) + 1)),
                }
            }
            WorldKind::TwoTubes => WorldSpec::TwoTubes,
        }
    }
}

fn parse_beta(s: &str) -> Result<BetaMode, String> {
    match s {
        "exact" => Ok(BetaMode::Exact),
        "skip" => Ok(BetaMode::Skip),
        _ => {
            if let Some(b) = s.strip_prefix("blocked:") {
                let block: usize = b.parse().map_err(|_| format!("bad block size '{b}'"))?;
                if block == 0 {
                    return Err("block size must be positive".into());
                }
                return Ok(BetaMode::Blocked { block });
            }
            let v: f64 = s.parse().map_err(|_| format!("unrecognised beta '{s}'"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("beta must lie in [0, 1], got {v}"));
            }
            Ok(BetaMode::External(v))
        }
    }
}

fn out(text: &str, path: &Option<PathBuf>) -> anyhow::Result<()> {
    Ok(emit(text, path.as_deref())?)
}

fn load(input: &SampleInput) -> anyhow::Result<(GridSpec, Vec<repgap_core::Point>)> {
    let grid = GridSpec::new(input.dim, input.cells)?;
    let set = read_points_file(&input.input, Some(input.dim))?;
    if set.points.is_empty() {
        bail!("{}: no points", input.input.display());
    }
    Ok((grid, set.points))
}

fn run(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::ClusterTest { input, out: path } => {
            let (grid, pts) = load(&input)?;
            let r = cluster_property_test(&grid, &pts)?;
            out(&to_json(&r)?, &path)?;
            Ok(if r.passed { 0 } else { EXIT_TEST_FAILED })
        }
        Cmd::ManifoldTest {
            input,
            gamma,
            strict_revisit,
            max_expansions,
            out: path,
        } => {
            let (grid, pts) = load(&input)?;
            let opts = ManifoldOptions {
                strict_revisit,
                max_expansions,
            };
            let r = manifold_property_test_with(&grid, &pts, gamma, opts)?;
            out(&to_json(&r)?, &path)?;
            Ok(match r.verdict {
                ManifoldVerdict::Passed => 0,
                ManifoldVerdict::Failed => EXIT_TEST_FAILED,
                ManifoldVerdict::Exhausted => EXIT_EXHAUSTED,
            })
        }
        Cmd::Bounds { which } => {
            let (report, path) = match which {
                BoundsCmd::Cluster {
                    s,
                    n,
                    k,
                    m_u,
                    m_l,
                    delta,
                    beta,
                    eps_e,
                    out,
                } => {
                    let input = ClusterBoundInput {
                        s,
                        n,
                        k,
                        m_u,
                        m_l,
                        delta,
                        eps_e,
                    };
                    (bounds::cluster_bound_report(&input, beta.map(|b| (b, BetaSource::External)))?, out)
                }
                BoundsCmd::Manifold {
                    s,
                    n,
                    gamma,
                    j,
                    eps_b,
                    m_u,
                    m_l,
                    delta,
                    out,
                } => {
                    let input = ManifoldBoundInput {
                        s,
                        n,
                        gamma_len: gamma,
                        j,
                        eps_b,
                        m_u,
                        m_l,
                        delta,
                    };
                    (bounds::manifold_bound_report(&input)?, out)
                }
            };
            out(&to_json(&report)?, &path)?;
            Ok(0)
        }
        Cmd::Alpha { k, delta, m_l, out: path } => {
            let (alpha, t_star) = bounds::alpha_max(&AlphaProblem::new(k, delta, m_l)?);
            let rec = AlphaRecord {
                k,
                delta,
                m_l,
                alpha,
                t_star,
            };
            out(&to_json(&rec)?, &path)?;
            Ok(0)
        }
        Cmd::Select {
            registry,
            input,
            learner,
            m_l,
            delta,
            out: path,
        } => {
            let entries: Vec<BoundEntry> = read_json_file(&registry)?;
            let set = read_points_file(&input.input, input.dim)?;
            let h = match learner {
                LearnerArg::ErmLinear => HypothesisLearnerId::ErmLinear,
                LearnerArg::OneNn => HypothesisLearnerId::OneNn,
            };
            let sel = match select_feature_learner(&entries, &set.points, h, m_l, delta) {
                Err(repgap_core::Error::ResourceExhausted { expansions }) => {
                    eprintln!("error: manifold search exhausted after {expansions} expansions");
                    return Ok(EXIT_EXHAUSTED);
                }
                r => r?,
            };
            out(&to_json(&sel)?, &path)?;
            Ok(0)
        }
        Cmd::Synth {
            world,
            m,
            labeled,
            seed,
            format,
            out: path,
        } => {
            let built = world.spec().build()?;
            let dim = built.grid().dim();
            let mut rng = rng_for(seed, 0);
            let mut buf = Vec::new();
            if labeled {
                let data = sample_labeled(&built, m, &mut rng)?;
                match format {
                    Format::Csv => points::write_examples(&mut buf, dim, &data)?,
                    Format::Json => buf = to_json(&data)?.into_bytes(),
                }
            } else {
                let pts = sample_unlabeled(&built, m, &mut rng)?;
                match format {
                    Format::Csv => points::write_points(&mut buf, dim, &pts)?,
                    Format::Json => buf = to_json(&pts)?.into_bytes(),
                }
            }
            out(std::str::from_utf8(&buf)?, &path)?;
            Ok(0)
        }
        Cmd::Validate {
            world,
            m_u,
            m_l,
            delta,
            trials,
            m_test,
            beta,
            eps_e,
            seed,
            workers,
            out: path,
        } => {
            let spec = world.spec();
            let manifold = spec.is_manifold();
            let cfg = ScenarioConfig {
                world: spec,
                m_u,
                m_l,
                delta,
                eps_e,
                beta: if manifold { BetaMode::Skip } else { beta },
                gamma_len: world.gamma.filter(|_| manifold),
                j: world.j.filter(|_| manifold),
                eps_b: world.eps_b.filter(|_| manifold),
                m_test,
                seed,
            };
            if workers == 0 {
                bail!("--workers must be at least 1");
            }
            let report = repgap::harness::validate(&cfg, trials, workers)?;
            out(&to_json(&report)?, &path)?;
            Ok(0)
        }
        Cmd::Figures { which, out: dir } => {
            let figs: Vec<Figure> = if which.contains(&FigureArg::All) {
                Figure::ALL.to_vec()
            } else {
                which
                    .iter()
                    .map(|w| match w {
                        FigureArg::AlphaCurve => Figure::AlphaCurve,
                        FigureArg::AlphaSurface => Figure::AlphaSurface,
                        FigureArg::ManifoldSurface => Figure::ManifoldSurface,
                        FigureArg::ClusterGapSurface => Figure::ClusterGapSurface,
                        FigureArg::All => unreachable!(),
                    })
                    .collect()
            };
            for p in emit_figures(&figs, &dir)? {
                println!("{}", display(&p));
            }
            Ok(0)
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(EXIT_USAGE)
        }
    }
}
