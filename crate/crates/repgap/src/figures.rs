//! Figure data as CSV: a few `#` lines with the fixed parameters, one header
//! row, then data rows.

use std::io::Write;
use std::path::{Path, PathBuf};

use repgap_core::bounds::{
    self, alpha_max, AlphaProblem, BetaSource, ClusterBoundInput, ManifoldBoundInput,
};

use crate::points::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Figure {
    AlphaCurve,
    AlphaSurface,
    ManifoldSurface,
    ClusterGapSurface,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::AlphaCurve,
        Figure::AlphaSurface,
        Figure::ManifoldSurface,
        Figure::ClusterGapSurface,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Figure::AlphaCurve => "alpha_curve.csv",
            Figure::AlphaSurface => "alpha_surface.csv",
            Figure::ManifoldSurface => "manifold_surface.csv",
            Figure::ClusterGapSurface => "cluster_gap_surface.csv",
        }
    }
}

/// Points per log-spaced axis over `10^2..10^7`; a 0.2 step in the exponent
/// puts every decade, `10^5` included, on the grid.
pub const AXIS_POINTS: usize = 26;

pub fn sample_sizes() -> Vec<u64> {
    (0..AXIS_POINTS)
        .map(|i| 10f64.powf(2.0 + 5.0 * i as f64 / (AXIS_POINTS - 1) as f64).round() as u64)
        .collect()
}

pub const ALPHA_K: f64 = 10.0;
pub const DELTA: f64 = 0.05;
pub const CURVE_M_L: [u64; 4] = [50, 100, 200, 400];
pub const CURVE_STEPS: usize = 200;
pub const SURFACE_K: [u32; 10] = [2, 3, 5, 8, 10, 15, 20, 30, 50, 100];

pub const CLUSTER_BETA: f64 = 0.2;
pub const CLUSTER_K: usize = 2;
pub const S: f64 = 0.1;
pub const N: usize = 2;
pub const MANIFOLD_EPS_B: f64 = 0.05;
pub const MANIFOLD_J: u32 = 3;
pub const MANIFOLD_GAMMA: f64 = 20.0;

fn write_table(out: &mut String, comments: &[String], header: &str, rows: &[Vec<String>]) {
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
}

/// CSV text of one figure.
pub fn render(fig: Figure) -> Result<String> {
    let mut out = String::new();
    match fig {
        Figure::AlphaCurve => {
            let mut rows = Vec::new();
            for m_l in CURVE_M_L {
                let p = AlphaProblem::new(ALPHA_K, DELTA, m_l)?;
                // up to the positive root of g
                let t0 = -(((DELTA / ALPHA_K).ln()) / m_l as f64).exp_m1();
                for i in 0..=CURVE_STEPS {
                    let t = t0 * i as f64 / CURVE_STEPS as f64;
                    rows.push(vec![m_l.to_string(), fmt_f64(t), fmt_f64(p.g(t))]);
                }
            }
            write_table(
                &mut out,
                &[format!("k={ALPHA_K}"), format!("delta={DELTA}"), "t spans [0, t0] with g(t0) = 0".into()],
                "m_l,t,g",
                &rows,
            );
        }
        Figure::AlphaSurface => {
            let mut rows = Vec::new();
            for m_l in sample_sizes() {
                for k in SURFACE_K {
                    let (a, t) = alpha_max(&AlphaProblem::new(f64::from(k), DELTA, m_l)?);
                    rows.push(vec![m_l.to_string(), k.to_string(), fmt_f64(a), fmt_f64(t)]);
                }
            }
            write_table(&mut out, &[format!("delta={DELTA}")], "m_l,k,alpha,t_star", &rows);
        }
        Figure::ManifoldSurface => {
            let mut rows = Vec::new();
            for m_u in sample_sizes() {
                for m_l in sample_sizes() {
                    let r = bounds::manifold_bound_report(&ManifoldBoundInput {
                        s: S,
                        n: N,
                        gamma_len: MANIFOLD_GAMMA,
                        j: MANIFOLD_J,
                        eps_b: MANIFOLD_EPS_B,
                        m_u,
                        m_l,
                        delta: DELTA,
                    })?;
                    rows.push(vec![
                        m_u.to_string(),
                        m_l.to_string(),
                        fmt_f64(r.eps_a),
                        fmt_f64(r.alpha_term),
                        fmt_f64(r.eps_max_z),
                    ]);
                }
            }
            write_table(
                &mut out,
                &[
                    format!("eps_b={MANIFOLD_EPS_B}"),
                    format!("j={MANIFOLD_J}"),
                    format!("s={S}"),
                    format!("n={N}"),
                    format!("gamma={MANIFOLD_GAMMA}"),
                    format!("delta={DELTA}"),
                ],
                "m_u,m_l,eps_a,alpha,eps_max_z",
                &rows,
            );
        }
        Figure::ClusterGapSurface => {
            let mut rows = Vec::new();
            for m_u in sample_sizes() {
                for m_l in sample_sizes() {
                    let r = bounds::cluster_bound_report(
                        &ClusterBoundInput {
                            s: S,
                            n: N,
                            k: CLUSTER_K,
                            m_u,
                            m_l,
                            delta: DELTA,
                            eps_e: None,
                        },
                        Some((CLUSTER_BETA, BetaSource::External)),
                    )?;
                    let gap = r.delta_r_lower.expect("beta supplied");
                    rows.push(vec![
                        m_u.to_string(),
                        m_l.to_string(),
                        fmt_f64(r.eps_min.expect("beta supplied")),
                        fmt_f64(r.eps_max_z),
                        fmt_f64(gap),
                    ]);
                }
            }
            write_table(
                &mut out,
                &[
                    format!("beta={CLUSTER_BETA}"),
                    format!("s={S}"),
                    format!("n={N}"),
                    format!("k={CLUSTER_K}"),
                    format!("delta={DELTA}"),
                ],
                "m_u,m_l,eps_min,eps_max_z,delta_r_lower",
                &rows,
            );
        }
    }
    Ok(out)
}

/// Writes each figure into `dir` and returns the paths written.
pub fn emit_figures(which: &[Figure], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for &fig in which {
        let path = dir.join(fig.file_name());
        let text = render(fig)?;
        let mut f = crate::points::create(&path)?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Parsed figure file: comment lines, column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut comments = Vec::new();
    let mut columns = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if columns.is_none() {
            columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
        } else {
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Csv {
                    line: line_no,
                    msg: e.to_string(),
                })?;
            rows.push(row);
        }
    }
    let columns = columns.ok_or(Error::Csv {
        line: 0,
        msg: "no header row".into(),
    })?;
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
        return Err(Error::Csv {
            line: (comments.len() + 2 + i) as u64,
            msg: "row width differs from header".into(),
        });
    }
    Ok(Table { comments, columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_hits_every_decade() {
        let m = sample_sizes();
        assert_eq!(m.len(), AXIS_POINTS);
        for d in [100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000] {
            assert!(m.contains(&d), "{d}");
        }
    }

    #[test]
    fn tables_parse_back() {
        for fig in Figure::ALL {
            let t = parse_table(&render(fig).unwrap()).unwrap();
            assert!(!t.comments.is_empty());
            assert!(!t.rows.is_empty());
        }
    }

    #[test]
    fn curve_starts_at_zero() {
        let t = parse_table(&render(Figure::AlphaCurve).unwrap()).unwrap();
        let (ti, gi) = (t.column("t").unwrap(), t.column("g").unwrap());
        let at_zero: Vec<_> = t.rows.iter().filter(|r| r[ti] == 0.0).collect();
        assert_eq!(at_zero.len(), CURVE_M_L.len());
        assert!(at_zero.iter().all(|r| r[gi] == 0.0));
    }
}
