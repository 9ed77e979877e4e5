//! Text formats: orbit files, trajectory exports, plot series.
//!
//! Orbit files are line-oriented: a `key: value` header, a `nodes:` marker,
//! then one `t q1x q1y q2x q2y q3x q3y` row per node. Floats print with 17
//! significant digits so write -> read -> write is byte-identical.

use crate::action::DiscretePath;
use crate::angle::Angle;
use crate::dynamics::{Periodicity, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{MassSet, PathCase, PlanarConfig};
use crate::minimize::{MinimizerReport, ProblemSpec, Variant};
use crate::vec2::Vec2;
use std::collections::BTreeMap;
use std::path::Path;

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a minimizer report to the orbit text format.
pub fn orbit_to_string(report: &MinimizerReport) -> String {
    let p = &report.problem;
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(": ");
        out.push_str(&v);
        out.push('\n');
    };
    push("variant", p.variant.tag().to_string());
    push("m", fmt_f(p.masses.m()));
    push("theta", p.theta.to_string());
    push("n_nodes", p.n_nodes.to_string());
    push("duration", fmt_f(p.duration));
    push("seed", p.seed.to_string());
    push("action", fmt_f(report.action));
    push("case", report.case.tag().to_string());
    push("adjacency", report.adjacency_ok.to_string());
    push("a1", fmt_f(report.boundary_params[0]));
    push("a2", fmt_f(report.boundary_params[1]));
    push("b1", fmt_f(report.boundary_params[2]));
    push("b2", fmt_f(report.boundary_params[3]));
    push("min_distance", fmt_f(report.min_pairwise_distance));
    push("el_residual", fmt_f(report.el_residual));
    push("grad_norm", fmt_f(report.grad_norm));
    push("converged", report.converged.to_string());
    push("iterations", report.iterations.to_string());
    out.push_str("nodes:\n");
    for (k, node) in report.path.nodes().iter().enumerate() {
        let t = report.path.time(k);
        let q = node.positions();
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            fmt_f(t),
            fmt_f(q[0].x),
            fmt_f(q[0].y),
            fmt_f(q[1].x),
            fmt_f(q[1].y),
            fmt_f(q[2].x),
            fmt_f(q[2].y),
        ));
    }
    out
}

/// Parses the orbit text format back into a report.
pub fn orbit_from_str(text: &str, origin: &str) -> Result<MinimizerReport> {
    let malformed = |line: usize, msg: String| Error::MalformedFile {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut rows: Vec<(f64, PlanarConfig)> = Vec::new();
    let mut in_nodes = false;
    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_nodes {
            if line == "nodes:" {
                in_nodes = true;
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| malformed(ln, format!("expected 'key: value', got '{line}'")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| malformed(ln, format!("bad number '{tok}'")))
                })
                .collect::<Result<_>>()?;
            if fields.len() != 7 {
                return Err(malformed(
                    ln,
                    format!("expected 7 fields per node row, got {}", fields.len()),
                ));
            }
            rows.push((
                fields[0],
                PlanarConfig {
                    q1: Vec2::new(fields[1], fields[2]),
                    q2: Vec2::new(fields[3], fields[4]),
                    q3: Vec2::new(fields[5], fields[6]),
                },
            ));
        }
    }
    let get = |k: &str| {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| malformed(0, format!("missing header field '{k}'")))
    };
    let parse_f = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|_| malformed(0, format!("bad float in '{k}'")))
    };
    let variant = Variant::from_tag(&get("variant")?)
        .ok_or_else(|| malformed(0, "unknown variant".into()))?;
    let masses = MassSet::new(parse_f("m")?)?;
    let theta = Angle::parse(&get("theta")?)?;
    let n_nodes: usize = get("n_nodes")?
        .parse()
        .map_err(|_| malformed(0, "bad n_nodes".into()))?;
    let duration = parse_f("duration")?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| malformed(0, "bad seed".into()))?;
    if rows.len() != n_nodes {
        return Err(malformed(
            0,
            format!("header says {n_nodes} nodes, file has {}", rows.len()),
        ));
    }
    let case = PathCase::from_tag(&get("case")?)
        .ok_or_else(|| malformed(0, "unknown case tag".into()))?;
    let adjacency_ok: bool = get("adjacency")?
        .parse()
        .map_err(|_| malformed(0, "bad adjacency flag".into()))?;
    let converged: bool = get("converged")?
        .parse()
        .map_err(|_| malformed(0, "bad converged flag".into()))?;
    let iterations: usize = get("iterations")?
        .parse()
        .map_err(|_| malformed(0, "bad iterations".into()))?;

    let problem = ProblemSpec {
        masses,
        theta,
        variant,
        n_nodes,
        duration,
        seed,
    };
    let path = DiscretePath::new(rows.into_iter().map(|(_, c)| c).collect(), duration)?;
    Ok(MinimizerReport {
        problem,
        path,
        action: parse_f("action")?,
        boundary_params: [
            parse_f("a1")?,
            parse_f("a2")?,
            parse_f("b1")?,
            parse_f("b2")?,
        ],
        min_pairwise_distance: parse_f("min_distance")?,
        case,
        adjacency_ok,
        el_residual: parse_f("el_residual")?,
        converged,
        iterations,
        grad_norm: parse_f("grad_norm")?,
    })
}

/// Serializes a trajectory: header, then
/// `t q1x q1y q2x q2y q3x q3y v1x v1y v2x v2y v3x v3y` rows.
pub fn trajectory_to_string(traj: &Trajectory, masses: &MassSet) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(": ");
        out.push_str(&v);
        out.push('\n');
    };
    push("m", fmt_f(masses.m()));
    push("samples", traj.states.len().to_string());
    push("energy_drift", fmt_f(traj.energy_drift));
    push("angmom_drift", fmt_f(traj.angmom_drift));
    match traj.periodicity {
        Some(Periodicity::Periodic { domains }) => {
            push("periodicity", format!("periodic {domains}"))
        }
        Some(Periodicity::QuasiPeriodic) => push("periodicity", "quasi-periodic".to_string()),
        None => {}
    }
    if let Some(gap) = traj.closure_gap {
        push("closure_gap", fmt_f(gap));
    }
    if let Some((t, d)) = traj.collision_stop {
        push("collision_stop", format!("{} {}", fmt_f(t), fmt_f(d)));
    }
    out.push_str("states:\n");
    for (t, st) in traj.times.iter().zip(&traj.states) {
        let q = st.config.positions();
        let mut row = fmt_f(*t);
        for p in q {
            row.push(' ');
            row.push_str(&fmt_f(p.x));
            row.push(' ');
            row.push_str(&fmt_f(p.y));
        }
        for v in st.vel {
            row.push(' ');
            row.push_str(&fmt_f(v.x));
            row.push(' ');
            row.push_str(&fmt_f(v.y));
        }
        row.push('\n');
        out.push_str(&row);
    }
    out
}

/// Two-column whitespace-separated XY series.
pub fn xy_to_string(points: impl IntoIterator<Item = Vec2>) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&fmt_f(p.x));
        out.push(' ');
        out.push_str(&fmt_f(p.y));
        out.push('\n');
    }
    out
}

/// CSV for rotation sweeps, columns exactly `theta_over_pi,a_test,a_euler,gap`.
pub fn sweep_to_csv(rows: &[crate::levels::SweepRow]) -> String {
    let mut out = String::from("theta_over_pi,a_test,a_euler,gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f(r.theta / std::f64::consts::PI),
            fmt_f(r.a_test),
            fmt_f(r.a_euler),
            fmt_f(r.gap)
        ));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Reads and parses an orbit file.
pub fn load_orbit(path: &Path) -> Result<MinimizerReport> {
    let text = read_file(path)?;
    orbit_from_str(&text, &path.display().to_string())
}

/// Writes an orbit file.
pub fn save_orbit(path: &Path, report: &MinimizerReport) -> Result<()> {
    write_file(path, &orbit_to_string(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::Angle;
    use crate::geometry::PathCase;
    use crate::minimize::{MinimizerReport, ProblemSpec, Variant};

    fn tiny_report() -> MinimizerReport {
        let masses = MassSet::new(1.0).unwrap();
        let nodes = (0..5)
            .map(|k| {
                let t = k as f64 / 4.0;
                PlanarConfig::from_free(
                    Vec2::new(-1.0 + 0.1 * t, 0.2 * t),
                    Vec2::new(1.0, -0.2 * t),
                    &masses,
                )
            })
            .collect();
        MinimizerReport {
            problem: ProblemSpec {
                masses,
                theta: Angle::parse("0.053pi").unwrap(),
                variant: Variant::Prograde,
                n_nodes: 5,
                duration: 1.0,
                seed: 42,
            },
            path: DiscretePath::new(nodes, 1.0).unwrap(),
            action: 4.123456789012345,
            boundary_params: [0.1, 0.2, 0.3, 0.4],
            min_pairwise_distance: 0.5,
            case: PathCase::Interior,
            adjacency_ok: true,
            el_residual: 1e-3,
            converged: true,
            iterations: 321,
            grad_norm: 1e-9,
        }
    }

    #[test]
    fn orbit_round_trip_is_byte_identical() {
        let rep = tiny_report();
        let text = orbit_to_string(&rep);
        let back = orbit_from_str(&text, "test").unwrap();
        let text2 = orbit_to_string(&back);
        assert_eq!(text, text2);
        assert_eq!(back.problem.theta.to_string(), "0.053pi");
        assert_eq!(back.iterations, 321);
        assert_eq!(back.case, PathCase::Interior);
    }

    #[test]
    fn orbit_rejects_corruption() {
        let rep = tiny_report();
        let text = orbit_to_string(&rep);
        // truncate a node row
        let bad = text.replace("nodes:\n", "nodes:\n1 2 3\n");
        let err = orbit_from_str(&bad, "test").unwrap_err();
        assert!(matches!(err, Error::MalformedFile { .. }));
        // drop a required header
        let bad = text.replace("action: ", "redacted: ");
        assert!(orbit_from_str(&bad, "test").is_err());
        // non-numeric coordinate
        let bad = text.replacen("0.0000000000000000e0", "zero", 1);
        assert!(orbit_from_str(&bad, "test").is_err());
    }
}
