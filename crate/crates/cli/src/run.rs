//! Per-quantity evaluation and output assembly.

use std::io::Write;

use rayon::prelude::*;
use serde_json::{json, Value};
use tunnelkit::dynamics::{
    half_period, integrate_trajectory_with, speed_from_energy, IntegrateOptions, ParticleState, RegionKind,
};
use tunnelkit::exact::exact_transmission;
use tunnelkit::format::fmt_f64;
use tunnelkit::operators::{convergence_study, mass_transform, DefectKind, MomentumRep};
use tunnelkit::potential::{find_turning_points, Potential, PotentialSpec, RootKind};
use tunnelkit::wkb::{barrier_action, transmission_from_action, wkb_profile, DIST_MIN_RELATIVE};
use tunnelkit::TunnelError;

use crate::config::{Format, Point, Quantity, ScanConfig};
use crate::{CliError, UsageError};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// Result of one sweep point: CSV rows and a JSON payload.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub rows: Vec<Vec<Cell>>,
    pub json: Value,
}

pub fn columns(quantity: Quantity) -> &'static [&'static str] {
    match quantity {
        Quantity::TurningPoints => &["E", "x", "kind"],
        Quantity::Trajectory => &["t", "x", "v", "energy_defect"],
        Quantity::Period => &["E", "a", "b", "value", "quadrature_error", "method"],
        Quantity::WkbProfile => &["x", "amplitude", "phase"],
        Quantity::TransmissionScan => &["E", "T_exact", "R", "T_wkb", "S", "2S_over_hbar", "richardson_defect"],
        Quantity::OperatorCheck => &[
            "rep",
            "check",
            "grid_n",
            "defect",
            "convergence_order_estimate",
            "rounding_floor",
        ],
        Quantity::MassTransform => &["v", "m_wave", "m_corpuscular", "product"],
    }
}

fn potential(point: &Point) -> &PotentialSpec {
    point.potential.as_ref().expect("validated before evaluation")
}

fn energy(point: &Point) -> f64 {
    point.get("E").expect("validated before evaluation")
}

fn count(point: &Point, key: &str, default: usize) -> Result<usize, CliError> {
    match point.get(key) {
        None => Ok(default),
        Some(v) if v >= 1.0 && v.fract() == 0.0 && v < 1e9 => Ok(v as usize),
        Some(v) => Err(UsageError(format!("constants.{key} must be a positive integer, got {v}")).into()),
    }
}

fn kind_label(kind: RootKind) -> &'static str {
    match kind {
        RootKind::Simple => "simple",
        RootKind::Tangential => "tangential",
        RootKind::FlatEdge => "flat_edge",
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn evaluate(quantity: Quantity, cfg: &ScanConfig, point: &Point) -> Result<PointResult, CliError> {
    let m0 = point.get_or("m0", 1.0);
    let hbar = point.get_or("hbar", 1.0);
    match quantity {
        Quantity::TurningPoints => {
            let e = energy(point);
            let tp = find_turning_points(potential(point), e)?;
            let rows = tp
                .points
                .iter()
                .map(|p| vec![Cell::Num(e), Cell::Num(p.x), Cell::Text(kind_label(p.kind).to_string())])
                .collect();
            Ok(PointResult { rows, json: to_json(&tp) })
        }
        Quantity::Trajectory => {
            let pot = potential(point);
            let region = cfg.options.region.unwrap_or(RegionKind::Normal);
            let x0 = match point.get("x0") {
                Some(x) => x,
                None => {
                    let e = point
                        .get("E")
                        .ok_or_else(|| UsageError("trajectory needs constants.x0 or constants.E".to_string()))?;
                    let tp = find_turning_points(pot, e)?;
                    let r = *tp.bounded_region(region).ok_or(TunnelError::NoBoundedRegion)?;
                    tp.inner_start(&r)
                }
            };
            let (e, v0) = match (point.get("E"), point.get("v0")) {
                (Some(e), Some(v)) => (e, v),
                (Some(e), None) => (e, speed_from_energy(region, pot, e, x0, m0)?),
                (None, Some(v)) => (region.energy(m0, v, pot.value(x0)?), v),
                (None, None) => {
                    return Err(UsageError("trajectory needs constants.E or constants.v0".to_string()).into())
                }
            };
            let state = ParticleState {
                t: 0.0,
                x: x0,
                v: v0,
                m0,
                energy: e,
            };
            let options = IntegrateOptions {
                stop_at_turning_point: cfg
                    .options
                    .stop_at_turning_point
                    .unwrap_or(IntegrateOptions::default().stop_at_turning_point),
            };
            let traj = integrate_trajectory_with(
                region,
                pot,
                state,
                point.get_or("t_end", 10.0),
                point.get_or("dt", 1e-3),
                options,
            )?;
            let mut rows = Vec::with_capacity(traj.samples.len());
            for s in &traj.samples {
                let defect = region.energy(m0, s.v, pot.value(s.x)?) - e;
                rows.push(vec![Cell::Num(s.t), Cell::Num(s.x), Cell::Num(s.v), Cell::Num(defect)]);
            }
            Ok(PointResult { rows, json: to_json(&traj) })
        }
        Quantity::Period => {
            let pot = potential(point);
            let e = energy(point);
            let region = cfg.options.region.unwrap_or(RegionKind::Normal);
            let (a, b) = match (point.get("a"), point.get("b")) {
                (Some(a), Some(b)) => (a, b),
                (None, None) => {
                    let tp = find_turning_points(pot, e)?;
                    let r = tp.bounded_region(region).ok_or(TunnelError::NoBoundedRegion)?;
                    (r.start, r.end)
                }
                _ => return Err(UsageError("give both constants.a and constants.b, or neither".to_string()).into()),
            };
            let hp = half_period(region, pot, e, m0, a, b)?;
            let rows = vec![vec![
                Cell::Num(e),
                Cell::Num(a),
                Cell::Num(b),
                Cell::Num(hp.value),
                Cell::Num(hp.quadrature_error),
                Cell::Text(hp.method.clone()),
            ]];
            let mut json = to_json(&hp);
            json["a"] = json!(a);
            json["b"] = json!(b);
            json["region"] = to_json(&region);
            Ok(PointResult { rows, json })
        }
        Quantity::WkbProfile => {
            let pot = potential(point);
            let e = energy(point);
            let region = cfg.options.region.unwrap_or(RegionKind::Barrier);
            let tp = find_turning_points(pot, e)?;
            let r = *tp.bounded_region(region).ok_or(TunnelError::NoBoundedRegion)?;
            let n = count(point, "n", 201)?;
            let margin = 2.0 * DIST_MIN_RELATIVE * r.width();
            let (lo, hi) = (r.start + margin, r.end - margin);
            let xs: Vec<f64> = if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            };
            let x_ref = point.get("x_ref").unwrap_or(xs[0]);
            let branch = cfg.options.branch.unwrap_or_default();
            let prof = wkb_profile(region, pot, e, m0, hbar, x_ref, &xs, branch)?;
            let rows = prof
                .xs
                .iter()
                .zip(&prof.amplitude)
                .zip(&prof.phase)
                .map(|((x, a), p)| vec![Cell::Num(*x), Cell::Num(*a), Cell::Num(*p)])
                .collect();
            Ok(PointResult { rows, json: to_json(&prof) })
        }
        Quantity::TransmissionScan => {
            let pot = potential(point);
            let e = energy(point);
            let grid_n = count(point, "grid_n", 1024)?;
            let exact = exact_transmission(pot, e, m0, hbar, grid_n)?;
            let action = match barrier_action(pot, e, m0) {
                Ok(a) => a.action,
                // nothing to tunnel through above the barrier top
                Err(TunnelError::NoBarrier { .. }) => 0.0,
                Err(err) => return Err(err.into()),
            };
            let wkb = transmission_from_action(e, action, hbar);
            let rows = vec![vec![
                Cell::Num(e),
                Cell::Num(exact.transmission),
                Cell::Num(exact.reflection),
                Cell::Num(wkb.transmission),
                Cell::Num(action),
                Cell::Num(2.0 * action / hbar),
                exact.richardson_defect.map_or(Cell::Empty, Cell::Num),
            ]];
            Ok(PointResult {
                rows,
                json: json!({"exact": to_json(&exact), "wkb": to_json(&wkb)}),
            })
        }
        Quantity::OperatorCheck => {
            let reps = match cfg.options.rep {
                Some(r) => vec![r],
                None => vec![MomentumRep::Wave, MomentumRep::Corpuscular],
            };
            let checks = match cfg.options.check {
                Some(c) => vec![c],
                None => vec![DefectKind::Hermiticity, DefectKind::Commutator],
            };
            let base = count(point, "grid_n", 256)?;
            let doublings = point.get("doublings").map_or(Ok(3), |v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= 20.0 {
                    Ok(v as u32)
                } else {
                    Err(UsageError(format!("constants.doublings must be an integer in 0..=20, got {v}")))
                }
            })?;
            let grids: Vec<usize> = (0..=doublings).map(|k| base << k).collect();
            let (x_min, x_max) = match &point.potential {
                Some(p) if point.get("x_min").is_none() && point.get("x_max").is_none() => {
                    (p.domain().min, p.domain().max)
                }
                _ => (point.get_or("x_min", -1.0), point.get_or("x_max", 1.0)),
            };
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for &rep in &reps {
                for &check in &checks {
                    for r in convergence_study(rep, check, x_min, x_max, &grids, hbar)? {
                        rows.push(vec![
                            Cell::Text(rep.label().to_string()),
                            Cell::Text(
                                match check {
                                    DefectKind::Hermiticity => "hermiticity",
                                    DefectKind::Commutator => "commutator",
                                }
                                .to_string(),
                            ),
                            Cell::Int(r.grid_n),
                            Cell::Num(r.defect),
                            r.convergence_order_estimate.map_or(Cell::Empty, Cell::Num),
                            Cell::Num(r.rounding_floor),
                        ]);
                        reports.push(r);
                    }
                }
            }
            Ok(PointResult { rows, json: to_json(&reports) })
        }
        Quantity::MassTransform => {
            let v = point.get("v").expect("validated before evaluation");
            let c = point.get_or("c", 1.0);
            let wave = mass_transform(MomentumRep::Wave, m0, v, c)?;
            let corp = mass_transform(MomentumRep::Corpuscular, m0, v, c)?;
            let rows = vec![vec![Cell::Num(v), Cell::Num(wave), Cell::Num(corp), Cell::Num(wave * corp)]];
            Ok(PointResult {
                rows,
                json: json!({"v": v, "m0": m0, "c": c, "m_wave": wave, "m_corpuscular": corp}),
            })
        }
    }
}

/// Evaluates every sweep point on a pool of `jobs` threads; results keep sweep order.
pub fn run_points(quantity: Quantity, cfg: &ScanConfig, points: &[Point], jobs: usize) -> Result<Vec<PointResult>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let results: Vec<Result<PointResult, CliError>> =
        pool.install(|| points.par_iter().map(|p| evaluate(quantity, cfg, p)).collect());
    results.into_iter().collect()
}

pub fn write_output<W: Write>(
    mut out: W,
    quantity: Quantity,
    cfg: &ScanConfig,
    points: &[Point],
    results: &[PointResult],
    format: Format,
) -> std::io::Result<()> {
    let cols = columns(quantity);
    let extra = cfg
        .sweep
        .as_ref()
        .map(|s| s.column().to_string())
        .filter(|c| !cols.contains(&c.as_str()));
    match format {
        Format::Csv => {
            let mut header: Vec<&str> = Vec::new();
            if let Some(c) = &extra {
                header.push(c);
            }
            header.extend_from_slice(cols);
            writeln!(out, "{}", header.join(","))?;
            for (point, result) in points.iter().zip(results) {
                for row in &result.rows {
                    let mut cells: Vec<String> = Vec::with_capacity(row.len() + 1);
                    if extra.is_some() {
                        cells.push(fmt_f64(point.swept.unwrap_or(f64::NAN)));
                    }
                    cells.extend(row.iter().map(Cell::render));
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
        }
        Format::Json => {
            let entries: Vec<Value> = points
                .iter()
                .zip(results)
                .map(|(p, r)| {
                    let mut entry = json!({"index": p.index, "result": r.json});
                    if let (Some(s), Some(v)) = (&cfg.sweep, p.swept) {
                        entry[s.column()] = json!(v);
                    }
                    entry
                })
                .collect();
            let doc = json!({
                "schema": 1,
                "quantity": quantity.name(),
                "sweep": cfg.sweep.as_ref().map(|s| s.parameter.clone()),
                "points": entries,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
