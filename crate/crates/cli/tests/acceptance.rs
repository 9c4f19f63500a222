//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use tunnelkit::dynamics::{
    half_period, integrate_trajectory, integrate_trajectory_with, roundtrip_consistency, IntegrateOptions,
    ParticleState, RegionKind, StopReason,
};
use tunnelkit::exact::exact_transmission;
use tunnelkit::operators::{
    convergence_study, eigenvalue_estimate, mass_transform, DefectKind, DefectReport, GridFunction, MomentumRep,
};
use tunnelkit::potential::{evaluate, find_turning_points, Domain, Inverted, PotentialSpec};
use tunnelkit::wkb::{barrier_action, wkb_transmission};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn harmonic() -> PotentialSpec {
    PotentialSpec::harmonic_well(1.0, 0.0, Domain::new(-5.0, 5.0)).unwrap()
}

fn inverted_parabola() -> PotentialSpec {
    PotentialSpec::parabolic_barrier(1.0, 1.0, 0.0, Domain::new(-5.0, 5.0)).unwrap()
}

fn square_well() -> PotentialSpec {
    PotentialSpec::square_well(1.0, 2.0, 0.0, Domain::new(-5.0, 5.0)).unwrap()
}

fn period_oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    for (spec, region) in [(harmonic(), RegionKind::Normal), (inverted_parabola(), RegionKind::Barrier)] {
        let tp = find_turning_points(&spec, 0.5).map_err(err)?;
        let r = *tp.bounded_region(region).ok_or("no bounded region")?;
        let hp = half_period(region, &spec, 0.5, 1.0, r.start, r.end).map_err(err)?;
        worst = worst.max((hp.value - PI).abs() / PI);
    }
    check(worst <= 1e-8, format!("max relative error {worst:.3e} (tol 1e-8)"))
}

fn roundtrip() -> Outcome {
    let cases = [
        ("harmonic", harmonic(), RegionKind::Normal),
        ("inverted parabola", inverted_parabola(), RegionKind::Barrier),
        ("square well", square_well(), RegionKind::Normal),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, spec, region) in cases {
        let r = roundtrip_consistency(region, &spec, 0.5, 1.0, 1e-4).map_err(err)?;
        ok &= r.relative_difference <= 1e-6;
        parts.push(format!("{name} {:.2e}", r.relative_difference));
    }
    check(ok, format!("{} (tol 1e-6)", parts.join(", ")))
}

fn duality() -> Outcome {
    let gaussian = PotentialSpec::gaussian_barrier(1.0, 1.0, 0.0, Domain::new(-10.0, 10.0)).unwrap();
    let opts = IntegrateOptions { stop_at_turning_point: false };
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for (spec, x0, v0) in [(inverted_parabola(), -1.0, 0.0), (gaussian, -0.5, 0.2)] {
        let e = RegionKind::Barrier.energy(1.0, v0, evaluate(&spec, x0).map_err(err)?);
        let h = ParticleState { t: 0.0, x: x0, v: v0, m0: 1.0, energy: e };
        let a = integrate_trajectory_with(RegionKind::Barrier, &spec, h, 6.0, 1e-3, opts).map_err(err)?;
        let n = ParticleState { energy: -e, ..h };
        let b = integrate_trajectory_with(RegionKind::Normal, &Inverted(&spec), n, 6.0, 1e-3, opts).map_err(err)?;
        if a.samples.len() != b.samples.len() {
            return Err(format!("sample counts differ: {} vs {}", a.samples.len(), b.samples.len()));
        }
        for (p, q) in a.samples.iter().zip(&b.samples) {
            worst = worst.max((p.x - q.x).abs()).max((p.v - q.v).abs()).max((p.t - q.t).abs());
        }
        samples += a.samples.len();
    }
    check(worst <= 1e-12, format!("max sample difference {worst:.3e} over {samples} samples (tol 1e-12)"))
}

fn exact_oracle() -> Outcome {
    let spec = PotentialSpec::square_barrier(1.0, 2.0, 0.0, Domain::new(-5.0, 5.0)).unwrap();
    let r = exact_transmission(&spec, 0.5, 1.0, 1.0, 64).map_err(err)?;
    let closed = 1.0 / (1.0 + 2f64.sinh().powi(2));
    let rel = (r.transmission - closed).abs() / closed;
    let mut worst_unitarity: f64 = 0.0;
    for i in 0..50 {
        let e = 0.05 + 2.95 * i as f64 / 49.0;
        let s = exact_transmission(&spec, e, 1.0, 1.0, 64).map_err(err)?;
        worst_unitarity = worst_unitarity.max(s.unitarity_defect());
    }
    check(
        rel <= 1e-10 && worst_unitarity <= 1e-10,
        format!("T rel error {rel:.3e}; max |T+R-1| over 50 energies {worst_unitarity:.3e} (tol 1e-10)"),
    )
}

const GAUSS_E: f64 = 0.5;

/// Gaussian barrier (V0 = 1) whose width makes 2S = 5 at ħ = 1, E = 0.5, m0 = 1.
fn tuned_gaussian() -> Result<(PotentialSpec, f64), String> {
    let unit = PotentialSpec::gaussian_barrier(1.0, 1.0, 0.0, Domain::new(-10.0, 10.0)).unwrap();
    let s_unit = barrier_action(&unit, GAUSS_E, 1.0).map_err(err)?.action;
    // S is linear in σ at fixed V0 and E
    let sigma = 2.5 / s_unit;
    let spec = PotentialSpec::gaussian_barrier(1.0, sigma, 0.0, Domain::new(-8.0 * sigma, 8.0 * sigma)).map_err(err)?;
    let s = barrier_action(&spec, GAUSS_E, 1.0).map_err(err)?.action;
    Ok((spec, s))
}

fn wkb_vs_exact() -> Outcome {
    let (spec, s) = tuned_gaussian()?;
    let mut parts = Vec::new();
    let mut ok = true;
    for target in [5.0, 10.0, 15.0] {
        let hbar = 2.0 * s / target;
        let w = wkb_transmission(&spec, GAUSS_E, 1.0, hbar).map_err(err)?.transmission.ln();
        let x = exact_transmission(&spec, GAUSS_E, 1.0, hbar, 4096).map_err(err)?.transmission.ln();
        let rel = (w - x).abs() / x.abs();
        ok &= rel <= 0.1;
        parts.push(format!("2S/hbar={target}: {rel:.4}"));
    }
    check(ok, format!("{} (tol 0.1)", parts.join(", ")))
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn hbar_scaling() -> Outcome {
    let (spec, s) = tuned_gaussian()?;
    let mut wkb = Vec::new();
    let mut exact = Vec::new();
    for hbar in [1.0, 0.5, 1.0 / 3.0, 0.25] {
        wkb.push((1.0 / hbar, wkb_transmission(&spec, GAUSS_E, 1.0, hbar).map_err(err)?.transmission.ln()));
        exact.push((
            1.0 / hbar,
            exact_transmission(&spec, GAUSS_E, 1.0, hbar, 4096).map_err(err)?.transmission.ln(),
        ));
    }
    let target = -2.0 * s;
    let rel_w = (fit_slope(&wkb) - target).abs() / target.abs();
    let rel_x = (fit_slope(&exact) - target).abs() / target.abs();
    check(
        rel_w <= 1e-3 && rel_x <= 0.05,
        format!("-2S = {target:.6}; WKB slope rel {rel_w:.2e} (tol 1e-3), exact slope rel {rel_x:.4} (tol 0.05)"),
    )
}

fn orders(reports: &[DefectReport]) -> Vec<f64> {
    reports.iter().filter_map(|r| r.convergence_order_estimate).collect()
}

fn operators() -> Outcome {
    let grids = [256, 512, 1024, 2048];
    let mut ok = true;
    let mut parts = Vec::new();
    for rep in [MomentumRep::Wave, MomentumRep::Corpuscular] {
        let herm = convergence_study(rep, DefectKind::Hermiticity, -1.0, 1.0, &grids, 1.0).map_err(err)?;
        let min_order = orders(&herm).into_iter().fold(f64::INFINITY, f64::min);
        let floor = herm.iter().all(DefectReport::at_rounding_floor);
        let max_defect = herm.iter().map(|r| r.defect).fold(0.0, f64::max);
        // exact summation by parts leaves nothing but rounding to converge
        ok &= min_order >= 1.9 || floor;
        parts.push(format!(
            "{} hermiticity max {max_defect:.1e}{}",
            rep.label(),
            if floor { " (rounding floor)" } else { "" }
        ));
        let comm = convergence_study(rep, DefectKind::Commutator, -1.0, 1.0, &grids, 1.0).map_err(err)?;
        let min_order = orders(&comm).into_iter().fold(f64::INFINITY, f64::min);
        ok &= min_order >= 1.9;
        parts.push(format!("{} commutator order {min_order:.3}", rep.label()));
    }
    let n = 1025;
    let f = GridFunction::sample(0.0, 4.0, n, |x| Complex64::new((-x).exp(), 0.0)).map_err(err)?;
    let lam = eigenvalue_estimate(MomentumRep::Corpuscular, &f, 1.0);
    let dx = f.spacing();
    let eig_ok = (lam.re - 1.0).abs() <= dx * dx && lam.im.abs() <= 1e-10;
    ok &= eig_ok;
    parts.push(format!("eigenvalue {:.10} (|err| {:.2e}, Δ² {:.2e}, Im {:.1e})", lam.re, (lam.re - 1.0).abs(), dx * dx, lam.im));
    check(ok, parts.join("; "))
}

fn mass_laws() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20261015);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = rng.random_range(-0.99..0.99);
        let w = mass_transform(MomentumRep::Wave, 1.0, v, 1.0).map_err(err)?;
        let c = mass_transform(MomentumRep::Corpuscular, 1.0, v, 1.0).map_err(err)?;
        worst = worst.max((w * c - 1.0).abs());
    }
    let m = mass_transform(MomentumRep::Corpuscular, 1.0, 0.6, 1.0).map_err(err)?;
    let ulps = ((m - 0.8).abs() / (0.8 * f64::EPSILON)).round();
    check(
        worst <= 1e-14 && ulps <= 1.0,
        format!("max |m_w m_c - m0²| {worst:.2e} (tol 1e-14); corpuscular(0.6c) = {m} ({ulps} ulp from 0.8)"),
    )
}

fn real_time_traversal() -> Outcome {
    let spec = inverted_parabola();
    let tp = find_turning_points(&spec, 0.5).map_err(err)?;
    let r = *tp.bounded_region(RegionKind::Barrier).ok_or("no barrier region")?;
    let quad = half_period(RegionKind::Barrier, &spec, 0.5, 1.0, r.start, r.end).map_err(err)?.value;
    let s0 = ParticleState { t: 0.0, x: tp.inner_start(&r), v: 0.0, m0: 1.0, energy: 0.5 };
    let traj = integrate_trajectory(RegionKind::Barrier, &spec, s0, 2.0 * quad, 1e-3).map_err(err)?;
    let increasing = traj.samples.windows(2).all(|w| w[1].t > w[0].t && w[1].t.is_finite());
    let end = traj.turning_events.last().ok_or("no turning point reached")?;
    let rel = (end.t - quad).abs() / quad;
    check(
        increasing && traj.status == StopReason::TurningPoint && rel <= 1e-4 && (end.x - r.end).abs() < 1e-3,
        format!(
            "{} samples, strictly increasing: {increasing}; traversal {:.8} vs quadrature {:.8}, rel {rel:.2e} (tol 1e-4)",
            traj.samples.len(),
            end.t,
            quad
        ),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("scan.json");
    std::fs::write(
        &config,
        r#"{
  "potential": {"family": "gaussian_barrier", "params": {"height": 1.0, "sigma": 1.0}, "domain": [-10.0, 10.0]},
  "sweep": {"parameter": "E", "start": 0.05, "stop": 1.5, "count": 64},
  "constants": {"m0": 1.0, "hbar": 1.0, "grid_n": 1024}
}"#,
    )
    .map_err(err)?;
    let run = |name: &str, jobs: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_tunnelkit"))
            .args(["transmission-scan", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(&out)
            .args(["--jobs", jobs])
            .status()
            .map_err(err)?;
        if !status.success() {
            return Err(format!("tunnelkit exited with {status}"));
        }
        std::fs::read(out).map_err(err)
    };
    let a = run("a.csv", "1")?;
    let b = run("b.csv", "1")?;
    let c = run("c.csv", "8")?;
    check(
        a == b && a == c && !a.is_empty(),
        format!("{} bytes; repeat identical: {}; jobs 1 vs 8 identical: {}", a.len(), a == b, a == c),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("period oracles", period_oracles),
        ("ODE vs quadrature", roundtrip),
        ("force-inversion duality", duality),
        ("exact-solver oracle", exact_oracle),
        ("WKB vs exact", wkb_vs_exact),
        ("hbar scaling", hbar_scaling),
        ("operator certification", operators),
        ("mass-transform laws", mass_laws),
        ("real-time traversal", real_time_traversal),
        ("CLI determinism", cli_determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
