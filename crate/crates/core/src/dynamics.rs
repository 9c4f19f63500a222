//! Real-time classical motion in the normal (`h`) and barrier (`H`) regions.
//!
//! In the normal region the conserved energy is `½m₀v² + V` and the particle
//! obeys `m₀ẍ = -V'`. In the barrier region the kinetic term flips sign,
//! `-½m₀v² + V`, and so does the force, `m₀ẍ = +V'`. Time is an ordinary
//! real parameter in both; a particle oscillates between the two turning
//! points bounding whichever region it starts in.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TunnelError};
use crate::format::fmt_f64;
use crate::potential::{find_turning_points, Potential};
use crate::quadrature::sin2_endpoint;

/// Empirical constant in `tol_cons = CONSERVATION_COEFF · dt² · max(1, |E|)`.
pub const CONSERVATION_COEFF: f64 = 1.0;

/// Ratio of allowed drift to `tol_cons` before a step-size error is raised.
pub const DRIFT_LIMIT_FACTOR: f64 = 100.0;

/// Speed below which a particle whose force points back inward is treated
/// as sitting on a turning point.
pub const V_STOP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    /// `E ≥ V`, energy function `h = ½m₀v² + V`.
    #[serde(rename = "h")]
    Normal,
    /// `E ≤ V`, energy function `H = -½m₀v² + V`.
    #[serde(rename = "H")]
    Barrier,
}

impl RegionKind {
    pub fn kinetic_sign(self) -> f64 {
        match self {
            RegionKind::Normal => 1.0,
            RegionKind::Barrier => -1.0,
        }
    }

    /// Value of the region's energy function.
    pub fn energy(self, m0: f64, v: f64, potential: f64) -> f64 {
        self.kinetic_sign() * 0.5 * m0 * v * v + potential
    }

    /// `±(E - V)`; nonnegative inside the region.
    pub fn allowance(self, energy: f64, potential: f64) -> f64 {
        match self {
            RegionKind::Normal => energy - potential,
            RegionKind::Barrier => -(energy - potential),
        }
    }

    pub fn acceleration(self, m0: f64, slope: f64) -> f64 {
        -self.kinetic_sign() * slope / m0
    }

    pub fn label(self) -> &'static str {
        match self {
            RegionKind::Normal => "h",
            RegionKind::Barrier => "H",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub m0: f64,
    /// Conserved value of the region's energy function.
    pub energy: f64,
}

fn region_tolerance(energy: f64, potential: f64) -> f64 {
    1e-12 * 1f64.max(energy.abs()).max(potential.abs())
}

/// Speed `√(2(±(E - V))/m₀)` at `x`.
pub fn speed_from_energy<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    energy: f64,
    x: f64,
    m0: f64,
) -> Result<f64> {
    let v = potential.value(x)?;
    let allowance = region.allowance(energy, v);
    if allowance < -region_tolerance(energy, v) {
        return Err(TunnelError::RegionMismatch(format!(
            "x = {x} has V = {v}, outside the {} region at E = {energy}",
            region.label()
        )));
    }
    Ok((2.0 * allowance.max(0.0) / m0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningEvent {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reached `t_end`.
    Completed,
    /// Halted on the first turning point.
    TurningPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrateOptions {
    /// Halt at the first turning point instead of reflecting through it.
    pub stop_at_turning_point: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            stop_at_turning_point: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<ParticleState>,
    pub region: RegionKind,
    /// Largest `|energy function - E|` over the samples.
    pub energy_drift: f64,
    pub status: StopReason,
    /// Turning-point hits in time order (interpolated within the step).
    pub turning_events: Vec<TurningEvent>,
    pub tol_cons: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &ParticleState {
        self.samples.last().expect("trajectory holds the initial state")
    }

    /// Writes `t,x,v,energy_defect` rows.
    pub fn write_csv<P: Potential + ?Sized, W: Write>(&self, potential: &P, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x,v,energy_defect")?;
        for s in &self.samples {
            let defect = potential
                .value(s.x)
                .map(|v| self.region.energy(s.m0, s.v, v) - s.energy)
                .unwrap_or(f64::NAN);
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(s.t),
                fmt_f64(s.x),
                fmt_f64(s.v),
                fmt_f64(defect)
            )?;
        }
        Ok(())
    }
}

/// Conservation tolerance for a fixed step `dt`.
pub fn conservation_tolerance(dt: f64, energy: f64) -> f64 {
    CONSERVATION_COEFF * dt * dt * 1f64.max(energy.abs())
}

pub fn integrate_trajectory<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    state0: ParticleState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_trajectory_with(region, potential, state0, t_end, dt, IntegrateOptions::default())
}

/// Velocity-Verlet integration of the region's force law from `state0` to `t_end`.
///
/// A turning point is registered when the velocity reverses within a step,
/// or, for hard walls, when the next position would leave the region by more
/// than the drift budget; the crossing time is interpolated inside the step.
pub fn integrate_trajectory_with<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    state0: ParticleState,
    t_end: f64,
    dt: f64,
    options: IntegrateOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TunnelError::InvalidGrid(format!("dt must be positive, got {dt}")));
    }
    if !(state0.m0 > 0.0) {
        return Err(TunnelError::InvalidSpec(format!("m0 must be positive, got {}", state0.m0)));
    }
    let m0 = state0.m0;
    let energy = state0.energy;
    let tol_cons = conservation_tolerance(dt, energy);
    let drift_limit = DRIFT_LIMIT_FACTOR * tol_cons;

    let v_x0 = potential.value(state0.x)?;
    if region.allowance(energy, v_x0) < -region_tolerance(energy, v_x0) {
        return Err(TunnelError::RegionMismatch(format!(
            "initial x = {} has V = {v_x0}, outside the {} region at E = {energy}",
            state0.x,
            region.label()
        )));
    }
    let defect0 = region.energy(m0, state0.v, v_x0) - energy;
    if defect0.abs() > tol_cons.max(region_tolerance(energy, v_x0)) {
        return Err(TunnelError::RegionMismatch(format!(
            "initial state has {}-energy {} but E = {energy}",
            region.label(),
            region.energy(m0, state0.v, v_x0)
        )));
    }

    // at a kink the force is taken from the side the particle is heading into
    let accel = |x: f64, heading: f64| -> Result<f64> {
        match potential.slope(x) {
            Ok(s) => Ok(region.acceleration(m0, s)),
            Err(TunnelError::NonDifferentiable { .. }) => {
                let nudge = 4.0 * f64::EPSILON * x.abs().max(1e-300);
                let side = if heading < 0.0 { -1.0 } else { 1.0 };
                Ok(region.acceleration(m0, potential.slope(x + side * nudge.max(f64::MIN_POSITIVE))?))
            }
            Err(e) => Err(e),
        }
    };

    let mut samples = vec![state0];
    let mut events = Vec::new();
    let mut drift = defect0.abs();
    let mut status = StopReason::Completed;

    let (mut t, mut x, mut v) = (state0.t, state0.x, state0.v);
    let mut a = accel(x, v)?;
    let t_eps = 1e-12 * dt;

    while t < t_end - t_eps {
        let h = dt.min(t_end - t);
        let x1 = x + v * h + 0.5 * a * h * h;
        let pot1 = potential.value(x1)?;
        let allowance1 = region.allowance(energy, pot1);

        if allowance1 < -drift_limit {
            // hard wall: locate the exit inside the step along the Taylor path
            let path = |tau: f64| x + v * tau + 0.5 * a * tau * tau;
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if region.allowance(energy, potential.value(path(mid))?) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = lo;
            let x_wall = path(tau);
            let v_wall = v + a * tau;
            let t_wall = t + tau;
            events.push(TurningEvent { t: t_wall, x: x_wall });
            if tau <= t_eps {
                // already on the wall: reflect in place
                if options.stop_at_turning_point && samples.len() > 1 {
                    status = StopReason::TurningPoint;
                    break;
                }
                v = -v;
                continue;
            }
            let pot_wall = potential.value(x_wall)?;
            let defect = region.energy(m0, v_wall, pot_wall) - energy;
            drift = drift.max(defect.abs());
            if options.stop_at_turning_point {
                samples.push(ParticleState { t: t_wall, x: x_wall, v: v_wall, m0, energy });
                status = StopReason::TurningPoint;
                break;
            }
            samples.push(ParticleState { t: t_wall, x: x_wall, v: -v_wall, m0, energy });
            t = t_wall;
            x = x_wall;
            v = -v_wall;
            a = accel(x, v)?;
            continue;
        }

        let a1 = accel(x1, v + a * h)?;
        let v1 = v + 0.5 * (a + a1) * h;
        let t1 = t + h;
        let defect = region.energy(m0, v1, pot1) - energy;
        drift = drift.max(defect.abs());
        if defect.abs() > drift_limit {
            return Err(TunnelError::StepSize {
                drift: defect.abs(),
                limit: drift_limit,
            });
        }
        samples.push(ParticleState { t: t1, x: x1, v: v1, m0, energy });

        let reversed = v != 0.0 && (v1 == 0.0 || v1.signum() != v.signum());
        let stalled = v1 != 0.0
            && a1 * v1 < 0.0
            && v1.abs() < V_STOP
            && !reversed;
        if reversed {
            let tau = h * v / (v - v1);
            events.push(TurningEvent {
                t: t + tau,
                x: x + v * tau + 0.5 * a * tau * tau,
            });
        } else if stalled {
            events.push(TurningEvent { t: t1, x: x1 });
        }
        t = t1;
        x = x1;
        v = v1;
        a = a1;
        if (reversed || stalled) && options.stop_at_turning_point {
            status = StopReason::TurningPoint;
            break;
        }
    }

    Ok(Trajectory {
        samples,
        region,
        energy_drift: drift,
        status,
        turning_events: events,
        tol_cons,
    })
}

/// Half-period between turning points with its quadrature error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriod {
    pub value: f64,
    pub quadrature_error: f64,
    pub method: String,
}

pub const HALF_PERIOD_METHOD: &str = "gauss-legendre-64-sin2";

/// Local power of `±(E - V)` at an endpoint: ≈0 for a wall, 1 for a simple
/// root, 2 for a tangential one.
fn endpoint_exponent<F: Fn(f64) -> Result<f64>>(allowance: F, x: f64, inward: f64) -> Result<Option<f64>> {
    let d1 = 1e-4 * inward;
    let d2 = 1e-3 * inward;
    let f1 = allowance(x + d1)?;
    let f2 = allowance(x + d2)?;
    if f1 > 0.0 && f2 > 0.0 {
        Ok(Some((f2 / f1).ln() / 10f64.ln()))
    } else {
        Ok(None)
    }
}

/// Real half-period `T = m₀ ∫ₐᵇ dx / √(2m₀(±(E - V)))` for either region.
pub fn half_period<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    energy: f64,
    m0: f64,
    a: f64,
    b: f64,
) -> Result<HalfPeriod> {
    if !(b > a) {
        return Err(TunnelError::RegionMismatch(format!("empty interval [{a}, {b}]")));
    }
    let width = b - a;
    let allowance = |x: f64| -> Result<f64> { Ok(region.allowance(energy, potential.value(x)?)) };
    for (x, inward) in [(a, width), (b, -width)] {
        if let Some(p) = endpoint_exponent(allowance, x, inward)? {
            if p > 1.5 {
                return Err(TunnelError::DivergentPeriod { x });
            }
        }
    }
    let est = sin2_endpoint(a, b, |x| {
        let w = allowance(x)?;
        if w < 0.0 {
            Err(TunnelError::RegionMismatch(format!(
                "integrand changes sign at x = {x} inside [{a}, {b}]"
            )))
        } else if w == 0.0 {
            Err(TunnelError::DivergentPeriod { x })
        } else {
            Ok(m0 / (2.0 * m0 * w).sqrt())
        }
    })?;
    Ok(HalfPeriod {
        value: est.value,
        quadrature_error: est.relative_error,
        method: HALF_PERIOD_METHOD.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub region: RegionKind,
    pub a: f64,
    pub b: f64,
    pub ode_time: f64,
    pub quadrature_time: f64,
    pub relative_difference: f64,
    pub dt: f64,
}

/// Integrates from one turning point to the next and compares the traversal
/// time with the quadrature half-period of the first bounded region of `region`.
pub fn roundtrip_consistency<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    energy: f64,
    m0: f64,
    dt: f64,
) -> Result<RoundtripReport> {
    let tps = find_turning_points(potential, energy)?;
    let interval = tps
        .bounded_region(region)
        .ok_or(TunnelError::NoBoundedRegion)?;
    let a = tps.inner_start(interval);
    let b = tps.inner_end(interval);
    let quad = half_period(region, potential, energy, m0, a, b)?;

    let v0 = speed_from_energy(region, potential, energy, a, m0)?;
    let state0 = ParticleState {
        t: 0.0,
        x: a,
        v: v0,
        m0,
        energy,
    };
    let traj = integrate_trajectory(region, potential, state0, 4.0 * quad.value + 10.0 * dt, dt)?;
    let event = match (traj.status, traj.turning_events.last()) {
        (StopReason::TurningPoint, Some(ev)) => *ev,
        _ => {
            return Err(TunnelError::NumericalFailure(
                "trajectory did not reach the opposite turning point".to_string(),
            ))
        }
    };
    Ok(RoundtripReport {
        region,
        a,
        b,
        ode_time: event.t,
        quadrature_time: quad.value,
        relative_difference: (event.t - quad.value).abs() / quad.value,
        dt,
    })
}
