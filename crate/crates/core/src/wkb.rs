//! WKB wavefunctions in both regions, the barrier action and the primitive
//! exponential transmission estimate.
//!
//! In the normal region the local momentum is `p = √(2m₀(E - V))` and the
//! stationary solution oscillates, `p^{-1/2} exp(i∫p/ħ)`. In the barrier
//! region `p̃ = √(2m₀(V - E))` and the solution is real-exponential,
//! `p̃^{-1/2} exp(∓∫p̃/ħ)`. The common `exp(-iEt/ħ)` factor is dropped.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::RegionKind;
use crate::error::{Result, TunnelError};
use crate::exact::{Method, ScatteringResult};
use crate::format::fmt_f64;
use crate::potential::{find_turning_points, Potential, RootKind};
use crate::quadrature::{sin2_endpoint, GaussLegendre};

/// Exclusion zone around turning points as a fraction of the region width.
pub const DIST_MIN_RELATIVE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Decaying,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbProfile {
    pub xs: Vec<f64>,
    /// `|ψ(x)| / |ψ(x_ref)|`.
    pub amplitude: Vec<f64>,
    /// Accumulated phase in radians; identically zero in the barrier region.
    pub phase: Vec<f64>,
    pub region: RegionKind,
    pub branch: Branch,
    pub x_ref: f64,
    pub hbar: f64,
    /// `max |ħ p' / p²|` over the samples; small values mean WKB is reliable.
    pub validity: f64,
}

impl WkbProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,amplitude,phase")?;
        for ((x, a), p) in self.xs.iter().zip(&self.amplitude).zip(&self.phase) {
            writeln!(out, "{},{},{}", fmt_f64(*x), fmt_f64(*a), fmt_f64(*p))?;
        }
        Ok(())
    }
}

fn local_momentum(region: RegionKind, energy: f64, m0: f64, v: f64) -> f64 {
    (2.0 * m0 * region.allowance(energy, v).max(0.0)).sqrt()
}

/// Samples the WKB solution of one region relative to `x_ref`.
#[allow(clippy::too_many_arguments)]
pub fn wkb_profile<P: Potential + ?Sized>(
    region: RegionKind,
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    x_ref: f64,
    xs: &[f64],
    branch: Branch,
) -> Result<WkbProfile> {
    let tps = find_turning_points(potential, energy)?;
    let interval = *tps.region_at(x_ref).ok_or_else(|| {
        TunnelError::RegionMismatch(format!("x_ref = {x_ref} lies outside the domain"))
    })?;
    if interval.kind != region {
        return Err(TunnelError::RegionMismatch(format!(
            "x_ref = {x_ref} lies in an {} region, not {}",
            interval.kind.label(),
            region.label()
        )));
    }
    let dist_min = DIST_MIN_RELATIVE * interval.width();
    let check = |x: f64| -> Result<()> {
        if !interval.contains(x) {
            return Err(TunnelError::RegionMismatch(format!(
                "sample x = {x} is outside the {} region [{}, {}]",
                region.label(),
                interval.start,
                interval.end
            )));
        }
        let near_left = interval.left.is_some() && x - interval.start < dist_min;
        let near_right = interval.right.is_some() && interval.end - x < dist_min;
        if near_left || near_right || interval.flat {
            return Err(TunnelError::TurningPointDivergence { x, dist_min });
        }
        Ok(())
    };
    check(x_ref)?;
    for &x in xs {
        check(x)?;
    }

    let momentum = |x: f64| -> Result<f64> { Ok(local_momentum(region, energy, m0, potential.value(x)?)) };
    let p_ref = momentum(x_ref)?;

    // ∫_{x_ref}^{x} p dx, accumulated over the sorted sample set
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let rule = GaussLegendre::standard();
    let mut action = vec![0.0; xs.len()];
    let split = order.partition_point(|&i| xs[i] < x_ref);
    let mut acc = 0.0;
    let mut prev = x_ref;
    for &i in &order[split..] {
        acc += rule.try_integrate(prev, xs[i], momentum)?;
        action[i] = acc;
        prev = xs[i];
    }
    acc = 0.0;
    prev = x_ref;
    for &i in order[..split].iter().rev() {
        acc -= rule.try_integrate(xs[i], prev, momentum)?;
        action[i] = acc;
        prev = xs[i];
    }

    let mut amplitude = Vec::with_capacity(xs.len());
    let mut phase = Vec::with_capacity(xs.len());
    let mut validity: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let p = momentum(x)?;
        let prefactor = 0.5 * (p_ref / p).ln();
        match region {
            RegionKind::Normal => {
                amplitude.push(prefactor.exp());
                phase.push(action[k] / hbar);
            }
            RegionKind::Barrier => {
                let exponent = match branch {
                    Branch::Decaying => -action[k] / hbar,
                    Branch::Growing => action[k] / hbar,
                };
                amplitude.push((prefactor + exponent).exp());
                phase.push(0.0);
            }
        }
        if let Ok(slope) = potential.slope(x) {
            let dp = -region.kinetic_sign() * m0 * slope / p;
            validity = validity.max((hbar * dp / (p * p)).abs());
        }
    }

    Ok(WkbProfile {
        xs: xs.to_vec(),
        amplitude,
        phase,
        region,
        branch,
        x_ref,
        hbar,
        validity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    /// `∫_b^c √(2m₀(V - E)) dx`.
    #[serde(rename = "S")]
    pub action: f64,
    pub b: f64,
    pub c: f64,
    pub quadrature_error: f64,
    /// Coincident turning points or a flat stretch at `V = E`.
    pub degenerate: bool,
}

/// Under-barrier action between the turning points of the first bounded
/// barrier region.
pub fn barrier_action<P: Potential + ?Sized>(potential: &P, energy: f64, m0: f64) -> Result<ActionResult> {
    let tps = find_turning_points(potential, energy)?;
    let bounded = tps.regions.iter().find(|r| r.kind == RegionKind::Barrier && r.is_bounded());
    if let Some(r) = bounded {
        let b = tps.inner_start(r);
        let c = tps.inner_end(r);
        if r.flat {
            return Ok(ActionResult {
                action: 0.0,
                b,
                c,
                quadrature_error: 0.0,
                degenerate: true,
            });
        }
        let est = sin2_endpoint(b, c, |x| {
            Ok(local_momentum(RegionKind::Barrier, energy, m0, potential.value(x)?))
        })?;
        return Ok(ActionResult {
            action: est.value,
            b,
            c,
            quadrature_error: est.relative_error,
            degenerate: false,
        });
    }
    if let Some(tp) = tps.points.iter().find(|p| p.kind == RootKind::Tangential) {
        return Ok(ActionResult {
            action: 0.0,
            b: tp.x,
            c: tp.x,
            quadrature_error: 0.0,
            degenerate: true,
        });
    }
    let reason = if tps.regions.iter().all(|r| r.kind == RegionKind::Barrier) {
        "energy lies below the potential everywhere in the domain"
    } else {
        "energy lies above the barrier"
    };
    Err(TunnelError::NoBarrier {
        energy,
        reason: reason.to_string(),
    })
}

/// Primitive estimate `T = exp(-2S/ħ)`, `R = 1 - T`.
pub fn wkb_transmission<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
) -> Result<ScatteringResult> {
    let action = barrier_action(potential, energy, m0)?;
    Ok(transmission_from_action(energy, action.action, hbar))
}

pub fn transmission_from_action(energy: f64, action: f64, hbar: f64) -> ScatteringResult {
    let t = (-2.0 * action / hbar).exp();
    ScatteringResult {
        energy,
        transmission: t,
        reflection: 1.0 - t,
        method: Method::WkbPrimitive,
        grid_n: None,
        richardson_defect: None,
        action: Some(action),
        hbar,
    }
}
