//! Numerically exact stationary scattering for arbitrary 1D potentials.
//!
//! The normal- and barrier-region quantization rules lead to the same
//! stationary equation `-ħ²/(2m₀) ψ'' + Vψ = Eψ`, so a single solver serves
//! both. Two independent methods are provided:
//!
//! * transfer matrices over piecewise-constant slices, exact when the
//!   potential itself is piecewise constant;
//! * Numerov integration of the smooth equation, used for density profiles
//!   and as a cross-check.
//!
//! Both keep a running log scale so thick barriers at small `ħ` do not
//! overflow.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::RegionKind;
use crate::error::{Result, TunnelError};
use crate::potential::{find_turning_points, Potential};

/// `|T + R - 1|` allowed for the transfer-matrix method.
pub const TOL_UNITARITY: f64 = 1e-10;

/// `|T + R - 1|` allowed for Numerov, whose lead matching is O(h⁴).
pub const TOL_UNITARITY_NUMEROV: f64 = 1e-6;

/// Relative flatness required over the outer 5% of the domain.
pub const FLATNESS_TOLERANCE: f64 = 1e-8;

pub const MIN_GRID: usize = 64;

const RESCALE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "transfer_matrix")]
    TransferMatrix,
    #[serde(rename = "numerov")]
    Numerov,
    #[serde(rename = "wkb-primitive")]
    WkbPrimitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "T")]
    pub transmission: f64,
    #[serde(rename = "R")]
    pub reflection: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub richardson_defect: Option<f64>,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
    pub action: Option<f64>,
    pub hbar: f64,
}

impl ScatteringResult {
    pub fn unitarity_defect(&self) -> f64 {
        (self.transmission + self.reflection - 1.0).abs()
    }
}

/// Asymptotic potential levels at the two domain ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leads {
    pub left: f64,
    pub right: f64,
}

/// Checks that `V` is flat over the outer 5% on each side and returns the
/// asymptotic levels.
pub fn leads<P: Potential + ?Sized>(potential: &P) -> Result<Leads> {
    let dom = potential.domain();
    let w = dom.width();
    let left = potential.value(dom.min)?;
    let right = potential.value(dom.max)?;
    let samples = 4096;
    let mut vmax: f64 = 0.0;
    for i in 0..=samples {
        let x = dom.min + w * i as f64 / samples as f64;
        vmax = vmax.max(potential.value(x.min(dom.max))?.abs());
    }
    let probes = 64;
    let mut deviation: f64 = 0.0;
    for i in 0..=probes {
        let off = 0.05 * w * i as f64 / probes as f64;
        deviation = deviation.max((potential.value(dom.min + off)? - left).abs());
        deviation = deviation.max((potential.value(dom.max - off)? - right).abs());
    }
    if deviation > FLATNESS_TOLERANCE * vmax {
        return Err(TunnelError::DomainPadding { deviation });
    }
    Ok(Leads { left, right })
}

fn lead_wavenumbers(leads: Leads, energy: f64, m0: f64, hbar: f64) -> Result<(f64, f64)> {
    for level in [leads.left, leads.right] {
        if !(energy > level) {
            return Err(TunnelError::NoPropagatingChannel {
                energy,
                asymptote: level,
            });
        }
    }
    let k = |level: f64| (2.0 * m0 * (energy - level)).sqrt() / hbar;
    Ok((k(leads.left), k(leads.right)))
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < MIN_GRID {
        return Err(TunnelError::InvalidGrid(format!(
            "grid_n must be at least {MIN_GRID}, got {grid_n}"
        )));
    }
    Ok(())
}

/// Real 2×2 matrix with a separate log scale factor.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    m: [[f64; 2]; 2],
    log_scale: f64,
}

impl Scaled {
    fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
            log_scale: 0.0,
        }
    }

    /// `self ← step · self`
    fn left_multiply(&mut self, step: &Scaled) {
        let a = &step.m;
        let b = &self.m;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        self.m = out;
        self.log_scale += step.log_scale;
        let big = out.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if big > RESCALE_THRESHOLD {
            for row in self.m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= big;
                }
            }
            self.log_scale += big.ln();
        }
    }
}

/// Propagator of `(ψ, ψ')` across a constant segment of width `d` with
/// `ψ'' = -q2 ψ`.
fn segment_propagator(q2: f64, d: f64) -> Scaled {
    if q2 > 0.0 {
        let q = q2.sqrt();
        let (s, c) = (q * d).sin_cos();
        Scaled {
            m: [[c, s / q], [-q * s, c]],
            log_scale: 0.0,
        }
    } else if q2 < 0.0 {
        let kappa = (-q2).sqrt();
        let u = kappa * d;
        if u > 50.0 {
            let e = (-2.0 * u).exp();
            let ch = 0.5 * (1.0 + e);
            let sh = 0.5 * (1.0 - e);
            Scaled {
                m: [[ch, sh / kappa], [kappa * sh, ch]],
                log_scale: u,
            }
        } else {
            let (sh, ch) = (u.sinh(), u.cosh());
            Scaled {
                m: [[ch, sh / kappa], [kappa * sh, ch]],
                log_scale: 0.0,
            }
        }
    } else {
        Scaled {
            m: [[1.0, d], [0.0, 1.0]],
            log_scale: 0.0,
        }
    }
}

/// Slice edges: a uniform grid merged with the potential's breakpoints.
fn slice_edges<P: Potential + ?Sized>(potential: &P, grid_n: usize) -> Vec<f64> {
    let dom = potential.domain();
    let w = dom.width();
    let mut edges: Vec<f64> = (0..=grid_n)
        .map(|i| if i == grid_n { dom.max } else { dom.min + w * i as f64 / grid_n as f64 })
        .collect();
    edges.extend(
        potential
            .breakpoints()
            .into_iter()
            .filter(|&b| b > dom.min && b < dom.max),
    );
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * w);
    edges
}

struct RawScattering {
    transmission: f64,
    reflection: f64,
}

fn transfer_matrix_raw<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    grid_n: usize,
    k: (f64, f64),
) -> Result<RawScattering> {
    let edges = slice_edges(potential, grid_n);
    let factor = 2.0 * m0 / (hbar * hbar);
    let mut total = Scaled::identity();
    for w in edges.windows(2) {
        let d = w[1] - w[0];
        let v = potential.value(0.5 * (w[0] + w[1]))?;
        total.left_multiply(&segment_propagator(factor * (energy - v), d));
    }
    let (kl, kr) = k;
    let [[a, b], [c, d]] = total.m;
    let denom = (kr * kl * b - c).powi(2) + (kr * a + kl * d).powi(2);
    let numer = (c + kr * kl * b).powi(2) + (kr * a - kl * d).powi(2);
    let ln_t = (4.0 * kl * kr).ln() - 2.0 * total.log_scale - denom.ln();
    Ok(RawScattering {
        transmission: ln_t.exp(),
        reflection: numer / denom,
    })
}

/// Transfer-matrix transmission through `grid_n` constant slices.
///
/// The returned result is the `grid_n` value; `richardson_defect` is
/// `|T(n) - T(2n)|`.
pub fn exact_transmission<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    grid_n: usize,
) -> Result<ScatteringResult> {
    check_grid(grid_n)?;
    let k = lead_wavenumbers(leads(potential)?, energy, m0, hbar)?;
    let coarse = transfer_matrix_raw(potential, energy, m0, hbar, grid_n, k)?;
    let fine = transfer_matrix_raw(potential, energy, m0, hbar, 2 * grid_n, k)?;
    let defect = (coarse.transmission + coarse.reflection - 1.0).abs();
    if !(defect <= TOL_UNITARITY) {
        return Err(TunnelError::NumericalFailure(format!(
            "transfer-matrix unitarity defect {defect:e} exceeds {TOL_UNITARITY:e}"
        )));
    }
    Ok(ScatteringResult {
        energy,
        transmission: coarse.transmission,
        reflection: coarse.reflection,
        method: Method::TransferMatrix,
        grid_n: Some(grid_n),
        richardson_defect: Some((coarse.transmission - fine.transmission).abs()),
        action: None,
        hbar,
    })
}

/// Numerov phase advance per step for a flat region with `ψ'' = g ψ`, `g < 0`.
fn numerov_theta(g: f64, h: f64) -> f64 {
    let c = (1.0 + 5.0 * h * h * g / 12.0) / (1.0 - h * h * g / 12.0);
    c.clamp(-1.0, 1.0).acos()
}

struct NumerovSweep {
    /// `ψ_j` mantissas with the log scale in force when each was produced.
    nodes: Vec<(Complex64, f64)>,
    /// Incoming amplitude at the left lead, in the final scale.
    incoming: Complex64,
    reflected: Complex64,
    log_scale: f64,
}

/// Backward Numerov sweep from a purely outgoing wave on the right.
fn numerov_sweep<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    grid_n: usize,
    leads: Leads,
) -> Result<NumerovSweep> {
    let dom = potential.domain();
    let h = dom.width() / grid_n as f64;
    let factor = 2.0 * m0 / (hbar * hbar);
    let mut g = Vec::with_capacity(grid_n + 1);
    for j in 0..=grid_n {
        let x = if j == grid_n { dom.max } else { dom.min + h * j as f64 };
        g.push(factor * (potential.value(x)? - energy));
    }
    let theta_r = numerov_theta(factor * (leads.right - energy), h);
    let theta_l = numerov_theta(factor * (leads.left - energy), h);
    let w = |j: usize| 1.0 - h * h * g[j] / 12.0;

    let mut nodes = vec![(Complex64::new(0.0, 0.0), 0.0); grid_n + 1];
    let mut next = Complex64::new(1.0, 0.0);
    let mut cur = Complex64::from_polar(1.0, -theta_r);
    let mut log_scale = 0.0;
    nodes[grid_n] = (next, 0.0);
    nodes[grid_n - 1] = (cur, 0.0);
    for j in (1..grid_n).rev() {
        let prev = (2.0 * (1.0 + 5.0 * h * h * g[j] / 12.0) * cur - w(j + 1) * next) / w(j - 1);
        next = cur;
        cur = prev;
        let big = cur.norm();
        if !big.is_finite() {
            return Err(TunnelError::DynamicRange { x: dom.min + h * (j - 1) as f64 });
        }
        if big > RESCALE_THRESHOLD {
            cur /= big;
            next /= big;
            log_scale += big.ln();
        }
        nodes[j - 1] = (cur, log_scale);
    }
    // ψ_j = A e^{ijθ} + B e^{-ijθ} at j = 0, 1
    let (psi0, psi1) = (cur, next);
    let e_plus = Complex64::from_polar(1.0, theta_l);
    let e_minus = Complex64::from_polar(1.0, -theta_l);
    let incoming = (psi1 - psi0 * e_minus) / (e_plus - e_minus);
    let reflected = psi0 - incoming;
    Ok(NumerovSweep {
        nodes,
        incoming,
        reflected,
        log_scale,
    })
}

/// Numerov transmission; same contract as [`exact_transmission`].
pub fn numerov_transmission<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    grid_n: usize,
) -> Result<ScatteringResult> {
    check_grid(grid_n)?;
    let leads = leads(potential)?;
    let (kl, kr) = lead_wavenumbers(leads, energy, m0, hbar)?;
    let run = |n: usize| -> Result<(f64, f64)> {
        let sweep = numerov_sweep(potential, energy, m0, hbar, n, leads)?;
        let ln_t = (kr / kl).ln() - 2.0 * (sweep.incoming.norm().ln() + sweep.log_scale);
        let r = (sweep.reflected / sweep.incoming).norm_sqr();
        Ok((ln_t.exp(), r))
    };
    let (t, r) = run(grid_n)?;
    let (t_fine, _) = run(2 * grid_n)?;
    let defect = (t + r - 1.0).abs();
    if !(defect <= TOL_UNITARITY_NUMEROV) {
        return Err(TunnelError::NumericalFailure(format!(
            "Numerov unitarity defect {defect:e} exceeds {TOL_UNITARITY_NUMEROV:e}"
        )));
    }
    Ok(ScatteringResult {
        energy,
        transmission: t,
        reflection: r,
        method: Method::Numerov,
        grid_n: Some(grid_n),
        richardson_defect: Some((t - t_fine).abs()),
        action: None,
        hbar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub xs: Vec<f64>,
    /// `|ψ|²`, peak on the incident side normalized to one.
    pub density: Vec<f64>,
    /// Natural log of `density`; finite even where `density` underflows.
    pub log_density: Vec<f64>,
}

impl DensityProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        use crate::format::fmt_f64;
        writeln!(out, "x,density")?;
        for (x, d) in self.xs.iter().zip(&self.density) {
            writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*d))?;
        }
        Ok(())
    }
}

/// Scattering-state density `|ψ(x)|²` on a uniform grid of `grid_n + 1` nodes.
///
/// The solution is fixed by a purely outgoing wave on the right and swept
/// leftward with Numerov, which keeps the physical (decaying to the right)
/// component dominant inside barriers. The incident side is everything to
/// the left of the first barrier region.
pub fn bound_profile<P: Potential + ?Sized>(
    potential: &P,
    energy: f64,
    m0: f64,
    hbar: f64,
    grid_n: usize,
) -> Result<DensityProfile> {
    check_grid(grid_n)?;
    let leads = leads(potential)?;
    lead_wavenumbers(leads, energy, m0, hbar)?;
    let sweep = numerov_sweep(potential, energy, m0, hbar, grid_n, leads)?;
    let dom = potential.domain();
    let h = dom.width() / grid_n as f64;
    let xs: Vec<f64> = (0..=grid_n)
        .map(|j| if j == grid_n { dom.max } else { dom.min + h * j as f64 })
        .collect();
    let log_density: Vec<f64> = sweep
        .nodes
        .iter()
        .map(|(psi, s)| 2.0 * (psi.norm().ln() + s))
        .collect();

    let tps = find_turning_points(potential, energy)?;
    let incident_end = tps
        .regions
        .iter()
        .find(|r| r.kind == RegionKind::Barrier)
        .map_or(dom.max, |r| r.start);
    let peak = xs
        .iter()
        .zip(&log_density)
        .filter(|(x, _)| **x <= incident_end)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let peak = if peak.is_finite() { peak } else { log_density[0] };
    let log_density: Vec<f64> = log_density.iter().map(|l| l - peak).collect();
    Ok(DensityProfile {
        xs,
        density: log_density.iter().map(|l| l.exp()).collect(),
        log_density,
    })
}
