//! Discretized momentum operators and the two mass-transformation laws.
//!
//! The wave representation quantizes with `[x̂, p̂] = iħ`, realized in the
//! position basis by the hermitian `p̂ = -iħ∂ₓ`. The corpuscular
//! representation quantizes with `[x̂, p̂] = ħ`, realized by the
//! anti-hermitian `p̂ = -ħ∂ₓ`. On a finite grid neither commutator holds
//! exactly; the defects below measure how fast they converge.
//!
//! Hermiticity is tested with test functions that vanish at both grid ends.
//! With central differences and trapezoidal weights the interior sums
//! telescope, so the (anti-)hermiticity defect sits at the rounding floor
//! for every grid rather than decaying as a power of the spacing; reports
//! carry that floor so callers can tell the two situations apart.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TunnelError};

/// Relative uniformity required of grid spacings.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-12;

/// Largest boundary value a hermiticity test function may take.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

pub const MIN_GRID_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumRep {
    /// `p̂ = -iħ∂ₓ`, `[x̂, p̂] = iħ`.
    Wave,
    /// `p̂ = -ħ∂ₓ`, `[x̂, p̂] = ħ`.
    Corpuscular,
}

impl MomentumRep {
    /// Prefactor multiplying `∂ₓ`.
    pub fn prefactor(self, hbar: f64) -> Complex64 {
        match self {
            MomentumRep::Wave => Complex64::new(0.0, -hbar),
            MomentumRep::Corpuscular => Complex64::new(-hbar, 0.0),
        }
    }

    /// Value of the canonical commutator `[x̂, p̂]`.
    pub fn commutator(self, hbar: f64) -> Complex64 {
        match self {
            MomentumRep::Wave => Complex64::new(0.0, hbar),
            MomentumRep::Corpuscular => Complex64::new(hbar, 0.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MomentumRep::Wave => "wave",
            MomentumRep::Corpuscular => "corpuscular",
        }
    }
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    x0: f64,
    dx: f64,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(xs: &[f64], values: Vec<Complex64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(TunnelError::InvalidGrid(format!(
                "{} positions but {} values",
                xs.len(),
                values.len()
            )));
        }
        if xs.len() < MIN_GRID_POINTS {
            return Err(TunnelError::InvalidGrid(format!(
                "at least {MIN_GRID_POINTS} points required, got {}",
                xs.len()
            )));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(dx > 0.0) {
            return Err(TunnelError::InvalidGrid("grid must be increasing".to_string()));
        }
        for (i, w) in xs.windows(2).enumerate() {
            if ((w[1] - w[0]) - dx).abs() > UNIFORMITY_TOLERANCE * dx.max((xs[0] + dx * i as f64).abs()) {
                return Err(TunnelError::InvalidGrid(format!("non-uniform spacing at index {i}")));
            }
        }
        Ok(Self {
            x0: xs[0],
            dx,
            values,
        })
    }

    /// Samples `f` at `n` evenly spaced points spanning `[x_min, x_max]`.
    pub fn sample<F: FnMut(f64) -> Complex64>(x_min: f64, x_max: f64, n: usize, mut f: F) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(TunnelError::InvalidGrid(format!(
                "at least {MIN_GRID_POINTS} points required, got {n}"
            )));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        let values = (0..n).map(|i| f(x_min + dx * i as f64)).collect();
        Ok(Self {
            x0: x_min,
            dx,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + self.dx * j as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len() && self.x0 == other.x0 && self.dx == other.dx
    }

    fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self {
            x0: self.x0,
            dx: self.dx,
            values,
        }
    }

    /// Trapezoidal `⟨self, other⟩ = Σ wⱼ conj(selfⱼ) otherⱼ Δ`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let n = self.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            sum += w * self.values[j].conj() * other.values[j];
        }
        sum * self.dx
    }

    fn abs_inner(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.norm() * b.norm())
            .sum::<f64>()
            * self.dx
    }
}

/// Second-order first derivative: central inside, one-sided at the ends.
fn derivative(f: &GridFunction) -> Vec<Complex64> {
    let v = &f.values;
    let n = v.len();
    let inv = 1.0 / (2.0 * f.dx);
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv;
    for j in 1..n - 1 {
        d[j] = (v[j + 1] - v[j - 1]) * inv;
    }
    d
}

pub fn momentum_apply(rep: MomentumRep, f: &GridFunction, hbar: f64) -> GridFunction {
    let c = rep.prefactor(hbar);
    f.with_values(derivative(f).into_iter().map(|d| c * d).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    Hermiticity,
    Commutator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub check: DefectKind,
    pub rep: MomentumRep,
    pub grid_n: usize,
    pub defect: f64,
    /// Order measured against the next coarser grid of a study.
    pub convergence_order_estimate: Option<f64>,
    /// Size of rounding error in the compared quantities.
    pub rounding_floor: f64,
}

impl DefectReport {
    pub fn at_rounding_floor(&self) -> bool {
        self.defect <= self.rounding_floor
    }
}

/// `max |⟨f, p̂g⟩ ∓ ⟨p̂f, g⟩|` over the pairs: minus for the hermitian wave
/// momentum, plus for the anti-hermitian corpuscular one.
pub fn hermiticity_defect(
    rep: MomentumRep,
    pairs: &[(GridFunction, GridFunction)],
    hbar: f64,
) -> Result<DefectReport> {
    let first = pairs
        .first()
        .ok_or_else(|| TunnelError::InvalidGrid("no test-function pairs".to_string()))?;
    let mut defect: f64 = 0.0;
    let mut floor: f64 = 0.0;
    for (f, g) in pairs {
        if !f.same_grid(&first.0) || !g.same_grid(&first.0) {
            return Err(TunnelError::InvalidGrid("test functions must share one grid".to_string()));
        }
        for h in [f, g] {
            let edge = h.values[0].norm().max(h.values[h.len() - 1].norm());
            if edge > BOUNDARY_TOLERANCE {
                return Err(TunnelError::BoundaryCondition { value: edge });
            }
        }
        let pf = momentum_apply(rep, f, hbar);
        let pg = momentum_apply(rep, g, hbar);
        let lhs = f.inner(&pg);
        let rhs = pf.inner(g);
        let d = match rep {
            MomentumRep::Wave => (lhs - rhs).norm(),
            MomentumRep::Corpuscular => (lhs + rhs).norm(),
        };
        defect = defect.max(d);
        let scale = f.abs_inner(&pg) + pf.abs_inner(g);
        floor = floor.max(64.0 * f64::EPSILON * scale);
    }
    Ok(DefectReport {
        check: DefectKind::Hermiticity,
        rep,
        grid_n: first.0.len(),
        defect,
        convergence_order_estimate: None,
        rounding_floor: floor,
    })
}

/// `max_j |([x̂, p̂]f)ⱼ - κ fⱼ|` over interior points, `κ = iħ` or `ħ`.
pub fn commutator_defect(rep: MomentumRep, f: &GridFunction, hbar: f64) -> DefectReport {
    let xf = f.with_values(
        f.values
            .iter()
            .enumerate()
            .map(|(j, v)| f.x(j) * v)
            .collect(),
    );
    let pf = momentum_apply(rep, f, hbar);
    let pxf = momentum_apply(rep, &xf, hbar);
    let kappa = rep.commutator(hbar);
    let n = f.len();
    let mut defect: f64 = 0.0;
    let mut floor: f64 = 0.0;
    for j in 1..n - 1 {
        let comm = f.x(j) * pf.values[j] - pxf.values[j];
        defect = defect.max((comm - kappa * f.values[j]).norm());
        let scale = f.x(j).abs() * pf.values[j].norm() + pxf.values[j].norm();
        floor = floor.max(16.0 * f64::EPSILON * scale);
    }
    DefectReport {
        check: DefectKind::Commutator,
        rep,
        grid_n: n,
        defect,
        convergence_order_estimate: None,
        rounding_floor: floor,
    }
}

/// Mean of `(p̂f)ⱼ / fⱼ` over interior points with non-negligible `f`.
pub fn eigenvalue_estimate(rep: MomentumRep, f: &GridFunction, hbar: f64) -> Complex64 {
    let pf = momentum_apply(rep, f, hbar);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for j in 1..f.len() - 1 {
        if f.values[j].norm() > 1e-250 {
            sum += pf.values[j] / f.values[j];
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

/// Gaussians of three widths and two sine bumps, all vanishing at both ends.
pub fn test_battery(x_min: f64, x_max: f64, n: usize) -> Result<Vec<GridFunction>> {
    let len = x_max - x_min;
    let mid = 0.5 * (x_min + x_max);
    let mut out = Vec::new();
    for frac in [20.0, 28.0, 40.0] {
        let sigma = len / frac;
        out.push(GridFunction::sample(x_min, x_max, n, |x| {
            let u = (x - mid) / sigma;
            Complex64::new((-0.5 * u * u).exp(), 0.0)
        })?);
    }
    for power in [2, 4] {
        out.push(GridFunction::sample(x_min, x_max, n, |x| {
            let s = (PI * (x - x_min) / len).sin();
            Complex64::new(s.powi(power), 0.0)
        })?);
    }
    // a complex modulated bump, so wave-rep checks see a nontrivial phase
    let sigma = len / 24.0;
    out.push(GridFunction::sample(x_min, x_max, n, |x| {
        let u = (x - mid) / sigma;
        Complex64::from_polar((-0.5 * u * u).exp(), 3.0 * x)
    })?);
    Ok(out)
}

/// All ordered pairs from `battery`.
pub fn battery_pairs(battery: &[GridFunction]) -> Vec<(GridFunction, GridFunction)> {
    let mut pairs = Vec::new();
    for f in battery {
        for g in battery {
            pairs.push((f.clone(), g.clone()));
        }
    }
    pairs
}

/// Defect reports for the test battery on each grid, with orders measured
/// between consecutive grids.
pub fn convergence_study(
    rep: MomentumRep,
    check: DefectKind,
    x_min: f64,
    x_max: f64,
    grids: &[usize],
    hbar: f64,
) -> Result<Vec<DefectReport>> {
    let mut reports: Vec<DefectReport> = Vec::new();
    for &n in grids {
        let battery = test_battery(x_min, x_max, n)?;
        let report = match check {
            DefectKind::Hermiticity => hermiticity_defect(rep, &battery_pairs(&battery), hbar)?,
            DefectKind::Commutator => {
                let mut worst = commutator_defect(rep, &battery[0], hbar);
                for f in &battery[1..] {
                    let r = commutator_defect(rep, f, hbar);
                    worst.defect = worst.defect.max(r.defect);
                    worst.rounding_floor = worst.rounding_floor.max(r.rounding_floor);
                }
                worst
            }
        };
        reports.push(report);
    }
    for i in 1..reports.len() {
        let (prev, cur) = (&reports[i - 1], &reports[i]);
        let spacing_ratio = (cur.grid_n - 1) as f64 / (prev.grid_n - 1) as f64;
        let order = if prev.defect > 0.0 && cur.defect > 0.0 {
            Some((prev.defect / cur.defect).ln() / spacing_ratio.ln())
        } else {
            None
        };
        reports[i].convergence_order_estimate = order;
    }
    Ok(reports)
}

/// Relativistic mass law: `m₀/√(1-v²/c²)` for the wave representation,
/// `m₀√(1-v²/c²)` for the corpuscular one.
pub fn mass_transform(rep: MomentumRep, m0: f64, v: f64, c: f64) -> Result<f64> {
    if !(v.abs() < c) {
        return Err(TunnelError::Superluminal { v, c });
    }
    let beta = v / c;
    let contraction = ((1.0 - beta) * (1.0 + beta)).sqrt();
    Ok(match rep {
        MomentumRep::Wave => m0 / contraction,
        MomentumRep::Corpuscular => m0 * contraction,
    })
}

/// Rest mass, light speed and action unit tied by `m₀c² = ħω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationParams {
    pub m0: f64,
    pub c: f64,
    pub hbar: f64,
}

impl RepresentationParams {
    pub fn new(m0: f64, c: f64, hbar: f64) -> Self {
        Self { m0, c, hbar }
    }

    pub fn rest_energy(&self) -> f64 {
        self.m0 * self.c * self.c
    }

    /// Internal clock frequency `ω₀ = m₀c²/ħ`.
    pub fn omega0(&self) -> f64 {
        self.rest_energy() / self.hbar
    }

    /// Frequency seen in a frame moving at `v`: `ω₀√(1-v²/c²)`.
    pub fn moving_clock_frequency(&self, v: f64) -> Result<f64> {
        Ok(mass_transform(MomentumRep::Corpuscular, 1.0, v, self.c)? * self.omega0())
    }
}
