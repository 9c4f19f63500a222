//! Potential catalog, evaluation and classical turning points.
//!
//! A [`PotentialSpec`] is a declarative description of `V(x)`: one analytic
//! family with its parameters, or sampled data, plus the finite domain the
//! toolkit works on. Everything downstream talks to potentials through the
//! [`Potential`] trait so that derived potentials (see [`Inverted`]) can be
//! used interchangeably.

use serde::{Deserialize, Serialize};

use crate::dynamics::RegionKind;
use crate::error::{Result, TunnelError};

/// Number of cells in the initial bracket scan of [`find_turning_points`].
pub const SCAN_CELLS: usize = 4096;

/// Bisection tolerance as a fraction of the domain width.
pub const TOL_X_RELATIVE: f64 = 1e-12;

pub trait Potential: Sync {
    fn value(&self, x: f64) -> Result<f64>;

    fn slope(&self, x: f64) -> Result<f64>;

    fn domain(&self) -> Domain;

    /// Locations where `V` or `V'` jumps.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn value(&self, x: f64) -> Result<f64> {
        (**self).value(x)
    }

    fn slope(&self, x: f64) -> Result<f64> {
        (**self).slope(x)
    }

    fn domain(&self) -> Domain {
        (**self).domain()
    }

    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

/// `-V(x)` for a wrapped potential.
#[derive(Debug, Clone, Copy)]
pub struct Inverted<P>(pub P);

impl<P: Potential> Potential for Inverted<P> {
    fn value(&self, x: f64) -> Result<f64> {
        Ok(-self.0.value(x)?)
    }

    fn slope(&self, x: f64) -> Result<f64> {
        Ok(-self.0.slope(x)?)
    }

    fn domain(&self) -> Domain {
        self.0.domain()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }
}

/// Closed interval `[min, max]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Domain {
    pub min: f64,
    pub max: f64,
}

impl Domain {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

impl From<[f64; 2]> for Domain {
    fn from(v: [f64; 2]) -> Self {
        Self { min: v[0], max: v[1] }
    }
}

impl From<Domain> for [f64; 2] {
    fn from(d: Domain) -> Self {
        [d.min, d.max]
    }
}

/// Analytic families and sampled potentials.
///
/// Heights are in energy units, widths and centers in length units.
/// Piecewise families are left-closed: at a breakpoint the value of the
/// segment starting there is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `height` on `[center - width/2, center + width/2)`, zero elsewhere.
    SquareBarrier {
        #[serde(alias = "V0")]
        height: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// Zero floor on `[center - width/2, center + width/2)`, `height` elsewhere.
    SquareWell {
        #[serde(alias = "V0")]
        height: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `height - k (x - center)² / 2`.
    ParabolicBarrier {
        #[serde(alias = "V0")]
        height: f64,
        #[serde(alias = "k")]
        stiffness: f64,
        #[serde(default)]
        center: f64,
    },
    /// `k (x - center)² / 2`.
    HarmonicWell {
        #[serde(alias = "k")]
        stiffness: f64,
        #[serde(default)]
        center: f64,
    },
    /// `height / cosh²((x - center) / width)`.
    Eckart {
        #[serde(alias = "V0")]
        height: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `height · exp(-(x - center)² / (2 sigma²))`.
    GaussianBarrier {
        #[serde(alias = "V0")]
        height: f64,
        sigma: f64,
        #[serde(default)]
        center: f64,
    },
    /// Linear interpolation between samples, constant beyond the end samples.
    PiecewiseLinear { xs: Vec<f64>, vs: Vec<f64> },
    /// Natural cubic spline through samples; defined on the potential's domain only.
    Tabulated { xs: Vec<f64>, vs: Vec<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SquareBarrier { .. } => "square_barrier",
            Family::SquareWell { .. } => "square_well",
            Family::ParabolicBarrier { .. } => "parabolic_barrier",
            Family::HarmonicWell { .. } => "harmonic_well",
            Family::Eckart { .. } => "eckart",
            Family::GaussianBarrier { .. } => "gaussian_barrier",
            Family::PiecewiseLinear { .. } => "piecewise_linear",
            Family::Tabulated { .. } => "tabulated",
        }
    }

    /// True when `V(-(x - c) + c) = V(x)` for some center `c`.
    pub fn symmetry_center(&self) -> Option<f64> {
        match *self {
            Family::SquareBarrier { center, .. }
            | Family::SquareWell { center, .. }
            | Family::ParabolicBarrier { center, .. }
            | Family::HarmonicWell { center, .. }
            | Family::Eckart { center, .. }
            | Family::GaussianBarrier { center, .. } => Some(center),
            Family::PiecewiseLinear { .. } | Family::Tabulated { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    #[serde(flatten)]
    family: Family,
    domain: Domain,
}

/// Declarative 1D potential: family, parameters and working domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct PotentialSpec {
    family: Family,
    domain: Domain,
    spline: Option<Spline>,
}

impl TryFrom<SpecRepr> for PotentialSpec {
    type Error = TunnelError;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        PotentialSpec::new(repr.family, repr.domain)
    }
}

impl From<PotentialSpec> for SpecRepr {
    fn from(spec: PotentialSpec) -> Self {
        SpecRepr {
            family: spec.family,
            domain: spec.domain,
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(TunnelError::InvalidSpec(msg()))
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    require(v.is_finite(), || format!("{name} must be finite, got {v}"))
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    require(v.is_finite() && v > 0.0, || {
        format!("{name} must be strictly positive, got {v}")
    })
}

fn validate_samples(xs: &[f64], vs: &[f64], min_len: usize) -> Result<()> {
    require(xs.len() == vs.len(), || {
        format!("xs and vs differ in length ({} vs {})", xs.len(), vs.len())
    })?;
    require(xs.len() >= min_len, || {
        format!("at least {min_len} samples required, got {}", xs.len())
    })?;
    require(xs.iter().chain(vs).all(|v| v.is_finite()), || {
        "samples must be finite".to_string()
    })?;
    require(xs.windows(2).all(|w| w[0] < w[1]), || {
        "sample positions must be strictly increasing".to_string()
    })
}

impl PotentialSpec {
    pub fn new(family: Family, domain: Domain) -> Result<Self> {
        require(domain.min.is_finite() && domain.max.is_finite(), || {
            "domain bounds must be finite".to_string()
        })?;
        require(domain.min < domain.max, || {
            format!("degenerate domain [{}, {}]", domain.min, domain.max)
        })?;
        let mut spline = None;
        match &family {
            Family::SquareBarrier {
                height,
                width,
                center,
            }
            | Family::SquareWell {
                height,
                width,
                center,
            }
            | Family::Eckart {
                height,
                width,
                center,
            } => {
                require_finite("height", *height)?;
                require_positive("width", *width)?;
                require_finite("center", *center)?;
            }
            Family::ParabolicBarrier {
                height,
                stiffness,
                center,
            } => {
                require_finite("height", *height)?;
                require_positive("stiffness", *stiffness)?;
                require_finite("center", *center)?;
            }
            Family::HarmonicWell { stiffness, center } => {
                require_positive("stiffness", *stiffness)?;
                require_finite("center", *center)?;
            }
            Family::GaussianBarrier {
                height,
                sigma,
                center,
            } => {
                require_finite("height", *height)?;
                require_positive("sigma", *sigma)?;
                require_finite("center", *center)?;
            }
            Family::PiecewiseLinear { xs, vs } => validate_samples(xs, vs, 2)?,
            Family::Tabulated { xs, vs } => {
                validate_samples(xs, vs, 3)?;
                require(
                    domain.min >= xs[0] && domain.max <= xs[xs.len() - 1],
                    || "tabulated domain must lie within the sample range".to_string(),
                )?;
                spline = Some(Spline::natural(xs, vs));
            }
        }
        Ok(Self {
            family,
            domain,
            spline,
        })
    }

    pub fn square_barrier(height: f64, width: f64, center: f64, domain: Domain) -> Result<Self> {
        Self::new(
            Family::SquareBarrier {
                height,
                width,
                center,
            },
            domain,
        )
    }

    pub fn square_well(height: f64, width: f64, center: f64, domain: Domain) -> Result<Self> {
        Self::new(
            Family::SquareWell {
                height,
                width,
                center,
            },
            domain,
        )
    }

    pub fn parabolic_barrier(
        height: f64,
        stiffness: f64,
        center: f64,
        domain: Domain,
    ) -> Result<Self> {
        Self::new(
            Family::ParabolicBarrier {
                height,
                stiffness,
                center,
            },
            domain,
        )
    }

    pub fn harmonic_well(stiffness: f64, center: f64, domain: Domain) -> Result<Self> {
        Self::new(Family::HarmonicWell { stiffness, center }, domain)
    }

    pub fn eckart(height: f64, width: f64, center: f64, domain: Domain) -> Result<Self> {
        Self::new(
            Family::Eckart {
                height,
                width,
                center,
            },
            domain,
        )
    }

    pub fn gaussian_barrier(height: f64, sigma: f64, center: f64, domain: Domain) -> Result<Self> {
        Self::new(
            Family::GaussianBarrier {
                height,
                sigma,
                center,
            },
            domain,
        )
    }

    pub fn piecewise_linear(xs: Vec<f64>, vs: Vec<f64>, domain: Domain) -> Result<Self> {
        Self::new(Family::PiecewiseLinear { xs, vs }, domain)
    }

    pub fn tabulated(xs: Vec<f64>, vs: Vec<f64>, domain: Domain) -> Result<Self> {
        Self::new(Family::Tabulated { xs, vs }, domain)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Same family on a different domain.
    pub fn with_domain(&self, domain: Domain) -> Result<Self> {
        Self::new(self.family.clone(), domain)
    }

    /// `V'(x)` together with the finite-difference step used, if any.
    ///
    /// Analytic families return the exact derivative and `None`; tabulated
    /// potentials use a centered difference (one-sided at the domain ends).
    pub fn derivative_with_step(&self, x: f64) -> Result<(f64, Option<f64>)> {
        let d = match self.family {
            Family::SquareBarrier { width, center, .. } | Family::SquareWell { width, center, .. } => {
                let (lo, hi) = (center - 0.5 * width, center + 0.5 * width);
                if x == lo || x == hi {
                    return Err(TunnelError::NonDifferentiable { x });
                }
                0.0
            }
            Family::ParabolicBarrier {
                stiffness, center, ..
            } => -stiffness * (x - center),
            Family::HarmonicWell { stiffness, center } => stiffness * (x - center),
            Family::Eckart {
                height,
                width,
                center,
            } => {
                let u = (x - center) / width;
                let sech2 = 1.0 / u.cosh().powi(2);
                -2.0 * height * sech2 * u.tanh() / width
            }
            Family::GaussianBarrier {
                height,
                sigma,
                center,
            } => {
                let u = (x - center) / sigma;
                -height * u / sigma * (-0.5 * u * u).exp()
            }
            Family::PiecewiseLinear { ref xs, ref vs } => {
                if xs.contains(&x) {
                    return Err(TunnelError::NonDifferentiable { x });
                }
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    0.0
                } else {
                    let i = xs.partition_point(|&s| s <= x) - 1;
                    (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
                }
            }
            Family::Tabulated { ref xs, .. } => {
                let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
                let h = 6e-6 * spacing;
                let (lo, hi) = (self.domain.min, self.domain.max);
                let slope = if x - h >= lo && x + h <= hi {
                    (self.value(x + h)? - self.value(x - h)?) / (2.0 * h)
                } else if x + h <= hi {
                    (self.value(x + h)? - self.value(x)?) / h
                } else {
                    (self.value(x)? - self.value(x - h)?) / h
                };
                return Ok((slope, Some(h)));
            }
        };
        Ok((d, None))
    }
}

impl Potential for PotentialSpec {
    fn value(&self, x: f64) -> Result<f64> {
        let v = match self.family {
            Family::SquareBarrier {
                height,
                width,
                center,
            } => {
                let lo = center - 0.5 * width;
                if x >= lo && x < center + 0.5 * width {
                    height
                } else {
                    0.0
                }
            }
            Family::SquareWell {
                height,
                width,
                center,
            } => {
                let lo = center - 0.5 * width;
                if x >= lo && x < center + 0.5 * width {
                    0.0
                } else {
                    height
                }
            }
            Family::ParabolicBarrier {
                height,
                stiffness,
                center,
            } => {
                let u = x - center;
                height - 0.5 * stiffness * u * u
            }
            Family::HarmonicWell { stiffness, center } => {
                let u = x - center;
                0.5 * stiffness * u * u
            }
            Family::Eckart {
                height,
                width,
                center,
            } => height / ((x - center) / width).cosh().powi(2),
            Family::GaussianBarrier {
                height,
                sigma,
                center,
            } => {
                let u = (x - center) / sigma;
                height * (-0.5 * u * u).exp()
            }
            Family::PiecewiseLinear { ref xs, ref vs } => {
                let n = xs.len();
                if x < xs[0] {
                    vs[0]
                } else if x >= xs[n - 1] {
                    vs[n - 1]
                } else {
                    let i = xs.partition_point(|&s| s <= x) - 1;
                    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                    vs[i] + t * (vs[i + 1] - vs[i])
                }
            }
            Family::Tabulated { .. } => {
                if !self.domain.contains(x) {
                    return Err(TunnelError::Domain {
                        x,
                        x_min: self.domain.min,
                        x_max: self.domain.max,
                    });
                }
                self.spline
                    .as_ref()
                    .expect("tabulated spec always carries a spline")
                    .eval(x)
            }
        };
        Ok(v)
    }

    fn slope(&self, x: f64) -> Result<f64> {
        Ok(self.derivative_with_step(x)?.0)
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            Family::SquareBarrier { width, center, .. } | Family::SquareWell { width, center, .. } => {
                vec![center - 0.5 * width, center + 0.5 * width]
            }
            Family::PiecewiseLinear { ref xs, .. } => xs.clone(),
            _ => Vec::new(),
        }
    }
}

/// Evaluates `V(x)`.
pub fn evaluate<P: Potential + ?Sized>(potential: &P, x: f64) -> Result<f64> {
    potential.value(x)
}

/// Evaluates `dV/dx`.
pub fn derivative<P: Potential + ?Sized>(potential: &P, x: f64) -> Result<f64> {
    potential.slope(x)
}

#[derive(Debug, Clone, PartialEq)]
struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl Spline {
    fn natural(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let d = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * d / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        second[0] = 0.0;
        Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let hi = self.xs.partition_point(|&s| s <= x).clamp(1, n - 1);
        let lo = hi - 1;
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.second[lo] + (b * b * b - b) * self.second[hi]) * h * h / 6.0
    }
}

/// How a turning point was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    /// Sign change of `V - E` (includes jumps of discontinuous potentials).
    Simple,
    /// Double root: `V - E` touches zero without changing sign.
    Tangential,
    /// End of a stretch where `V ≡ E`.
    FlatEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub x: f64,
    pub kind: RootKind,
    /// Final bisection bracket; both ends coincide for exact roots.
    pub bracket: (f64, f64),
}

/// A maximal interval between consecutive turning points (or domain ends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionInterval {
    pub start: f64,
    pub end: f64,
    pub kind: RegionKind,
    /// `V ≡ E` on the whole interval.
    pub flat: bool,
    /// Index into [`TurningPoints::points`] of the left boundary, if it is one.
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl RegionInterval {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end
    }

    pub fn is_bounded(&self) -> bool {
        self.left.is_some() && self.right.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPoints {
    pub energy: f64,
    pub points: Vec<TurningPoint>,
    pub regions: Vec<RegionInterval>,
    /// Bisection tolerance used.
    pub tol_x: f64,
}

impl TurningPoints {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn region_at(&self, x: f64) -> Option<&RegionInterval> {
        self.regions.iter().find(|r| r.contains(x))
    }

    /// First region of `kind` whose ends are both simple turning points.
    pub fn bounded_region(&self, kind: RegionKind) -> Option<&RegionInterval> {
        self.regions.iter().find(|r| {
            r.kind == kind
                && !r.flat
                && match (r.left, r.right) {
                    (Some(l), Some(rt)) => {
                        self.points[l].kind == RootKind::Simple
                            && self.points[rt].kind == RootKind::Simple
                    }
                    _ => false,
                }
        })
    }

    /// The end of the left boundary bracket lying inside `region`.
    pub fn inner_start(&self, region: &RegionInterval) -> f64 {
        match region.left {
            Some(i) => self.points[i].bracket.1.max(region.start),
            None => region.start,
        }
    }

    pub fn inner_end(&self, region: &RegionInterval) -> f64 {
        match region.right {
            Some(i) => self.points[i].bracket.0.min(region.end),
            None => region.end,
        }
    }
}

struct Scan<'a, P: ?Sized> {
    potential: &'a P,
    energy: f64,
}

impl<P: Potential + ?Sized> Scan<'_, P> {
    fn g(&self, x: f64) -> Result<f64> {
        Ok(self.potential.value(x)? - self.energy)
    }

    fn is_zero(&self, x: f64) -> Result<bool> {
        let v = self.potential.value(x)?;
        Ok((v - self.energy).abs() <= zero_tol(v, self.energy))
    }

    /// Bisection on a sign change of `g`; `g(lo)` and `g(hi)` have opposite signs.
    fn bisect_sign(&self, mut lo: f64, mut hi: f64) -> Result<TurningPoint> {
        let s_lo = self.g(lo)?.signum();
        // run to adjacent floats; tol_x is the guaranteed bound, not the stopping rule
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let gm = self.g(mid)?;
            if gm == 0.0 {
                return Ok(exact(mid, RootKind::Simple));
            }
            if gm.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(TurningPoint {
            x: 0.5 * (lo + hi),
            kind: RootKind::Simple,
            bracket: (lo, hi),
        })
    }

    /// Bisection for the edge of a flat stretch; `zero_at_hi` tells which end is flat.
    fn bisect_flat(&self, mut lo: f64, mut hi: f64, zero_at_hi: bool) -> Result<TurningPoint> {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.is_zero(mid)? == zero_at_hi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(TurningPoint {
            x: 0.5 * (lo + hi),
            kind: RootKind::FlatEdge,
            bracket: (lo, hi),
        })
    }

    /// Golden-section search for the extremum of `sign · g` (a minimum of |g|) in `[a, b]`.
    fn golden_extremum(&self, mut a: f64, mut b: f64, sign: f64) -> Result<f64> {
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = sign * self.g(c)?;
        let mut fd = sign * self.g(d)?;
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = sign * self.g(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = sign * self.g(d)?;
            }
        }
        Ok(0.5 * (a + b))
    }
}

fn zero_tol(v: f64, e: f64) -> f64 {
    4.0 * f64::EPSILON * v.abs().max(e.abs())
}

fn exact(x: f64, kind: RootKind) -> TurningPoint {
    TurningPoint {
        x,
        kind,
        bracket: (x, x),
    }
}

/// Locates all turning points `V(x) = E` in the potential's domain and
/// classifies the intervals between them.
///
/// Sign changes are bracketed on a [`SCAN_CELLS`]-cell grid and refined by
/// bisection to `1e-12 · width`. Tangential roots are found from discrete
/// extrema of `|V - E|`; stretches where `V ≡ E` contribute their two edges.
pub fn find_turning_points<P: Potential + ?Sized>(potential: &P, energy: f64) -> Result<TurningPoints> {
    if !energy.is_finite() {
        return Err(TunnelError::InvalidSpec(format!("energy must be finite, got {energy}")));
    }
    let domain = potential.domain();
    let (lo, hi) = (domain.min, domain.max);
    let tol_x = TOL_X_RELATIVE * domain.width();
    let scan = Scan { potential, energy };

    let n = SCAN_CELLS;
    let step = domain.width() / n as f64;
    let xs: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + i as f64 * step })
        .collect();
    let mut gs = Vec::with_capacity(n + 1);
    let mut signs = Vec::with_capacity(n + 1);
    for &x in &xs {
        let v = potential.value(x)?;
        let g = v - energy;
        gs.push(g);
        signs.push(if g.abs() <= zero_tol(v, energy) {
            0i8
        } else if g > 0.0 {
            1
        } else {
            -1
        });
    }
    let scale = gs
        .iter()
        .fold(energy.abs(), |m, g| m.max((g + energy).abs()))
        .max(f64::MIN_POSITIVE);
    let tol_tangent = 1e-9 * scale;

    let mut points: Vec<TurningPoint> = Vec::new();
    let mut i = 0usize;
    while i < n {
        if signs[i] != 0 && signs[i + 1] != 0 {
            if signs[i] != signs[i + 1] {
                points.push(scan.bisect_sign(xs[i], xs[i + 1])?);
            }
            i += 1;
            continue;
        }
        // zero run starting at i (only at the domain start) or at i + 1
        let run_start = if signs[i] == 0 { i } else { i + 1 };
        let mut j = run_start;
        while j <= n && signs[j] == 0 {
            j += 1;
        }
        let run_end = j - 1;
        let left_sign = if run_start > 0 { signs[run_start - 1] } else { 0 };
        let right_sign = if j <= n { signs[j] } else { 0 };
        if run_start == run_end {
            let kind = if left_sign != 0 && right_sign != 0 && left_sign == right_sign {
                RootKind::Tangential
            } else {
                RootKind::Simple
            };
            points.push(exact(xs[run_start], kind));
        } else {
            if left_sign != 0 {
                points.push(scan.bisect_flat(xs[run_start - 1], xs[run_start], true)?);
            }
            if right_sign != 0 {
                points.push(scan.bisect_flat(xs[run_end], xs[j], false)?);
            }
        }
        i = j.max(i + 1);
    }

    // discrete extrema of |g| that may hide a tangential or a close pair of roots
    for k in 1..n {
        let (a, b, c) = (gs[k - 1], gs[k], gs[k + 1]);
        let s = signs[k];
        if s == 0 || signs[k - 1] != s || signs[k + 1] != s {
            continue;
        }
        let (am, bm, cm) = (a.abs(), b.abs(), c.abs());
        if !(bm <= am && bm <= cm && (bm < am || bm < cm)) {
            continue;
        }
        if bm > 4.0 * ((am - bm) + (cm - bm)) + tol_tangent {
            continue;
        }
        let sign = f64::from(s);
        let xm = scan.golden_extremum(xs[k - 1], xs[k + 1], sign)?;
        let gm = scan.g(xm)?;
        if sign * gm < 0.0 {
            points.push(scan.bisect_sign(xs[k - 1], xm)?);
            points.push(scan.bisect_sign(xm, xs[k + 1])?);
        } else if gm.abs() <= tol_tangent {
            points.push(exact(xm, RootKind::Tangential));
        }
    }

    points.sort_by(|p, q| p.x.total_cmp(&q.x));
    points.dedup_by(|p, q| (p.x - q.x).abs() <= 4.0 * tol_x);

    let regions = classify(&scan, &points, domain)?;
    Ok(TurningPoints {
        energy,
        points,
        regions,
        tol_x,
    })
}

fn classify<P: Potential + ?Sized>(
    scan: &Scan<'_, P>,
    points: &[TurningPoint],
    domain: Domain,
) -> Result<Vec<RegionInterval>> {
    let mut bounds: Vec<(f64, Option<usize>)> = vec![(domain.min, None)];
    bounds.extend(points.iter().enumerate().map(|(i, p)| (p.x, Some(i))));
    bounds.push((domain.max, None));

    let mut regions = Vec::new();
    for w in bounds.windows(2) {
        let ((start, left), (end, right)) = (w[0], w[1]);
        if end <= start {
            continue;
        }
        let mid = 0.5 * (start + end);
        let v = scan.potential.value(mid)?;
        let g = v - scan.energy;
        let flat = g.abs() <= zero_tol(v, scan.energy);
        let kind = if flat || g > 0.0 {
            RegionKind::Barrier
        } else {
            RegionKind::Normal
        };
        regions.push(RegionInterval {
            start,
            end,
            kind,
            flat,
            left,
            right,
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(a: f64, b: f64) -> Domain {
        Domain::new(a, b)
    }

    #[test]
    fn evaluate_examples() {
        let sq = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(evaluate(&sq, 0.0).unwrap(), 1.0);
        let ho = PotentialSpec::harmonic_well(1.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(evaluate(&ho, 2.0).unwrap(), 2.0);
        let g = PotentialSpec::gaussian_barrier(1.0, 1.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(evaluate(&g, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn left_closed_breakpoints() {
        let sq = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(evaluate(&sq, -1.0).unwrap(), 1.0);
        assert_eq!(evaluate(&sq, 1.0).unwrap(), 0.0);
        assert!(matches!(
            derivative(&sq, 1.0),
            Err(TunnelError::NonDifferentiable { .. })
        ));
        let pl = PotentialSpec::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0], d(-1.0, 3.0))
            .unwrap();
        assert_eq!(evaluate(&pl, 1.0).unwrap(), 2.0);
        assert_eq!(evaluate(&pl, 0.5).unwrap(), 1.0);
        assert_eq!(evaluate(&pl, -0.5).unwrap(), 0.0);
        assert_eq!(derivative(&pl, 0.5).unwrap(), 2.0);
        assert!(matches!(
            derivative(&pl, 1.0),
            Err(TunnelError::NonDifferentiable { x }) if x == 1.0
        ));
    }

    #[test]
    fn derivative_examples() {
        let ho = PotentialSpec::harmonic_well(1.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(derivative(&ho, 2.0).unwrap(), 2.0);
        let g = PotentialSpec::gaussian_barrier(1.0, 1.0, 0.0, d(-5.0, 5.0)).unwrap();
        assert_eq!(derivative(&g, 0.0).unwrap(), 0.0);
        let pb = PotentialSpec::parabolic_barrier(1.0, 1.0, 0.0, d(-5.0, 5.0)).unwrap();
        let h = 1e-5;
        let fd = (evaluate(&pb, 0.5 + h).unwrap() - evaluate(&pb, 0.5 - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, -0.5, max_relative = 1e-9);
        assert_eq!(derivative(&pb, 0.5).unwrap(), -0.5);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let specs = [
            PotentialSpec::eckart(1.3, 0.7, 0.2, d(-5.0, 5.0)).unwrap(),
            PotentialSpec::gaussian_barrier(0.8, 1.4, -0.3, d(-5.0, 5.0)).unwrap(),
            PotentialSpec::parabolic_barrier(2.0, 3.0, 0.5, d(-5.0, 5.0)).unwrap(),
        ];
        for spec in &specs {
            for &x in &[-1.7, -0.2, 0.4, 2.3] {
                let h = 1e-5;
                let fd = (evaluate(spec, x + h).unwrap() - evaluate(spec, x - h).unwrap()) / (2.0 * h);
                let an = derivative(spec, x).unwrap();
                assert!((fd - an).abs() < 1e-8, "{} at {x}: {fd} vs {an}", spec.family().name());
            }
        }
    }

    #[test]
    fn tabulated_spline_and_domain_error() {
        let xs: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let tab = PotentialSpec::tabulated(xs, vs, d(-2.0, 2.0)).unwrap();
        assert!((evaluate(&tab, 0.55).unwrap() - 0.5 * 0.55 * 0.55).abs() < 1e-4);
        let (slope, step) = tab.derivative_with_step(1.0).unwrap();
        assert!((slope - 1.0).abs() < 1e-3);
        assert!(step.unwrap() > 0.0);
        assert!(matches!(evaluate(&tab, 2.5), Err(TunnelError::Domain { .. })));
        // one-sided near the ends
        assert!(tab.derivative_with_step(2.0).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(PotentialSpec::square_barrier(1.0, 0.0, 0.0, d(-1.0, 1.0)).is_err());
        assert!(PotentialSpec::gaussian_barrier(1.0, -1.0, 0.0, d(-1.0, 1.0)).is_err());
        assert!(PotentialSpec::harmonic_well(1.0, 0.0, d(1.0, 1.0)).is_err());
        assert!(PotentialSpec::tabulated(vec![0.0, 2.0, 1.0], vec![0.0; 3], d(0.0, 1.0)).is_err());
        assert!(PotentialSpec::tabulated(vec![0.0, 1.0, 2.0], vec![0.0; 3], d(-1.0, 1.0)).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["family"], "square_barrier");
        assert_eq!(json["params"]["height"], 1.0);
        assert_eq!(json["domain"], serde_json::json!([-5.0, 5.0]));
        let parsed: PotentialSpec = serde_json::from_str(
            r#"{"family":"parabolic_barrier","params":{"V0":1,"k":1},"domain":[-3,3]}"#,
        )
        .unwrap();
        assert_eq!(
            parsed.family(),
            &Family::ParabolicBarrier {
                height: 1.0,
                stiffness: 1.0,
                center: 0.0
            }
        );
        assert!(serde_json::from_str::<PotentialSpec>(
            r#"{"family":"no_such","params":{},"domain":[-3,3]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<PotentialSpec>(
            r#"{"family":"gaussian_barrier","params":{"height":1,"sigma":0},"domain":[-3,3]}"#
        )
        .is_err());
    }

    #[test]
    fn harmonic_turning_points() {
        let ho = PotentialSpec::harmonic_well(1.0, 0.0, d(-3.0, 3.0)).unwrap();
        let tp = find_turning_points(&ho, 0.5).unwrap();
        let xs = tp.xs();
        assert_eq!(xs.len(), 2);
        assert!((xs[0] + 1.0).abs() < 1e-10 && (xs[1] - 1.0).abs() < 1e-10);
        let kinds: Vec<_> = tp.regions.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![RegionKind::Barrier, RegionKind::Normal, RegionKind::Barrier]
        );
    }

    #[test]
    fn parabolic_turning_points() {
        let pb = PotentialSpec::parabolic_barrier(1.0, 1.0, 0.0, d(-3.0, 3.0)).unwrap();
        let tp = find_turning_points(&pb, 0.5).unwrap();
        let xs = tp.xs();
        assert_eq!(xs.len(), 2);
        assert!((xs[0] + 1.0).abs() < 1e-10 && (xs[1] - 1.0).abs() < 1e-10);
        assert_eq!(tp.regions[1].kind, RegionKind::Barrier);
        assert!(tp.bounded_region(RegionKind::Barrier).is_some());
    }

    #[test]
    fn no_turning_points_above_square_barrier() {
        let sq = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        let tp = find_turning_points(&sq, 2.0).unwrap();
        assert!(tp.points.is_empty());
        assert_eq!(tp.regions.len(), 1);
        assert_eq!(tp.regions[0].kind, RegionKind::Normal);
    }

    #[test]
    fn square_barrier_edges_are_turning_points() {
        let sq = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        let tp = find_turning_points(&sq, 0.5).unwrap();
        let xs = tp.xs();
        assert_eq!(xs.len(), 2);
        assert!((xs[0] + 1.0).abs() < 1e-10 && (xs[1] - 1.0).abs() < 1e-10);
        assert_eq!(tp.regions[1].kind, RegionKind::Barrier);
    }

    #[test]
    fn tangential_root_at_barrier_top() {
        // asymmetric domain so no scan node sits on the peak
        let pb = PotentialSpec::parabolic_barrier(1.0, 1.0, 0.0, d(-2.9, 3.1)).unwrap();
        let tp = find_turning_points(&pb, 1.0).unwrap();
        assert_eq!(tp.points.len(), 1);
        assert_eq!(tp.points[0].kind, RootKind::Tangential);
        assert!(tp.points[0].x.abs() < 1e-6);
        assert_eq!(tp.regions.len(), 2);
        assert!(tp.regions.iter().all(|r| r.kind == RegionKind::Normal));
    }

    #[test]
    fn close_pair_below_peak_is_resolved() {
        let pb = PotentialSpec::parabolic_barrier(1.0, 1.0, 0.0, d(-2.9, 3.1)).unwrap();
        let e = 1.0 - 1e-8;
        let tp = find_turning_points(&pb, e).unwrap();
        assert_eq!(tp.points.len(), 2);
        let expected = (2.0 * 1e-8f64).sqrt();
        assert!((tp.points[1].x - expected).abs() < 1e-9);
        assert!((tp.points[0].x + expected).abs() < 1e-9);
        assert_eq!(tp.regions[1].kind, RegionKind::Barrier);
    }

    #[test]
    fn flat_top_reports_edges() {
        let sq = PotentialSpec::square_barrier(1.0, 2.0, 0.0, d(-5.0, 5.0)).unwrap();
        let tp = find_turning_points(&sq, 1.0).unwrap();
        assert_eq!(tp.points.len(), 2);
        assert!(tp.points.iter().all(|p| p.kind == RootKind::FlatEdge));
        let flat = &tp.regions[1];
        assert!(flat.flat);
        assert_eq!(flat.kind, RegionKind::Barrier);
        assert!((flat.start + 1.0).abs() < 1e-10 && (flat.end - 1.0).abs() < 1e-10);
    }

    #[test]
    fn root_on_domain_edge() {
        let ho = PotentialSpec::harmonic_well(1.0, 0.0, d(-1.0, 1.0)).unwrap();
        let tp = find_turning_points(&ho, 0.5).unwrap();
        assert_eq!(tp.points.len(), 2);
        assert_eq!(tp.regions.len(), 1);
        assert!(tp.regions[0].is_bounded());
    }
}
