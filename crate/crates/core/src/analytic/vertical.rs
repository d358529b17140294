//! Time-dependent vertical density in the reflecting strip.
//!
//! Writing `p = q·e^{−u(z−z0) − D u² t} + p_eq` with `u = v_m/(2D)` removes the
//! drift term: `q` obeys plain diffusion with Robin walls `∂_z q = −u q`, whose
//! normalized eigenfunctions are
//!
//! ```text
//! Z_n(z) = √(2 / (h (s_n² + u²))) · (s_n cos(s_n z) − u sin(s_n z)),   s_n = nπ/h
//! ```
//!
//! and the density becomes
//!
//! ```text
//! p_z(z; t) = p_eq(z) + e^{−u(z−z0)} Σ_n e^{−D(s_n² + u²) t} Z_n(z) Z_n(z0).
//! ```
//!
//! Every mode satisfies the zero-flux wall condition and integrates to zero
//! over `[0, h]`, so truncation never breaks normalization. At very short
//! times the series needs many modes; below `D t / h² <`
//! [`SMALL_TIME_SWITCH`] the profile switches to the exact reflected solution
//! on the half line bounded by the wall nearest to the release point. At that
//! scale the far wall is more than 35 diffusion lengths away.

use std::f64::consts::PI;

use super::{equilibrium_density, equilibrium_mass_below, ChannelGeometry, SeriesControl, TransportParams};
use crate::error::{Error, Result};
use crate::special::{erfc, exp_erfc};

/// Value of `D t / h²` below which the half-line reflected solution is used.
pub const SMALL_TIME_SWITCH: f64 = 1e-4;

/// Vertical particle density at one instant, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct VerticalProfile {
    time: f64,
    height: f64,
    release: f64,
    transport: TransportParams,
    shape: Shape,
}

#[derive(Debug, Clone)]
enum Shape {
    Series(Series),
    Reflected(Reflected),
}

#[derive(Debug, Clone)]
struct Series {
    u: f64,
    /// `D u² t`
    drift_decay: f64,
    /// `(s_n, e^{−D s_n² t} · 2/(h(s_n²+u²)) · (s_n cos(s_n z0) − u sin(s_n z0)))`
    modes: Vec<(f64, f64)>,
    density_tail: f64,
    mass_tail: f64,
    n_terms: usize,
    tolerance: f64,
}

/// Reflected drift–diffusion on `y ≥ 0`, `y` measured from the nearest wall.
#[derive(Debug, Clone)]
struct Reflected {
    top_wall: bool,
    /// Drift away from the wall (negative when pulled toward it).
    velocity: f64,
    start: f64,
}

impl VerticalProfile {
    pub fn new(t: f64, geom: &ChannelGeometry, tr: &TransportParams, control: &SeriesControl) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let h = geom.height;
        let z0 = geom.release_height;
        let shape = if tr.diffusion * t / (h * h) < SMALL_TIME_SWITCH {
            let top_wall = z0 >= 0.5 * h;
            Shape::Reflected(Reflected {
                top_wall,
                velocity: if top_wall { tr.drift } else { -tr.drift },
                start: if top_wall { h - z0 } else { z0 },
            })
        } else {
            Shape::Series(Series::build(t, h, z0, tr, control))
        };
        Ok(Self {
            time: t,
            height: h,
            release: z0,
            transport: *tr,
            shape,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Whether the short-time reflected solution is in use instead of the series.
    pub fn is_short_time(&self) -> bool {
        matches!(self.shape, Shape::Reflected(_))
    }

    /// Number of eigenmodes summed (zero for the short-time form).
    pub fn modes_used(&self) -> usize {
        match &self.shape {
            Shape::Series(s) => s.modes.len(),
            Shape::Reflected(_) => 0,
        }
    }

    /// Bound on the truncated density tail relative to 1/h.
    pub fn density_tail_bound(&self) -> f64 {
        match &self.shape {
            Shape::Series(s) => s.density_tail,
            Shape::Reflected(_) => 0.0,
        }
    }

    /// Density at `z`. The closed form is analytic in `z`, so it can also be
    /// evaluated slightly outside the channel, e.g. for finite differences at
    /// the walls.
    pub fn density(&self, z: f64) -> f64 {
        let tr = &self.transport;
        match &self.shape {
            Shape::Series(s) => {
                let sum: f64 = s
                    .modes
                    .iter()
                    .map(|&(k, c)| c * (k * (k * z).cos() - s.u * (k * z).sin()))
                    .sum();
                equilibrium_density(z, self.height, tr)
                    + (-s.u * (z - self.release) - s.drift_decay).exp() * sum
            }
            Shape::Reflected(r) => {
                let y = if r.top_wall { self.height - z } else { z };
                r.density(y, tr.diffusion, self.time)
            }
        }
    }

    /// Like [`density`](Self::density), but fails when the series tail exceeds
    /// the tolerance.
    pub fn density_checked(&self, z: f64) -> Result<f64> {
        if let Shape::Series(s) = &self.shape {
            s.check(s.density_tail, self.time)?;
        }
        Ok(self.density(z))
    }

    /// Probability that `z ≤ level`.
    pub fn mass_below(&self, level: f64) -> f64 {
        let tr = &self.transport;
        let mass = match &self.shape {
            Shape::Series(s) => {
                let sum: f64 = s.modes.iter().map(|&(k, c)| c * (k * level).sin()).sum();
                equilibrium_mass_below(level, self.height, tr)
                    + (-s.u * (level - self.release) - s.drift_decay).exp() * sum
            }
            Shape::Reflected(r) => {
                let d = tr.diffusion;
                if r.top_wall {
                    1.0 - r.cdf(self.height - level, d, self.time)
                } else {
                    r.cdf(level, d, self.time)
                }
            }
        };
        mass.clamp(0.0, 1.0)
    }

    /// Like [`mass_below`](Self::mass_below), but fails when the series tail
    /// exceeds the tolerance.
    pub fn mass_below_checked(&self, level: f64) -> Result<f64> {
        if let Shape::Series(s) = &self.shape {
            s.check(s.mass_tail, self.time)?;
        }
        Ok(self.mass_below(level))
    }
}

impl Series {
    fn build(t: f64, h: f64, z0: f64, tr: &TransportParams, control: &SeriesControl) -> Self {
        let d = tr.diffusion;
        let u = tr.half_drift_rate();
        let drift_decay = d * u * u * t;
        // Largest value of e^{−u(z−z0) − D u² t} over the channel, at z = 0.
        let envelope = (u * z0 - drift_decay).exp();
        let a = d * PI * PI * t / (h * h);

        let mut modes = Vec::with_capacity(control.n_terms.min(1024));
        let mut density_tail = f64::INFINITY;
        let mut mass_tail = f64::INFINITY;
        for n in 1..=control.n_terms {
            let k = n as f64 * PI / h;
            let weight = (-d * k * k * t).exp() * 2.0 / (h * (k * k + u * u));
            modes.push((k, weight * (k * (k * z0).cos() - u * (k * z0).sin())));

            // |Z_n(z) Z_n(z0)| ≤ 2/h and |L_n Z_n(z0)| ≤ 2/(nπ).
            let tail = gaussian_tail(a, n);
            density_tail = 2.0 * envelope * tail;
            mass_tail = 2.0 * envelope * tail / ((n + 1) as f64 * PI);
            if density_tail < control.tail_tolerance {
                break;
            }
        }
        Self {
            u,
            drift_decay,
            modes,
            density_tail,
            mass_tail,
            n_terms: control.n_terms,
            tolerance: control.tail_tolerance,
        }
    }

    fn check(&self, bound: f64, time: f64) -> Result<()> {
        if bound <= self.tolerance {
            Ok(())
        } else {
            Err(Error::TruncationNotConverged {
                time,
                n_terms: self.n_terms,
                tail_bound: bound,
                tolerance: self.tolerance,
            })
        }
    }
}

/// Upper bound on Σ_{m>n} e^{−a m²}: consecutive ratios never exceed
/// e^{−a(2n+3)}, so the tail is dominated by a geometric series.
fn gaussian_tail(a: f64, n: usize) -> f64 {
    let next = (n + 1) as f64;
    let ratio = (-a * (2.0 * next + 1.0)).exp();
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    (-a * next * next).exp() / (1.0 - ratio)
}

impl Reflected {
    /// Density at distance `y` from the wall:
    /// `G(y−y0−ct) + e^{−c y0/D} G(y+y0−ct) − (c/2D) e^{cy/D} erfc((y+y0+ct)/√(4Dt))`.
    fn density(&self, y: f64, d: f64, t: f64) -> f64 {
        let (c, y0) = (self.velocity, self.start);
        let four_dt = 4.0 * d * t;
        let norm = 1.0 / (PI * four_dt).sqrt();
        let direct = (-(y - y0 - c * t).powi(2) / four_dt).exp();
        let image = (-c * y0 / d - (y + y0 - c * t).powi(2) / four_dt).exp();
        let w = (y + y0 + c * t) / four_dt.sqrt();
        norm * (direct + image) - c / (2.0 * d) * exp_erfc(c * y / d, w)
    }

    /// Probability that the distance from the wall is at most `y`:
    /// `Φ((y−y0−ct)/√(2Dt)) − e^{cy/D} Φ(−(y+y0+ct)/√(2Dt))`.
    fn cdf(&self, y: f64, d: f64, t: f64) -> f64 {
        let (c, y0) = (self.velocity, self.start);
        let scale = (4.0 * d * t).sqrt();
        let direct = 0.5 * erfc(-(y - y0 - c * t) / scale);
        let image = 0.5 * exp_erfc(c * y / d, (y + y0 + c * t) / scale);
        direct - image
    }
}
