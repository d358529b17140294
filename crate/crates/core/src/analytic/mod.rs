//! Closed-form particle statistics for the bounded two-dimensional channel.
//!
//! The channel is the strip `0 ≤ z ≤ h`, unbounded in x, with reflecting
//! walls. The transmitter releases particles at `(d, z0)`; fluid flow carries
//! them toward −x at `v_f` and the magnet pulls them toward `z = 0` at `v_m`.
//! The receiver is the transparent patch `|x| ≤ c_x/2, 0 ≤ z ≤ c_z`.
//!
//! Horizontal and vertical motion are independent, so the position density
//! factorizes as `p(x, z; t) = p_x(x; t) p_z(z; t)`:
//!
//! * `p_x` is a Gaussian with mean `d − v_f t` and variance `2Dt`;
//! * `p_z` solves the drift–diffusion equation with zero-flux walls. It is the
//!   exponential steady state plus an eigenfunction series that decays in time
//!   (see [`VerticalProfile`]).
//!
//! Speeds are stored as nonnegative magnitudes; their directions are fixed by
//! the geometry.

mod impulse;
mod vertical;

pub use impulse::{impulse_response, ImpulseModel, ImpulseResponse, ObservationModel};
pub use vertical::{VerticalProfile, SMALL_TIME_SWITCH};

use std::f64::consts::PI;

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};
use crate::physics::{
    diffusion_coefficient, drift_velocity, FluidEnvironment, MagnetField, ParticleModel, SizeDistribution,
};
use crate::special::{erf, erfc};

/// Below this value of `v_m h / D` the steady state is taken as uniform.
const UNIFORM_LIMIT: f64 = 1e-8;

/// Channel and receiver dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    /// Channel height h in m.
    pub height: f64,
    /// Horizontal transmitter position d in m.
    pub tx_distance: f64,
    /// Release height z0 in m; the transmitter sits on the top wall by default.
    pub release_height: f64,
    /// Receiver width c_x in m.
    pub receiver_width: f64,
    /// Receiver height c_z in m.
    pub receiver_height: f64,
}

impl ChannelGeometry {
    /// Geometry with the transmitter on the top wall (z0 = h).
    pub fn new(height: f64, tx_distance: f64, receiver_width: f64, receiver_height: f64) -> Result<Self> {
        let g = Self {
            height,
            tx_distance,
            release_height: height,
            receiver_width,
            receiver_height,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_release_height(mut self, z0: f64) -> Result<Self> {
        self.release_height = z0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("height", self.height)?;
        ensure_nonnegative("distance", self.tx_distance)?;
        ensure_positive("receiver_width", self.receiver_width)?;
        ensure_positive("receiver_height", self.receiver_height)?;
        if self.receiver_height > self.height {
            return Err(invalid(
                "receiver_height",
                format!(
                    "receiver height {} m exceeds channel height {} m",
                    self.receiver_height, self.height
                ),
            ));
        }
        if !(0.0..=self.height).contains(&self.release_height) {
            return Err(invalid(
                "release_height",
                format!("must lie in [0, {}] m, got {}", self.height, self.release_height),
            ));
        }
        Ok(())
    }

    /// Whether `(x, z)` lies inside the receiver patch.
    #[inline]
    pub fn in_receiver(&self, x: f64, z: f64) -> bool {
        x.abs() <= 0.5 * self.receiver_width && z <= self.receiver_height
    }

    fn check_z(&self, z: f64) -> Result<()> {
        if (0.0..=self.height).contains(&z) {
            Ok(())
        } else {
            Err(Error::OutOfChannel { z, height: self.height })
        }
    }
}

/// Diffusion and drift of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// D in m²/s.
    pub diffusion: f64,
    /// Flow speed v_f toward −x, m/s.
    pub flow_speed: f64,
    /// Magnetic drift v_m toward z = 0, m/s.
    pub drift: f64,
}

impl TransportParams {
    pub fn new(diffusion: f64, flow_speed: f64, drift: f64) -> Result<Self> {
        let t = Self {
            diffusion,
            flow_speed,
            drift,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("diffusion", self.diffusion)?;
        ensure_nonnegative("flow_velocity", self.flow_speed)?;
        ensure_nonnegative("drift", self.drift)
    }

    /// u = v_m / (2D), in 1/m.
    pub fn half_drift_rate(&self) -> f64 {
        self.drift / (2.0 * self.diffusion)
    }

    /// Péclet number v_m·L/D of the magnetic drift over length `len`.
    pub fn drift_peclet(&self, len: f64) -> f64 {
        self.drift * len / self.diffusion
    }
}

/// Truncation of the eigenfunction series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Maximum number of eigenmodes.
    pub n_terms: usize,
    /// Bound on the neglected tail, relative to 1/h for densities and
    /// absolute for probabilities.
    pub tail_tolerance: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            n_terms: 500,
            tail_tolerance: 1e-9,
        }
    }
}

impl SeriesControl {
    pub fn new(n_terms: usize, tail_tolerance: f64) -> Result<Self> {
        let s = Self {
            n_terms,
            tail_tolerance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0 {
            return Err(invalid("n_terms", "must be at least 1"));
        }
        ensure_positive("tail_tolerance", self.tail_tolerance)
    }
}

/// Everything needed to turn a core radius into channel transport: fluid,
/// magnet, particle material, size distribution, geometry and flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSetup {
    pub fluid: FluidEnvironment,
    pub field: MagnetField,
    /// Particle material; `core_radius` is the nominal size.
    pub particle: ParticleModel,
    pub sizes: SizeDistribution,
    pub geometry: ChannelGeometry,
    /// v_f in m/s.
    pub flow_speed: f64,
}

impl ChannelSetup {
    /// Default system: water at 300 K, 50 ± 10 nm magnetite-like cores with
    /// 1 nm coating, 5 T/m gradient, 10 µm channel, 1 mm link, 0.1 mm × 1 µm
    /// receiver, 0.5 mm/s flow.
    pub fn reference() -> Self {
        Self {
            fluid: FluidEnvironment {
                viscosity: 1e-3,
                temperature: 300.0,
            },
            field: MagnetField {
                gradient: 5.0,
                magnitude: 0.0,
            },
            particle: ParticleModel {
                core_radius: 50e-9,
                coating_thickness: 1e-9,
                saturation_magnetization: 5e5,
            },
            sizes: SizeDistribution {
                mean: 50e-9,
                sd: 10e-9,
            },
            geometry: ChannelGeometry {
                height: 10e-6,
                tx_distance: 1e-3,
                release_height: 10e-6,
                receiver_width: 0.1e-3,
                receiver_height: 1e-6,
            },
            flow_speed: 0.5e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        self.field.validate()?;
        self.particle.validate()?;
        self.sizes.validate()?;
        self.geometry.validate()?;
        ensure_nonnegative("flow_velocity", self.flow_speed)
    }

    pub fn with_gradient(mut self, gradient: f64) -> Self {
        self.field.gradient = gradient;
        self
    }

    pub fn with_flow(mut self, flow_speed: f64) -> Self {
        self.flow_speed = flow_speed;
        self
    }

    /// Transport of a particle with the given core radius.
    pub fn transport(&self, core_radius: f64) -> TransportParams {
        let p = self.particle.with_core_radius(core_radius);
        TransportParams {
            diffusion: diffusion_coefficient(&p, &self.fluid),
            flow_speed: self.flow_speed,
            drift: drift_velocity(&p, &self.field, &self.fluid),
        }
    }

    /// Transport at the nominal (mean) core radius.
    pub fn nominal_transport(&self) -> TransportParams {
        self.transport(self.sizes.mean)
    }

    /// Time at which the mean horizontal position reaches the receiver, d / v_f.
    pub fn arrival_time(&self) -> f64 {
        self.geometry.tx_distance / self.flow_speed
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Horizontal position density p_x(x; t), in 1/m.
pub fn pdf_x(x: f64, t: f64, geom: &ChannelGeometry, tr: &TransportParams) -> Result<f64> {
    check_time(t)?;
    let var2 = 4.0 * tr.diffusion * t;
    let dx = x - (geom.tx_distance - tr.flow_speed * t);
    Ok((-dx * dx / var2).exp() / (PI * var2).sqrt())
}

/// Probability that the horizontal coordinate lies within the receiver width.
pub fn prob_obs_x(t: f64, geom: &ChannelGeometry, tr: &TransportParams) -> Result<f64> {
    check_time(t)?;
    let scale = (4.0 * tr.diffusion * t).sqrt();
    let mean = geom.tx_distance - tr.flow_speed * t;
    let hi = (mean + 0.5 * geom.receiver_width) / scale;
    let lo = (mean - 0.5 * geom.receiver_width) / scale;
    // Difference of complementary tails where both limits sit on one side,
    // so that far-tail probabilities keep their relative precision.
    let p = if lo > 0.0 {
        0.5 * (erfc(lo) - erfc(hi))
    } else if hi < 0.0 {
        0.5 * (erfc(-hi) - erfc(-lo))
    } else {
        0.5 * (erf(hi) - erf(lo))
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Steady-state vertical density p_eq(z) = κ e^{−κz} / (1 − e^{−κh}), κ = v_m/D.
pub fn equilibrium_pdf_z(z: f64, geom: &ChannelGeometry, tr: &TransportParams) -> Result<f64> {
    geom.check_z(z)?;
    Ok(equilibrium_density(z, geom.height, tr))
}

pub(crate) fn equilibrium_density(z: f64, height: f64, tr: &TransportParams) -> f64 {
    let kappa = tr.drift / tr.diffusion;
    if kappa * height < UNIFORM_LIMIT {
        return 1.0 / height;
    }
    kappa * (-kappa * z).exp() / -(-kappa * height).exp_m1()
}

/// Steady-state probability of lying below the receiver height,
/// (1 − e^{−κ c_z}) / (1 − e^{−κ h}).
pub fn equilibrium_prob_obs_z(geom: &ChannelGeometry, tr: &TransportParams) -> f64 {
    equilibrium_mass_below(geom.receiver_height, geom.height, tr)
}

pub(crate) fn equilibrium_mass_below(level: f64, height: f64, tr: &TransportParams) -> f64 {
    let kappa = tr.drift / tr.diffusion;
    if kappa * height < UNIFORM_LIMIT {
        return level / height;
    }
    ((-kappa * level).exp_m1() / (-kappa * height).exp_m1()).min(1.0)
}

/// Time-dependent vertical density p_z(z; t), in 1/m.
pub fn pdf_z(z: f64, t: f64, geom: &ChannelGeometry, tr: &TransportParams, series: &SeriesControl) -> Result<f64> {
    geom.check_z(z)?;
    let profile = VerticalProfile::new(t, geom, tr, series)?;
    Ok(profile.density(z))
}

/// Probability that the vertical coordinate lies within the receiver height.
pub fn prob_obs_z(t: f64, geom: &ChannelGeometry, tr: &TransportParams, series: &SeriesControl) -> Result<f64> {
    let profile = VerticalProfile::new(t, geom, tr, series)?;
    profile.mass_below_checked(geom.receiver_height)
}

/// Probability of observing a particle inside the receiver at time `t`.
///
/// With `equilibrium_approx` the vertical factor is replaced by its steady
/// state, which is accurate once the vertical profile has relaxed before the
/// particles pass the receiver.
pub fn prob_obs(
    t: f64,
    geom: &ChannelGeometry,
    tr: &TransportParams,
    series: &SeriesControl,
    equilibrium_approx: bool,
) -> Result<f64> {
    let px = prob_obs_x(t, geom, tr)?;
    let pz = if equilibrium_approx {
        equilibrium_prob_obs_z(geom, tr)
    } else {
        prob_obs_z(t, geom, tr, series)?
    };
    Ok(px * pz)
}
