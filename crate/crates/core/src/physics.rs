//! Per-particle physics of superparamagnetic nanoparticles suspended in a fluid.
//!
//! A particle is a magnetic core of radius `R_m` wrapped in a non-magnetic
//! coating of thickness `R_c`, so that its hydrodynamic radius is
//! `R_h = R_m + R_c`. Under a constant field gradient the particle reaches the
//! Stokes terminal velocity almost instantly, so its motion is a diffusion with
//! constant drift:
//!
//! | quantity | expression |
//! |----------|------------|
//! | core volume | `V_m = 4/3 π R_m³` |
//! | magnetization | `M(B) = M_s L(V_m M_s B / (k_B T_f))` |
//! | magnetic force | `F_m = V_m M_s |∂B/∂z|` toward the magnet |
//! | drift speed | `v_m = F_m / (6π η R_h) = 2 M_s R_m³ |∂B/∂z| / (9 η R_h)` |
//! | diffusion coefficient | `D = k_B T_f / (6π η R_h)` |
//!
//! The channel models assume a saturated particle (`M = M_s`); [`magnetization`]
//! exists to check that assumption.
//!
//! All quantities are SI. The Boltzmann constant is the exact 2019 SI value
//! [`BOLTZMANN`] = 1.380649e-23 J/K.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use std::f64::consts::PI;

use crate::error::{ensure_nonnegative, ensure_positive, Result};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Below this argument the Langevin function is evaluated from its Taylor series.
const LANGEVIN_SERIES_CUTOFF: f64 = 0.05;

/// Viscosity and temperature of the carrier fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidEnvironment {
    /// Dynamic viscosity η in kg·m⁻¹·s⁻¹.
    pub viscosity: f64,
    /// Absolute temperature T_f in K.
    pub temperature: f64,
}

impl FluidEnvironment {
    pub fn new(viscosity: f64, temperature: f64) -> Result<Self> {
        let env = Self {
            viscosity,
            temperature,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("eta", self.viscosity)?;
        ensure_positive("temperature", self.temperature)
    }

    /// Thermal energy k_B T_f in J.
    pub fn thermal_energy(&self) -> f64 {
        BOLTZMANN * self.temperature
    }

    /// Stokes friction coefficient 6πηR for a sphere of radius `radius`.
    pub fn stokes_friction(&self, radius: f64) -> f64 {
        6.0 * PI * self.viscosity * radius
    }
}

/// External magnetic field, linearized across the channel height.
///
/// The field magnitude grows toward the magnet below the channel, so the
/// gradient points in the negative z-direction. Only its magnitude is stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetField {
    /// |∂B/∂z| in T/m.
    pub gradient: f64,
    /// Flux density B in T. Only used to evaluate magnetization curves.
    pub magnitude: f64,
}

impl MagnetField {
    pub fn new(gradient: f64, magnitude: f64) -> Result<Self> {
        let field = Self {
            gradient,
            magnitude,
        };
        field.validate()?;
        Ok(field)
    }

    /// A field described only by its gradient, as used by the channel models.
    pub fn with_gradient(gradient: f64) -> Result<Self> {
        Self::new(gradient, 0.0)
    }

    /// No magnet.
    pub fn off() -> Self {
        Self {
            gradient: 0.0,
            magnitude: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_nonnegative("field_gradient", self.gradient)?;
        ensure_nonnegative("field_magnitude", self.magnitude)
    }

    /// Signed ∂B/∂z. Negative, since the field increases toward z = 0.
    pub fn signed_gradient(&self) -> f64 {
        -self.gradient
    }
}

/// A single core–shell nanoparticle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleModel {
    /// Magnetic core radius R_m in m.
    pub core_radius: f64,
    /// Coating thickness R_c in m.
    pub coating_thickness: f64,
    /// Saturation magnetization M_s in A/m.
    pub saturation_magnetization: f64,
}

impl ParticleModel {
    pub fn new(core_radius: f64, coating_thickness: f64, saturation_magnetization: f64) -> Result<Self> {
        let p = Self {
            core_radius,
            coating_thickness,
            saturation_magnetization,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("mean_radius", self.core_radius)?;
        ensure_nonnegative("coating_thickness", self.coating_thickness)?;
        ensure_positive("saturation_magnetization", self.saturation_magnetization)
    }

    /// Same coating and material, different core radius.
    pub fn with_core_radius(&self, core_radius: f64) -> Self {
        Self {
            core_radius,
            ..*self
        }
    }

    /// R_h = R_m + R_c.
    pub fn hydrodynamic_radius(&self) -> f64 {
        self.core_radius + self.coating_thickness
    }

    /// V_m = 4/3 π R_m³.
    pub fn core_volume(&self) -> f64 {
        let r = self.core_radius;
        4.0 / 3.0 * PI * r * r * r
    }
}

/// Log-normal distribution of the magnetic core radius.
///
/// `mean` and `sd` are the arithmetic mean and standard deviation of the radius
/// itself. The parameters of the underlying normal follow by moment matching:
/// `σ² = ln(1 + sd²/mean²)` and `μ = ln(mean) − σ²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeDistribution {
    /// Mean radius m_R in m.
    pub mean: f64,
    /// Standard deviation s_R in m.
    pub sd: f64,
}

impl SizeDistribution {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let d = Self { mean, sd };
        d.validate()?;
        Ok(d)
    }

    /// Every particle has radius `radius`.
    pub fn fixed(radius: f64) -> Self {
        Self {
            mean: radius,
            sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("mean_radius", self.mean)?;
        ensure_nonnegative("sd_radius", self.sd)
    }

    pub fn is_degenerate(&self) -> bool {
        self.sd == 0.0
    }

    /// `(μ, σ)` of ln R.
    pub fn log_params(&self) -> (f64, f64) {
        let var = (self.sd / self.mean).powi(2).ln_1p();
        (self.mean.ln() - 0.5 * var, var.sqrt())
    }
}

/// Langevin function L(s) = coth(s) − 1/s, extended as an odd function.
pub fn langevin(s: f64) -> f64 {
    let a = s.abs();
    if a < LANGEVIN_SERIES_CUTOFF {
        let s2 = s * s;
        // s/3 − s³/45 + 2s⁵/945
        s * (1.0 / 3.0 - s2 * (1.0 / 45.0 - s2 * (2.0 / 945.0)))
    } else {
        s.signum() * (1.0 / a.tanh() - 1.0 / a)
    }
}

/// Dimensionless Langevin argument V_m M_s B / (k_B T_f).
pub fn langevin_argument(field_magnitude: f64, particle: &ParticleModel, env: &FluidEnvironment) -> f64 {
    particle.core_volume() * particle.saturation_magnetization * field_magnitude / env.thermal_energy()
}

/// Average magnetization M(B) along the field, in A/m.
pub fn magnetization(field_magnitude: f64, particle: &ParticleModel, env: &FluidEnvironment) -> f64 {
    particle.saturation_magnetization * langevin(langevin_argument(field_magnitude, particle, env))
}

/// z-component of the magnetic force on a saturated particle, in N.
///
/// Negative: the force points toward the magnet at z = 0.
pub fn magnetic_force(particle: &ParticleModel, field: &MagnetField) -> f64 {
    -particle.core_volume() * particle.saturation_magnetization * field.gradient
}

/// Magnetophoretic drift speed toward the magnet, in m/s.
pub fn drift_velocity(particle: &ParticleModel, field: &MagnetField, env: &FluidEnvironment) -> f64 {
    let r = particle.core_radius;
    2.0 * particle.saturation_magnetization / (9.0 * env.viscosity) * r * r * r
        / particle.hydrodynamic_radius()
        * field.gradient
}

/// Stokes–Einstein diffusion coefficient, in m²/s.
pub fn diffusion_coefficient(particle: &ParticleModel, env: &FluidEnvironment) -> f64 {
    env.thermal_energy() / env.stokes_friction(particle.hydrodynamic_radius())
}

/// Draws `n` i.i.d. core radii.
pub fn sample_radii<R: Rng + ?Sized>(dist: &SizeDistribution, n: usize, rng: &mut R) -> Vec<f64> {
    if dist.is_degenerate() {
        return vec![dist.mean; n];
    }
    let (mu, sigma) = dist.log_params();
    let law = LogNormal::new(mu, sigma).expect("validated log-normal parameters");
    law.sample_iter(rng).take(n).collect()
}
