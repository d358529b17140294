use rand::Rng;

use super::{prob_obs, ChannelGeometry, ChannelSetup, SeriesControl, TransportParams};
use crate::error::{invalid, Result};
use crate::physics::sample_radii;

/// Anything that predicts the expected number of particles inside the
/// receiver a time `t` after a single release.
pub trait ObservationModel {
    fn expected_observed(&self, t: f64) -> Result<f64>;
}

impl<F> ObservationModel for F
where
    F: Fn(f64) -> Result<f64>,
{
    fn expected_observed(&self, t: f64) -> Result<f64> {
        self(t)
    }
}

/// Expected receiver count after one release, as a weighted sum of
/// per-particle observation probabilities.
#[derive(Debug, Clone)]
pub struct ImpulseModel {
    geometry: ChannelGeometry,
    series: SeriesControl,
    equilibrium_approx: bool,
    /// (transport, number of particles it stands for)
    particles: Vec<(TransportParams, f64)>,
}

impl ImpulseModel {
    /// One particle per radius; N̄(t) = Σ_i P_ob,i(t).
    pub fn from_radii(setup: &ChannelSetup, radii: &[f64], series: SeriesControl) -> Self {
        let particles = match radii.first() {
            Some(&r0) if radii.iter().all(|&r| r == r0) => vec![(setup.transport(r0), radii.len() as f64)],
            _ => radii.iter().map(|&r| (setup.transport(r), 1.0)).collect(),
        };
        Self {
            geometry: setup.geometry,
            series,
            equilibrium_approx: false,
            particles,
        }
    }

    /// All `n_tx` particles at the nominal radius; N̄(t) = N_tx·P_ob(t).
    pub fn nominal(setup: &ChannelSetup, n_tx: usize, series: SeriesControl) -> Self {
        Self {
            geometry: setup.geometry,
            series,
            equilibrium_approx: false,
            particles: vec![(setup.nominal_transport(), n_tx as f64)],
        }
    }

    /// `n_tx` times the observation probability averaged over the size
    /// distribution, by trapezoidal quadrature in ln R over ±8 standard
    /// deviations. This is the mean count when every release draws fresh radii.
    pub fn size_averaged(setup: &ChannelSetup, n_tx: usize, series: SeriesControl) -> Self {
        if setup.sizes.is_degenerate() {
            return Self::nominal(setup, n_tx, series);
        }
        const HALF_WIDTH: f64 = 8.0;
        const STEP: f64 = 0.125;
        let (mu, sigma) = setup.sizes.log_params();
        let nodes = (2.0 * HALF_WIDTH / STEP).round() as i32;
        let raw: Vec<(f64, f64)> = (0..=nodes)
            .map(|i| {
                let xi = -HALF_WIDTH + i as f64 * STEP;
                ((mu + sigma * xi).exp(), (-0.5 * xi * xi).exp())
            })
            .collect();
        let total: f64 = raw.iter().map(|&(_, w)| w).sum();
        let particles = raw
            .into_iter()
            .map(|(r, w)| (setup.transport(r), n_tx as f64 * w / total))
            .collect();
        Self {
            geometry: setup.geometry,
            series,
            equilibrium_approx: false,
            particles,
        }
    }

    /// Replace the transient vertical factor by its steady state.
    pub fn with_equilibrium_approx(mut self, on: bool) -> Self {
        self.equilibrium_approx = on;
        self
    }

    /// Number of particles represented.
    pub fn n_tx(&self) -> f64 {
        self.particles.iter().map(|&(_, w)| w).sum()
    }

    pub fn sample(&self, times: &[f64]) -> Result<ImpulseResponse> {
        let expected = times
            .iter()
            .map(|&t| self.expected_observed(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(ImpulseResponse {
            times: times.to_vec(),
            expected,
        })
    }
}

impl ObservationModel for ImpulseModel {
    fn expected_observed(&self, t: f64) -> Result<f64> {
        let mut total = 0.0;
        for (tr, weight) in &self.particles {
            total += weight * prob_obs(t, &self.geometry, tr, &self.series, self.equilibrium_approx)?;
        }
        Ok(total)
    }
}

/// Expected number of observed particles sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub times: Vec<f64>,
    pub expected: Vec<f64>,
}

impl ImpulseResponse {
    /// `(time, value)` of the largest sample.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.expected)
            .fold(None, |best: Option<(f64, f64)>, (&t, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((t, v)),
            })
    }

    /// First and last sample time at which the response exceeds `fraction`
    /// of its peak.
    pub fn support(&self, fraction: f64) -> Option<(f64, f64)> {
        let (_, peak) = self.peak()?;
        let level = fraction * peak;
        let above: Vec<f64> = self
            .times
            .iter()
            .zip(&self.expected)
            .filter(|&(_, &v)| v > level)
            .map(|(&t, _)| t)
            .collect();
        Some((*above.first()?, *above.last()?))
    }
}

/// Size-dispersed impulse response: draws `n_tx` core radii from the setup's
/// size distribution and sums their observation probabilities at `times`.
pub fn impulse_response<R: Rng + ?Sized>(
    times: &[f64],
    setup: &ChannelSetup,
    n_tx: usize,
    series: SeriesControl,
    rng: &mut R,
) -> Result<ImpulseResponse> {
    if let Some(&t) = times.iter().find(|&&t| t.is_nan() || t <= 0.0) {
        return Err(invalid("times", format!("sample times must be > 0, got {t}")));
    }
    let radii = sample_radii(&setup.sizes, n_tx, rng);
    if radii.is_empty() {
        return Ok(ImpulseResponse {
            times: times.to_vec(),
            expected: vec![0.0; times.len()],
        });
    }
    ImpulseModel::from_radii(setup, &radii, series).sample(times)
}
