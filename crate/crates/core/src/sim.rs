//! Particle-based Monte Carlo simulation of the channel.
//!
//! Every particle performs a discrete-time Brownian walk with the flow and
//! magnetic drifts. In each step of length Δt:
//!
//! ```text
//! x ← x − v_f Δt + √(2DΔt)·N₁
//! z ← z − v_m Δt + √(2DΔt)·N₂,   then folded back into [0, h]
//! ```
//!
//! The receiver is transparent and counts whatever lies inside its patch at a
//! sampling step. Particles are never removed.
//!
//! The horizontal walk has no walls, so the position after n steps is exactly
//! Gaussian with mean `x − n v_f Δt` and variance `2Dn Δt`. The batch
//! simulators draw it directly at the sampling steps, and only walk z for
//! particles that are horizontally inside the receiver at some sampling step.
//! This leaves the joint law of the counts unchanged.
//!
//! Random streams are derived from `(seed, purpose, realization, index)`, so
//! every particle owns an independent generator and results do not depend on
//! how work is split across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::analytic::{ChannelGeometry, ChannelSetup};
use crate::error::{ensure_positive, invalid, Result};
use crate::link::LinkConfig;
use crate::physics::sample_radii;

/// Generator used for every simulation stream.
pub type StreamRng = Xoshiro256PlusPlus;

/// Purpose tags separating the stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Radii = 1,
    Particle = 2,
    Bits = 3,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for `(seed, kind, realization, index)`.
pub fn stream(seed: u64, kind: StreamKind, realization: u64, index: u64) -> StreamRng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ kind as u64);
    h = splitmix64(h ^ realization);
    h = splitmix64(h ^ index);
    StreamRng::seed_from_u64(h)
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Δt in s.
    pub time_step: f64,
    pub n_realizations: usize,
    pub seed: u64,
    /// Recording stride of [`simulate_impulse`], in steps.
    pub record_interval: usize,
}

impl SimConfig {
    pub fn new(time_step: f64, n_realizations: usize, seed: u64) -> Result<Self> {
        let c = Self {
            time_step,
            n_realizations,
            seed,
            record_interval: 1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("dt", self.time_step)?;
        if self.n_realizations == 0 {
            return Err(invalid("n_realizations", "must be at least 1"));
        }
        if self.record_interval == 0 {
            return Err(invalid("record_interval", "must be at least 1"));
        }
        Ok(())
    }

    /// Step index nearest to time `t`.
    pub fn step_of(&self, t: f64) -> u64 {
        (t / self.time_step).round().max(0.0) as u64
    }

    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.time_step
    }
}

/// Position and cached transport of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: f64,
    pub z: f64,
    pub core_radius: f64,
    pub diffusion: f64,
    pub drift: f64,
}

impl ParticleState {
    /// A particle with the given core radius at the transmitter.
    pub fn released(setup: &ChannelSetup, core_radius: f64) -> Self {
        let tr = setup.transport(core_radius);
        Self {
            x: setup.geometry.tx_distance,
            z: setup.geometry.release_height,
            core_radius,
            diffusion: tr.diffusion,
            drift: tr.drift,
        }
    }
}

/// Mirrors `z` at the walls until it lies in `[0, h]`.
#[inline]
pub fn fold_into_channel(mut z: f64, height: f64) -> f64 {
    loop {
        if z < 0.0 {
            z = -z;
        } else if z > height {
            z = 2.0 * height - z;
        } else {
            return z;
        }
    }
}

/// Advances one particle by a single time step.
pub fn step_particle<R: Rng + ?Sized>(p: &ParticleState, dt: f64, setup: &ChannelSetup, rng: &mut R) -> ParticleState {
    let spread = (2.0 * p.diffusion * dt).sqrt();
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    ParticleState {
        x: p.x - setup.flow_speed * dt + spread * n1,
        z: fold_into_channel(p.z - p.drift * dt + spread * n2, setup.geometry.height),
        ..*p
    }
}

/// Receiver counts at a set of sampling times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    /// Sampling times, snapped to the step grid, in s.
    pub sample_times: Vec<f64>,
    pub mean_count: Vec<f64>,
    /// Standard error of `mean_count` across realizations.
    pub stderr_count: Vec<f64>,
    /// Counts per realization, if requested.
    pub counts: Option<Vec<Vec<u32>>>,
    pub n_realizations: usize,
}

/// Walks a single particle released at step 0 and adds 1 to `hits[k]` for
/// every sampling step `steps[k]` (ascending) at which it is in the receiver.
///
/// Samples with `hits[k] >= cap` are treated as settled: the vertical walk is
/// skipped when only settled samples could gain a hit.
#[allow(clippy::too_many_arguments)]
fn track<R: Rng + ?Sized>(
    rng: &mut R,
    start: (f64, f64),
    diffusion: f64,
    drift: f64,
    flow: f64,
    geom: &ChannelGeometry,
    dt: f64,
    steps: &[u64],
    inside_x: &mut Vec<bool>,
    hits: &mut [u32],
    cap: u32,
) {
    let half_width = 0.5 * geom.receiver_width;
    let (mut x, mut z) = start;

    inside_x.clear();
    let mut last_step = 0u64;
    let mut last_inside = None;
    for (k, &s) in steps.iter().enumerate() {
        let n = (s - last_step) as f64;
        if n > 0.0 {
            let noise: f64 = rng.sample(StandardNormal);
            x += -flow * n * dt + (2.0 * diffusion * n * dt).sqrt() * noise;
        }
        last_step = s;
        let inside = x.abs() <= half_width;
        if inside && hits[k] < cap {
            last_inside = Some(k);
        }
        inside_x.push(inside);
    }
    let Some(last) = last_inside else {
        return;
    };

    let h = geom.height;
    let spread = (2.0 * diffusion * dt).sqrt();
    let shift = drift * dt;
    let mut step = 0u64;
    for (k, &s) in steps[..=last].iter().enumerate() {
        while step < s {
            let noise: f64 = rng.sample(StandardNormal);
            z = fold_into_channel(z - shift + spread * noise, h);
            step += 1;
        }
        debug_assert!((0.0..=h).contains(&z));
        if inside_x[k] && z <= geom.receiver_height {
            hits[k] += 1;
        }
    }
}

/// Counts for one realization of a single release of particles with the
/// given radii.
fn impulse_realization(setup: &ChannelSetup, radii: &[f64], sim: &SimConfig, steps: &[u64], realization: u64) -> Vec<u32> {
    let mut hits = vec![0u32; steps.len()];
    let mut scratch = Vec::with_capacity(steps.len());
    let geom = &setup.geometry;
    for (j, &r) in radii.iter().enumerate() {
        let p = ParticleState::released(setup, r);
        let mut rng = stream(sim.seed, StreamKind::Particle, realization, j as u64);
        track(
            &mut rng,
            (p.x, p.z),
            p.diffusion,
            p.drift,
            setup.flow_speed,
            geom,
            sim.time_step,
            steps,
            &mut scratch,
            &mut hits,
            u32::MAX,
        );
    }
    hits
}

fn summarize(per_realization: Vec<Vec<u32>>, sample_times: Vec<f64>, keep: bool) -> ObservationSeries {
    let n = per_realization.len();
    let m = sample_times.len();
    // Integer accumulation keeps the statistics independent of scheduling.
    let mut sum = vec![0u64; m];
    let mut sum_sq = vec![0u128; m];
    for row in &per_realization {
        for (k, &c) in row.iter().enumerate() {
            sum[k] += c as u64;
            sum_sq[k] += (c as u128) * (c as u128);
        }
    }
    let nf = n as f64;
    let mean_count: Vec<f64> = sum.iter().map(|&s| s as f64 / nf).collect();
    let stderr_count = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &q)| {
            if n < 2 {
                return 0.0;
            }
            // Σ(c − mean)² = Σc² − (Σc)²/n, exact in integers up to the division.
            let centered = q as f64 - (s as f64) * (s as f64) / nf;
            (centered.max(0.0) / (nf - 1.0) / nf).sqrt()
        })
        .collect();
    ObservationSeries {
        sample_times,
        mean_count,
        stderr_count,
        counts: keep.then_some(per_realization),
        n_realizations: n,
    }
}

/// Radii shared by every realization of [`simulate_impulse`] for this seed.
pub fn impulse_radii(setup: &ChannelSetup, n_tx: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, StreamKind::Radii, 0, 0);
    sample_radii(&setup.sizes, n_tx, &mut rng)
}

/// Releases `n_tx` particles at t = 0 and records the receiver count every
/// `record_interval` steps up to `horizon`, averaged over realizations.
///
/// The radii are drawn once per seed (see [`impulse_radii`]) and reused by all
/// realizations, so the mean count estimates the size-dispersed analytic
/// impulse response for the same radii.
pub fn simulate_impulse(setup: &ChannelSetup, n_tx: usize, sim: &SimConfig, horizon: f64) -> Result<ObservationSeries> {
    ensure_positive("horizon", horizon)?;
    sim.validate()?;
    let last = sim.step_of(horizon);
    let stride = sim.record_interval as u64;
    let times: Vec<f64> = (1..=last / stride).map(|i| sim.time_of(i * stride)).collect();
    let radii = impulse_radii(setup, n_tx, sim.seed);
    simulate_impulse_with_radii(setup, &radii, sim, &times, false)
}

/// Like [`simulate_impulse`] for explicit radii, sampled at the steps nearest
/// to `times` (any order; reported in ascending order).
pub fn simulate_impulse_with_radii(
    setup: &ChannelSetup,
    radii: &[f64],
    sim: &SimConfig,
    times: &[f64],
    keep_counts: bool,
) -> Result<ObservationSeries> {
    setup.validate()?;
    sim.validate()?;
    if let Some(&t) = times.iter().find(|&&t| t.is_nan() || t <= 0.0) {
        return Err(invalid("times", format!("sample times must be > 0, got {t}")));
    }
    let mut steps: Vec<u64> = times.iter().map(|&t| sim.step_of(t)).collect();
    steps.sort_unstable();
    let per_realization: Vec<Vec<u32>> = (0..sim.n_realizations as u64)
        .into_par_iter()
        .map(|r| impulse_realization(setup, radii, sim, &steps, r))
        .collect();
    let sample_times = steps.iter().map(|&s| sim.time_of(s)).collect();
    Ok(summarize(per_realization, sample_times, keep_counts))
}

/// Receiver counts n_rx[k] at the sampling instants kT + t₀ for one
/// realization of an on-off keyed sequence.
///
/// Every `1` releases a fresh batch of `n_tx` particles at kT with newly drawn
/// radii. All released particles keep moving, so earlier pulses can leak into
/// later samples.
pub fn simulate_sequence(
    bits: &[bool],
    link: &LinkConfig,
    setup: &ChannelSetup,
    sim: &SimConfig,
    realization: u64,
) -> Result<Vec<u32>> {
    if bits.is_empty() {
        return Err(invalid("bits", "sequence must not be empty"));
    }
    link.validate()?;
    setup.validate()?;
    sim.validate()?;
    Ok(sequence_counts(bits, link, setup, sim, realization, u32::MAX))
}

/// Per-symbol counts of one sequence realization. Once a symbol holds `cap`
/// hits, further hits on it are no longer simulated, so counts are exact up
/// to `cap` and never below it when the full count reaches it.
pub(crate) fn sequence_counts(
    bits: &[bool],
    link: &LinkConfig,
    setup: &ChannelSetup,
    sim: &SimConfig,
    realization: u64,
    cap: u32,
) -> Vec<u32> {
    let k_len = bits.len();
    let sample_step: Vec<u64> = (0..k_len)
        .map(|k| sim.step_of(k as f64 * link.symbol_duration + link.sample_offset))
        .collect();
    let mut counts = vec![0u32; k_len];
    let mut steps = Vec::with_capacity(k_len);
    let mut scratch = Vec::with_capacity(k_len);
    let geom = &setup.geometry;
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        let release = sim.step_of(i as f64 * link.symbol_duration);
        steps.clear();
        steps.extend(sample_step[i..].iter().map(|&s| s.saturating_sub(release)));

        let mut radius_rng = stream(sim.seed, StreamKind::Radii, realization, i as u64);
        let radii = sample_radii(&setup.sizes, link.n_tx, &mut radius_rng);
        for (j, &r) in radii.iter().enumerate() {
            let p = ParticleState::released(setup, r);
            let index = (i * link.n_tx + j) as u64;
            let mut rng = stream(sim.seed, StreamKind::Particle, realization, index);
            track(
                &mut rng,
                (p.x, p.z),
                p.diffusion,
                p.drift,
                setup.flow_speed,
                geom,
                sim.time_step,
                &steps,
                &mut scratch,
                &mut counts[i..],
                cap,
            );
        }
    }
    counts
}
