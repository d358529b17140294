//! On-off keying, threshold detection and symbol error rates.

use rand::Rng;
use rayon::prelude::*;

use crate::analytic::{ChannelSetup, ObservationModel};
use crate::error::{ensure_nonnegative, ensure_positive, invalid, Result};
use crate::sim::{sequence_counts, stream, SimConfig, StreamKind};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Timing and detection settings of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Symbol interval T in s.
    pub symbol_duration: f64,
    /// Sampling offset t₀ within each interval, in s.
    pub sample_offset: f64,
    /// Detection threshold ξ.
    pub threshold: u32,
    /// Particles released per `1`.
    pub n_tx: usize,
    /// Symbols per sequence K.
    pub sequence_length: usize,
}

impl LinkConfig {
    /// T = 2 s, ξ = 1, K = 10 and t₀ at the flow arrival time d/v_f.
    pub fn reference(setup: &ChannelSetup, n_tx: usize) -> Result<Self> {
        let c = Self {
            symbol_duration: 2.0,
            sample_offset: setup.arrival_time(),
            threshold: 1,
            n_tx,
            sequence_length: 10,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("symbol_duration", self.symbol_duration)?;
        ensure_positive("sample_offset", self.sample_offset)?;
        if self.threshold < 1 {
            return Err(invalid("threshold", "must be at least 1"));
        }
        if self.sequence_length < 1 {
            return Err(invalid("sequence_length", "must be at least 1"));
        }
        Ok(())
    }

    /// Sampling instant of symbol `k`.
    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.symbol_duration + self.sample_offset
    }
}

/// Threshold decision on an integer count.
pub fn detect(count: u64, threshold: u32) -> bool {
    count >= threshold as u64
}

/// Detected bits and their comparison with the transmitted ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected: Vec<bool>,
    pub errors: Vec<bool>,
    pub ser: f64,
}

impl DetectionResult {
    pub fn new(bits: &[bool], counts: &[u32], threshold: u32) -> Result<Self> {
        if bits.len() != counts.len() {
            return Err(invalid(
                "counts",
                format!("{} counts for {} symbols", counts.len(), bits.len()),
            ));
        }
        if bits.is_empty() {
            return Err(invalid("bits", "sequence must not be empty"));
        }
        let detected: Vec<bool> = counts.iter().map(|&c| detect(c as u64, threshold)).collect();
        let errors: Vec<bool> = detected.iter().zip(bits).map(|(d, b)| d != b).collect();
        let ser = errors.iter().filter(|&&e| e).count() as f64 / bits.len() as f64;
        Ok(Self { detected, errors, ser })
    }

    pub fn n_errors(&self) -> usize {
        self.errors.iter().filter(|&&e| e).count()
    }
}

/// N̄_ob at the lags `lT + t₀` for `l = 0..count`.
fn lag_responses(ir: &impl ObservationModel, link: &LinkConfig, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|l| ir.expected_observed(link.sample_time(l))).collect()
}

fn superpose(bits: &[bool], lags: &[f64]) -> Vec<f64> {
    (0..bits.len())
        .map(|k| {
            (0..=k)
                .filter(|&i| bits[i])
                .map(|i| lags[k - i])
                .sum()
        })
        .collect()
}

/// Mean received counts n̄_rx[k] = Σ_{i ≤ k} b[i]·N̄_ob((k−i)T + t₀).
pub fn expected_counts(bits: &[bool], ir: &impl ObservationModel, link: &LinkConfig) -> Result<Vec<f64>> {
    link.validate()?;
    let lags = lag_responses(ir, link, bits.len())?;
    Ok(superpose(bits, &lags))
}

/// P(N ≤ m) for N ~ Poisson(λ).
pub fn poisson_cdf(m: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let ln_lambda = lambda.ln();
    let mut ln_terms = Vec::with_capacity(m as usize + 1);
    let mut ln_term = -lambda;
    ln_terms.push(ln_term);
    for j in 1..=m {
        ln_term += ln_lambda - (j as f64).ln();
        ln_terms.push(ln_term);
    }
    let top = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ln_terms.iter().map(|&l| (l - top).exp()).sum();
    (top + sum.ln()).exp().min(1.0)
}

/// Error probability of one symbol whose count is Poisson with mean `mean`.
fn symbol_error(bit: bool, mean: f64, threshold: u32) -> f64 {
    let miss = poisson_cdf(threshold as u64 - 1, mean);
    if bit {
        miss
    } else {
        1.0 - miss
    }
}

/// SER of the given sequence with Poisson-distributed counts, averaged over
/// its symbols.
pub fn ser_poisson(bits: &[bool], ir: &impl ObservationModel, link: &LinkConfig) -> Result<f64> {
    if bits.is_empty() {
        return Err(invalid("bits", "sequence must not be empty"));
    }
    let means = expected_counts(bits, ir, link)?;
    let total: f64 = bits
        .iter()
        .zip(&means)
        .map(|(&b, &m)| symbol_error(b, m, link.threshold))
        .sum();
    Ok(total / bits.len() as f64)
}

/// Largest number of earlier symbols enumerated by [`ser_poisson_average`].
pub const MAX_ISI_MEMORY: usize = 16;

/// [`ser_poisson`] averaged over all equiprobable sequences of length K.
///
/// Earlier symbols only matter through lags whose response exceeds
/// `negligible`; the average is exact over those.
pub fn ser_poisson_average(ir: &impl ObservationModel, link: &LinkConfig, negligible: f64) -> Result<f64> {
    link.validate()?;
    ensure_nonnegative("negligible", negligible)?;
    let k_len = link.sequence_length;
    let lags = lag_responses(ir, link, k_len)?;
    let memory = lags[1..]
        .iter()
        .rposition(|&v| v > negligible)
        .map_or(0, |i| i + 1);
    if memory > MAX_ISI_MEMORY {
        return Err(invalid(
            "symbol_duration",
            format!("inter-symbol memory of {memory} symbols is too long to enumerate"),
        ));
    }
    let mut total = 0.0;
    for k in 0..k_len {
        let depth = memory.min(k);
        let mut avg = 0.0;
        for pattern in 0u32..(1 << depth) {
            let isi: f64 = (1..=depth).filter(|l| pattern >> (l - 1) & 1 == 1).map(|l| lags[l]).sum();
            avg += 0.5 * (symbol_error(false, isi, link.threshold) + symbol_error(true, isi + lags[0], link.threshold));
        }
        total += avg / (1u64 << depth) as f64;
    }
    Ok(total / k_len as f64)
}

/// SER without ISI for ξ = 1: ½·exp(−N̄_ob(t₀)).
pub fn ser_no_isi(n_ob_at_t0: f64) -> f64 {
    0.5 * (-n_ob_at_t0.max(0.0)).exp()
}

/// SER without ISI for ξ = 1 when each of `n_tx` particles is observed
/// independently with probability `p`: ½·(1 − p)^n_tx.
pub fn ser_binomial_no_isi(p: f64, n_tx: usize) -> f64 {
    0.5 * (n_tx as f64 * (-p.clamp(0.0, 1.0)).ln_1p()).exp()
}

/// Exact law of the number of successes among independent trials with the
/// given probabilities.
pub fn count_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (n, &p) in probs.iter().enumerate() {
        for j in (0..=n + 1).rev() {
            let stay = pmf[j] * (1.0 - p);
            let up = if j > 0 { pmf[j - 1] * p } else { 0.0 };
            pmf[j] = stay + up;
        }
    }
    pmf
}

/// Monte Carlo SER with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub ser: f64,
    pub errors: u64,
    pub symbols: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SerEstimate {
    pub fn from_counts(errors: u64, symbols: u64) -> Self {
        let n = symbols as f64;
        let p = errors as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            ser: p,
            errors,
            symbols,
            ci_low: if errors == 0 { 0.0 } else { (center - half).max(0.0) },
            ci_high: if errors == symbols { 1.0 } else { (center + half).min(1.0) },
        }
    }

    /// Whether `reference` lies within `k` binomial standard deviations,
    /// computed at `reference`, of the estimate.
    pub fn within_sigmas(&self, reference: f64, k: f64) -> bool {
        let sigma = (reference * (1.0 - reference) / self.symbols as f64).sqrt();
        (self.ser - reference).abs() <= k * sigma
    }
}

/// Random equiprobable bits of sequence `index`.
pub fn sequence_bits(seed: u64, index: u64, len: usize) -> Vec<bool> {
    let mut rng = stream(seed, StreamKind::Bits, index, 0);
    (0..len).map(|_| rng.random()).collect()
}

/// Simulates `n_sequences` random sequences of K symbols through the particle
/// channel, detects every symbol and reports the error rate.
///
/// Sequence `i` uses the bits from [`sequence_bits`] and realization index `i`
/// of the particle streams, so results depend only on `sim.seed`. Particles
/// that cannot change a decision are not walked vertically.
pub fn ser_monte_carlo(link: &LinkConfig, setup: &ChannelSetup, sim: &SimConfig, n_sequences: u64) -> Result<SerEstimate> {
    link.validate()?;
    setup.validate()?;
    sim.validate()?;
    if n_sequences == 0 {
        return Err(invalid("n_sequences", "must be at least 1"));
    }
    let errors: u64 = (0..n_sequences)
        .into_par_iter()
        .map(|i| {
            let bits = sequence_bits(sim.seed, i, link.sequence_length);
            let counts = sequence_counts(&bits, link, setup, sim, i, link.threshold);
            bits.iter()
                .zip(&counts)
                .filter(|&(&b, &c)| detect(c as u64, link.threshold) != b)
                .count() as u64
        })
        .sum();
    Ok(SerEstimate::from_counts(errors, n_sequences * link.sequence_length as u64))
}
