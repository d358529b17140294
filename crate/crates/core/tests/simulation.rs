//! Statistical and structural checks of the particle simulator.

use mnpcomm::analytic::{equilibrium_prob_obs_z, ChannelSetup, ImpulseModel, ObservationModel, SeriesControl};
use mnpcomm::link::LinkConfig;
use mnpcomm::physics::{MagnetField, SizeDistribution};
use mnpcomm::sim::{
    fold_into_channel, impulse_radii, simulate_impulse, simulate_impulse_with_radii, simulate_sequence, step_particle,
    stream, ParticleState, SimConfig, StreamKind,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const BINS: usize = 20;

/// Final heights of `n` independent particles after `steps` steps from the
/// top wall.
fn settle(setup: &ChannelSetup, n: usize, dt: f64, steps: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut rng = stream(99, StreamKind::Particle, 0, i as u64);
            let mut p = ParticleState::released(setup, setup.sizes.mean);
            for _ in 0..steps {
                p = step_particle(&p, dt, setup, &mut rng);
                assert!((0.0..=setup.geometry.height).contains(&p.z));
            }
            p.z
        })
        .collect()
}

/// Pearson statistic of `samples` against bin probabilities on [0, h].
fn chi_square(samples: &[f64], h: f64, probs: &[f64]) -> f64 {
    let mut observed = vec![0usize; probs.len()];
    for &z in samples {
        let bin = ((z / h * probs.len() as f64) as usize).min(probs.len() - 1);
        observed[bin] += 1;
    }
    let n = samples.len() as f64;
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum()
}

fn critical_99(dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99)
}

#[test]
fn drift_free_heights_become_uniform() {
    let setup = ChannelSetup::reference().with_flow(0.0);
    let setup = ChannelSetup {
        field: MagnetField::off(),
        ..setup
    };
    let z = settle(&setup, 10_000, 5e-3, 6_000);
    let stat = chi_square(&z, setup.geometry.height, &[1.0 / BINS as f64; BINS]);
    assert!(stat < critical_99(BINS - 1), "χ² = {stat}");
}

#[test]
fn drifted_heights_follow_the_exponential_profile() {
    let setup = ChannelSetup::reference().with_flow(0.0);
    let h = setup.geometry.height;
    let tr = setup.nominal_transport();
    let below = |c: f64| {
        if c <= 0.0 {
            return 0.0;
        }
        let mut g = setup.geometry;
        g.receiver_height = c;
        equilibrium_prob_obs_z(&g, &tr)
    };
    let probs: Vec<f64> = (0..BINS)
        .map(|i| below(h * (i + 1) as f64 / BINS as f64) - below(h * i as f64 / BINS as f64))
        .collect();
    let z = settle(&setup, 10_000, 5e-3, 6_000);
    let stat = chi_square(&z, h, &probs);
    assert!(stat < critical_99(BINS - 1), "χ² = {stat}");
}

#[test]
fn mean_horizontal_position_follows_the_flow() {
    let setup = ChannelSetup::reference();
    let (dt, steps, n) = (0.01, 100, 4_000);
    let t = dt * steps as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = stream(3, StreamKind::Particle, 1, i);
            let mut p = ParticleState::released(&setup, setup.sizes.mean);
            for _ in 0..steps {
                p = step_particle(&p, dt, &setup, &mut rng);
            }
            p.x
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let expected = setup.geometry.tx_distance - setup.flow_speed * t;
    let se = (2.0 * setup.nominal_transport().diffusion * t / n as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn whole_channel_receiver_sees_every_particle() {
    let mut setup = ChannelSetup::reference();
    setup.geometry.receiver_height = setup.geometry.height;
    setup.geometry.receiver_width = 1e3;
    let sim = SimConfig {
        record_interval: 50,
        ..SimConfig::new(2e-3, 4, 1).unwrap()
    };
    let obs = simulate_impulse(&setup, 200, &sim, 1.0).unwrap();
    assert_eq!(obs.sample_times.len(), 10);
    assert!(obs.mean_count.iter().all(|&m| m == 200.0));
    assert!(obs.stderr_count.iter().all(|&s| s == 0.0));
}

#[test]
fn without_flow_nothing_reaches_the_receiver() {
    let setup = ChannelSetup::reference().with_flow(0.0);
    let sim = SimConfig {
        record_interval: 100,
        ..SimConfig::new(2e-3, 8, 1).unwrap()
    };
    let obs = simulate_impulse(&setup, 500, &sim, 5.0).unwrap();
    assert!(obs.mean_count.iter().all(|&m| m == 0.0));
}

#[test]
fn nothing_sent_nothing_counted() {
    let setup = ChannelSetup::reference();
    let link = LinkConfig::reference(&setup, 100).unwrap();
    let sim = SimConfig::new(20e-3, 1, 5).unwrap();
    let counts = simulate_sequence(&[false; 3], &link, &setup, &sim, 0).unwrap();
    assert_eq!(counts, vec![0, 0, 0]);
    assert!(simulate_sequence(&[], &link, &setup, &sim, 0).is_err());
}

#[test]
fn single_pulse_matches_the_impulse_run() {
    let setup = ChannelSetup::reference().with_gradient(20.0);
    let link = LinkConfig::reference(&setup, 300).unwrap();
    let sim = SimConfig::new(2e-3, 1, 17).unwrap();
    let seq = simulate_sequence(&[true], &link, &setup, &sim, 0).unwrap();
    let radii = impulse_radii(&setup, 300, sim.seed);
    let imp = simulate_impulse_with_radii(&setup, &radii, &sim, &[link.sample_offset], true).unwrap();
    assert_eq!(imp.counts.unwrap()[0][0], seq[0]);
    assert!(seq[0] > 0);
}

#[test]
fn pulses_do_not_leak_into_the_next_symbol() {
    let setup = ChannelSetup::reference();
    let link = LinkConfig::reference(&setup, 1000).unwrap();
    let sim = SimConfig::new(20e-3, 1, 2).unwrap();
    for r in 0..5 {
        let counts = simulate_sequence(&[true, false], &link, &setup, &sim, r).unwrap();
        assert!(counts[0] > 0);
        assert_eq!(counts[1], 0);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let setup = ChannelSetup::reference().with_gradient(20.0);
    let sim = SimConfig::new(2e-3, 24, 8).unwrap();
    let radii = impulse_radii(&setup, 200, sim.seed);
    let times = [1.95, 2.0, 2.05];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_impulse_with_radii(&setup, &radii, &sim, &times, true).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, simulate_impulse_with_radii(&setup, &radii, &sim, &times, true).unwrap());
    let other = simulate_impulse_with_radii(&setup, &radii, &SimConfig { seed: 9, ..sim }, &times, true).unwrap();
    assert_ne!(one.counts, other.counts);
}

#[test]
fn impulse_mean_agrees_with_the_analytic_response() {
    let setup = ChannelSetup::reference().with_gradient(20.0);
    let sim = SimConfig::new(2e-3, 300, 4).unwrap();
    let radii = impulse_radii(&setup, 1000, sim.seed);
    let times = [1.96, 2.0, 2.04, 2.08];
    let obs = simulate_impulse_with_radii(&setup, &radii, &sim, &times, false).unwrap();
    let model = ImpulseModel::from_radii(&setup, &radii, SeriesControl::default());
    for ((t, m), se) in obs.sample_times.iter().zip(&obs.mean_count).zip(&obs.stderr_count) {
        let want = model.expected_observed(*t).unwrap();
        assert!((m - want).abs() < 4.0 * se.max(1e-9), "t={t}: {m} ± {se} vs {want}");
    }
}

#[test]
fn degenerate_sizes_share_one_radius() {
    let mut setup = ChannelSetup::reference();
    setup.sizes = SizeDistribution::fixed(50e-9);
    assert!(impulse_radii(&setup, 10, 1).iter().all(|&r| r == 50e-9));
}

#[test]
fn invalid_inputs_are_rejected() {
    let setup = ChannelSetup::reference();
    let sim = SimConfig::new(2e-3, 1, 1).unwrap();
    assert!(simulate_impulse(&setup, 10, &sim, 0.0).is_err());
    assert!(simulate_impulse_with_radii(&setup, &[50e-9], &sim, &[-1.0], false).is_err());
    let mut bad = setup;
    bad.geometry.receiver_height = 2.0 * bad.geometry.height;
    assert!(simulate_impulse(&bad, 10, &sim, 1.0).is_err());
}

proptest! {
    #[test]
    fn folding_always_lands_inside(z in -50e-6f64..60e-6, h in 1e-6f64..20e-6) {
        let f = fold_into_channel(z, h);
        prop_assert!((0.0..=h).contains(&f));
        if (0.0..=h).contains(&z) {
            prop_assert_eq!(f, z);
        }
    }

    #[test]
    fn steps_stay_in_the_channel(seed in any::<u64>(), dt in 1e-4f64..20.0, gradient in 0.0f64..40.0) {
        let setup = ChannelSetup::reference().with_gradient(gradient);
        let mut rng = stream(seed, StreamKind::Particle, 0, 0);
        let mut p = ParticleState::released(&setup, 50e-9);
        for _ in 0..200 {
            p = step_particle(&p, dt, &setup, &mut rng);
            prop_assert!((0.0..=setup.geometry.height).contains(&p.z));
        }
    }
}
