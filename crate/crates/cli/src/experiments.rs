//! Figure-style sweeps: magnetization curves, impulse responses and SER.

use log::info;
use mnpcomm::analytic::{ChannelSetup, ImpulseModel, ObservationModel};
use mnpcomm::link::{ser_binomial_no_isi, ser_monte_carlo, ser_poisson_average};
use mnpcomm::physics::{magnetization, MagnetField};
use mnpcomm::sim::{impulse_radii, simulate_impulse_with_radii};

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::table::{Cell, ResultTable};

/// Lag responses below this many particles are treated as free of ISI.
const NEGLIGIBLE_COUNT: f64 = 1e-12;

fn list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn bad_sweep(key: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: String::new(),
        reason: reason.to_string(),
    }
}

/// Table with the generator, experiment and full resolved configuration in
/// its header.
fn table_for(cfg: &ExperimentConfig, experiment: Experiment, columns: Vec<String>) -> ResultTable {
    let mut t = ResultTable::new(columns);
    t.meta("generator", concat!("mnpcomm ", env!("CARGO_PKG_VERSION")));
    t.meta("experiment", experiment);
    for (k, v) in cfg.entries(experiment) {
        t.meta(format!("config.{k}"), v);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationSweep {
    /// Core radii in m. Empty means mean − sd, mean, mean + sd.
    pub radii: Vec<f64>,
    /// Largest flux density in T.
    pub b_max: f64,
    pub points: usize,
}

impl Default for MagnetizationSweep {
    fn default() -> Self {
        Self {
            radii: Vec::new(),
            b_max: 2e-3,
            points: 201,
        }
    }
}

/// M(B) on a linear grid from 0 to `b_max`, one column per core radius.
pub fn run_magnetization_curve(cfg: &ExperimentConfig, sweep: &MagnetizationSweep) -> Result<ResultTable, ConfigError> {
    cfg.validate(Experiment::Magnetization)?;
    let setup = cfg.setup()?;
    let radii = if sweep.radii.is_empty() {
        let (m, s) = (cfg.mean_radius, cfg.sd_radius);
        [m - s, m, m + s].into_iter().filter(|&r| r > 0.0).collect()
    } else {
        sweep.radii.clone()
    };
    if sweep.points < 2 || sweep.b_max.is_nan() || sweep.b_max <= 0.0 {
        return Err(bad_sweep("b_grid", "need at least two points and b_max > 0"));
    }
    let particles = radii
        .iter()
        .map(|&r| {
            let p = setup.particle.with_core_radius(r);
            p.validate().map(|_| p)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut columns = vec!["B_T".to_string()];
    columns.extend(radii.iter().map(|r| format!("M_A_per_m_r{}nm", (r * 1e12).round() / 1e3)));
    let mut t = table_for(cfg, Experiment::Magnetization, columns);
    t.meta("sweep.radii", list(&radii));
    t.meta("sweep.b_max", format!("{:e}", sweep.b_max));
    t.meta("sweep.points", sweep.points);
    for i in 0..sweep.points {
        let b = i as f64 * sweep.b_max / (sweep.points - 1) as f64;
        let mut row: Vec<Cell> = vec![b.into()];
        row.extend(particles.iter().map(|p| magnetization(b, p, &setup.fluid).into()));
        t.push(row);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSweep {
    /// |∂B/∂z| values in T/m.
    pub gradients: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    /// Add particle-simulation mean and standard error columns.
    pub simulate: bool,
    /// Add columns with the vertical factor at its steady state.
    pub equilibrium: bool,
}

impl Default for ImpulseSweep {
    fn default() -> Self {
        Self {
            gradients: vec![5.0, 10.0, 20.0],
            t_start: 1.8,
            t_end: 2.2,
            points: 201,
            simulate: false,
            equilibrium: true,
        }
    }
}

/// Expected receiver count after one release of `n_tx` particles.
///
/// Per gradient: the size-dispersed response for the radii the simulation
/// uses, the nominal response, optionally its equilibrium approximation, and
/// optionally the simulated mean ± standard error. Times are snapped to the
/// simulation step grid.
pub fn run_impulse_response(cfg: &ExperimentConfig, sweep: &ImpulseSweep) -> Result<ResultTable, ConfigError> {
    cfg.validate(Experiment::Impulse)?;
    if sweep.gradients.is_empty() {
        return Err(bad_sweep("gradients", "need at least one gradient"));
    }
    if sweep.points < 1 || sweep.t_start.is_nan() || sweep.t_start <= 0.0 || sweep.t_end < sweep.t_start {
        return Err(bad_sweep("time_grid", "need 0 < t_start <= t_end and at least one point"));
    }
    let base = cfg.setup()?;
    let series = cfg.series()?;
    let sim = cfg.sim(Experiment::Impulse)?;

    let mut times: Vec<f64> = (0..sweep.points)
        .map(|i| {
            let t = if sweep.points == 1 {
                sweep.t_start
            } else {
                sweep.t_start + (sweep.t_end - sweep.t_start) * i as f64 / (sweep.points - 1) as f64
            };
            sim.time_of(sim.step_of(t).max(1))
        })
        .collect();
    times.dedup();

    let mut columns = vec!["t_s".to_string()];
    for g in &sweep.gradients {
        columns.push(format!("analytic_g{g}"));
        columns.push(format!("nominal_g{g}"));
        if sweep.equilibrium {
            columns.push(format!("equilibrium_g{g}"));
        }
        if sweep.simulate {
            columns.push(format!("sim_mean_g{g}"));
            columns.push(format!("sim_stderr_g{g}"));
        }
    }
    let mut t = table_for(cfg, Experiment::Impulse, columns);
    t.meta("sweep.gradients", list(&sweep.gradients));
    t.meta("sweep.t_start", format!("{:e}", sweep.t_start));
    t.meta("sweep.t_end", format!("{:e}", sweep.t_end));
    t.meta("sweep.points", sweep.points);
    t.meta("sweep.simulate", sweep.simulate);

    let radii = impulse_radii(&base, cfg.n_tx, cfg.seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for &g in &sweep.gradients {
        let setup = ChannelSetup {
            field: MagnetField::with_gradient(g)?,
            ..base
        };
        info!("impulse response at {g} T/m");
        let dispersed = ImpulseModel::from_radii(&setup, &radii, series);
        cols.push(dispersed.sample(&times)?.expected);
        let nominal = ImpulseModel::nominal(&setup, cfg.n_tx, series);
        cols.push(nominal.sample(&times)?.expected);
        if sweep.equilibrium {
            cols.push(nominal.with_equilibrium_approx(true).sample(&times)?.expected);
        }
        if sweep.simulate {
            info!("simulating {} realizations at {g} T/m", sim.n_realizations);
            let obs = simulate_impulse_with_radii(&setup, &radii, &sim, &times, false)?;
            cols.push(obs.mean_count);
            cols.push(obs.stderr_count);
        }
    }
    for (i, &time) in times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![time.into()];
        row.extend(cols.iter().map(|c| Cell::Num(c[i])));
        t.push(row);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerSweep {
    pub n_tx: Vec<usize>,
    /// Flow velocities as multiples of the configured one.
    pub flow_scales: Vec<f64>,
    /// Add Monte Carlo columns with 95% interval bounds.
    pub simulate: bool,
}

impl Default for SerSweep {
    fn default() -> Self {
        Self {
            n_tx: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            flow_scales: vec![1.0, 0.8, 1.2],
            simulate: false,
        }
    }
}

/// Symbol error rate against the number of particles per pulse, with the
/// magnet on and off, for every flow scale.
///
/// `ser_*` is the Poisson error rate averaged over equiprobable sequences,
/// which equals ½·exp(−N̄_ob(t₀)) without ISI and with ξ = 1. `binom_*` is the
/// exact no-ISI error rate ½·(1 − P̄_ob(t₀))^N_tx when ξ = 1. `mc_*` are Monte
/// Carlo estimates over `n_realizations` sequences of K symbols.
pub fn run_ser_sweep(cfg: &ExperimentConfig, sweep: &SerSweep) -> Result<ResultTable, ConfigError> {
    cfg.validate(Experiment::Ser)?;
    if sweep.n_tx.is_empty() {
        return Err(bad_sweep("n_tx_list", "need at least one particle count"));
    }
    if sweep.flow_scales.is_empty() || sweep.flow_scales.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(bad_sweep("flow_scales", "need positive flow scales"));
    }
    let base = cfg.setup()?;
    let series = cfg.series()?;
    let sim = cfg.sim(Experiment::Ser)?;
    let with_binomial = cfg.threshold == 1;

    struct Case {
        label: String,
        setup: ChannelSetup,
        per_particle: ImpulseModel,
    }
    let mut cases = Vec::new();
    for &scale in &sweep.flow_scales {
        let flowing = base.with_flow(base.flow_speed * scale);
        for (tag, field) in [("on", base.field), ("off", MagnetField::off())] {
            let setup = ChannelSetup { field, ..flowing };
            cases.push(Case {
                label: format!("{tag}_flow{scale}"),
                setup,
                per_particle: ImpulseModel::size_averaged(&setup, 1, series),
            });
        }
    }

    let mut columns = vec!["n_tx".to_string()];
    for c in &cases {
        columns.push(format!("ser_{}", c.label));
        if with_binomial {
            columns.push(format!("binom_{}", c.label));
        }
        if sweep.simulate {
            columns.push(format!("mc_{}", c.label));
            columns.push(format!("mc_{}_lo", c.label));
            columns.push(format!("mc_{}_hi", c.label));
        }
    }
    let mut t = table_for(cfg, Experiment::Ser, columns);
    t.meta(
        "sweep.n_tx",
        sweep.n_tx.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    t.meta("sweep.flow_scales", list(&sweep.flow_scales));
    t.meta("sweep.simulate", sweep.simulate);

    for &n in &sweep.n_tx {
        let mut row: Vec<Cell> = vec![n.into()];
        for c in &cases {
            let link = cfg.link(&c.setup, n)?;
            let model = |t: f64| Ok(n as f64 * c.per_particle.expected_observed(t)?);
            row.push(ser_poisson_average(&model, &link, NEGLIGIBLE_COUNT)?.into());
            if with_binomial {
                let p = c.per_particle.expected_observed(link.sample_offset)?;
                row.push(ser_binomial_no_isi(p, n).into());
            }
            if sweep.simulate {
                info!("Monte Carlo SER, {} at n_tx = {n}", c.label);
                let est = ser_monte_carlo(&link, &c.setup, &sim, sim.n_realizations as u64)?;
                row.extend([est.ser.into(), est.ci_low.into(), est.ci_high.into()]);
            }
        }
        t.push(row);
    }
    Ok(t)
}
