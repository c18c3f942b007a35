//! Experiments behind the subcommands and verification suites.
//!
//! Replicate `r` of batch `b` draws its tree from the stream
//! `(Branching, b, r)` and its initial values from `(InitialValues, b, r)`.

use kinetic_core::branching::{
    biggins_martingale, simulate_population, BranchingConfig, MartingaleReadout, PopulationState,
};
use kinetic_core::fixed_point::{dinf_from_martingale, validate_pool, IterationSummary, PoolMap};
use kinetic_core::initial_laws::InitialLaw;
use kinetic_core::numeric::RunningMoments;
use kinetic_core::rng::{Purpose, StreamRng, Streams};
use kinetic_core::solver::{empirical_cf, rescaled_sample, smoothing_sample, EcfEstimate, XiGrid};
use kinetic_core::spectral::{SpectralProfile, WeightModel};
use kinetic_core::stats::median;

use crate::config::{ExperimentConfig, Statistic};
use crate::error::{KineticError, Result};
use crate::parallel::Runner;
use crate::table::{fmt_f64, Header, Table};

/// Validated configuration plus the worker pool.
#[derive(Debug)]
pub struct Context {
    pub config: ExperimentConfig,
    pub runner: Runner,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let runner = Runner::new(config.workers)?;
        Ok(Self { config, runner })
    }

    pub fn streams(&self) -> Streams {
        self.config.streams()
    }

    pub fn header(&self) -> Header {
        self.config.header()
    }

    /// Runs `replicates` trajectories and applies `f` to each; replicates
    /// that exceed the particle cap are counted and dropped.
    pub fn trajectories<T, F>(&self, batch: u32, replicates: u64, tree: &BranchingConfig, f: F) -> Result<Batch<T>>
    where
        T: Send,
        F: Fn(&[PopulationState], &mut StreamRng) -> Result<T> + Sync + Send,
    {
        let streams = self.streams();
        let results = self.runner.map(replicates, |r| {
            let mut rng = streams.substream(Purpose::Branching, batch, r);
            match simulate_population(tree, &mut rng) {
                Ok(states) => {
                    let mut x_rng = streams.substream(Purpose::InitialValues, batch, r);
                    f(&states, &mut x_rng).map(Some)
                }
                Err(kinetic_core::Error::CapExceeded { .. }) => Ok(None),
                Err(e) => Err(KineticError::from(e)),
            }
        });
        let mut ok = Vec::with_capacity(results.len());
        let mut aborted = 0;
        for r in results {
            match r? {
                Some(v) => ok.push(v),
                None => aborted += 1,
            }
        }
        if ok.is_empty() {
            return Err(KineticError::AllAborted(replicates));
        }
        Ok(Batch { ok, aborted })
    }
}

/// Results of the replicates that finished.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub ok: Vec<T>,
    pub aborted: u64,
}

fn moments(values: impl IntoIterator<Item = f64>) -> RunningMoments {
    let mut m = RunningMoments::new();
    values.into_iter().for_each(|x| m.push(x));
    m
}

/// Spectral profile and a table of `Φ(s)`, `μ(s)`.
pub fn spectral_table(config: &ExperimentConfig) -> Result<(SpectralProfile, Table)> {
    let model = config.weight_model()?;
    let profile = config.profile()?;
    let grid = config.s_grid.unwrap_or(crate::config::GridSpec {
        min: 0.0,
        max: (3.0 * profile.gamma_star).min(profile.s_infinity),
        points: 61,
    });
    let mut table = Table::new(format!("spectral_{}", config.label()), &["s", "phi", "mu"]);
    table
        .meta("gamma_star", fmt_f64(profile.gamma_star))
        .meta("phi_gamma_star", fmt_f64(profile.phi_at))
        .meta("mu_gamma_star", fmt_f64(profile.mu_at))
        .meta("phi_second_gamma_star", fmt_f64(profile.phi_second_at))
        .meta("c_gamma", fmt_f64(profile.c_gamma));
    let n = grid.points - 1;
    for j in 0..grid.points {
        let s = if j == n { grid.max } else { grid.min + (grid.max - grid.min) * j as f64 / n as f64 };
        let phi = if s < profile.s_infinity { model.phi(s)? } else { f64::INFINITY };
        table.push_f64(&[s, phi, phi / s]);
    }
    Ok((profile, table))
}

/// Martingale observables of one replicate at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub readout: MartingaleReadout,
    pub split_count: u64,
    pub population: usize,
    pub identity_holds: bool,
    pub pruned_mass: f64,
}

/// Martingale observables of a batch, indexed `[checkpoint][replicate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRun {
    pub profile: SpectralProfile,
    pub times: Vec<f64>,
    pub observations: Vec<Vec<Observation>>,
    /// `M_t(γ)` at the extra exponents, indexed `[gamma][checkpoint][replicate]`.
    pub biggins: Vec<Vec<Vec<f64>>>,
    pub gammas: Vec<f64>,
    pub aborted: u64,
}

/// Runs `config.replicates` trajectories to `config.times`.
pub fn martingale_run(ctx: &Context, gammas: &[f64]) -> Result<MartingaleRun> {
    let cfg = &ctx.config;
    let times = cfg.require_times()?.to_vec();
    let profile = cfg.profile()?;
    let model = cfg.weight_model()?;
    let tree = cfg.branching(&times, &profile)?;
    let children = model.children();
    let phis = gammas.iter().map(|&g| model.phi(g)).collect::<std::result::Result<Vec<_>, _>>()?;
    let batch = ctx.trajectories(0, cfg.replicates, &tree, |states, _| {
        let obs: Vec<Observation> = states
            .iter()
            .map(|s| Observation {
                readout: MartingaleReadout::read(s, &profile),
                split_count: s.split_count,
                population: s.population(),
                identity_holds: s.satisfies_population_identity(children),
                pruned_mass: s.pruned_mass,
            })
            .collect();
        let m: Vec<Vec<f64>> = gammas
            .iter()
            .zip(&phis)
            .map(|(&g, &p)| states.iter().map(|s| biggins_martingale(s, g, p)).collect())
            .collect();
        Ok((obs, m))
    })?;
    let k = times.len();
    let mut observations = vec![Vec::with_capacity(batch.ok.len()); k];
    let mut biggins = vec![vec![Vec::with_capacity(batch.ok.len()); k]; gammas.len()];
    for (obs, m) in batch.ok {
        for (j, o) in obs.into_iter().enumerate() {
            observations[j].push(o);
        }
        for (g, per_t) in m.into_iter().enumerate() {
            for (j, v) in per_t.into_iter().enumerate() {
                biggins[g][j].push(v);
            }
        }
    }
    Ok(MartingaleRun { profile, times, observations, biggins, gammas: gammas.to_vec(), aborted: batch.aborted })
}

/// Per-checkpoint summary of a [`MartingaleRun`].
pub fn simulate_table(run: &MartingaleRun, label: &str) -> Table {
    let mut table = Table::new(
        format!("simulate_{label}"),
        &[
            "t",
            "mean_M",
            "stderr_M",
            "mean_D",
            "stderr_D",
            "mean_secmom",
            "median_sqrt_t_max",
            "n_ok",
            "n_aborted",
            "stderr_secmom",
            "mean_pruned_mass",
        ],
    );
    table
        .meta("gamma_star", fmt_f64(run.profile.gamma_star))
        .meta("aborted", "replicates over the particle cap are excluded from every row");
    for (j, &t) in run.times.iter().enumerate() {
        let obs = &run.observations[j];
        let m = moments(obs.iter().map(|o| o.readout.biggins));
        let d = moments(obs.iter().map(|o| o.readout.derivative));
        let sec = moments(obs.iter().map(|o| o.readout.second_moment));
        let pruned = moments(obs.iter().map(|o| o.pruned_mass));
        let tops: Vec<f64> = obs.iter().map(|o| t.sqrt() * o.readout.max_norm_weight).collect();
        let med = median(&tops).unwrap_or(f64::NAN);
        table.push(vec![
            fmt_f64(t),
            fmt_f64(m.mean()),
            fmt_f64(m.stderr()),
            fmt_f64(d.mean()),
            fmt_f64(d.stderr()),
            fmt_f64(sec.mean()),
            fmt_f64(med),
            obs.len().to_string(),
            run.aborted.to_string(),
            fmt_f64(sec.stderr()),
            fmt_f64(pruned.mean()),
        ]);
    }
    table
}

/// Monte Carlo samples of the configured statistic, indexed
/// `[checkpoint][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    /// `M_t(γ*)` per checkpoint and trajectory.
    pub biggins: Vec<Vec<f64>>,
    pub pruned_mass: Vec<Vec<f64>>,
    pub aborted: u64,
}

/// `samples_per_trajectory` samples per finished trajectory of batch
/// `batch`, each with fresh initial values.
pub fn sample_run(
    ctx: &Context,
    batch: u32,
    times: &[f64],
    law: &InitialLaw,
    statistic: Statistic,
) -> Result<SampleRun> {
    let cfg = &ctx.config;
    let profile = cfg.profile()?;
    let tree = cfg.branching(times, &profile)?;
    let per = cfg.samples_per_trajectory as usize;
    let out = ctx.trajectories(batch, cfg.replicates, &tree, |states, rng| {
        let mut samples = Vec::with_capacity(states.len() * per);
        for s in states {
            for _ in 0..per {
                samples.push(match statistic {
                    Statistic::Solution => smoothing_sample(s, law, 1.0, rng),
                    Statistic::Rescaled => rescaled_sample(s, &profile, law, rng)?,
                });
            }
        }
        let m: Vec<f64> = states.iter().map(|s| biggins_martingale(s, profile.gamma_star, profile.phi_at)).collect();
        let pm: Vec<f64> = states.iter().map(|s| s.pruned_mass).collect();
        Ok((samples, m, pm))
    })?;
    let k = times.len();
    let n = out.ok.len();
    let mut samples = vec![Vec::with_capacity(n * per); k];
    let mut biggins = vec![Vec::with_capacity(n); k];
    let mut pruned_mass = vec![Vec::with_capacity(n); k];
    for (s, m, pm) in out.ok {
        for j in 0..k {
            samples[j].extend_from_slice(&s[j * per..(j + 1) * per]);
            biggins[j].push(m[j]);
            pruned_mass[j].push(pm[j]);
        }
    }
    Ok(SampleRun { times: times.to_vec(), samples, biggins, pruned_mass, aborted: out.aborted })
}

/// ECF table with the layout `xi, re, im, stderr_re, stderr_im, n`.
pub fn ecf_table(name: String, ecf: &EcfEstimate) -> Table {
    let mut table = Table::new(name, &["xi", "re", "im", "stderr_re", "stderr_im", "n"]);
    for j in 0..ecf.xi.len() {
        table.push(vec![
            fmt_f64(ecf.xi[j]),
            fmt_f64(ecf.values[j].re),
            fmt_f64(ecf.values[j].im),
            fmt_f64(ecf.stderr_re[j]),
            fmt_f64(ecf.stderr_im[j]),
            ecf.n.to_string(),
        ]);
    }
    table
}

/// ECF of the configured statistic at every configured time.
pub fn ecf_tables(ctx: &Context) -> Result<Vec<Table>> {
    let cfg = &ctx.config;
    let law = cfg.initial_law()?;
    let grid = cfg.xi()?;
    let run = sample_run(ctx, 0, cfg.require_times()?, &law, cfg.statistic)?;
    let xi = grid.values();
    let mut tables = Vec::new();
    for (j, &t) in run.times.iter().enumerate() {
        let ecf = empirical_cf(&run.samples[j], &xi)?;
        let mut table = ecf_table(format!("ecf_{}_t{}", cfg.label(), fmt_f64(t)), &ecf);
        table
            .meta("t", fmt_f64(t))
            .meta("statistic", format!("{:?}", cfg.statistic).to_lowercase())
            .meta("samples_per_trajectory", cfg.samples_per_trajectory)
            .meta(
                "sampling",
                if cfg.samples_per_trajectory == 1 {
                    "one independent (trajectory, initial values) pair per sample, shared across xi"
                } else {
                    "trajectories reused across samples; samples are dependent"
                },
            )
            .meta("aborted", run.aborted);
        tables.push(table);
    }
    Ok(tables)
}

/// Pool iteration history and final pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolHistory {
    pub pool: Vec<f64>,
    pub history: Vec<IterationSummary>,
}

impl PoolHistory {
    /// `√(Σ_{j ≤ i} se_j²)`: standard error of the pool mean after `i`
    /// iterations, since every iteration adds independent resampling noise.
    pub fn accumulated_stderr(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.history
            .iter()
            .map(|h| {
                acc += h.stderr * h.stderr;
                acc.sqrt()
            })
            .collect()
    }

    pub fn table(&self, name: String) -> Table {
        let mut table =
            Table::new(name, &["iteration", "mean", "stderr", "accumulated_stderr", "z", "accumulated_z"]);
        for (h, acc) in self.history.iter().zip(self.accumulated_stderr()) {
            table.push(vec![
                h.iteration.to_string(),
                fmt_f64(h.mean),
                fmt_f64(h.stderr),
                fmt_f64(acc),
                fmt_f64((h.mean - 1.0) / h.stderr),
                fmt_f64((h.mean - 1.0) / acc),
            ]);
        }
        table
    }
}

/// Iterates the fixed-point map from the constant pool 1; identical to
/// `kinetic_core::fixed_point::iterate_fixed_point` for any worker count.
pub fn pool_history(ctx: &Context, profile: &SpectralProfile, model: &WeightModel) -> Result<PoolHistory> {
    let spec = ctx.config.pool;
    validate_pool(spec.size, spec.iterations)?;
    let map = PoolMap::new(profile, model);
    let streams = ctx.streams();
    let mut pool = vec![1.0; spec.size];
    let mut history = Vec::with_capacity(spec.iterations as usize);
    for i in 1..=spec.iterations {
        pool = ctx.runner.step_pool(&map, &pool, &streams, i);
        history.push(IterationSummary::of(i, &pool));
    }
    Ok(PoolHistory { pool, history })
}

/// One more iteration after `history`.
pub fn extra_iteration(ctx: &Context, profile: &SpectralProfile, model: &WeightModel, run: &PoolHistory) -> Vec<f64> {
    let map = PoolMap::new(profile, model);
    ctx.runner.step_pool(&map, &run.pool, &ctx.streams(), run.history.len() as u32 + 1)
}

/// Single-column table of `D` values.
pub fn dinf_table(name: String, values: &[f64], route: &str) -> Table {
    let mut table = Table::new(name, &["d"]);
    table.meta("route", route);
    for &v in values {
        table.push_f64(&[v]);
    }
    table
}

/// `D` values from the martingale route at time `t`.
pub fn martingale_route(biggins: &[f64], t: f64, profile: &SpectralProfile) -> Vec<f64> {
    biggins.iter().map(|&m| dinf_from_martingale(m, t, profile)).collect()
}

/// Symmetric ξ-grid check shared by ODE commands.
pub fn symmetric_grid(config: &ExperimentConfig) -> Result<XiGrid> {
    let grid = config.xi()?;
    if !grid.is_symmetric() {
        return Err(KineticError::config("the ODE reference needs a grid symmetric about 0"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{LawSpec, ModelSpec};
    use kinetic_core::fixed_point::iterate_fixed_point;

    fn ctx(cfg: ExperimentConfig) -> Context {
        Context::new(cfg).unwrap()
    }

    #[test]
    fn pool_history_matches_core() {
        let mut cfg = ExperimentConfig::new(ModelSpec::PowerUniform { n: 2, p: 2.0 });
        cfg.pool.size = 3000;
        cfg.pool.iterations = 3;
        cfg.workers = 3;
        let c = ctx(cfg.clone());
        let profile = cfg.profile().unwrap();
        let model = cfg.weight_model().unwrap();
        let ours = pool_history(&c, &profile, &model).unwrap();
        let core = iterate_fixed_point(&profile, &model, 3000, 3, &cfg.streams()).unwrap();
        assert_eq!(ours.pool, core.sample.values);
        assert_eq!(ours.history, core.history);
    }

    #[test]
    fn trajectories_count_aborts() {
        let mut cfg = ExperimentConfig::new(ModelSpec::PowerUniform { n: 2, p: 2.0 });
        cfg.times = vec![3.0];
        cfg.particle_cap = 5;
        cfg.replicates = 200;
        let c = ctx(cfg.clone());
        let profile = cfg.profile().unwrap();
        let tree = cfg.branching(&cfg.times, &profile).unwrap();
        let batch = c.trajectories(0, 200, &tree, |s, _| Ok(s[0].population())).unwrap();
        assert!(batch.aborted > 0);
        assert_eq!(batch.ok.len() as u64 + batch.aborted, 200);
        assert!(batch.ok.iter().all(|&p| p <= 5));
        cfg.particle_cap = 1;
        cfg.times = vec![40.0];
        let c = ctx(cfg.clone());
        let tree = cfg.branching(&cfg.times, &profile).unwrap();
        let err = c.trajectories(0, 200, &tree, |s, _| Ok(s.len())).unwrap_err();
        assert!(matches!(err, KineticError::AllAborted(200)));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn simulate_row_at_time_zero() {
        let mut cfg = ExperimentConfig::new(ModelSpec::PowerUniform { n: 2, p: 1.0 + 2f64.sqrt() });
        cfg.times = vec![0.0, 0.5];
        cfg.replicates = 50;
        let run = martingale_run(&ctx(cfg), &[]).unwrap();
        let table = simulate_table(&run, "x");
        let row = &table.rows()[0];
        assert_eq!(&row[..8], &["0.0", "1.0", "0.0", "0.0", "0.0", "0.0", "0.0", "50"]);
    }

    #[test]
    fn samples_per_trajectory_multiplies_sample_count() {
        let mut cfg = ExperimentConfig::new(ModelSpec::Deterministic { weights: vec![0.3, 0.3] });
        cfg.times = vec![0.5, 1.0];
        cfg.replicates = 40;
        cfg.samples_per_trajectory = 3;
        let law = LawSpec::FiniteVarianceNormal { sigma: 1.0 }.build().unwrap();
        let run = sample_run(&ctx(cfg), 0, &[0.5, 1.0], &law, Statistic::Solution).unwrap();
        assert!(run.samples.iter().all(|s| s.len() == 120));
    }
}
