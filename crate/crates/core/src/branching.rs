//! Continuous-time branching random walk driven by a Yule process.
//!
//! Every particle splits at rate 1 into `N` children displaced by
//! `ln A_1, …, ln A_N`. The simulation jumps from split to split: with `k`
//! particles alive the next split happens after an `Exp(k)` holding time and
//! hits a uniformly chosen particle. Positions are kept in the log domain.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::numeric::{ln_gamma, log_sum_exp, CompensatedSum};
use crate::spectral::{SpectralProfile, WeightModel};
use crate::{Error, Result};

pub const DEFAULT_PARTICLE_CAP: usize = 10_000_000;

/// Drops a newborn particle at position `z` and time `t` when
/// `γ z − Φ(γ) t < −level`.
///
/// The expected contribution of all its descendants to `M_s(γ)` at any later
/// time equals `e^{γ z − Φ(γ) t}`, so the mass lost to pruning is bounded by
/// `e^{−level}` per dropped particle in expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneRule {
    pub gamma: f64,
    pub phi_gamma: f64,
    pub level: f64,
}

impl PruneRule {
    /// Threshold `κ γ* √(Φ″(γ*) T)`, floored at `min_level`.
    pub fn for_profile(profile: &SpectralProfile, horizon: f64, kappa: f64, min_level: f64) -> Self {
        let spread = profile.gamma_star * (profile.phi_second_at * horizon).sqrt();
        Self { gamma: profile.gamma_star, phi_gamma: profile.phi_at, level: (kappa * spread).max(min_level) }
    }

    #[inline]
    pub fn drops(&self, z: f64, t: f64) -> bool {
        self.gamma * z - self.phi_gamma * t < -self.level
    }
}

#[derive(Debug, Clone)]
pub struct BranchingConfig {
    pub model: WeightModel,
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub particle_cap: usize,
    pub prune: Option<PruneRule>,
}

impl BranchingConfig {
    pub fn new(model: WeightModel, checkpoints: Vec<f64>) -> Self {
        let horizon = checkpoints.last().copied().unwrap_or(0.0);
        Self { model, horizon, checkpoints, particle_cap: DEFAULT_PARTICLE_CAP, prune: None }
    }

    pub fn with_prune(mut self, prune: PruneRule) -> Self {
        self.prune = Some(prune);
        self
    }

    pub fn with_particle_cap(mut self, cap: usize) -> Self {
        self.particle_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon must be finite and nonnegative"));
        }
        if self.checkpoints.iter().any(|&t| !(t >= 0.0 && t <= self.horizon)) {
            return Err(Error::config("checkpoints must lie in [0, horizon]"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("checkpoints must be sorted"));
        }
        if self.particle_cap == 0 {
            return Err(Error::config("particle cap must be at least 1"));
        }
        Ok(())
    }
}

/// Snapshot of the particle cloud at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub time: f64,
    /// Positions `z_{k,t}`.
    pub log_weights: Vec<f64>,
    /// Splits `ν_t` among retained particles.
    pub split_count: u64,
    /// Newborns dropped by a [`PruneRule`].
    pub pruned: u64,
    /// `Σ e^{γ z − Φ(γ) τ}` over dropped newborns at their birth times `τ`:
    /// the expected `M(γ)` mass their descendants would have carried.
    pub pruned_mass: f64,
}

impl PopulationState {
    pub fn initial() -> Self {
        Self { time: 0.0, log_weights: alloc::vec![0.0], split_count: 0, pruned: 0, pruned_mass: 0.0 }
    }

    pub fn population(&self) -> usize {
        self.log_weights.len()
    }

    /// `Y_t + pruned = (N − 1) ν_t + 1`, which without pruning is the
    /// population identity of the Yule process.
    pub fn satisfies_population_identity(&self, children: usize) -> bool {
        self.log_weights.len() as u64 + self.pruned == (children as u64 - 1) * self.split_count + 1
    }
}

/// Runs one trajectory and returns a snapshot at every checkpoint.
pub fn simulate_population<R: Rng + ?Sized>(config: &BranchingConfig, rng: &mut R) -> Result<Vec<PopulationState>> {
    config.validate()?;
    let sampler = config.model.sampler();
    let n = sampler.children();
    let mut buf = alloc::vec![0.0; n];
    let mut z: Vec<f64> = alloc::vec![0.0];
    let mut clock = 0.0;
    let mut splits = 0u64;
    let mut pruned = 0u64;
    let mut pruned_mass = CompensatedSum::new();
    let mut out = Vec::with_capacity(config.checkpoints.len());
    let mut next = 0;
    let snapshot = |t: f64, z: &[f64], splits, pruned, mass: &CompensatedSum| PopulationState {
        time: t,
        log_weights: z.to_vec(),
        split_count: splits,
        pruned,
        pruned_mass: mass.value(),
    };
    while next < config.checkpoints.len() {
        let k = z.len();
        if k == 0 {
            for &t in &config.checkpoints[next..] {
                out.push(snapshot(t, &z, splits, pruned, &pruned_mass));
            }
            break;
        }
        let e: f64 = Exp1.sample(rng);
        let split_at = clock + e / k as f64;
        while next < config.checkpoints.len() && config.checkpoints[next] < split_at {
            out.push(snapshot(config.checkpoints[next], &z, splits, pruned, &pruned_mass));
            next += 1;
        }
        if next == config.checkpoints.len() {
            break;
        }
        clock = split_at;
        let parent = z.swap_remove(rng.random_range(0..k));
        sampler.sample(rng, &mut buf);
        splits += 1;
        for &l in &buf {
            let child = parent + l;
            match config.prune {
                Some(rule) if rule.drops(child, clock) => {
                    pruned += 1;
                    pruned_mass.add((rule.gamma * child - rule.phi_gamma * clock).exp());
                }
                _ => z.push(child),
            }
        }
        if z.len() > config.particle_cap {
            return Err(Error::CapExceeded { time: clock, cap: config.particle_cap });
        }
    }
    Ok(out)
}

/// Probability generating function `E s^{Y_t}` of the Yule population.
pub fn population_pgf(children: usize, t: f64, s: Complex64) -> Complex64 {
    let m = (children - 1) as f64;
    let decay = (-m * t).exp();
    let base = Complex64::new(decay, 0.0) / (Complex64::new(1.0, 0.0) - s.powf(m) * (1.0 - decay));
    s * base.powf(1.0 / m)
}

/// `P{ν_t = k} = Γ(1/(N−1) + k)/(k! Γ(1/(N−1))) e^{−t} (1 − e^{−(N−1)t})^k`.
pub fn split_count_pmf(children: usize, t: f64, k: u64) -> f64 {
    let r = 1.0 / (children - 1) as f64;
    let kf = k as f64;
    let q = 1.0 - (-((children - 1) as f64) * t).exp();
    let log_q_term = if k == 0 { 0.0 } else { kf * q.ln() };
    (ln_gamma(r + kf) - ln_gamma(kf + 1.0) - ln_gamma(r) - t + log_q_term).exp()
}

/// `M_t(s) = e^{−Φ(s) t} Σ_k e^{s z_k}`.
pub fn biggins_martingale(state: &PopulationState, s: f64, phi_s: f64) -> f64 {
    let lse = log_sum_exp(state.log_weights.iter().map(|&z| s * z));
    (lse - phi_s * state.time).exp()
}

#[inline]
fn centred(profile: &SpectralProfile, z: f64, t: f64) -> f64 {
    z - t * profile.mu_at
}

/// `D_t(γ*) = Σ_k e^{γ* z°_k} z°_k` with `z° = z − t μ(γ*)`.
pub fn derivative_martingale(state: &PopulationState, profile: &SpectralProfile) -> f64 {
    let g = profile.gamma_star;
    state
        .log_weights
        .iter()
        .map(|&z| {
            let c = centred(profile, z, state.time);
            (g * c).exp() * c
        })
        .collect::<CompensatedSum>()
        .value()
}

/// `Σ_k e^{γ* z°_k} (z°_k)²`, whose mean is `t Φ″(γ*)`.
pub fn derivative_second_moment(state: &PopulationState, profile: &SpectralProfile) -> f64 {
    let g = profile.gamma_star;
    state
        .log_weights
        .iter()
        .map(|&z| {
            let c = centred(profile, z, state.time);
            (g * c).exp() * c * c
        })
        .collect::<CompensatedSum>()
        .value()
}

/// `max_k e^{γ* z°_k}`; 0 for an empty population.
pub fn max_normalized_weight(state: &PopulationState, profile: &SpectralProfile) -> f64 {
    let top = state.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (profile.gamma_star * centred(profile, top, state.time)).exp()
}

/// Martingale observables of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleReadout {
    pub time: f64,
    /// `M_t(γ*)`
    pub biggins: f64,
    /// `D_t(γ*)`
    pub derivative: f64,
    pub second_moment: f64,
    pub max_norm_weight: f64,
}

impl MartingaleReadout {
    pub fn read(state: &PopulationState, profile: &SpectralProfile) -> Self {
        Self {
            time: state.time,
            biggins: biggins_martingale(state, profile.gamma_star, profile.phi_at),
            derivative: derivative_martingale(state, profile),
            second_moment: derivative_second_moment(state, profile),
            max_norm_weight: max_normalized_weight(state, profile),
        }
    }
}
