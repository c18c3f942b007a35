//! Approximations of the derivative-martingale limit `D_∞`: the rescaled
//! Biggins martingale, and pool iteration of the fixed-point equation
//! `D = U^{Φ(γ)} Σ_k A_k^γ D^{(k)}`. Also the limit characteristic function
//! `w_∞(ξ) = E ĝ_γ(ξ c_γ D_∞^{1/γ})`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::initial_laws::InitialLaw;
use crate::numeric::{CompensatedSum, RunningMoments};
use crate::rng::{Purpose, Streams};
use crate::solver::{check_boundary_match, EcfEstimate};
use crate::spectral::{SpectralProfile, WeightModel, WeightSampler};
use crate::{Error, Result};

/// Pool slots updated from one random stream.
pub const POOL_BLOCK: usize = 1024;
pub const MIN_POOL: usize = 1000;

/// `√(t π γ*² Φ″(γ*) / 2)`, which turns `M_t(γ*)` into a `D_∞` approximant.
pub fn dinf_multiplier(t: f64, profile: &SpectralProfile) -> f64 {
    let g = profile.gamma_star;
    (t * PI * g * g * profile.phi_second_at / 2.0).sqrt()
}

pub fn dinf_from_martingale(m_value: f64, t: f64, profile: &SpectralProfile) -> f64 {
    m_value * dinf_multiplier(t, profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DinfRoute {
    Martingale { time: f64 },
    FixedPointIteration { iterations: u32, pool_size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinfSample {
    pub values: Vec<f64>,
    pub route: DinfRoute,
    pub seed: u64,
}

/// Mean and standard error of the pool after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSummary {
    pub iteration: u32,
    pub mean: f64,
    pub stderr: f64,
}

impl IterationSummary {
    pub fn of(iteration: u32, pool: &[f64]) -> Self {
        let mut m = RunningMoments::new();
        pool.iter().for_each(|&x| m.push(x));
        Self { iteration, mean: m.mean(), stderr: m.stderr() }
    }
}

/// One application of the fixed-point map to a whole pool.
///
/// Slot block `b` of iteration `i` draws from the stream
/// `(FixedPoint, sub = i, index = b)`, so blocks can be computed in any order
/// or in parallel with identical results.
#[derive(Debug)]
pub struct PoolMap<'a> {
    gamma: f64,
    phi: f64,
    sampler: WeightSampler<'a>,
}

impl<'a> PoolMap<'a> {
    pub fn new(profile: &SpectralProfile, model: &'a WeightModel) -> Self {
        Self { gamma: profile.gamma_star, phi: profile.phi_at, sampler: model.sampler() }
    }

    /// One draw of `U^{Φ} Σ_k A_k^γ D^{(k)}` with the `D^{(k)}` resampled
    /// from `prev`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, prev: &[f64], rng: &mut R, buf: &mut [f64]) -> f64 {
        self.sampler.sample(rng, buf);
        let sum: CompensatedSum = buf.iter().map(|&l| (self.gamma * l).exp() * prev[rng.random_range(0..prev.len())]).collect();
        // 1 − U avoids U = 0
        let u = 1.0 - rng.random::<f64>();
        (self.phi * u.ln()).exp() * sum.value()
    }

    pub fn step_block(&self, prev: &[f64], streams: &Streams, iteration: u32, block: usize, out: &mut [f64]) {
        let mut rng = streams.substream(Purpose::FixedPoint, iteration, block as u64);
        let mut buf = alloc::vec![0.0; self.sampler.children()];
        for slot in out.iter_mut() {
            *slot = self.draw(prev, &mut rng, &mut buf);
        }
    }

    pub fn step(&self, prev: &[f64], streams: &Streams, iteration: u32) -> Vec<f64> {
        let mut next = alloc::vec![0.0; prev.len()];
        for (b, chunk) in next.chunks_mut(POOL_BLOCK).enumerate() {
            self.step_block(prev, streams, iteration, b, chunk);
        }
        next
    }
}

pub fn validate_pool(pool_size: usize, iterations: u32) -> Result<()> {
    if pool_size < MIN_POOL {
        return Err(Error::config(alloc::format!("pool size must be at least {MIN_POOL}")));
    }
    if iterations == 0 {
        return Err(Error::config("at least one iteration is required"));
    }
    Ok(())
}

/// Final pool and per-iteration summaries of a pool iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRun {
    pub sample: DinfSample,
    pub history: Vec<IterationSummary>,
}

/// Runs `iterations` steps from the constant pool 1.
pub fn iterate_fixed_point(
    profile: &SpectralProfile,
    model: &WeightModel,
    pool_size: usize,
    iterations: u32,
    streams: &Streams,
) -> Result<PoolRun> {
    validate_pool(pool_size, iterations)?;
    model.validate()?;
    let map = PoolMap::new(profile, model);
    let mut pool = alloc::vec![1.0; pool_size];
    let mut history = Vec::with_capacity(iterations as usize);
    for i in 1..=iterations {
        pool = map.step(&pool, streams, i);
        history.push(IterationSummary::of(i, &pool));
    }
    Ok(PoolRun {
        sample: DinfSample {
            values: pool,
            route: DinfRoute::FixedPointIteration { iterations, pool_size },
            seed: streams.seed(),
        },
        history,
    })
}

/// Monte Carlo `E ĝ_γ(ξ c_γ d^{1/γ*})` over the sample, at every `ξ`.
pub fn limit_cf(profile: &SpectralProfile, law: &InitialLaw, dinf: &[f64], xi: &[f64]) -> Result<EcfEstimate> {
    check_boundary_match(profile, law)?;
    if dinf.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: dinf.len() });
    }
    let inv = 1.0 / profile.gamma_star;
    let scaled: Vec<f64> = dinf.iter().map(|&d| profile.c_gamma * d.powf(inv)).collect();
    let mut values = Vec::with_capacity(xi.len());
    let mut stderr_re = Vec::with_capacity(xi.len());
    let mut stderr_im = Vec::with_capacity(xi.len());
    for &x in xi {
        let (mut re, mut im) = (RunningMoments::new(), RunningMoments::new());
        for &s in &scaled {
            let g = law.stable_cf(x * s);
            re.push(g.re);
            im.push(g.im);
        }
        values.push(num_complex::Complex64::new(re.mean(), im.mean()));
        stderr_re.push(re.stderr());
        stderr_im.push(im.stderr());
    }
    Ok(EcfEstimate { xi: xi.to_vec(), values, stderr_re, stderr_im, n: dinf.len() })
}
