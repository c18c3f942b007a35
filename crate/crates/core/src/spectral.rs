//! Weight models and the spectral constants derived from them.
//!
//! For a reproduction law `(A_1, …, A_N)` of positive weights the moment
//! functional is `Φ(s) = E[Σ A_i^s] − 1`, the spectral function is
//! `μ(s) = Φ(s)/s`, and `γ*` is the unique minimiser of `μ` on `(0, s_∞)`.
//! At `γ*` the ray from the origin is tangent to `Φ`, so `γ*` is the root of
//! the strictly increasing function `g(s) = sΦ′(s) − Φ(s)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_gamma, trigamma, CompensatedSum};
use crate::quad;
use crate::rng::{Purpose, Streams};

/// Relative tolerance for quadrature of the defining expectation.
pub const QUADRATURE_REL_TOL: f64 = 1e-9;
/// Monte Carlo fallback size for custom models.
pub const DEFAULT_MC_DRAWS: u64 = 10_000_000;

const MAX_QUAD_INTERVALS: usize = 20_000;

/// How `E[Σ A_i^s]` is evaluated for a [`CustomWeights`] model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentMethod {
    /// Adaptive quadrature over `u ∈ (0, 1)` of [`CustomWeights::weights_at`].
    Quadrature,
    /// Plain Monte Carlo with common random numbers (same draws for every `s`).
    MonteCarlo { draws: u64, seed: u64 },
}

/// A user supplied reproduction law.
pub trait CustomWeights: Send + Sync + fmt::Debug {
    fn children(&self) -> usize;

    /// Writes `ln A_1, …, ln A_N` for one independent draw.
    fn sample_log_weights(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn moment_method(&self) -> MomentMethod;

    /// A weight vector as a function of one uniform variate, such that
    /// `∫₀¹ Σ_i w_i(u)^s du = E[Σ A_i^s]`. Only the marginals of the `A_i`
    /// matter, so each coordinate may be parameterised by its own quantile
    /// function. Returns `false` if no such map is available.
    fn weights_at(&self, _u: f64, _out: &mut [f64]) -> bool {
        false
    }

    /// Divergence abscissa, if known; otherwise it is probed numerically.
    fn s_infinity(&self) -> Option<f64> {
        None
    }
}

/// Law of the weight vector `(A_1, …, A_N)`.
#[derive(Debug, Clone)]
pub enum WeightModel {
    /// Fixed weights `(a_1, …, a_N)`.
    Deterministic(Vec<f64>),
    /// `A_i = U_i^p` with independent uniforms.
    PowerUniform { children: usize, exponent: f64 },
    /// `(|cos Θ|, |sin Θ|)` with `Θ` uniform on `[0, 2π)`.
    KacAngle,
    Custom(Arc<dyn CustomWeights>),
}

/// `Φ`, `Φ′`, `Φ″` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub phi: f64,
    pub phi_prime: f64,
    pub phi_second: f64,
}

impl WeightModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightModel::Deterministic(a) => {
                if a.len() < 2 {
                    return Err(Error::config("deterministic model needs at least two weights"));
                }
                if a.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                    return Err(Error::config("deterministic weights must be finite and positive"));
                }
                Ok(())
            }
            WeightModel::PowerUniform { children, exponent } => {
                if *children < 2 {
                    return Err(Error::config("power-uniform model needs n >= 2"));
                }
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::config("power-uniform exponent must be positive"));
                }
                Ok(())
            }
            WeightModel::KacAngle => Ok(()),
            WeightModel::Custom(c) => {
                if c.children() < 2 {
                    return Err(Error::config("custom model needs at least two children"));
                }
                match c.s_infinity() {
                    Some(s) if !(s > 0.0) => Err(Error::config("custom model declares s_infinity <= 0")),
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn children(&self) -> usize {
        match self {
            WeightModel::Deterministic(a) => a.len(),
            WeightModel::PowerUniform { children, .. } => *children,
            WeightModel::KacAngle => 2,
            WeightModel::Custom(c) => c.children(),
        }
    }

    /// `sup{s ≥ 0 : Φ(s) < ∞}`.
    pub fn s_infinity(&self) -> f64 {
        match self {
            WeightModel::Custom(c) => c.s_infinity().unwrap_or_else(|| probe_s_infinity(self)),
            _ => f64::INFINITY,
        }
    }

    /// Largest weight any draw can produce, if bounded.
    pub fn max_weight(&self) -> Option<f64> {
        match self {
            WeightModel::Deterministic(a) => Some(a.iter().copied().fold(0.0, f64::max)),
            WeightModel::PowerUniform { .. } | WeightModel::KacAngle => Some(1.0),
            WeightModel::Custom(_) => None,
        }
    }

    pub fn sampler(&self) -> WeightSampler<'_> {
        match self {
            WeightModel::Deterministic(a) => WeightSampler::Fixed(a.iter().map(|x| x.ln()).collect()),
            WeightModel::PowerUniform { children, exponent } => {
                WeightSampler::Power { children: *children, exponent: *exponent }
            }
            WeightModel::KacAngle => WeightSampler::Kac,
            WeightModel::Custom(c) => WeightSampler::Custom(c.as_ref()),
        }
    }

    /// `Φ(s)`. Returns `+∞` beyond `s_∞`; `s < 0` and `s = s_∞` are domain
    /// errors.
    pub fn phi(&self, s: f64) -> Result<f64> {
        self.validate()?;
        if !(s >= 0.0) {
            return Err(Error::Domain { s, s_infinity: self.s_infinity() });
        }
        match self {
            WeightModel::Deterministic(a) => {
                if s == 0.0 {
                    return Ok(a.len() as f64 - 1.0);
                }
                let sum: CompensatedSum = a.iter().map(|x| x.powf(s)).collect();
                Ok(sum.value() - 1.0)
            }
            WeightModel::PowerUniform { children, exponent } => {
                Ok(*children as f64 / (exponent * s + 1.0) - 1.0)
            }
            WeightModel::KacAngle => {
                if s == 0.0 {
                    return Ok(1.0);
                }
                Ok(kac_moment(s) - 1.0)
            }
            WeightModel::Custom(c) => {
                if s == 0.0 {
                    return Ok(c.children() as f64 - 1.0);
                }
                if let Some(s_inf) = c.s_infinity() {
                    if s > s_inf {
                        return Ok(f64::INFINITY);
                    }
                    if s == s_inf {
                        return Err(Error::Domain { s, s_infinity: s_inf });
                    }
                }
                Ok(custom_log_moments(c.as_ref(), s)?[0] - 1.0)
            }
        }
    }

    /// `(Φ′(s), Φ″(s))` on the open domain `(0, s_∞)`.
    pub fn phi_derivatives(&self, s: f64) -> Result<(f64, f64)> {
        let m = self.moments(s)?;
        Ok((m.phi_prime, m.phi_second))
    }

    pub fn moments(&self, s: f64) -> Result<Moments> {
        self.validate()?;
        self.moments_below(s, self.declared_s_infinity())
    }

    fn declared_s_infinity(&self) -> f64 {
        match self {
            WeightModel::Custom(c) => c.s_infinity().unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        }
    }

    fn moments_below(&self, s: f64, s_inf: f64) -> Result<Moments> {
        if !(s > 0.0 && s < s_inf) {
            return Err(Error::Domain { s, s_infinity: s_inf });
        }
        let m = match self {
            WeightModel::Deterministic(a) => {
                let mut m0 = CompensatedSum::new();
                let mut m1 = CompensatedSum::new();
                let mut m2 = CompensatedSum::new();
                for &x in a {
                    let l = x.ln();
                    let w = x.powf(s);
                    m0.add(w);
                    m1.add(w * l);
                    m2.add(w * l * l);
                }
                Moments { phi: m0.value() - 1.0, phi_prime: m1.value(), phi_second: m2.value() }
            }
            WeightModel::PowerUniform { children, exponent } => {
                let n = *children as f64;
                let d = exponent * s + 1.0;
                Moments {
                    phi: n / d - 1.0,
                    phi_prime: -n * exponent / (d * d),
                    phi_second: 2.0 * n * exponent * exponent / (d * d * d),
                }
            }
            WeightModel::KacAngle => {
                let m = kac_moment(s);
                let dpsi = 0.5 * (digamma(0.5 * (s + 1.0)) - digamma(0.5 * s + 1.0));
                let dpsi1 = 0.25 * (trigamma(0.5 * (s + 1.0)) - trigamma(0.5 * s + 1.0));
                Moments { phi: m - 1.0, phi_prime: m * dpsi, phi_second: m * (dpsi * dpsi + dpsi1) }
            }
            WeightModel::Custom(c) => {
                let [m0, m1, m2] = custom_log_moments(c.as_ref(), s)?;
                if !m0.is_finite() {
                    return Err(Error::Domain { s, s_infinity: self.s_infinity() });
                }
                Moments { phi: m0 - 1.0, phi_prime: m1, phi_second: m2 }
            }
        };
        Ok(m)
    }

    /// `μ(s) = Φ(s)/s`.
    pub fn mu(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain { s, s_infinity: self.s_infinity() });
        }
        Ok(self.phi(s)? / s)
    }

    /// Quantile parameterisation used for numeric moments; see
    /// [`CustomWeights::weights_at`].
    pub fn weights_at(&self, u: f64, out: &mut [f64]) -> bool {
        match self {
            WeightModel::Deterministic(a) => {
                out.copy_from_slice(a);
                true
            }
            WeightModel::PowerUniform { exponent, .. } => {
                out.fill(u.powf(*exponent));
                true
            }
            WeightModel::KacAngle => {
                let theta = FRAC_PI_2 * u;
                out[0] = theta.cos();
                out[1] = theta.sin();
                true
            }
            WeightModel::Custom(c) => c.weights_at(u, out),
        }
    }

    /// `Φ, Φ′, Φ″` by adaptive quadrature of the defining expectations
    /// `E[Σ A_i^s (ln A_i)^k]`, independent of the closed forms.
    pub fn moments_by_quadrature(&self, s: f64) -> Result<Moments> {
        let [m0, m1, m2] = quadrature_log_moments(self.children(), &|u, out| self.weights_at(u, out), s)?;
        Ok(Moments { phi: m0 - 1.0, phi_prime: m1, phi_second: m2 })
    }

    /// Locates `γ*` to absolute tolerance `tol` and fills in the derived
    /// constants.
    pub fn find_gamma_star(&self, tol: f64) -> Result<SpectralProfile> {
        self.validate()?;
        if !(tol > 0.0) {
            return Err(Error::config("tolerance must be positive"));
        }
        let s_inf = self.s_infinity();
        if !(s_inf > 0.0) {
            return Err(Error::config("s_infinity must be positive"));
        }
        let g = |s: f64| -> Result<f64> {
            let m = self.moments_below(s, s_inf)?;
            Ok(s * m.phi_prime - m.phi)
        };

        let mut lo = 1e-6f64.min(0.5 * s_inf);
        if g(lo)? >= 0.0 {
            return Err(Error::NoInteriorMinimizer);
        }
        let mut hi = 1.0f64.max(lo * 2.0);
        loop {
            if hi >= s_inf {
                hi = s_inf * (1.0 - 1e-12);
                if g(hi)? <= 0.0 {
                    return Err(Error::NoInteriorMinimizer);
                }
                break;
            }
            if g(hi)? > 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoInteriorMinimizer);
            }
        }
        while hi - lo > 2.0 * tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let gamma_star = 0.5 * (lo + hi);
        if gamma_star >= s_inf {
            return Err(Error::NoInteriorMinimizer);
        }
        SpectralProfile::from_moments(self.moments_below(gamma_star, s_inf)?, gamma_star, s_inf)
    }
}

/// `E|cos Θ|^s + E|sin Θ|^s = 2Γ((s+1)/2) / (√π Γ(s/2+1))`.
fn kac_moment(s: f64) -> f64 {
    2.0 * (ln_gamma(0.5 * (s + 1.0)) - ln_gamma(0.5 * s + 1.0)).exp() / PI.sqrt()
}

fn quadrature_log_moments(
    children: usize,
    weights_at: &dyn Fn(f64, &mut [f64]) -> bool,
    s: f64,
) -> Result<[f64; 3]> {
    let mut buf = vec![0.0; children];
    if !weights_at(0.5, &mut buf) {
        return Err(Error::Unsupported("model has no quadrature parameterisation".into()));
    }
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let r = quad::integrate(
            |u| {
                weights_at(u, &mut buf);
                buf.iter()
                    .map(|&a| {
                        let l = a.ln();
                        (s * l).exp() * l.powi(k as i32)
                    })
                    .sum()
            },
            0.0,
            1.0,
            QUADRATURE_REL_TOL * 1e-2,
            1e-15,
            MAX_QUAD_INTERVALS,
        );
        if !r.converged {
            if !r.value.is_finite() || r.value.abs() > 1e10 {
                return Ok([f64::INFINITY; 3]);
            }
            if r.error > 10.0 * QUADRATURE_REL_TOL * r.value.abs() {
                return Err(Error::Numeric("quadrature of the moment functional did not converge".into()));
            }
        }
        *slot = r.value;
    }
    Ok(out)
}

fn custom_log_moments(c: &dyn CustomWeights, s: f64) -> Result<[f64; 3]> {
    match c.moment_method() {
        MomentMethod::Quadrature => quadrature_log_moments(c.children(), &|u, out| c.weights_at(u, out), s),
        MomentMethod::MonteCarlo { draws, seed } => Ok(monte_carlo_log_moments(c, s, draws, seed).map(|e| e.0)),
    }
}

/// Monte Carlo estimates of `E[Σ A^s (ln A)^k]`, `k = 0, 1, 2`, with their
/// standard errors.
pub fn monte_carlo_log_moments(c: &dyn CustomWeights, s: f64, draws: u64, seed: u64) -> [(f64, f64); 3] {
    let mut rng = Streams::new(seed).stream(Purpose::Auxiliary, 0);
    let mut buf = vec![0.0; c.children()];
    let mut acc = [crate::numeric::RunningMoments::new(); 3];
    for _ in 0..draws {
        c.sample_log_weights(&mut rng, &mut buf);
        let mut v = [0.0; 3];
        for &l in &buf {
            let w = (s * l).exp();
            v[0] += w;
            v[1] += w * l;
            v[2] += w * l * l;
        }
        for (a, x) in acc.iter_mut().zip(v) {
            a.push(x);
        }
    }
    acc.map(|a| (a.mean(), a.stderr()))
}

/// Locates `s_∞` for custom models that do not declare it: doubling until the
/// moment quadrature diverges, then bisection.
fn probe_s_infinity(model: &WeightModel) -> f64 {
    let WeightModel::Custom(c) = model else {
        return f64::INFINITY;
    };
    let diverges = |s: f64| match c.moment_method() {
        MomentMethod::Quadrature => match endpoint_exponent(c.as_ref(), s) {
            Some(alpha) => alpha >= 1.0,
            None => quadrature_log_moments(c.children(), &|u, out| c.weights_at(u, out), s)
                .map(|m| !m[0].is_finite())
                .unwrap_or(true),
        },
        // Monte Carlo cannot see divergence.
        MomentMethod::MonteCarlo { .. } => false,
    };
    let mut good = 0.0;
    let mut s = 1.0;
    while s <= 1024.0 {
        if diverges(s) {
            let mut bad = s;
            while bad - good > 1e-6 * bad {
                let mid = 0.5 * (good + bad);
                if diverges(mid) {
                    bad = mid;
                } else {
                    good = mid;
                }
            }
            return bad;
        }
        good = s;
        s *= 2.0;
    }
    f64::INFINITY
}

// Power-law order of the blow-up of Σ a_i(u)^s at either end of (0, 1),
// read off a log-log slope; `None` when the integrand vanishes or is not
// finite there.
fn endpoint_exponent(c: &dyn CustomWeights, s: f64) -> Option<f64> {
    let mut buf = vec![0.0; c.children()];
    let mut log_integrand = |u: f64| -> Option<f64> {
        c.weights_at(u, &mut buf);
        let v: f64 = buf.iter().map(|&a| a.powf(s)).sum();
        (v.is_finite() && v > 0.0).then(|| v.ln())
    };
    let (near, far) = (1e-14f64, 1e-12f64);
    let slope = far.ln() - near.ln();
    let lo = (log_integrand(near)? - log_integrand(far)?) / slope;
    let hi = (log_integrand(1.0 - near)? - log_integrand(1.0 - far)?) / slope;
    Some(lo.max(hi))
}

/// Draws weight vectors in the log domain.
#[derive(Debug)]
pub enum WeightSampler<'a> {
    Fixed(Vec<f64>),
    Power { children: usize, exponent: f64 },
    Kac,
    Custom(&'a dyn CustomWeights),
}

impl WeightSampler<'_> {
    pub fn children(&self) -> usize {
        match self {
            WeightSampler::Fixed(l) => l.len(),
            WeightSampler::Power { children, .. } => *children,
            WeightSampler::Kac => 2,
            WeightSampler::Custom(c) => c.children(),
        }
    }

    /// Writes `ln A_1, …, ln A_N` of one fresh draw into `out`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            WeightSampler::Fixed(l) => out.copy_from_slice(l),
            WeightSampler::Power { exponent, .. } => {
                // ln U = −E with E ~ Exp(1)
                for slot in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *slot = -exponent * e;
                }
            }
            WeightSampler::Kac => {
                let theta = 2.0 * PI * rng.random::<f64>();
                let (sin, cos) = theta.sin_cos();
                out[0] = cos.abs().ln();
                out[1] = sin.abs().ln();
            }
            WeightSampler::Custom(c) => {
                let mut by_ref = &mut *rng;
                c.sample_log_weights(&mut by_ref, out)
            }
        }
    }
}

/// Spectral constants at the minimiser `γ*` of `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProfile {
    pub gamma_star: f64,
    /// `Φ(γ*)`
    pub phi_at: f64,
    /// `Φ′(γ*)`
    pub phi_prime_at: f64,
    /// `Φ″(γ*)`
    pub phi_second_at: f64,
    /// `μ(γ*) = Φ(γ*)/γ*`
    pub mu_at: f64,
    /// `(2 / (π γ*² Φ″(γ*)))^{1/(2γ*)}`
    pub c_gamma: f64,
    pub s_infinity: f64,
}

impl SpectralProfile {
    fn from_moments(m: Moments, gamma_star: f64, s_infinity: f64) -> Result<Self> {
        if !(m.phi_second > 0.0) {
            return Err(Error::config("moment functional is not strictly convex at gamma*"));
        }
        let phi_at = m.phi;
        let mu_at = phi_at / gamma_star;
        let c_gamma = (2.0 / (PI * gamma_star * gamma_star * m.phi_second)).powf(1.0 / (2.0 * gamma_star));
        Ok(Self {
            gamma_star,
            phi_at,
            phi_prime_at: m.phi_prime,
            phi_second_at: m.phi_second,
            mu_at,
            c_gamma,
            s_infinity,
        })
    }

    /// `t^{1/(2γ*)} e^{−μ(γ*) t}`, and 1 at `t = 0`.
    pub fn scaling_factor(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        (t.ln() / (2.0 * self.gamma_star) - self.mu_at * t).exp()
    }

    /// Variance per unit time of `−γ* z°` along the size-biased spine.
    pub fn spine_variance_rate(&self) -> f64 {
        self.gamma_star * self.gamma_star * self.phi_second_at
    }
}

/// Free-function form of [`SpectralProfile::scaling_factor`].
pub fn scaling_factor(profile: &SpectralProfile, t: f64) -> f64 {
    profile.scaling_factor(t)
}
