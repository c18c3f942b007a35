//! Initial distributions in the normal domain of attraction of a stable law,
//! their samplers, and the attracting stable characteristic functions.

use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::numeric::{gamma, RunningMoments};
use crate::{Error, Result};

/// Base shape of a finite-mean law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanBase {
    /// `X ≡ m₀`.
    Degenerate,
    /// `X = m₀·E` with `E ~ Exp(1)`; needs `m₀ > 0`.
    Exponential,
    /// Uniform on `[m₀ − h, m₀ + h]`.
    Uniform { half_width: f64 },
}

/// Base shape of a centred finite-variance law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceBase {
    Normal,
    /// `±σ` with probability 1/2 each.
    TwoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialLaw {
    FiniteMean { mean: f64, base: MeanBase },
    /// Cauchy with scale `π c⁺` centred at `location`, so that
    /// `x·P(X > x) → c⁺` on both sides.
    CauchyLike { c_plus: f64, location: f64 },
    FiniteVariance { sigma: f64, base: VarianceBase },
    /// `P(X > x) = c⁺ x^{−γ}` and `P(X < −x) = c⁻ x^{−γ}` beyond `x₀`,
    /// centred when `γ ∈ (1, 2)`.
    ParetoTail { gamma: f64, c_plus: f64, c_minus: f64 },
}

/// Outcome of comparing an empirical log-CF against its leading term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCheck {
    /// `|log φ̂₀(ξ) − L(ξ)|`
    pub absolute: f64,
    /// `absolute / max(|L(ξ)|, |ξ|)` for laws whose leading term is linear in
    /// `ξ`, `absolute / |L(ξ)|` otherwise.
    pub relative: f64,
    pub leading: Complex64,
    pub estimate: Complex64,
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::FiniteMean { mean, base } => {
                mean.is_finite()
                    && match base {
                        MeanBase::Degenerate => true,
                        MeanBase::Exponential => mean > 0.0,
                        MeanBase::Uniform { half_width } => half_width.is_finite() && half_width > 0.0,
                    }
            }
            InitialLaw::CauchyLike { c_plus, location } => c_plus.is_finite() && c_plus > 0.0 && location.is_finite(),
            InitialLaw::FiniteVariance { sigma, .. } => sigma.is_finite() && sigma > 0.0,
            InitialLaw::ParetoTail { gamma, c_plus, c_minus } => {
                gamma > 0.0
                    && gamma < 2.0
                    && gamma != 1.0
                    && c_plus >= 0.0
                    && c_minus >= 0.0
                    && c_plus.is_finite()
                    && c_minus.is_finite()
                    && c_plus + c_minus > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(alloc::format!("invalid initial law {self:?}")))
        }
    }

    /// Stability index `γ` of the attracting law.
    pub fn tail_index(&self) -> f64 {
        match *self {
            InitialLaw::FiniteMean { .. } | InitialLaw::CauchyLike { .. } => 1.0,
            InitialLaw::FiniteVariance { .. } => 2.0,
            InitialLaw::ParetoTail { gamma, .. } => gamma,
        }
    }

    /// `k₀ = (c⁺ + c⁻) π / (2 Γ(γ) sin(πγ/2))`; `None` outside the Pareto case.
    pub fn k0(&self) -> Option<f64> {
        match *self {
            InitialLaw::ParetoTail { gamma: g, c_plus, c_minus } => {
                Some((c_plus + c_minus) * PI / (2.0 * gamma(g) * (0.5 * PI * g).sin()))
            }
            _ => None,
        }
    }

    /// `η₀ = (c⁺ − c⁻)/(c⁺ + c⁻)`; `None` outside the Pareto case.
    pub fn eta0(&self) -> Option<f64> {
        match *self {
            InitialLaw::ParetoTail { c_plus, c_minus, .. } => Some((c_plus - c_minus) / (c_plus + c_minus)),
            _ => None,
        }
    }

    /// Start `x₀ = (c⁺ + c⁻)^{1/γ}` of the Pareto tails.
    pub fn pareto_scale(&self) -> Option<f64> {
        match *self {
            InitialLaw::ParetoTail { gamma, c_plus, c_minus } => Some((c_plus + c_minus).powf(1.0 / gamma)),
            _ => None,
        }
    }

    /// Mean of the uncentred Pareto law, subtracted by the sampler when
    /// `γ ∈ (1, 2)`; `None` elsewhere.
    pub fn pareto_shift(&self) -> Option<f64> {
        match *self {
            InitialLaw::ParetoTail { gamma, c_plus, c_minus } if gamma > 1.0 => {
                let x0 = self.pareto_scale()?;
                Some((c_plus - c_minus) / (c_plus + c_minus) * x0 * gamma / (gamma - 1.0))
            }
            _ => None,
        }
    }

    /// One draw from `F₀`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::FiniteMean { mean, base } => match base {
                MeanBase::Degenerate => mean,
                MeanBase::Exponential => {
                    let e: f64 = Exp1.sample(rng);
                    mean * e
                }
                MeanBase::Uniform { half_width } => mean + half_width * (2.0 * rng.random::<f64>() - 1.0),
            },
            InitialLaw::CauchyLike { c_plus, location } => {
                let u: f64 = rng.random();
                location + PI * c_plus * (PI * (u - 0.5)).tan()
            }
            InitialLaw::FiniteVariance { sigma, base } => match base {
                VarianceBase::Normal => {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                }
                VarianceBase::TwoPoint => {
                    if rng.random::<bool>() {
                        sigma
                    } else {
                        -sigma
                    }
                }
            },
            InitialLaw::ParetoTail { gamma, c_plus, c_minus } => {
                let x0 = (c_plus + c_minus).powf(1.0 / gamma);
                let right = rng.random::<f64>() * (c_plus + c_minus) < c_plus;
                // 1 − U avoids U = 0
                let u = 1.0 - rng.random::<f64>();
                let magnitude = x0 * u.powf(-1.0 / gamma);
                let x = if right { magnitude } else { -magnitude };
                x - self.pareto_shift().unwrap_or(0.0)
            }
        }
    }

    /// The attracting stable characteristic function `ĝ_γ(ξ)`.
    pub fn stable_cf(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        match *self {
            InitialLaw::FiniteMean { mean, .. } => Complex64::new(0.0, mean * xi).exp(),
            InitialLaw::CauchyLike { c_plus, location } => Complex64::new(-PI * c_plus * xi.abs(), location * xi).exp(),
            InitialLaw::FiniteVariance { sigma, .. } => Complex64::new((-0.5 * sigma * sigma * xi * xi).exp(), 0.0),
            InitialLaw::ParetoTail { gamma, .. } => {
                let k0 = self.k0().unwrap_or(0.0);
                let eta = self.eta0().unwrap_or(0.0);
                let scale = k0 * xi.abs().powf(gamma);
                let skew = eta * (0.5 * PI * gamma).tan() * xi.signum();
                Complex64::new(-scale, scale * skew).exp()
            }
        }
    }

    /// Leading term of `log φ₀(ξ)` as `ξ → 0`.
    pub fn log_cf_leading_term(&self, xi: f64) -> Complex64 {
        match *self {
            InitialLaw::FiniteMean { mean, .. } => Complex64::new(0.0, mean * xi),
            _ => self.stable_cf(xi).ln(),
        }
    }

    /// Exact characteristic function `φ₀(ξ)`, where one is known.
    pub fn closed_form_cf(&self, xi: f64) -> Option<Complex64> {
        let cf = match *self {
            InitialLaw::FiniteMean { mean, base } => match base {
                MeanBase::Degenerate => Complex64::new(0.0, mean * xi).exp(),
                MeanBase::Exponential => Complex64::new(1.0, 0.0) / Complex64::new(1.0, -mean * xi),
                MeanBase::Uniform { half_width } => {
                    let x = half_width * xi;
                    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
                    Complex64::new(0.0, mean * xi).exp() * sinc
                }
            },
            InitialLaw::CauchyLike { .. } => self.stable_cf(xi),
            InitialLaw::FiniteVariance { sigma, base } => match base {
                VarianceBase::Normal => self.stable_cf(xi),
                VarianceBase::TwoPoint => Complex64::new((sigma * xi).cos(), 0.0),
            },
            InitialLaw::ParetoTail { .. } => return None,
        };
        Some(cf)
    }

    /// Estimates `log φ₀(ξ)` from `draws` samples and compares it with the
    /// leading term of its small-`ξ` expansion.
    pub fn log_cf_expansion_check<R: Rng + ?Sized>(&self, xi: f64, draws: u64, rng: &mut R) -> Result<ExpansionCheck> {
        if xi == 0.0 || xi.abs() > 0.1 {
            return Err(Error::config("expansion check needs 0 < |xi| <= 0.1"));
        }
        let (mut re, mut im) = (RunningMoments::new(), RunningMoments::new());
        for _ in 0..draws {
            let (s, c) = (xi * self.sample(rng)).sin_cos();
            re.push(c);
            im.push(s);
        }
        let phi = Complex64::new(re.mean(), im.mean());
        if phi.norm() == 0.0 {
            return Err(Error::Numeric("empirical characteristic function vanished".into()));
        }
        let estimate = phi.ln();
        let leading = self.log_cf_leading_term(xi);
        let absolute = (estimate - leading).norm();
        let scale = match self {
            InitialLaw::FiniteMean { .. } | InitialLaw::CauchyLike { .. } => leading.norm().max(xi.abs()),
            _ => leading.norm(),
        };
        Ok(ExpansionCheck { absolute, relative: absolute / scale, leading, estimate })
    }
}
