//! The probabilistic representation of the solution: smoothing transforms of
//! the initial law along the branching random walk, empirical characteristic
//! functions, and a direct Runge–Kutta integrator for the Fourier-side
//! equation `∂φ/∂t = −φ + Q̂(φ)`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::branching::PopulationState;
use crate::initial_laws::InitialLaw;
use crate::numeric::{CompensatedSum, RunningMoments};
use crate::quad::gauss_legendre;
use crate::spectral::{SpectralProfile, WeightModel};
use crate::{Error, Result};

/// Largest gap allowed between the law's tail index and `γ*`.
pub const TAIL_INDEX_TOLERANCE: f64 = 1e-6;
pub const MAX_ODE_STEP: f64 = 0.01;
pub const DEFAULT_INTERPOLATION_TOL: f64 = 1e-6;
const KAC_NODES: usize = 64;

/// `Σ_k e^{γ z_k} X_k` with fresh i.i.d. `X_k ~ F₀`.
pub fn smoothing_sample<R: Rng + ?Sized>(state: &PopulationState, law: &InitialLaw, gamma: f64, rng: &mut R) -> f64 {
    state
        .log_weights
        .iter()
        .map(|&z| (gamma * z).exp() * law.sample(rng))
        .collect::<CompensatedSum>()
        .value()
}

/// Fails unless the law's stability index equals `γ*`.
pub fn check_boundary_match(profile: &SpectralProfile, law: &InitialLaw) -> Result<()> {
    let index = law.tail_index();
    if (index - profile.gamma_star).abs() > TAIL_INDEX_TOLERANCE {
        return Err(Error::TailIndexMismatch { law: index, gamma_star: profile.gamma_star });
    }
    Ok(())
}

/// `t^{1/(2γ*)} e^{−μ(γ*) t} Σ_k e^{z_k} X_k`.
pub fn rescaled_sample<R: Rng + ?Sized>(
    state: &PopulationState,
    profile: &SpectralProfile,
    law: &InitialLaw,
    rng: &mut R,
) -> Result<f64> {
    check_boundary_match(profile, law)?;
    Ok(profile.scaling_factor(state.time) * smoothing_sample(state, law, 1.0, rng))
}

/// Uniform grid of `points` values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl XiGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let grid = Self { min, max, points };
        grid.validate()?;
        Ok(grid)
    }

    /// Symmetric grid on `[−half_width, half_width]` with spacing `step`.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        let intervals = (2.0 * half_width / step).round();
        Self::new(-half_width, half_width, intervals as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max && self.points >= 2) {
            return Err(Error::config("xi grid needs min < max and at least two points"));
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.min == -self.max
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    /// Grid point `j`; mirrored points of a symmetric grid are exact
    /// negatives of each other and the centre is exactly 0.
    pub fn value(&self, j: usize) -> f64 {
        let n = (self.points - 1) as f64;
        let j = j as f64;
        self.max * j / n - (-self.min) * (n - j) / n
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.value(j)).collect()
    }
}

/// Monte Carlo estimate of `E e^{iξS}` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EcfEstimate {
    pub xi: Vec<f64>,
    pub values: Vec<Complex64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    pub n: usize,
}

impl EcfEstimate {
    /// Standard error of point `j`, real and imaginary parts combined in
    /// quadrature.
    pub fn stderr(&self, j: usize) -> f64 {
        self.stderr_re[j].hypot(self.stderr_im[j])
    }
}

/// `(1/n) Σ_k e^{iξ_j S_k}` at every grid point.
pub fn empirical_cf(samples: &[f64], xi: &[f64]) -> Result<EcfEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len() });
    }
    let mut values = Vec::with_capacity(xi.len());
    let mut stderr_re = Vec::with_capacity(xi.len());
    let mut stderr_im = Vec::with_capacity(xi.len());
    for &x in xi {
        let (mut re, mut im) = (RunningMoments::new(), RunningMoments::new());
        for &s in samples {
            let (sin, cos) = (x * s).sin_cos();
            re.push(cos);
            im.push(sin);
        }
        values.push(Complex64::new(re.mean(), im.mean()));
        stderr_re.push(re.stderr());
        stderr_im.push(im.stderr());
    }
    Ok(EcfEstimate { xi: xi.to_vec(), values, stderr_re, stderr_im, n: samples.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Upper bound on the Runge–Kutta step; at most [`MAX_ODE_STEP`].
    pub max_step: f64,
    /// Largest accepted cubic-interpolation error of `φ₀` at grid midpoints.
    pub interpolation_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { max_step: MAX_ODE_STEP, interpolation_tol: DEFAULT_INTERPOLATION_TOL }
    }
}

// Four-point Lagrange stencil on the grid for an off-grid argument.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    start: usize,
    weights: [f64; 4],
}

impl Stencil {
    fn new(grid: &XiGrid, y: f64) -> Self {
        let h = grid.step();
        let pos = (y - grid.min) / h;
        let start = (pos.floor() as isize - 1).clamp(0, grid.points as isize - 4) as usize;
        let u = pos - start as f64;
        let mut weights = [1.0; 4];
        for (i, w) in weights.iter_mut().enumerate() {
            for j in 0..4 {
                if i != j {
                    *w *= (u - j as f64) / (i as f64 - j as f64);
                }
            }
        }
        Self { start, weights }
    }

    #[inline]
    fn apply(&self, f: &[Complex64]) -> Complex64 {
        let s = &f[self.start..self.start + 4];
        s[0] * self.weights[0] + s[1] * self.weights[1] + s[2] * self.weights[2] + s[3] * self.weights[3]
    }
}

// Q̂(φ)(ξ_j) = Σ_m w_m Π_i φ(a_{m,i} ξ_j).
struct CollisionOperator {
    nodes: Vec<f64>,
    // per grid point, per node: one stencil per child
    stencils: Vec<Vec<Stencil>>,
    children: usize,
}

impl CollisionOperator {
    fn new(model: &WeightModel, grid: &XiGrid) -> Result<Self> {
        let (nodes, weights): (Vec<f64>, Vec<Vec<f64>>) = match model {
            WeightModel::Deterministic(a) => {
                if a.iter().any(|&x| x > 1.0) {
                    return Err(Error::Unsupported("the ODE oracle needs every weight a_i <= 1".into()));
                }
                (alloc::vec![1.0], alloc::vec![a.clone()])
            }
            WeightModel::KacAngle => {
                let (x, w) = gauss_legendre(KAC_NODES);
                // θ uniform on [0, π/2] by symmetry of (|cos Θ|, |sin Θ|)
                let quarter = core::f64::consts::FRAC_PI_4;
                let angles = x.iter().map(|&x| quarter * (1.0 + x));
                (w.iter().map(|w| 0.5 * w).collect(), angles.map(|th| alloc::vec![th.cos(), th.sin()]).collect())
            }
            _ => {
                return Err(Error::Unsupported(
                    "the ODE oracle supports deterministic weights and the Kac angle model".into(),
                ))
            }
        };
        let children = weights[0].len();
        let stencils = (0..grid.points)
            .map(|j| {
                let xi = grid.value(j);
                weights.iter().flat_map(|a| a.iter().map(move |&ai| Stencil::new(grid, ai * xi))).collect()
            })
            .collect();
        Ok(Self { nodes, stencils, children })
    }

    fn apply(&self, phi: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(&self.stencils) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &w) in self.nodes.iter().enumerate() {
                let mut prod = Complex64::new(w, 0.0);
                for s in &row[m * self.children..(m + 1) * self.children] {
                    prod *= s.apply(phi);
                }
                acc += prod;
            }
            *o = acc;
        }
    }
}

/// `φ(t, ξ_j)` from the Cauchy problem `∂φ/∂t = −φ + Q̂(φ)`, `φ(0) = φ₀`,
/// with default options.
pub fn ode_reference_cf(model: &WeightModel, law: &InitialLaw, t: f64, grid: &XiGrid) -> Result<Vec<Complex64>> {
    ode_reference_cf_with(model, law, t, grid, &OdeOptions::default())
}

/// Classical RK4 on the grid; off-grid arguments `a_i ξ` are read by cubic
/// interpolation.
pub fn ode_reference_cf_with(
    model: &WeightModel,
    law: &InitialLaw,
    t: f64,
    grid: &XiGrid,
    options: &OdeOptions,
) -> Result<Vec<Complex64>> {
    model.validate()?;
    law.validate()?;
    grid.validate()?;
    if grid.points < 4 || !grid.is_symmetric() {
        return Err(Error::config("the ODE oracle needs a symmetric grid of at least four points"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config("time must be finite and nonnegative"));
    }
    if !(options.max_step > 0.0 && options.max_step <= MAX_ODE_STEP) {
        return Err(Error::config("ODE step must lie in (0, 0.01]"));
    }
    let closed = |xi: f64| {
        law.closed_form_cf(xi)
            .ok_or_else(|| Error::Unsupported("the ODE oracle needs a closed-form initial characteristic function".into()))
    };
    let mut phi = grid.values().into_iter().map(closed).collect::<Result<Vec<_>>>()?;

    let mut worst: f64 = 0.0;
    for j in 0..grid.points - 1 {
        let mid = 0.5 * (grid.value(j) + grid.value(j + 1));
        worst = worst.max((Stencil::new(grid, mid).apply(&phi) - closed(mid)?).norm());
    }
    if worst > options.interpolation_tol {
        return Err(Error::GridTooCoarse { error: worst, tolerance: options.interpolation_tol });
    }
    if t == 0.0 {
        return Ok(phi);
    }

    let op = CollisionOperator::new(model, grid)?;
    let steps = (t / options.max_step).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let n = grid.points;
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (alloc::vec![zero; n], alloc::vec![zero; n], alloc::vec![zero; n], alloc::vec![zero; n]);
    let mut stage = alloc::vec![zero; n];
    let rhs = |y: &[Complex64], out: &mut [Complex64]| {
        op.apply(y, out);
        for (o, v) in out.iter_mut().zip(y) {
            *o -= v;
        }
    };
    for _ in 0..steps {
        rhs(&phi, &mut k1);
        for j in 0..n {
            stage[j] = phi[j] + k1[j] * (0.5 * h);
        }
        rhs(&stage, &mut k2);
        for j in 0..n {
            stage[j] = phi[j] + k2[j] * (0.5 * h);
        }
        rhs(&stage, &mut k3);
        for j in 0..n {
            stage[j] = phi[j] + k3[j] * h;
        }
        rhs(&stage, &mut k4);
        for j in 0..n {
            phi[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{biggins_martingale, simulate_population, BranchingConfig};
    use crate::initial_laws::{MeanBase, VarianceBase};
    use approx::assert_relative_eq;
    use core::f64::consts::SQRT_2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const ONE: InitialLaw = InitialLaw::FiniteMean { mean: 1.0, base: MeanBase::Degenerate };
    const NORMAL: InitialLaw = InitialLaw::FiniteVariance { sigma: 1.0, base: VarianceBase::Normal };

    fn deterministic() -> WeightModel {
        WeightModel::Deterministic(alloc::vec![0.3, 0.3])
    }

    #[test]
    fn smoothing_sample_at_time_zero_is_one_draw() {
        let law = InitialLaw::FiniteMean { mean: 2.0, base: MeanBase::Exponential };
        let s0 = PopulationState::initial();
        let x = smoothing_sample(&s0, &law, 1.7, &mut ChaCha8Rng::seed_from_u64(1));
        let y = law.sample(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(x, y);
    }

    #[test]
    fn smoothing_mean_follows_moment_functional() {
        let model = deterministic();
        let law = InitialLaw::FiniteMean { mean: 1.0, base: MeanBase::Exponential };
        let cfg = BranchingConfig::new(model, alloc::vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = RunningMoments::new();
        for _ in 0..100_000 {
            let s = simulate_population(&cfg, &mut rng).unwrap();
            m.push(smoothing_sample(&s[0], &law, 1.0, &mut rng));
        }
        let expect = (-0.4f64).exp();
        assert!((m.mean() - expect).abs() < 4.0 * m.stderr(), "{} ± {}", m.mean(), m.stderr());
    }

    #[test]
    fn degenerate_law_reproduces_the_martingale() {
        let model = WeightModel::PowerUniform { children: 2, exponent: 1.0 + SQRT_2 };
        let profile = model.find_gamma_star(1e-12).unwrap();
        let cfg = BranchingConfig::new(model, alloc::vec![3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = &simulate_population(&cfg, &mut rng).unwrap()[0];
            let smooth = smoothing_sample(s, &ONE, 1.0, &mut rng);
            let m = biggins_martingale(s, 1.0, profile.phi_at);
            assert_relative_eq!(smooth, (profile.phi_at * 3.0).exp() * m, max_relative = 1e-12);
            let r = rescaled_sample(s, &profile, &ONE, &mut rng).unwrap();
            assert_eq!(r, profile.scaling_factor(3.0) * smooth);
            assert_relative_eq!(r, 3f64.sqrt() * m, max_relative = 1e-10);
        }
    }

    #[test]
    fn rescaling_requires_matching_tail_index() {
        let model = WeightModel::PowerUniform { children: 2, exponent: 0.5 * (1.0 + SQRT_2) };
        let profile = model.find_gamma_star(1e-12).unwrap();
        let s = PopulationState::initial();
        let err = rescaled_sample(&s, &profile, &ONE, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::TailIndexMismatch { .. }));
        assert!(rescaled_sample(&s, &profile, &NORMAL, &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
    }

    #[test]
    fn grid_points_mirror_exactly() {
        let g = XiGrid::symmetric(2.0, 0.01).unwrap();
        assert_eq!(g.points, 401);
        let v = g.values();
        assert_eq!(v[200], 0.0);
        assert_eq!(v[0], -2.0);
        assert_eq!(v[400], 2.0);
        for j in 0..401 {
            assert_eq!(v[j], -v[400 - j]);
        }
        assert!(XiGrid::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn ecf_examples() {
        let zeros = [0.0; 10];
        let e = empirical_cf(&zeros, &[-1.0, 0.5, 3.0]).unwrap();
        assert!(e.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = empirical_cf(&xs, &[0.0, 1.0]).unwrap();
        assert_eq!(e.values[0], Complex64::new(1.0, 0.0));
        assert_eq!(e.stderr(0), 0.0);
        let exact = (-0.5f64).exp();
        assert!((e.values[1].re - exact).abs() < 4.0 * e.stderr_re[1]);
        assert!(e.values[1].im.abs() < 4.0 * e.stderr_im[1]);
        assert!(matches!(empirical_cf(&[1.0], &[1.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn ecf_is_hermitian_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..5000).map(|_| ONE.sample(&mut rng) + rand::Rng::random::<f64>(&mut rng) * 3.0 - 1.0).collect();
        let grid = XiGrid::symmetric(3.0, 0.25).unwrap().values();
        let e = empirical_cf(&xs, &grid).unwrap();
        let n = grid.len();
        for j in 0..n {
            assert_eq!(e.values[j], e.values[n - 1 - j].conj());
        }
        let doubled: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let d = empirical_cf(&doubled, &grid).unwrap();
        let wide: Vec<f64> = grid.iter().map(|x| 2.0 * x).collect();
        let w = empirical_cf(&xs, &wide).unwrap();
        assert_eq!(d.values, w.values);
    }

    #[test]
    fn ode_returns_initial_condition_at_time_zero() {
        let grid = XiGrid::symmetric(2.0, 0.01).unwrap();
        let phi = ode_reference_cf(&deterministic(), &NORMAL, 0.0, &grid).unwrap();
        for (j, v) in phi.iter().enumerate() {
            assert_eq!(*v, NORMAL.closed_form_cf(grid.value(j)).unwrap());
        }
    }

    #[test]
    fn ode_preserves_the_modulus_bound() {
        let grid = XiGrid::symmetric(2.0, 0.01).unwrap();
        let model = WeightModel::Deterministic(alloc::vec![0.6, 0.9]);
        let phi = ode_reference_cf(&model, &ONE, 1.5, &grid).unwrap();
        assert!(phi.iter().all(|v| v.norm() <= 1.0 + 1e-6));
        assert!((phi[200] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ode_matches_exact_solution_for_unit_weights_mean() {
        // With X ≡ m and a_i summing to one, Σ e^{z_k} = 1 on every path:
        // for (1/2, 1/2), φ(t, ξ) = e^{imξ} for all t.
        let grid = XiGrid::symmetric(2.0, 0.01).unwrap();
        let model = WeightModel::Deterministic(alloc::vec![0.5, 0.5]);
        let phi = ode_reference_cf(&model, &ONE, 1.0, &grid).unwrap();
        for (j, v) in phi.iter().enumerate() {
            let exact = Complex64::new(0.0, grid.value(j)).exp();
            assert!((v - exact).norm() < 1e-8, "{j}: {v} vs {exact}");
        }
    }

    #[test]
    fn ode_matches_gaussian_fixed_point_for_kac() {
        // a₁² + a₂² = 1 makes the centred normal law invariant.
        let grid = XiGrid::symmetric(2.0, 0.02).unwrap();
        let phi = ode_reference_cf(&WeightModel::KacAngle, &NORMAL, 0.5, &grid).unwrap();
        for (j, v) in phi.iter().enumerate() {
            let exact = NORMAL.closed_form_cf(grid.value(j)).unwrap();
            assert!((v - exact).norm() < 1e-7, "{j}: {v} vs {exact}");
        }
    }

    #[test]
    fn ode_rejects_unsupported_inputs() {
        let grid = XiGrid::symmetric(2.0, 0.01).unwrap();
        let big = WeightModel::Deterministic(alloc::vec![1.2, 0.3]);
        assert!(matches!(ode_reference_cf(&big, &NORMAL, 1.0, &grid), Err(Error::Unsupported(_))));
        let power = WeightModel::PowerUniform { children: 2, exponent: 1.0 };
        assert!(matches!(ode_reference_cf(&power, &NORMAL, 1.0, &grid), Err(Error::Unsupported(_))));
        let pareto = InitialLaw::ParetoTail { gamma: 0.5, c_plus: 1.0, c_minus: 1.0 };
        assert!(matches!(ode_reference_cf(&deterministic(), &pareto, 1.0, &grid), Err(Error::Unsupported(_))));
        let coarse = XiGrid::new(-20.0, 20.0, 9).unwrap();
        assert!(matches!(ode_reference_cf(&deterministic(), &NORMAL, 1.0, &coarse), Err(Error::GridTooCoarse { .. })));
        let lopsided = XiGrid::new(-1.0, 2.0, 301).unwrap();
        assert!(matches!(ode_reference_cf(&deterministic(), &NORMAL, 1.0, &lopsided), Err(Error::Config(_))));
        let opts = OdeOptions { max_step: 0.05, ..OdeOptions::default() };
        assert!(ode_reference_cf_with(&deterministic(), &NORMAL, 1.0, &grid, &opts).is_err());
    }

    #[test]
    fn ode_agrees_with_monte_carlo() {
        let grid = XiGrid::symmetric(2.0, 0.05).unwrap();
        let model = deterministic();
        let t = 1.0;
        let phi = ode_reference_cf(&model, &NORMAL, t, &grid).unwrap();
        let cfg = BranchingConfig::new(model, alloc::vec![t]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples: Vec<f64> = (0..50_000)
            .map(|_| {
                let s = simulate_population(&cfg, &mut rng).unwrap();
                smoothing_sample(&s[0], &NORMAL, 1.0, &mut rng)
            })
            .collect();
        let e = empirical_cf(&samples, &grid.values()).unwrap();
        for (j, p) in phi.iter().enumerate() {
            assert!((e.values[j] - p).norm() <= 4.0 * e.stderr(j) + 1e-3, "{j}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ecf_modulus_is_bounded(xs in proptest::collection::vec(-100.0..100.0f64, 2..200), xi in -5.0..5.0f64) {
            let e = empirical_cf(&xs, &[xi]).unwrap();
            prop_assert!(e.values[0].norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn cubic_stencil_reproduces_cubics(y in -2.0..2.0f64, c in proptest::array::uniform4(-3.0..3.0f64)) {
            let grid = XiGrid::symmetric(2.0, 0.1).unwrap();
            let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
            let vals: Vec<Complex64> = grid.values().iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
            let got = Stencil::new(&grid, y).apply(&vals).re;
            prop_assert!((got - f(y)).abs() < 1e-10);
        }
    }
}
