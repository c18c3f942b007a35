//! Verification suites: each runs one experiment and turns it into
//! pass/fail reports.

use std::fmt;
use std::path::{Path, PathBuf};

use kinetic_core::branching::{population_pgf, split_count_pmf, BranchingConfig};
use kinetic_core::fixed_point::limit_cf;
use kinetic_core::initial_laws::InitialLaw;
use kinetic_core::numeric::RunningMoments;
use kinetic_core::rng::Purpose;
use kinetic_core::solver::{check_boundary_match, empirical_cf, ode_reference_cf, EcfEstimate};
use kinetic_core::spectral::WeightModel;
use kinetic_core::stats::{bootstrap_median_ci, chi_square_pmf, ks_two_sample, median};
use kinetic_core::Complex64;

use crate::config::{ExperimentConfig, Statistic};
use crate::error::{KineticError, Result};
use crate::experiments::{
    extra_iteration, martingale_route, martingale_run, pool_history, sample_run, simulate_table, symmetric_grid,
    Context,
};
use crate::presets;
use crate::table::{fmt_f64, Header, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Spectral,
    Yule,
    Martingale,
    MaxWeight,
    FixedPoint,
    OdeCrosscheck,
    Boundary,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Spectral,
        Suite::Yule,
        Suite::Martingale,
        Suite::MaxWeight,
        Suite::FixedPoint,
        Suite::OdeCrosscheck,
        Suite::Boundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Spectral => "spectral",
            Suite::Yule => "yule",
            Suite::Martingale => "martingale",
            Suite::MaxWeight => "max_weight",
            Suite::FixedPoint => "fixed_point",
            Suite::OdeCrosscheck => "ode_crosscheck",
            Suite::Boundary => "boundary",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
            KineticError::config(format!("unknown suite {name:?}; expected one of {}", known.join(", ")))
        })
    }

    /// Configuration the suite runs with when none is given.
    pub fn preset(self) -> ExperimentConfig {
        presets::for_suite(self)
    }

    pub fn run(self, ctx: &Context) -> Result<SuiteOutcome> {
        let (reports, tables) = match self {
            Suite::Spectral => spectral(ctx)?,
            Suite::Yule => yule(ctx)?,
            Suite::Martingale => martingale(ctx)?,
            Suite::MaxWeight => max_weight(ctx)?,
            Suite::FixedPoint => fixed_point(ctx)?,
            Suite::OdeCrosscheck => ode_crosscheck(ctx)?,
            Suite::Boundary => boundary(ctx)?,
        };
        Ok(SuiteOutcome { suite: self, reports, tables, header: ctx.header() })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How `pass` follows from the numbers of a [`TestReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// `statistic ≤ threshold`
    AtMost,
    /// `statistic < threshold`
    Below,
    /// `p_value ≥ threshold`
    PValueAtLeast,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::AtMost => "statistic<=threshold",
            Rule::Below => "statistic<threshold",
            Rule::PValueAtLeast => "p_value>=threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub rule: Rule,
    pub pass: bool,
    pub n: u64,
}

impl TestReport {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64, n: u64) -> Self {
        let pass = statistic <= threshold;
        Self { name: name.into(), statistic, threshold, p_value: None, rule: Rule::AtMost, pass, n }
    }

    pub fn below(name: impl Into<String>, statistic: f64, threshold: f64, n: u64) -> Self {
        let pass = statistic < threshold;
        Self { name: name.into(), statistic, threshold, p_value: None, rule: Rule::Below, pass, n }
    }

    pub fn p_value(name: impl Into<String>, statistic: f64, p_value: f64, alpha: f64, n: u64) -> Self {
        let pass = p_value >= alpha;
        Self { name: name.into(), statistic, threshold: alpha, p_value: Some(p_value), rule: Rule::PValueAtLeast, pass, n }
    }

    /// `|mean − target| ≤ sigmas · stderr`.
    pub fn mean(name: impl Into<String>, m: &RunningMoments, target: f64, sigmas: f64) -> Self {
        Self::at_most(name, (m.mean() - target).abs(), sigmas * m.stderr(), m.count())
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} statistic={}", self.name, fmt_f64(self.statistic))?;
        if let Some(p) = self.p_value {
            write!(f, " p={}", fmt_f64(p))?;
        }
        write!(f, " threshold={} ({}) n={}", fmt_f64(self.threshold), self.rule.as_str(), self.n)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub reports: Vec<TestReport>,
    /// Data behind the reports.
    pub tables: Vec<Table>,
    pub header: Header,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| r.pass)
    }

    pub fn report(&self, name: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn report_table(&self) -> Table {
        let mut table =
            Table::new(format!("verify_{}", self.suite), &["name", "statistic", "p_value", "threshold", "rule", "pass", "n"]);
        for r in &self.reports {
            table.push(vec![
                r.name.clone(),
                fmt_f64(r.statistic),
                r.p_value.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.threshold),
                r.rule.as_str().to_string(),
                r.pass.to_string(),
                r.n.to_string(),
            ]);
        }
        table
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = vec![self.report_table().write(dir, &self.header)?];
        for t in &self.tables {
            paths.push(t.write(dir, &self.header)?);
        }
        Ok(paths)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        s.push_str(&format!("suite {}: {verdict}\n", self.suite));
        s
    }
}

type SuiteResult = Result<(Vec<TestReport>, Vec<Table>)>;

fn t_tag(t: f64) -> String {
    format!("t{}", fmt_f64(t))
}

fn spectral(ctx: &Context) -> SuiteResult {
    let tol = ctx.config.tolerances;
    let mut reports = Vec::new();
    let mut table = Table::new("verify_spectral_gamma_star", &["p", "gamma_star", "closed_form", "phi_prime", "mu"]);
    let two = 2.0f64;
    for p in [0.5, 1.0, 1.0 + two.sqrt(), 3.0] {
        let model = WeightModel::PowerUniform { children: 2, exponent: p };
        let profile = model.find_gamma_star(tol.gamma_tol)?;
        let exact = (1.0 + two.sqrt()) / p;
        let tag = format!("p{}", fmt_f64(p));
        reports.push(TestReport::at_most(
            format!("gamma_star_{tag}"),
            (profile.gamma_star - exact).abs(),
            tol.gamma_check,
            1,
        ));
        reports.push(TestReport::at_most(
            format!("tangency_{tag}"),
            (profile.phi_prime_at - profile.mu_at).abs(),
            tol.tangency,
            1,
        ));
        table.push_f64(&[p, profile.gamma_star, exact, profile.phi_prime_at, profile.mu_at]);
    }
    let configured = ctx.config.weight_model()?;
    let profile = ctx.config.profile()?;
    reports.push(TestReport::at_most(
        "tangency_configured",
        (profile.phi_prime_at - profile.mu_at).abs(),
        tol.tangency,
        1,
    ));
    let models = [
        ("power_uniform", WeightModel::PowerUniform { children: 3, exponent: 2.0 }),
        ("deterministic", WeightModel::Deterministic(vec![0.3, 0.5, 0.7])),
        ("kac_angle", WeightModel::KacAngle),
        ("configured", configured),
    ];
    for (name, model) in models {
        let phi0 = model.phi(0.0)?;
        let exact = (model.children() - 1) as f64;
        reports.push(TestReport::at_most(format!("phi_at_zero_{name}"), (phi0 - exact).abs(), 0.0, 1));
    }
    Ok((reports, vec![table]))
}

fn yule(ctx: &Context) -> SuiteResult {
    let cfg = &ctx.config;
    let times = cfg.require_times()?.to_vec();
    let model = cfg.weight_model()?;
    let children = model.children();
    let tree = BranchingConfig::new(model, times.clone()).with_particle_cap(cfg.particle_cap);
    tree.validate()?;
    let batch = ctx.trajectories(0, cfg.replicates, &tree, |states, _| {
        Ok(states
            .iter()
            .map(|s| (s.split_count, s.population() as u64, s.satisfies_population_identity(children)))
            .collect::<Vec<_>>())
    })?;
    let n = batch.ok.len() as u64;
    let tol = cfg.tolerances;
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let tag = t_tag(t);
        let snaps: Vec<(u64, u64, bool)> = batch.ok.iter().map(|v| v[j]).collect();
        let top = snaps.iter().map(|s| s.0).max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; top + 1];
        snaps.iter().for_each(|s| counts[s.0 as usize] += 1);
        let chi = chi_square_pmf(&counts, |k| split_count_pmf(children, t, k as u64), tol.min_expected)?;
        reports.push(TestReport::p_value(format!("split_count_pmf_{tag}"), chi.statistic, chi.p_value, tol.alpha, n));
        let broken = snaps.iter().filter(|s| !s.2).count();
        reports.push(TestReport::at_most(format!("population_identity_{tag}"), broken as f64, 0.0, n));
        for s in [0.3f64, 0.7] {
            let mut m = RunningMoments::new();
            snaps.iter().for_each(|x| m.push(s.powf(x.1 as f64)));
            let exact = population_pgf(children, t, Complex64::new(s, 0.0)).re;
            reports.push(TestReport::mean(format!("pgf_s{}_{tag}", fmt_f64(s)), &m, exact, tol.sigmas));
        }
        let mut table = Table::new(format!("verify_yule_counts_{tag}"), &["k", "observed", "expected"]);
        for (k, &c) in counts.iter().enumerate() {
            table.push(vec![
                k.to_string(),
                c.to_string(),
                fmt_f64(n as f64 * split_count_pmf(children, t, k as u64)),
            ]);
        }
        tables.push(table);
    }
    Ok((reports, tables))
}

/// Central second difference of `Φ` at `γ*`.
pub fn phi_second_finite_difference(model: &WeightModel, gamma: f64) -> Result<f64> {
    let h = 1e-4;
    let (a, b, c) = (model.phi(gamma - h)?, model.phi(gamma)?, model.phi(gamma + h)?);
    Ok((a - 2.0 * b + c) / (h * h))
}

/// `γ*/2`, `γ*`, `2γ*`, keeping only exponents with `Φ(2γ) < ∞` so that
/// standard errors exist.
fn default_gammas(gamma_star: f64, s_infinity: f64) -> Vec<f64> {
    [0.5 * gamma_star, gamma_star, 2.0 * gamma_star].into_iter().filter(|&g| 2.0 * g < s_infinity).collect()
}

fn martingale(ctx: &Context) -> SuiteResult {
    let cfg = &ctx.config;
    let tol = cfg.tolerances;
    let profile = cfg.profile()?;
    let model = cfg.weight_model()?;
    let gammas = cfg.gammas.clone().unwrap_or_else(|| default_gammas(profile.gamma_star, profile.s_infinity));
    let fd = phi_second_finite_difference(&model, profile.gamma_star)?;
    let mut reports = vec![TestReport::at_most(
        "phi_second_finite_difference",
        (fd - profile.phi_second_at).abs(),
        tol.finite_difference,
        1,
    )];
    let run = martingale_run(ctx, &gammas)?;
    for (j, &t) in run.times.iter().enumerate() {
        let tag = t_tag(t);
        for (g, &gamma) in gammas.iter().enumerate() {
            let m = moments(run.biggins[g][j].iter().copied());
            reports.push(TestReport::mean(format!("biggins_mean_g{gamma:.4}_{tag}"), &m, 1.0, tol.sigmas));
        }
        let obs = &run.observations[j];
        let d = moments(obs.iter().map(|o| o.readout.derivative));
        reports.push(TestReport::mean(format!("derivative_mean_{tag}"), &d, 0.0, tol.sigmas));
        let sec = moments(obs.iter().map(|o| o.readout.second_moment));
        reports.push(TestReport::mean(
            format!("second_moment_{tag}"),
            &sec,
            t * profile.phi_second_at,
            tol.sigmas,
        ));
    }
    let mut table = simulate_table(&run, cfg.label());
    table.name = "verify_martingale_summary".into();
    Ok((reports, vec![table]))
}

fn moments(values: impl IntoIterator<Item = f64>) -> RunningMoments {
    let mut m = RunningMoments::new();
    values.into_iter().for_each(|x| m.push(x));
    m
}

fn max_weight(ctx: &Context) -> SuiteResult {
    let cfg = &ctx.config;
    let tol = cfg.tolerances;
    let run = martingale_run(ctx, &[])?;
    let streams = ctx.streams();
    let mut table = Table::new(
        "verify_max_weight_medians",
        &["t", "median", "ci_lo", "ci_hi", "n", "mean_pruned_mass", "max_pruned_mass"],
    );
    let mut stats = Vec::new();
    for (j, &t) in run.times.iter().enumerate() {
        let values: Vec<f64> = run.observations[j].iter().map(|o| t.sqrt() * o.readout.max_norm_weight).collect();
        let med = median(&values)?;
        let mut rng = streams.stream(Purpose::Bootstrap, j as u64);
        let (lo, hi) = bootstrap_median_ci(&values, tol.bootstrap_level, tol.bootstrap_resamples, &mut rng)?;
        let pm = moments(run.observations[j].iter().map(|o| o.pruned_mass));
        let pm_max = run.observations[j].iter().map(|o| o.pruned_mass).fold(0.0, f64::max);
        table.push(vec![
            fmt_f64(t),
            fmt_f64(med),
            fmt_f64(lo),
            fmt_f64(hi),
            values.len().to_string(),
            fmt_f64(pm.mean()),
            fmt_f64(pm_max),
        ]);
        stats.push((t, med, lo, hi, values.len() as u64));
    }
    let mut reports = Vec::new();
    for w in stats.windows(2) {
        let (a, b) = (w[0], w[1]);
        reports.push(TestReport::below(
            format!("median_decreases_{}_to_{}", t_tag(a.0), t_tag(b.0)),
            b.1 - a.1,
            0.0,
            b.4.min(a.4),
        ));
    }
    if let (Some(first), Some(last)) = (stats.first(), stats.last()) {
        if stats.len() > 1 {
            reports.push(TestReport::below(
                format!("median_ci_separated_{}_{}", t_tag(first.0), t_tag(last.0)),
                last.3 - first.2,
                0.0,
                first.4.min(last.4),
            ));
        }
    }
    Ok((reports, vec![table]))
}

fn fixed_point(ctx: &Context) -> SuiteResult {
    let cfg = &ctx.config;
    let tol = cfg.tolerances;
    let profile = cfg.profile()?;
    let model = cfg.weight_model()?;
    let run = pool_history(ctx, &profile, &model)?;
    let next = extra_iteration(ctx, &profile, &model, &run);
    let n = run.pool.len() as u64;
    let iters = run.history.len();
    let ks = ks_two_sample(&run.pool, &next)?;
    let mut reports = vec![TestReport::p_value(
        format!("ks_iteration_{}_vs_{}", iters, iters + 1),
        ks.statistic,
        ks.p_value,
        tol.alpha,
        n,
    )];
    let worst = run
        .history
        .iter()
        .zip(run.accumulated_stderr())
        .map(|(h, se)| (h.mean - 1.0).abs() / se)
        .fold(0.0, f64::max);
    reports.push(TestReport::at_most("pool_mean_max_z", worst, tol.sigmas, n));
    let negative = run.pool.iter().chain(&next).filter(|&&d| d.is_nan() || d < 0.0).count();
    reports.push(TestReport::at_most("pool_nonnegative", negative as f64, 0.0, 2 * n));
    let mut table = run.table("verify_fixed_point_history".into());
    table.meta("ks_statistic", fmt_f64(ks.statistic));
    Ok((reports, vec![table]))
}

/// Monte Carlo ECF against the ODE reference at every configured time.
pub fn ode_comparison(ctx: &Context, prefix: &str) -> SuiteResult {
    let cfg = &ctx.config;
    let tol = cfg.tolerances;
    let grid = symmetric_grid(cfg)?;
    let law = cfg.initial_law()?;
    let model = cfg.weight_model()?;
    let times = cfg.require_times()?.to_vec();
    let references: Vec<Vec<Complex64>> =
        times.iter().map(|&t| ode_reference_cf(&model, &law, t, &grid)).collect::<std::result::Result<_, _>>()?;
    let run = sample_run(ctx, 0, &times, &law, Statistic::Solution)?;
    let xi = grid.values();
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let ecf = empirical_cf(&run.samples[j], &xi)?;
        let mut table = Table::new(
            format!("{prefix}_{}", t_tag(t)),
            &["xi", "ode_re", "ode_im", "ecf_re", "ecf_im", "stderr", "abs_diff", "bound"],
        );
        let mut worst: f64 = 0.0;
        for (k, &x) in xi.iter().enumerate() {
            let diff = (ecf.values[k] - references[j][k]).norm();
            let bound = tol.sigmas * ecf.stderr(k) + tol.ode_slack;
            worst = worst.max(diff / bound);
            let r = references[j][k];
            let e = ecf.values[k];
            table.push_f64(&[x, r.re, r.im, e.re, e.im, ecf.stderr(k), diff, bound]);
        }
        reports.push(TestReport::at_most(format!("ode_vs_monte_carlo_{}", t_tag(t)), worst, 1.0, ecf.n as u64));
        tables.push(table);
    }
    Ok((reports, tables))
}

fn ode_crosscheck(ctx: &Context) -> SuiteResult {
    ode_comparison(ctx, "verify_ode_crosscheck")
}

fn sup_distance(a: &EcfEstimate, b: &EcfEstimate) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, f64::NAN);
    for j in 0..a.xi.len() {
        let d = (a.values[j] - b.values[j]).norm();
        if j == 0 || d > best.0 {
            best = (d, a.stderr(j).hypot(b.stderr(j)), a.xi[j]);
        }
    }
    best
}

fn boundary(ctx: &Context) -> SuiteResult {
    let cfg = &ctx.config;
    let tol = cfg.tolerances;
    let profile = cfg.profile()?;
    let law = cfg.initial_law()?;
    check_boundary_match(&profile, &law)?;
    let model = cfg.weight_model()?;
    let times = cfg.require_times()?.to_vec();
    let grid = cfg.xi()?.values();
    let t_ref = *times.last().expect("times are non-empty");
    let run = sample_run(ctx, 0, &times, &law, Statistic::Rescaled)?;
    let reference = sample_run(ctx, 1, &[t_ref], &law, Statistic::Rescaled)?;
    let d_ref = martingale_route(&reference.biggins[0], t_ref, &profile);
    let w = limit_cf(&profile, &law, &d_ref, &grid)?;
    let pool = pool_history(ctx, &profile, &model)?;
    let w_iter = limit_cf(&profile, &law, &pool.pool, &grid)?;
    let mut table = Table::new(
        "verify_boundary_distance",
        &[
            "t",
            "distance",
            "stderr",
            "argmax_xi",
            "distance_iteration_route",
            "ks_martingale_reference",
            "ks_iteration_route",
            "mean_pruned_mass",
            "n_ok",
            "n_aborted",
        ],
    );
    table
        .meta("reference", format!("independent martingale-route sample at t = {}", fmt_f64(t_ref)))
        .meta("reference_aborted", reference.aborted)
        .meta("iteration_route", format!("pool {} after {} iterations", cfg.pool.size, cfg.pool.iterations));
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    let mut dist = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let ecf = empirical_cf(&run.samples[j], &grid)?;
        let (d, se, at) = sup_distance(&ecf, &w);
        let (d_iter, _, _) = sup_distance(&ecf, &w_iter);
        let d_t = martingale_route(&run.biggins[j], t, &profile);
        let ks_ref = ks_two_sample(&d_t, &d_ref)?.statistic;
        let ks_iter = ks_two_sample(&d_t, &pool.pool)?.statistic;
        let pm = moments(run.pruned_mass[j].iter().copied());
        table.push(vec![
            fmt_f64(t),
            fmt_f64(d),
            fmt_f64(se),
            fmt_f64(at),
            fmt_f64(d_iter),
            fmt_f64(ks_ref),
            fmt_f64(ks_iter),
            fmt_f64(pm.mean()),
            run.biggins[j].len().to_string(),
            run.aborted.to_string(),
        ]);
        if matches!(law, InitialLaw::FiniteVariance { .. }) {
            let worst = (0..grid.len())
                .map(|k| ecf.values[k].im.abs() / ecf.stderr_im[k])
                .filter(|z| z.is_finite())
                .fold(0.0, f64::max);
            reports.push(TestReport::at_most(format!("imaginary_part_{}", t_tag(t)), worst, tol.sigmas, ecf.n as u64));
        }
        let mut cf = Table::new(
            format!("verify_boundary_cf_{}", t_tag(t)),
            &["xi", "ecf_re", "ecf_im", "ecf_stderr", "limit_re", "limit_im", "limit_stderr", "abs_diff"],
        );
        for (k, &xi) in grid.iter().enumerate() {
            let (e, l) = (ecf.values[k], w.values[k]);
            cf.push_f64(&[xi, e.re, e.im, ecf.stderr(k), l.re, l.im, w.stderr(k), (e - l).norm()]);
        }
        tables.push(cf);
        dist.push((t, d, se, ecf.n as u64));
    }
    for p in dist.windows(2) {
        let (a, b) = (p[0], p[1]);
        reports.push(TestReport::at_most(
            format!("distance_non_increasing_{}_to_{}", t_tag(a.0), t_tag(b.0)),
            b.1 - a.1,
            tol.sigmas * a.2.hypot(b.2),
            a.3.min(b.3),
        ));
    }
    let last = dist.last().expect("times are non-empty");
    reports.push(TestReport::at_most(format!("final_distance_{}", t_tag(last.0)), last.1, tol.final_tol, last.3));
    tables.insert(0, table);
    Ok((reports, tables))
}

/// Runs `suite` under `config`.
pub fn run_suite(suite: Suite, config: ExperimentConfig) -> Result<SuiteOutcome> {
    let ctx = Context::new(config)?;
    suite.run(&ctx)
}
