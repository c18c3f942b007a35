//! Acceptance run: one PASS/FAIL line per criterion, with pinned
//! tolerances and reference constants computed independently of the code
//! under test.
//!
//! Runs every suite at full scale. The boundary criterion dominates the
//! runtime (about half an hour on one core).

use std::time::{Duration, Instant};

use kinetic::config::ExperimentConfig;
use kinetic::table::parse_rows;
use kinetic::verify::{phi_second_finite_difference, run_suite, Suite, SuiteOutcome, TestReport};
use kinetic_core::spectral::WeightModel;

/// `Φ″(1) = 2 − √2` for `A_i = U_i^{1+√2}`, `N = 2`.
const PHI_SECOND: f64 = 0.585_786_437_626_905;
/// `(2/(π Φ″(1)))^{1/2}` for the same model.
const C1: f64 = 1.042_486_417_391_677_2;
/// `t^{1/2} e^{−μ t}` at `t = 10`, `μ = 1 − √2`.
const SCALE_10: f64 = 199.024_547_269_059_33;

const YULE_BUDGET: Duration = Duration::from_secs(30);
const MARTINGALE_BUDGET: Duration = Duration::from_secs(120);
const ODE_BUDGET: Duration = Duration::from_secs(300);

struct Line {
    criterion: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

impl Line {
    fn print(&self) {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{}] {verdict}: {}", self.criterion, self.title, self.detail);
    }
}

fn timed(suite: Suite, workers: usize) -> (SuiteOutcome, Duration) {
    let mut cfg = suite.preset();
    cfg.workers = workers;
    let start = Instant::now();
    let outcome = run_suite(suite, cfg).unwrap_or_else(|e| panic!("suite {suite} failed to run: {e}"));
    (outcome, start.elapsed())
}

fn all(reports: &[&TestReport]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.pass)
}

fn with_prefix<'a>(o: &'a SuiteOutcome, prefix: &str) -> Vec<&'a TestReport> {
    o.reports.iter().filter(|r| r.name.starts_with(prefix)).collect()
}

fn describe(reports: &[&TestReport]) -> String {
    reports
        .iter()
        .map(|r| match r.p_value {
            Some(p) => format!("{} p={p:.3e}", r.name),
            None => format!("{} {:.3e}/{:.3e}", r.name, r.statistic, r.threshold),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn yule() -> Line {
    let (o, elapsed) = timed(Suite::Yule, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    Line {
        criterion: 1,
        title: "Yule laws",
        pass: all(&reports) && elapsed < YULE_BUDGET,
        detail: format!("{}; runtime {:.1}s (limit 30s, 1 worker)", describe(&reports), elapsed.as_secs_f64()),
    }
}

fn martingale() -> (Line, Line) {
    let (o, elapsed) = timed(Suite::Martingale, 4);
    let biggins = with_prefix(&o, "biggins_mean_");
    let gammas_ok = biggins.len() == 6;
    let first = Line {
        criterion: 2,
        title: "Biggins mean one",
        pass: gammas_ok && all(&biggins) && elapsed < MARTINGALE_BUDGET,
        detail: format!(
            "{}; runtime {:.1}s (limit 120s, 4 workers)",
            describe(&biggins),
            elapsed.as_secs_f64()
        ),
    };
    let profile = Suite::Martingale.preset().profile().expect("profile");
    let model = Suite::Martingale.preset().weight_model().expect("model");
    let fd = phi_second_finite_difference(&model, profile.gamma_star).expect("finite difference");
    let oracle_ok = (profile.phi_second_at - PHI_SECOND).abs() <= 1e-6 && (fd - PHI_SECOND).abs() <= 1e-6;
    let mut moments = with_prefix(&o, "derivative_mean_");
    moments.extend(with_prefix(&o, "second_moment_"));
    moments.extend(with_prefix(&o, "phi_second_finite_difference"));
    let second = Line {
        criterion: 3,
        title: "moment identities",
        pass: moments.len() == 5 && all(&moments) && oracle_ok,
        detail: format!(
            "{}; phi''={:.15} finite difference {:.12} reference {PHI_SECOND} (tol 1e-6)",
            describe(&moments),
            profile.phi_second_at,
            fd
        ),
    };
    (first, second)
}

fn max_weight() -> Line {
    let (o, _) = timed(Suite::MaxWeight, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    let medians = o.tables[0].render(&o.header);
    let rows: Vec<String> = parse_rows(&medians)
        .iter()
        .map(|r| format!("t={} median={} ci=[{}, {}] pruned_mass={}", r[0], r[1], r[2], r[3], r[5]))
        .collect();
    Line {
        criterion: 4,
        title: "max normalized weight",
        pass: reports.len() == 3 && all(&reports),
        detail: format!("{}; {}", describe(&reports), rows.join("; ")),
    }
}

fn fixed_point() -> Line {
    let (o, _) = timed(Suite::FixedPoint, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    let history = parse_rows(&o.tables[0].render(&o.header));
    let naive = history.iter().map(|r| r[4].parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
    let last = history.last().expect("history");
    Line {
        criterion: 5,
        title: "fixed-point self-consistency",
        pass: reports.len() == 3 && all(&reports),
        detail: format!(
            "{}; final mean {} accumulated stderr {}; largest |mean - 1| in units of the single-pool stderr {naive:.2}",
            describe(&reports),
            last[1],
            last[3]
        ),
    }
}

fn ode() -> Line {
    let (o, elapsed) = timed(Suite::OdeCrosscheck, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    Line {
        criterion: 6,
        title: "ODE cross-oracle",
        pass: reports.len() == 3 && all(&reports) && elapsed < ODE_BUDGET,
        detail: format!(
            "{} (max |ECF - ODE| / (4 stderr + 1e-3)); runtime {:.1}s (limit 300s)",
            describe(&reports),
            elapsed.as_secs_f64()
        ),
    }
}

fn boundary() -> Line {
    let (o, elapsed) = timed(Suite::Boundary, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    let rows: Vec<String> = parse_rows(&o.tables[0].render(&o.header))
        .iter()
        .map(|r| format!("t={} d={} se={} pruned_mass={}", r[0], r[1], r[2], r[7]))
        .collect();
    Line {
        criterion: 7,
        title: "boundary convergence",
        pass: reports.len() == 3 && all(&reports),
        detail: format!("{}; {}; runtime {:.0}s", describe(&reports), rows.join("; "), elapsed.as_secs_f64()),
    }
}

fn spectral() -> Line {
    let (o, _) = timed(Suite::Spectral, 1);
    let reports: Vec<&TestReport> = o.reports.iter().collect();
    let model = WeightModel::PowerUniform { children: 2, exponent: 1.0 + 2f64.sqrt() };
    let profile = model.find_gamma_star(1e-12).expect("profile");
    let c1_ok = (profile.c_gamma - C1).abs() <= 1e-9;
    let scale_ok = (profile.scaling_factor(10.0) / SCALE_10 - 1.0).abs() <= 1e-9;
    Line {
        criterion: 8,
        title: "spectral constants",
        pass: reports.len() == 13 && all(&reports) && c1_ok && scale_ok,
        detail: format!(
            "{}; c1={} (reference {C1}); scale(10)={} (reference {SCALE_10})",
            describe(&reports),
            profile.c_gamma,
            profile.scaling_factor(10.0)
        ),
    }
}

fn rendered(o: &SuiteOutcome) -> Vec<String> {
    let mut v = vec![o.report_table().render(&o.header)];
    v.extend(o.tables.iter().map(|t| t.render(&o.header)));
    v
}

fn determinism() -> Line {
    let mut pass = true;
    let mut detail = Vec::new();
    for suite in [Suite::Yule, Suite::Martingale, Suite::FixedPoint, Suite::OdeCrosscheck] {
        let base = rendered(&timed(suite, 1).0);
        for workers in [4, 8] {
            let same = rendered(&timed(suite, workers).0) == base;
            pass &= same;
            detail.push(format!("{suite} workers 1 vs {workers}: {}", if same { "identical" } else { "DIFFERENT" }));
        }
    }
    Line { criterion: 9, title: "determinism", pass, detail: detail.join("; ") }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let preset: ExperimentConfig = Suite::Boundary.preset();
    println!("acceptance run, seed {}", preset.seed);
    let mut lines = Vec::new();
    let mut record = |l: Line| {
        l.print();
        lines.push(l);
    };
    record(spectral());
    record(yule());
    let (two, three) = martingale();
    record(two);
    record(three);
    record(max_weight());
    record(fixed_point());
    record(ode());
    record(determinism());
    record(boundary());
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
