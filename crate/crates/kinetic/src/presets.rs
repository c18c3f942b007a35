//! Built-in configurations of the verification suites. The same
//! configurations ship as JSON files under `configs/`.

use crate::config::{ExperimentConfig, GridSpec, LawSpec, ModelSpec, PruneSpec};
use crate::verify::Suite;

/// `A_i = U_i^{1+√2}`, `N = 2`: the model with `γ* = 1`.
pub fn boundary_model() -> ModelSpec {
    ModelSpec::PowerUniform { n: 2, p: 1.0 + std::f64::consts::SQRT_2 }
}

/// Pruning used for long horizons on the boundary model.
pub const LONG_HORIZON_PRUNE: PruneSpec = PruneSpec { kappa: 4.0, min_level: 10.0 };

pub fn for_suite(suite: Suite) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(boundary_model());
    cfg.label = Some(suite.name().to_string());
    match suite {
        Suite::Spectral => {
            cfg.s_grid = Some(GridSpec { min: 0.0, max: 3.0, points: 61 });
        }
        Suite::Yule => {
            cfg.times = vec![1.0];
            cfg.replicates = 100_000;
        }
        Suite::Martingale => {
            cfg.times = vec![1.0, 5.0];
            cfg.replicates = 100_000;
        }
        Suite::MaxWeight => {
            cfg.times = vec![5.0, 10.0, 20.0];
            cfg.replicates = 10_000;
            cfg.prune = Some(LONG_HORIZON_PRUNE);
        }
        Suite::FixedPoint => {}
        Suite::OdeCrosscheck => {
            cfg.model = ModelSpec::Deterministic { weights: vec![0.3, 0.3] };
            cfg.law = Some(LawSpec::FiniteVarianceNormal { sigma: 1.0 });
            cfg.times = vec![0.5, 1.0, 2.0];
            cfg.xi_grid = Some(GridSpec { min: -2.0, max: 2.0, points: 401 });
            cfg.replicates = 100_000;
        }
        Suite::Boundary => {
            cfg.law = Some(LawSpec::FiniteMeanDegenerate { mean: 1.0 });
            cfg.times = vec![10.0, 20.0, 30.0];
            cfg.xi_grid = Some(GridSpec { min: -4.0, max: 4.0, points: 81 });
            cfg.replicates = 100_000;
            cfg.prune = Some(LONG_HORIZON_PRUNE);
        }
    }
    cfg
}
