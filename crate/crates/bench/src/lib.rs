//! Fixed instances shared by the benchmarks.

use cutplane::engine::{Method, MethodConfig, Sampling};
use cutplane::models::{generate_instance, Family, InstanceParams};
use cutplane::program::StochasticProgram;

pub fn inventory(stages: usize, realizations: usize) -> StochasticProgram {
    let params = InstanceParams {
        stages,
        realizations,
        assets: 0,
    };
    generate_instance(Family::Inventory, params, 1).expect("valid parameters")
}

pub fn portfolio(stages: usize, realizations: usize, assets: usize) -> StochasticProgram {
    let params = InstanceParams {
        stages,
        realizations,
        assets,
    };
    generate_instance(Family::Portfolio, params, 1).expect("valid parameters")
}

/// Fixed iteration budget with the stopping test effectively disabled.
pub fn budget(method: Method, iterations: usize) -> MethodConfig {
    MethodConfig {
        sampling: Sampling::Sampled {
            forward: 10,
            evaluation: 50,
        },
        epsilon: 1e-12,
        upper_bound_every: iterations.max(1),
        max_iterations: iterations,
        no_timing: true,
        ..MethodConfig::for_method(method)
    }
}
