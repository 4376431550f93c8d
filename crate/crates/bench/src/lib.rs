//! Fixtures shared by the kernel benchmarks in `benches/`.

use qcbp::{generate, GeneratorParams, GraphProjector, PrimalDualState, ProblemInstance};

/// Instance with the default benchmark shape: 40% sparsity, `m = 0.05·d`.
pub fn instance(d: usize, seed: u64) -> ProblemInstance {
    generate(&GeneratorParams::new(d, 0.4, 0.05, 0.1, seed)).expect("valid generator parameters")
}

/// State after `iters` steps at `rho`, so that the primal iterate has the
/// sparsity the solver actually sees.
pub fn warm_state(instance: &ProblemInstance, rho: f64, iters: usize) -> PrimalDualState {
    let projector = GraphProjector::build(&instance.a).expect("factorizable");
    let mut state = PrimalDualState::zeros(instance.d(), instance.m());
    for _ in 0..iters {
        state.step(&projector, instance, rho).expect("finite step");
    }
    state
}
