//! The MVSK problem on the simplex and its first-order solvers.

mod objective;
mod rfpa;

pub use objective::{crra_lambdas, objective, Lambdas, MomentBackend, MvskObjective, Objective};
pub use rfpa::{
    g_map, residual, rfpa_step, second_difference, solve, stationarity_certificate, step_length, EtaScaling,
    IterState, SolveReport, SolveStatus, SolverConfig, SolverMode, StepLength, StepRecord, STEP_FLOOR, V_GUARD,
};
