//! Variance-based entanglement witnesses adapted to local noise.
//!
//! The crate covers the full pipeline for two parties that each measure two
//! observables:
//!
//! * [`operators`]: Hermitian operators, states, POVMs and moment operators,
//!   including the spin-1 angular momentum components.
//! * [`noise`]: mixture-of-unitaries channels in the Heisenberg picture, the
//!   spin-flip family and a least-squares fit of its parameter.
//! * [`bounds`]: minimal weighted variance sums over pure states (seesaw and
//!   grid oracle), separability bounds and uncertainty-region tracing.
//! * [`witness`]: global moment operators, verdicts and λ detection windows.
//! * [`simulate`]: singlet and calibration states, shot-noise sampling.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod operators;
pub mod random;
pub mod simulate;
pub mod witness;

pub use bounds::{
    compose_sep_bound, grid_bound, penalty_operator, seesaw_bound, trace_region, BoundResult,
    Method, RegionBoundary, RegionPoint, SeesawConfig, WeightedPair,
};
pub use error::{Error, Result};
pub use linalg::{Matrix, C64};
pub use noise::{
    fit_alpha, noisy_moment_pair, noisy_povm, spin_flip_channel, spin_flip_moment_pairs, CalibrationPoint,
    NoiseChannel, NoiseFitResult, UnitaryBranch,
};
pub use operators::{
    expectation, moments, projective_povm, spin1_components, tensor, DensityMatrix,
    HermitianOperator, MomentPair, Povm, PureState, QuantumState,
};
pub use simulate::{
    joint_outcome_distribution, make_singlet, make_test_state, run_calibration,
    sample_variance_tuple, CalibrationRecord, SampleConfig, TestStateParams, VarianceSample,
};
pub use witness::{
    build_global_moments, detection_window, evaluate_witness, evaluate_witness_from_tuple,
    BoundCurve, DetectionWindow, GlobalMoments, LocalMeasurements, WitnessReport, WitnessVerdict,
};
