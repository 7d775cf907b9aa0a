//! Shared fixtures for the criterion benches.

use sampler_core::fisher::FimBank;
use sampler_core::models::{CandidateGrid, NoiseSpec, ParamVector, SignalModel};

/// Single 1-D damped sinusoid bank over `n` uniform candidates.
pub fn bank_1d(n: usize) -> FimBank {
    let model = SignalModel::damped_1d(1).unwrap();
    let theta = ParamVector::new(model, vec![1.0, 0.22, 0.09, 0.4]).unwrap();
    let grid = CandidateGrid::uniform_1d(n).unwrap();
    FimBank::build(&theta, &grid, &NoiseSpec::new(0.1).unwrap()).unwrap()
}

/// Single 2-D damped sinusoid bank over an `n × n` grid.
pub fn bank_2d(n: usize) -> FimBank {
    let model = SignalModel::damped_2d(1).unwrap();
    let theta =
        ParamVector::new(model, vec![1.0, 0.2, 0.5, 1.0 / 20.0, 1.0 / 10.0, 0.5]).unwrap();
    let grid = CandidateGrid::uniform_2d(n, n).unwrap();
    FimBank::build(&theta, &grid, &NoiseSpec::new(0.1).unwrap()).unwrap()
}
