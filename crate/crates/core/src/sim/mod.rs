//! Exact few-qubit simulation: statevectors, density matrices, spectral
//! observables, finite-shot sampling and the global depolarizing channel.

mod gate;
mod observable;
mod shots;
mod state;

pub use gate::{apply_gate, Gate};
pub use observable::Observable;
pub use shots::{OutcomeDistribution, SampleMoments, ShotCounts, ShotOutcomeSet};
pub use state::{MixedState, PureState};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::Stream;

pub use num_complex::Complex64 as C64;

/// Anything an observable can be measured on.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;
    fn dim(&self) -> usize;
    #[doc(hidden)]
    fn level_probabilities(&self, o: &Observable) -> Vec<f64>;
}

impl QuantumState for PureState {
    fn n_qubits(&self) -> usize {
        PureState::n_qubits(self)
    }
    fn dim(&self) -> usize {
        PureState::dim(self)
    }
    fn level_probabilities(&self, o: &Observable) -> Vec<f64> {
        o.level_probabilities_pure(self.amplitudes())
    }
}

impl QuantumState for MixedState {
    fn n_qubits(&self) -> usize {
        MixedState::n_qubits(self)
    }
    fn dim(&self) -> usize {
        MixedState::dim(self)
    }
    fn level_probabilities(&self, o: &Observable) -> Vec<f64> {
        o.level_probabilities_mixed(self.rho())
    }
}

fn check_dim<S: QuantumState + ?Sized>(state: &S, o: &Observable) -> Result<()> {
    if state.dim() != o.dim() {
        return Err(Error::DimensionMismatch {
            expected: o.dim(),
            found: state.dim(),
        });
    }
    Ok(())
}

/// `p_i = <psi|P_i|psi>` (or `Tr(rho P_i)`) over the distinct eigenvalues of `o`.
pub fn outcome_distribution<S: QuantumState + ?Sized>(state: &S, o: &Observable) -> Result<OutcomeDistribution> {
    check_dim(state, o)?;
    Ok(OutcomeDistribution::new(o.levels().to_vec(), state.level_probabilities(o)))
}

/// `<psi|O|psi>` or `Tr(rho O)`.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, o: &Observable) -> Result<f64> {
    Ok(outcome_distribution(state, o)?.mean())
}

/// Variance of one projective measurement of `o`.
pub fn single_shot_variance<S: QuantumState + ?Sized>(state: &S, o: &Observable) -> Result<f64> {
    Ok(outcome_distribution(state, o)?.variance())
}

/// Single-shot variance of `o` on the maximally mixed state `I/d`.
pub fn uniform_variance(o: &Observable) -> f64 {
    let d = o.dim() as f64;
    let mean = o.eigenvalues().iter().sum::<f64>() / d;
    o.eigenvalues().iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / d
}

/// Outcome law of `I/d`: each level weighted by its rank over `d`.
pub(crate) fn uniform_level_probabilities(o: &Observable) -> Vec<f64> {
    let d = o.dim() as f64;
    o.multiplicities().iter().map(|&m| m as f64 / d).collect()
}

/// `N_s` i.i.d. single-shot outcomes, reproducible for a given stream.
pub fn sample_shots<S: QuantumState + ?Sized>(
    state: &S,
    o: &Observable,
    n_shots: usize,
    stream: Stream,
) -> Result<ShotOutcomeSet> {
    outcome_distribution(state, o)?.sample_shots(n_shots, &mut stream.rng())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("depolarizing strength {alpha} outside [0,1]")));
    }
    Ok(())
}

/// Global depolarizing channel `(1 - alpha) rho + alpha I/d`.
pub fn apply_depolarizing(rho: &MixedState, alpha: f64) -> Result<MixedState> {
    check_alpha(alpha)?;
    let d = rho.dim();
    let out = rho.rho() * Complex64::new(1.0 - alpha, 0.0)
        + DMatrix::<Complex64>::identity(d, d) * Complex64::new(alpha / d as f64, 0.0);
    Ok(MixedState::from_parts_unchecked(rho.n_qubits(), out))
}

/// Outcome law of a pure state after the depolarizing channel, without
/// forming the density matrix. Equal to
/// `outcome_distribution(&apply_depolarizing(&MixedState::from_pure(psi), alpha)?, o)`.
pub fn depolarized_distribution(psi: &PureState, o: &Observable, alpha: f64) -> Result<OutcomeDistribution> {
    check_alpha(alpha)?;
    let ideal = outcome_distribution(psi, o)?;
    if alpha == 0.0 {
        return Ok(ideal);
    }
    Ok(ideal.depolarized(alpha, &uniform_level_probabilities(o)))
}
