use num_complex::Complex64;

use super::state::PureState;
use crate::error::{Error, Result};

/// Gates of the circuit family used here. Rotations are `exp(-i angle P / 2)`
/// for a Pauli `P`, so each generator has eigenvalues +-1/2 and frequency 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { wire: usize, angle: f64 },
    Ry { wire: usize, angle: f64 },
    Rz { wire: usize, angle: f64 },
    /// `Rz(omega) Ry(theta) Rz(phi)`, applied right to left.
    Rot { wire: usize, phi: f64, theta: f64, omega: f64 },
    Cnot { control: usize, target: usize },
}

type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rx(t: f64) -> Mat2 {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

fn ry(t: f64) -> Mat2 {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

fn rz(t: f64) -> Mat2 {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
}

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

impl Gate {
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { wire, .. } | Gate::Ry { wire, .. } | Gate::Rz { wire, .. } | Gate::Rot { wire, .. } => {
                vec![wire]
            }
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let wires = self.wires();
        for &w in &wires {
            if w >= n_qubits {
                return Err(Error::WireOutOfRange { wire: w, n_qubits });
            }
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(Error::DuplicateWires(wires));
        }
        Ok(())
    }

    /// Eigenvalue gap of the generator of a single-parameter rotation.
    pub fn frequency(&self) -> Option<f64> {
        match self {
            Gate::Rx { .. } | Gate::Ry { .. } | Gate::Rz { .. } => Some(1.0),
            _ => None,
        }
    }

    fn single_qubit_matrix(&self) -> Option<(usize, Mat2)> {
        match *self {
            Gate::Rx { wire, angle } => Some((wire, rx(angle))),
            Gate::Ry { wire, angle } => Some((wire, ry(angle))),
            Gate::Rz { wire, angle } => Some((wire, rz(angle))),
            Gate::Rot { wire, phi, theta, omega } => {
                Some((wire, matmul(&rz(omega), &matmul(&ry(theta), &rz(phi)))))
            }
            Gate::Cnot { .. } => None,
        }
    }

    /// Applies the gate in place. Wires must already be validated.
    pub(crate) fn apply_unchecked(&self, state: &mut PureState) {
        let n = state.n_qubits();
        let amps = state.amplitudes_mut();
        match self.single_qubit_matrix() {
            Some((wire, m)) => {
                let stride = 1usize << (n - 1 - wire);
                for i in 0..amps.len() {
                    if i & stride == 0 {
                        let (a0, a1) = (amps[i], amps[i | stride]);
                        amps[i] = m[0][0] * a0 + m[0][1] * a1;
                        amps[i | stride] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
            None => {
                if let Gate::Cnot { control, target } = *self {
                    let cbit = 1usize << (n - 1 - control);
                    let tbit = 1usize << (n - 1 - target);
                    for i in 0..amps.len() {
                        if i & cbit != 0 && i & tbit == 0 {
                            amps.swap(i, i | tbit);
                        }
                    }
                }
            }
        }
    }
}

/// Returns `gate |state>`.
pub fn apply_gate(state: &PureState, gate: &Gate) -> Result<PureState> {
    gate.validate(state.n_qubits())?;
    let mut out = state.clone();
    gate.apply_unchecked(&mut out);
    Ok(out)
}
