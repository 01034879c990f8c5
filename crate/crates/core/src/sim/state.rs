use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const STRUCT_TOL: f64 = 1e-10;

/// A normalised statevector over `n_qubits` qubits. Wire 0 is the most
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// |0...0>
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 always valid")
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps amplitudes that are already normalised (within 1e-10).
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STRUCT_TOL {
            return Err(Error::invalid(format!(
                "statevector norm^2 is {norm}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Computational-basis probabilities |a_i|^2.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// A density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    n_qubits: usize,
    rho: DMatrix<Complex64>,
}

impl MixedState {
    pub fn from_pure(psi: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Self {
            n_qubits: psi.n_qubits(),
            rho: &v * v.adjoint(),
        }
    }

    /// I/d
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self {
            n_qubits,
            rho: DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0),
        }
    }

    /// Validates Hermiticity, unit trace and positivity (all within 1e-10).
    pub fn from_matrix(n_qubits: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        let d = 1usize << n_qubits;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows().max(rho.ncols()),
            });
        }
        let herm_err = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > STRUCT_TOL {
            return Err(Error::invalid(format!("density matrix not Hermitian (err {herm_err:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STRUCT_TOL || tr.im.abs() > STRUCT_TOL {
            return Err(Error::invalid(format!("density matrix trace is {tr}")));
        }
        let eig = rho.clone().symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -STRUCT_TOL {
                return Err(Error::invalid(format!("density matrix has eigenvalue {min}")));
            }
        }
        Ok(Self { n_qubits, rho })
    }

    /// Convex mixture sum_i w_i rho_i. Weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &MixedState)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("empty mixture"))?
            .1;
        let d = first.dim();
        let mut rho = DMatrix::zeros(d, d);
        let mut total = 0.0;
        for (w, s) in parts {
            if *w < 0.0 {
                return Err(Error::invalid("negative mixture weight"));
            }
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                });
            }
            rho += &s.rho * Complex64::new(*w, 0.0);
            total += w;
        }
        if (total - 1.0).abs() > STRUCT_TOL {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        Ok(Self {
            n_qubits: first.n_qubits,
            rho,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub(crate) fn from_parts_unchecked(n_qubits: usize, rho: DMatrix<Complex64>) -> Self {
        Self { n_qubits, rho }
    }
}
