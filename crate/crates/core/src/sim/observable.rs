use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues closer than this are merged into one projector.
const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Eigenbasis {
    /// Eigenvectors are the computational basis states.
    Computational,
    /// Orthonormal eigenvectors as matrix columns.
    Explicit(DMatrix<Complex64>),
}

/// A Hermitian observable `O = sum_i lambda_i P_i` stored in spectral form.
///
/// `levels` holds the distinct eigenvalues in ascending order; every
/// eigenvector (basis state or explicit column) is tagged with the level it
/// belongs to, so the outcome distribution ranges over distinct eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    eigenvalues: Vec<f64>,
    levels: Vec<f64>,
    level_of: Vec<usize>,
    multiplicity: Vec<usize>,
    basis: Eigenbasis,
}

fn group_levels(eigenvalues: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let mut levels: Vec<f64> = Vec::new();
    let mut multiplicity = Vec::new();
    let mut level_of = vec![0; eigenvalues.len()];
    for idx in order {
        let v = eigenvalues[idx];
        match levels.last() {
            Some(&last) if (v - last).abs() <= MERGE_TOL => {
                *multiplicity.last_mut().unwrap() += 1;
            }
            _ => {
                levels.push(v);
                multiplicity.push(1);
            }
        }
        level_of[idx] = levels.len() - 1;
    }
    (levels, level_of, multiplicity)
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!("observable dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl Observable {
    /// Diagonal in the computational basis: `values[b]` is the eigenvalue of |b>.
    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite eigenvalue"));
        }
        let (levels, level_of, multiplicity) = group_levels(&values);
        Ok(Self {
            n_qubits,
            eigenvalues: values,
            levels,
            level_of,
            multiplicity,
            basis: Eigenbasis::Computational,
        })
    }

    /// Diagonalises a Hermitian matrix once.
    pub fn hermitian(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n_qubits = qubits_for_dim(matrix.nrows())?;
        let herm_err = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > 1e-10 {
            return Err(Error::invalid(format!("matrix is not Hermitian (err {herm_err:e})")));
        }
        let eig = matrix.symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let (levels, level_of, multiplicity) = group_levels(&values);
        Ok(Self {
            n_qubits,
            eigenvalues: values,
            levels,
            level_of,
            multiplicity,
            basis: Eigenbasis::Explicit(eig.eigenvectors),
        })
    }

    /// Pauli Z on one wire of an `n_qubits` register.
    pub fn pauli_z(n_qubits: usize, wire: usize) -> Result<Self> {
        Self::check_wire(n_qubits, wire)?;
        let shift = n_qubits - 1 - wire;
        Self::diagonal(
            (0..1usize << n_qubits)
                .map(|b| if (b >> shift) & 1 == 0 { 1.0 } else { -1.0 })
                .collect(),
        )
    }

    /// |index><index|
    pub fn basis_projector(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} >= {dim}")));
        }
        Self::diagonal((0..dim).map(|b| if b == index { 1.0 } else { 0.0 }).collect())
    }

    /// |bit><bit| on `wire`, identity elsewhere.
    pub fn wire_projector(n_qubits: usize, wire: usize, bit: usize) -> Result<Self> {
        Self::check_wire(n_qubits, wire)?;
        let shift = n_qubits - 1 - wire;
        Self::diagonal(
            (0..1usize << n_qubits)
                .map(|b| if (b >> shift) & 1 == bit & 1 { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    fn check_wire(n_qubits: usize, wire: usize) -> Result<()> {
        if wire >= n_qubits {
            return Err(Error::WireOutOfRange { wire, n_qubits });
        }
        Ok(())
    }

    /// `I - O`, sharing the eigenbasis.
    pub fn complement(&self) -> Self {
        let values: Vec<f64> = self.eigenvalues.iter().map(|v| 1.0 - v).collect();
        let (levels, level_of, multiplicity) = group_levels(&values);
        Self {
            n_qubits: self.n_qubits,
            eigenvalues: values,
            levels,
            level_of,
            multiplicity,
            basis: self.basis.clone(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// All eigenvalues, with multiplicity, in eigenvector order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Distinct eigenvalues, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Rank of each level's projector.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn lambda_min(&self) -> f64 {
        self.levels[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    pub fn lambda_range(&self) -> f64 {
        self.lambda_max() - self.lambda_min()
    }

    pub fn is_computational_diagonal(&self) -> bool {
        matches!(self.basis, Eigenbasis::Computational)
    }

    /// Probability of each level for a pure state: `<psi|P_i|psi>`.
    pub(crate) fn level_probabilities_pure(&self, amps: &[Complex64]) -> Vec<f64> {
        let mut p = vec![0.0; self.levels.len()];
        match &self.basis {
            Eigenbasis::Computational => {
                for (b, a) in amps.iter().enumerate() {
                    p[self.level_of[b]] += a.norm_sqr();
                }
            }
            Eigenbasis::Explicit(vecs) => {
                for (col, &lvl) in self.level_of.iter().enumerate() {
                    let overlap: Complex64 = vecs
                        .column(col)
                        .iter()
                        .zip(amps)
                        .map(|(v, a)| v.conj() * a)
                        .sum();
                    p[lvl] += overlap.norm_sqr();
                }
            }
        }
        p
    }

    /// Probability of each level for a density matrix: `Tr(rho P_i)`.
    pub(crate) fn level_probabilities_mixed(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let mut p = vec![0.0; self.levels.len()];
        match &self.basis {
            Eigenbasis::Computational => {
                for b in 0..self.dim() {
                    p[self.level_of[b]] += rho[(b, b)].re;
                }
            }
            Eigenbasis::Explicit(vecs) => {
                for (col, &lvl) in self.level_of.iter().enumerate() {
                    let v = vecs.column(col);
                    let rv = rho * v;
                    let val: Complex64 = v.iter().zip(rv.iter()).map(|(a, b)| a.conj() * b).sum();
                    p[lvl] += val.re;
                }
            }
        }
        p
    }

    /// Projector onto the eigenspace of `levels()[level]`.
    pub fn projector(&self, level: usize) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (col, &lvl) in self.level_of.iter().enumerate() {
            if lvl != level {
                continue;
            }
            match &self.basis {
                Eigenbasis::Computational => m[(col, col)] = Complex64::new(1.0, 0.0),
                Eigenbasis::Explicit(vecs) => {
                    let v: DVector<Complex64> = vecs.column(col).into_owned();
                    m += &v * v.adjoint();
                }
            }
        }
        m
    }

    /// Dense matrix `sum_i lambda_i P_i`.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (i, &lambda) in self.levels.iter().enumerate() {
            m += self.projector(i) * Complex64::new(lambda, 0.0);
        }
        m
    }
}
