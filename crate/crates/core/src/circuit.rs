//! The variational classifier: data encoders, the strongly-entangling ansatz,
//! per-class label observables and the shifted circuits used by the
//! parameter-shift rule.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sim::{expectation, Gate, Observable, PureState, C64};

/// How a classical input becomes `|psi_0(x)>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderSpec {
    /// `RY(pi x_i)` on wire `i`; inputs are expected in `[0,1]^n`.
    Angle { n_qubits: usize },
    /// The input, normalised, becomes the amplitude vector (length `2^n`).
    Amplitude { n_qubits: usize },
}

impl EncoderSpec {
    pub fn n_qubits(&self) -> usize {
        match *self {
            EncoderSpec::Angle { n_qubits } | EncoderSpec::Amplitude { n_qubits } => n_qubits,
        }
    }

    pub fn input_len(&self) -> usize {
        match *self {
            EncoderSpec::Angle { n_qubits } => n_qubits,
            EncoderSpec::Amplitude { n_qubits } => 1 << n_qubits,
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<PureState> {
        if x.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input feature"));
        }
        match *self {
            EncoderSpec::Angle { n_qubits } => {
                // product of RY(pi x_i)|0> = cos(pi x_i / 2)|0> + sin(pi x_i / 2)|1>
                let factors: Vec<(f64, f64)> = x.iter().map(|&v| ((PI * v / 2.0).cos(), (PI * v / 2.0).sin())).collect();
                let amps = (0..1usize << n_qubits)
                    .map(|b| {
                        let mut a = 1.0;
                        for (w, &(c, s)) in factors.iter().enumerate() {
                            a *= if (b >> (n_qubits - 1 - w)) & 1 == 0 { c } else { s };
                        }
                        C64::new(a, 0.0)
                    })
                    .collect();
                PureState::from_amplitudes(n_qubits, amps)
            }
            EncoderSpec::Amplitude { n_qubits } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::invalid("amplitude encoding of a zero vector"));
                }
                PureState::from_amplitudes(n_qubits, x.iter().map(|v| C64::new(v / norm, 0.0)).collect())
            }
        }
    }
}

/// Axis of a single-parameter Pauli rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One step of an ansatz: a trainable rotation or a fixed gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Rotation { axis: Axis, wire: usize, param: usize },
    Fixed(Gate),
}

impl Op {
    fn gate(&self, theta: &[f64]) -> Gate {
        self.gate_with(theta, None)
    }

    fn gate_with(&self, theta: &[f64], shift: Option<f64>) -> Gate {
        match *self {
            Op::Rotation { axis, wire, param } => {
                let angle = theta[param] + shift.unwrap_or(0.0);
                match axis {
                    Axis::X => Gate::Rx { wire, angle },
                    Axis::Y => Gate::Ry { wire, angle },
                    Axis::Z => Gate::Rz { wire, angle },
                }
            }
            Op::Fixed(g) => g,
        }
    }
}

/// Circuit structure `U(theta)`: an op sequence where every trainable angle
/// appears exactly once, plus the generator frequency of each angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    n_qubits: usize,
    n_layers: usize,
    ops: Vec<Op>,
    param_op: Vec<usize>,
    frequencies: Vec<f64>,
}

impl AnsatzSpec {
    /// Strongly-entangling layers: per layer, `Rot = RZ RY RZ` on every wire
    /// (three angles each), then CNOTs `(w, w+1 mod n)` for `w = 0..n`.
    pub fn strongly_entangling(n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("ansatz needs at least one qubit"));
        }
        let mut ops = Vec::new();
        let mut param = 0;
        for _ in 0..n_layers {
            for wire in 0..n_qubits {
                for axis in [Axis::Z, Axis::Y, Axis::Z] {
                    ops.push(Op::Rotation { axis, wire, param });
                    param += 1;
                }
            }
            if n_qubits > 1 {
                for w in 0..n_qubits {
                    let target = (w + 1) % n_qubits;
                    ops.push(Op::Fixed(Gate::Cnot { control: w, target }));
                }
            }
        }
        let mut spec = Self::custom(n_qubits, ops)?;
        spec.n_layers = n_layers;
        Ok(spec)
    }

    /// Arbitrary op sequence. Parameter indices must be exactly `0..K`, each once.
    pub fn custom(n_qubits: usize, ops: Vec<Op>) -> Result<Self> {
        let mut slots: Vec<Option<usize>> = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            match *op {
                Op::Rotation { wire, param, .. } => {
                    if wire >= n_qubits {
                        return Err(Error::WireOutOfRange { wire, n_qubits });
                    }
                    if slots.len() <= param {
                        slots.resize(param + 1, None);
                    }
                    if slots[param].replace(i).is_some() {
                        return Err(Error::invalid(format!("parameter {param} used more than once")));
                    }
                }
                Op::Fixed(g) => g.validate(n_qubits)?,
            }
        }
        let param_op = slots
            .into_iter()
            .enumerate()
            .map(|(k, s)| s.ok_or_else(|| Error::invalid(format!("parameter {k} never used"))))
            .collect::<Result<Vec<_>>>()?;
        let frequencies = vec![1.0; param_op.len()];
        Ok(Self {
            n_qubits,
            n_layers: 1,
            ops,
            param_op,
            frequencies,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Number of trainable angles, K.
    pub fn n_params(&self) -> usize {
        self.param_op.len()
    }

    /// Generator frequency of each angle (all 1 for Pauli rotations).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Common frequency when all are identical.
    pub fn common_frequency(&self) -> Option<f64> {
        let first = *self.frequencies.first()?;
        self.frequencies.iter().all(|&w| w == first).then_some(first)
    }
}

/// Trainable angles, one per ansatz parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(ansatz: &AnsatzSpec, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != ansatz.n_params() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.n_params(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self(theta))
    }

    pub fn zeros(ansatz: &AnsatzSpec) -> Self {
        Self(vec![0.0; ansatz.n_params()])
    }

    /// Independent uniform angles in `[0, 2 pi)`.
    pub fn random_uniform(ansatz: &AnsatzSpec, stream: Stream) -> Self {
        let mut rng = stream.rng();
        Self((0..ansatz.n_params()).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-class observables `O_y` (eigenvalues in {0,1}) and costs `I - O_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelObservables {
    observables: Vec<Observable>,
    costs: Vec<Observable>,
}

impl LabelObservables {
    pub fn new(observables: Vec<Observable>) -> Result<Self> {
        if observables.len() < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        for o in &observables {
            if o.levels().iter().any(|&l| l != 0.0 && l != 1.0) || o.lambda_range() != 1.0 {
                return Err(Error::invalid("label observables must be projectors with eigenvalues {0,1}"));
            }
        }
        let costs = observables.iter().map(Observable::complement).collect();
        Ok(Self { observables, costs })
    }

    /// Binary readout of one wire: class `y` is `|y><y|` on `wire`.
    pub fn wire_readout(n_qubits: usize, wire: usize) -> Result<Self> {
        Self::new(vec![
            Observable::wire_projector(n_qubits, wire, 0)?,
            Observable::wire_projector(n_qubits, wire, 1)?,
        ])
    }

    /// Class `y` is the basis-state projector `|y><y|`.
    pub fn basis_states(n_qubits: usize, n_classes: usize) -> Result<Self> {
        (0..n_classes)
            .map(|y| Observable::basis_projector(n_qubits, y))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn n_classes(&self) -> usize {
        self.observables.len()
    }

    pub fn observable(&self, class: usize) -> Result<&Observable> {
        self.observables.get(class).ok_or_else(|| Error::invalid(format!("unknown class {class}")))
    }

    /// Training cost observable `I - O_y`.
    pub fn cost(&self, class: usize) -> Result<&Observable> {
        self.costs.get(class).ok_or_else(|| Error::invalid(format!("unknown class {class}")))
    }

    pub fn costs(&self) -> &[Observable] {
        &self.costs
    }

    /// `lambda_max - lambda_min` shared by all cost observables (1).
    pub fn lambda_range(&self) -> f64 {
        self.costs.iter().map(Observable::lambda_range).fold(0.0, f64::max)
    }
}

/// Predicted class plus label probabilities renormalised over the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

/// Encoder followed by ansatz.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: EncoderSpec,
    pub ansatz: AnsatzSpec,
}

impl Model {
    pub fn new(encoder: EncoderSpec, ansatz: AnsatzSpec) -> Result<Self> {
        if encoder.n_qubits() != ansatz.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.n_qubits(),
                found: encoder.n_qubits(),
            });
        }
        Ok(Self { encoder, ansatz })
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits()
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.ansatz.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.ansatz.n_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    fn check_observable(&self, o: &Observable) -> Result<()> {
        if o.dim() != 1 << self.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n_qubits(),
                found: o.dim(),
            });
        }
        Ok(())
    }

    fn run_ops(&self, mut state: PureState, theta: &[f64], ops: &[Op]) -> PureState {
        for op in ops {
            op.gate(theta).apply_unchecked(&mut state);
        }
        state
    }

    /// `U(theta)|psi_0(x)>`
    pub fn state(&self, x: &[f64], theta: &ParamVector) -> Result<PureState> {
        self.check_theta(theta)?;
        let psi0 = self.encoder.encode(x)?;
        Ok(self.run_ops(psi0, theta.as_slice(), self.ansatz.ops()))
    }

    /// `<psi(theta, x)|O|psi(theta, x)>`
    pub fn forward(&self, x: &[f64], theta: &ParamVector, o: &Observable) -> Result<f64> {
        self.check_observable(o)?;
        expectation(&self.state(x, theta)?, o)
    }

    /// Output states with `theta_k` replaced by `theta_k + s` and `theta_k - s`.
    pub fn shifted_states(&self, x: &[f64], theta: &ParamVector, k: usize, s: f64) -> Result<(PureState, PureState)> {
        self.check_theta(theta)?;
        let k_len = self.ansatz.n_params();
        let op_idx = *self
            .ansatz
            .param_op
            .get(k)
            .ok_or(Error::ParamIndexOutOfRange { index: k, len: k_len })?;
        let th = theta.as_slice();
        let ops = self.ansatz.ops();
        let phi = self.run_ops(self.encoder.encode(x)?, th, &ops[..op_idx]);
        Ok(self.finish_shift(&phi, th, op_idx, s))
    }

    fn finish_shift(&self, phi: &PureState, th: &[f64], op_idx: usize, s: f64) -> (PureState, PureState) {
        let ops = self.ansatz.ops();
        let tail = &ops[op_idx + 1..];
        let mut out = [phi.clone(), phi.clone()];
        for (state, sign) in out.iter_mut().zip([1.0, -1.0]) {
            ops[op_idx].gate_with(th, Some(sign * s)).apply_unchecked(state);
            for op in tail {
                op.gate(th).apply_unchecked(state);
            }
        }
        let [plus, minus] = out;
        (plus, minus)
    }

    /// Shifted output state pairs for every parameter, each with its own
    /// shift `pi / (2 Omega_k)`. Shares the prefix `|phi>` across parameters.
    pub fn all_shifted_states(&self, x: &[f64], theta: &ParamVector) -> Result<Vec<(PureState, PureState)>> {
        self.check_theta(theta)?;
        let th = theta.as_slice();
        let ops = self.ansatz.ops();
        let mut by_op: Vec<Option<(PureState, PureState)>> = vec![None; ops.len()];
        let mut phi = self.encoder.encode(x)?;
        for (i, op) in ops.iter().enumerate() {
            if let Op::Rotation { param, .. } = *op {
                let s = PI / (2.0 * self.ansatz.frequencies[param]);
                by_op[i] = Some(self.finish_shift(&phi, th, i, s));
            }
            op.gate(th).apply_unchecked(&mut phi);
        }
        Ok(self
            .ansatz
            .param_op
            .iter()
            .map(|&i| by_op[i].take().expect("every parameter maps to a rotation"))
            .collect())
    }

    /// Class with the largest `<O_y>`; ties go to the lowest index.
    pub fn predict(&self, x: &[f64], theta: &ParamVector, labels: &LabelObservables) -> Result<Prediction> {
        let psi = self.state(x, theta)?;
        let raw = (0..labels.n_classes())
            .map(|y| {
                let o = labels.observable(y)?;
                self.check_observable(o)?;
                expectation(&psi, o)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut class = 0;
        for (y, &p) in raw.iter().enumerate() {
            if p > raw[class] {
                class = y;
            }
        }
        let total: f64 = raw.iter().sum();
        let probabilities = if total > 0.0 {
            raw.iter().map(|p| p / total).collect()
        } else {
            vec![1.0 / raw.len() as f64; raw.len()]
        };
        Ok(Prediction { class, probabilities })
    }
}
