//! Parameter-shift gradients (exact and finite-shot), the closed-form
//! per-sample sensitivity and the mean-squared-error bound of the noisy
//! batch gradient.

use std::f64::consts::PI;

use crate::circuit::{Model, ParamVector};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sim::{depolarized_distribution, Observable, OutcomeDistribution, SampleMoments};
use crate::Shots;

/// `Delta = ((lambda_max - lambda_min) / 2) * sqrt(sum Omega_k^2)`.
pub fn sensitivity_bound(lambda_min: f64, lambda_max: f64, omegas: &[f64]) -> Result<f64> {
    if omegas.is_empty() {
        return Err(Error::invalid("empty frequency vector"));
    }
    if lambda_max < lambda_min {
        return Err(Error::invalid(format!("lambda_max {lambda_max} < lambda_min {lambda_min}")));
    }
    if omegas.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("frequencies must be positive"));
    }
    let norm = omegas.iter().map(|w| w * w).sum::<f64>().sqrt();
    Ok((lambda_max - lambda_min) / 2.0 * norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    Sampled { shots: u64 },
}

/// Per-sample gradient `g^(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub mode: GradientMode,
    pub sample: usize,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shift {
    Plus,
    Minus,
}

/// Moments of one shifted circuit's outcome set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftMoments {
    pub sample: usize,
    pub param: usize,
    pub shift: Shift,
    pub moments: SampleMoments,
}

/// Sample moments of every `(sample, parameter, shift)` group seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotStatistics {
    n_shots: u64,
    groups: Vec<ShiftMoments>,
}

impl ShotStatistics {
    pub fn new(n_shots: u64) -> Self {
        Self { n_shots, groups: Vec::new() }
    }

    pub fn from_groups(n_shots: u64, groups: Vec<ShiftMoments>) -> Result<Self> {
        if groups.iter().any(|g| g.moments.n != n_shots) {
            return Err(Error::invalid("all groups must share the same shot count"));
        }
        Ok(Self { n_shots, groups })
    }

    pub fn n_shots(&self) -> u64 {
        self.n_shots
    }

    pub fn groups(&self) -> &[ShiftMoments] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Appends another sample's groups, keeping insertion order.
    pub fn extend(&mut self, other: ShotStatistics) -> Result<()> {
        if !other.is_empty() && other.n_shots != self.n_shots {
            return Err(Error::invalid("cannot merge statistics with different shot counts"));
        }
        self.groups.extend(other.groups);
        Ok(())
    }
}

/// Outcome laws of the `+`/`-` shifted circuits of one sample, for every
/// parameter, optionally after global depolarizing noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedDistributions {
    pairs: Vec<(OutcomeDistribution, OutcomeDistribution)>,
    omegas: Vec<f64>,
}

/// Builds the shifted-circuit outcome laws with shift `pi / (2 Omega_k)`.
pub fn shifted_distributions(
    model: &Model,
    x: &[f64],
    theta: &ParamVector,
    o: &Observable,
    alpha: f64,
) -> Result<ShiftedDistributions> {
    if o.dim() != 1 << model.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: 1 << model.n_qubits(),
            found: o.dim(),
        });
    }
    let pairs = model
        .all_shifted_states(x, theta)?
        .iter()
        .map(|(p, m)| Ok((depolarized_distribution(p, o, alpha)?, depolarized_distribution(m, o, alpha)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftedDistributions {
        pairs,
        omegas: model.ansatz.frequencies().to_vec(),
    })
}

impl ShiftedDistributions {
    pub fn n_params(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(OutcomeDistribution, OutcomeDistribution)] {
        &self.pairs
    }

    /// `g_k = (Omega_k / 2)(f_+ - f_-)` from exact means.
    pub fn analytic(&self, sample: usize) -> GradientEstimate {
        let values = self
            .pairs
            .iter()
            .zip(&self.omegas)
            .map(|((p, m), w)| w / 2.0 * (p.mean() - m.mean()))
            .collect();
        GradientEstimate {
            values,
            mode: GradientMode::Analytic,
            sample,
        }
    }

    /// `g_k = (Omega_k / 2)(r_+ - r_-)` from `n_shots` shots per shifted
    /// circuit. The two shifts of parameter `k` draw from the independent
    /// streams `stream.split2(k, 0)` and `stream.split2(k, 1)`.
    pub fn sampled(&self, sample: usize, n_shots: u64, stream: Stream) -> Result<(GradientEstimate, ShotStatistics)> {
        if n_shots < 2 {
            return Err(Error::invalid(format!("sampled gradients need N_s >= 2, got {n_shots}")));
        }
        let mut values = Vec::with_capacity(self.pairs.len());
        let mut groups = Vec::with_capacity(2 * self.pairs.len());
        for (k, ((p, m), w)) in self.pairs.iter().zip(&self.omegas).enumerate() {
            let mut means = [0.0; 2];
            for (i, (dist, shift)) in [(p, Shift::Plus), (m, Shift::Minus)].into_iter().enumerate() {
                let counts = dist.sample_counts(n_shots, &mut stream.split2(k as u64, i as u64).rng())?;
                let moments = counts.moments()?;
                means[i] = moments.mean;
                groups.push(ShiftMoments {
                    sample,
                    param: k,
                    shift,
                    moments,
                });
            }
            values.push(w / 2.0 * (means[0] - means[1]));
        }
        Ok((
            GradientEstimate {
                values,
                mode: GradientMode::Sampled { shots: n_shots },
                sample,
            },
            ShotStatistics { n_shots, groups },
        ))
    }
}

/// Exact parameter-shift gradient of `<O>` for one input.
pub fn psr_gradient_analytic(model: &Model, x: &[f64], theta: &ParamVector, o: &Observable) -> Result<GradientEstimate> {
    Ok(shifted_distributions(model, x, theta, o, 0.0)?.analytic(0))
}

/// Finite-shot parameter-shift gradient; the shifted states pass through
/// the depolarizing channel of strength `alpha` before measurement.
pub fn psr_gradient_sampled(
    model: &Model,
    x: &[f64],
    theta: &ParamVector,
    o: &Observable,
    n_shots: u64,
    alpha: f64,
    stream: Stream,
) -> Result<(GradientEstimate, ShotStatistics)> {
    if n_shots < 2 {
        return Err(Error::invalid(format!("sampled gradients need N_s >= 2, got {n_shots}")));
    }
    shifted_distributions(model, x, theta, o, alpha)?.sampled(0, n_shots, stream)
}

/// `(Delta^2 / B)(1 + 1/(2 N_s)) + K sigma^2 Delta^2 / B^2`.
pub fn mse_bound(delta: f64, batch: usize, shots: Shots, n_params: usize, sigma2: f64) -> Result<f64> {
    if batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if let Shots::Finite(0) = shots {
        return Err(Error::invalid("shot count must be positive"));
    }
    let b = batch as f64;
    let d2 = delta * delta;
    let shot_term = match shots {
        Shots::Finite(n) => 1.0 / (2.0 * n as f64),
        Shots::Infinite => 0.0,
    };
    Ok(d2 / b * (1.0 + shot_term) + n_params as f64 * sigma2 * d2 / (b * b))
}

/// Shift used for a parameter of frequency `omega`.
pub fn shift_for(omega: f64) -> f64 {
    PI / (2.0 * omega)
}
