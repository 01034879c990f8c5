//! Training loops: Q-ShiftDP, Adaptive Q-ShiftDP, a PixelDP input-noise
//! baseline and plain (non-private) gradient descent, plus evaluation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{EncoderSpec, LabelObservables, Model, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::privacy::{
    adaptive_sigma, batch_variance_estimator, critical_value, depolarizing_floor, noise_reduction_pct,
    NoiseCalibration, PrivacyBudget,
};
use crate::psr::{sensitivity_bound, shifted_distributions, ShotStatistics};
use crate::rng::{purpose, Stream};
use crate::sim::expectation;
use crate::Shots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mode {
    QShiftDp,
    Adaptive,
    PixelDp,
    NonPrivate,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::QShiftDp, Mode::Adaptive, Mode::PixelDp, Mode::NonPrivate];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::QShiftDp => "qshiftdp",
            Mode::Adaptive => "adaptive",
            Mode::PixelDp => "pixeldp",
            Mode::NonPrivate => "non-private",
        }
    }

    pub fn is_private(&self) -> bool {
        !matches!(self, Mode::NonPrivate)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qshiftdp" | "q-shiftdp" => Ok(Mode::QShiftDp),
            "adaptive" | "adaptive-qshiftdp" => Ok(Mode::Adaptive),
            "pixeldp" => Ok(Mode::PixelDp),
            "non-private" | "nonprivate" | "non_private" => Ok(Mode::NonPrivate),
            other => Err(Error::config(
                "mode",
                format!("unknown mode {other:?} (expected qshiftdp, adaptive, pixeldp or non-private)"),
            )),
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> String {
        m.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub shots: Shots,
    /// Global depolarizing strength at the circuit output.
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub c2: f64,
    /// Per-coordinate input range used by the PixelDP baseline.
    pub pixel_sensitivity: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::QShiftDp,
            lr: 0.2,
            steps: 30,
            batch: 512,
            shots: Shots::Finite(1000),
            alpha: 0.0,
            epsilon: 1.0,
            delta: 1e-3,
            beta: 1e-5,
            c2: 1.0,
            pixel_sensitivity: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.batch == 0 || self.batch > n_samples {
            return Err(Error::config("batch", format!("batch size {} must lie in 1..={n_samples}", self.batch)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("lr", "learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "depolarizing strength must lie in [0,1]"));
        }
        if let Shots::Finite(n) = self.shots {
            if n < 2 {
                return Err(Error::config("shots", "finite shot counts must be at least 2"));
            }
        }
        if self.mode.is_private() {
            if !(self.epsilon > 0.0) {
                return Err(Error::config("eps", "epsilon must be positive"));
            }
            if !(self.delta > 0.0 && self.delta < 1.0) {
                return Err(Error::config("delta", "delta must lie in (0,1)"));
            }
        }
        match self.mode {
            Mode::Adaptive => {
                if !self.shots.is_finite() {
                    return Err(Error::config("shots", "adaptive mode needs finite shots"));
                }
                if !(0.0..1.0).contains(&self.beta) {
                    return Err(Error::config("beta", "beta must lie in [0,1)"));
                }
            }
            Mode::QShiftDp | Mode::PixelDp | Mode::NonPrivate => {}
        }
        if self.mode.is_private() && !(self.c2 > 0.0) {
            return Err(Error::config("c2", "c2 must be positive"));
        }
        if self.mode == Mode::PixelDp && !(self.pixel_sensitivity > 0.0) {
            return Err(Error::config("pixel_sensitivity", "input sensitivity must be positive"));
        }
        Ok(())
    }

    pub fn budget(&self, n_samples: usize) -> Result<PrivacyBudget> {
        PrivacyBudget::new(
            self.epsilon,
            self.delta,
            if self.mode == Mode::Adaptive { self.beta } else { 0.0 },
            self.c2,
            self.batch as f64 / n_samples as f64,
            self.steps.max(1),
        )
    }
}

/// One row of the per-step metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// Exact mean cost over the batch at the pre-update parameters.
    pub loss: f64,
    /// Norm of the released (noisy, averaged) gradient.
    pub grad_norm: f64,
    pub sigma2: f64,
    pub eta_hat_b2: Option<f64>,
    pub noise_reduction_pct: Option<f64>,
}

pub const METRICS_COLUMNS: [&str; 6] = ["step", "loss", "grad_norm", "sigma2", "eta_hat_B2", "noise_reduction_pct"];
pub const METRICS_SCHEMA: &str = "v1";

/// Append-only per-step log plus the declared guarantee of the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    steps: Vec<StepMetrics>,
    pub epsilon: Option<f64>,
    pub delta_effective: Option<f64>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl MetricsRecord {
    pub fn push(&mut self, row: StepMetrics) {
        self.steps.push(row);
    }

    pub fn steps(&self) -> &[StepMetrics] {
        &self.steps
    }

    /// CSV with the fixed column order; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(METRICS_COLUMNS).map_err(csv_err)?;
        for r in &self.steps {
            w.write_record([
                r.step.to_string(),
                num(r.loss),
                num(r.grad_norm),
                num(r.sigma2),
                r.eta_hat_b2.map(num).unwrap_or_default(),
                r.noise_reduction_pct.map(num).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Raw sum of per-sample gradients over one batch, with the shot statistics
/// of every shifted circuit when sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub sum: Vec<f64>,
    pub stats: Option<ShotStatistics>,
    pub loss: f64,
}

/// Everything a step needs that does not change during training.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    pub model: &'a Model,
    pub labels: &'a LabelObservables,
    pub config: TrainConfig,
    pub calibration: Option<NoiseCalibration>,
    pub delta_sens: f64,
}

/// Standard-normal draws scaled to `N(0, sigma2 Delta^2)` per coordinate.
pub fn sample_privacy_noise(n_params: usize, sigma2: f64, delta_sens: f64, stream: Stream) -> Vec<f64> {
    let scale = sigma2.max(0.0).sqrt() * delta_sens;
    let mut rng = stream.rng();
    (0..n_params)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        })
        .collect()
}

/// `(sum + z) / B`, with no clipping of `sum`.
pub fn privatize(sum: &[f64], sigma2: f64, delta_sens: f64, batch: usize, stream: Stream) -> Result<Vec<f64>> {
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let z = sample_privacy_noise(sum.len(), sigma2, delta_sens, stream);
    Ok(sum.iter().zip(&z).map(|(g, n)| (g + n) / batch as f64).collect())
}

/// Gaussian input perturbation with std `sensitivity * sqrt(2 ln(1.25/delta)) / epsilon`.
/// Angle-encoded inputs are clamped back into `[0,1]`.
pub fn pixeldp_perturb(
    x: &[f64],
    epsilon: f64,
    delta: f64,
    input_sensitivity: f64,
    encoder: EncoderSpec,
    stream: Stream,
) -> Result<Vec<f64>> {
    let std = pixeldp_std(epsilon, delta, input_sensitivity)?;
    let mut rng = stream.rng();
    Ok(x
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            let y = v + std * z;
            match encoder {
                EncoderSpec::Angle { .. } => y.clamp(0.0, 1.0),
                EncoderSpec::Amplitude { .. } => y,
            }
        })
        .collect())
}

pub fn pixeldp_std(epsilon: f64, delta: f64, input_sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0,1)"));
    }
    if !(input_sensitivity > 0.0) {
        return Err(Error::invalid("input sensitivity must be positive"));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    Ok(input_sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

fn update(theta: &ParamVector, grad: &[f64], lr: f64) -> ParamVector {
    let mut next = theta.clone();
    for (t, g) in next.as_mut_slice().iter_mut().zip(grad) {
        *t -= lr * g;
    }
    next
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

impl<'a> Trainer<'a> {
    /// Computes sensitivity and (for private modes) the global calibration.
    pub fn new(model: &'a Model, labels: &'a LabelObservables, config: TrainConfig, n_samples: usize) -> Result<Self> {
        config.validate(n_samples)?;
        let range = labels.lambda_range();
        let delta_sens = sensitivity_bound(0.0, range, model.ansatz.frequencies())?;
        let calibration = match config.mode {
            Mode::QShiftDp | Mode::Adaptive => {
                let budget = config.budget(n_samples)?;
                if !budget.within_composition_regime() {
                    log::warn!(
                        "epsilon = {} >= q^2 T = {:.4}; the composition bound may not apply",
                        budget.epsilon,
                        budget.q * budget.q * budget.steps as f64
                    );
                }
                let floor = labels
                    .costs()
                    .iter()
                    .map(|o| depolarizing_floor(config.alpha, o))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                Some(NoiseCalibration::new(
                    &budget,
                    delta_sens,
                    floor,
                    config.batch,
                    config.shots,
                    range,
                    model.ansatz.common_frequency(),
                )?)
            }
            Mode::PixelDp | Mode::NonPrivate => None,
        };
        if config.mode == Mode::Adaptive && model.ansatz.common_frequency().is_none() {
            return Err(Error::config("mode", "adaptive mode requires identical generator frequencies"));
        }
        Ok(Self {
            model,
            labels,
            config,
            calibration,
            delta_sens,
        })
    }

    /// Sum of per-sample gradients of the cost `<I - O_y>` over `indices`.
    /// Sample `j` of the dataset draws its shots from `shots.split(j)`.
    pub fn batch_gradient(
        &self,
        data: &Dataset,
        indices: &[usize],
        theta: &ParamVector,
        shots: Stream,
    ) -> Result<BatchGradient> {
        if indices.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let per_sample = indices
            .par_iter()
            .enumerate()
            .map(|(pos, &j)| {
                let (x, y) = data.get(j);
                let cost = self.labels.cost(y)?;
                let dists = shifted_distributions(self.model, x, theta, cost, self.config.alpha)?;
                let loss = expectation(&self.model.state(x, theta)?, cost)?;
                match self.config.shots {
                    Shots::Infinite => Ok((dists.analytic(pos).values, None, loss)),
                    Shots::Finite(n) => {
                        let (g, s) = dists.sampled(pos, n, shots.split(j as u64))?;
                        Ok((g.values, Some(s), loss))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let k = self.model.ansatz.n_params();
        let mut sum = vec![0.0; k];
        let mut loss = 0.0;
        let mut stats = match self.config.shots {
            Shots::Finite(n) => Some(ShotStatistics::new(n)),
            Shots::Infinite => None,
        };
        for (g, s, l) in per_sample {
            for (a, v) in sum.iter_mut().zip(&g) {
                *a += v;
            }
            loss += l;
            if let (Some(all), Some(s)) = (stats.as_mut(), s) {
                all.extend(s)?;
            }
        }
        Ok(BatchGradient {
            sum,
            stats,
            loss: loss / indices.len() as f64,
        })
    }

    fn calibration(&self) -> Result<&NoiseCalibration> {
        self.calibration
            .as_ref()
            .ok_or_else(|| Error::invalid("mode has no noise calibration"))
    }

    /// Q-ShiftDP step: unclipped gradient sum plus `N(0, sigma^2 Delta^2)` noise.
    pub fn qshiftdp_step(
        &self,
        theta: &ParamVector,
        data: &Dataset,
        indices: &[usize],
        step: usize,
        streams: StepStreams,
    ) -> Result<(ParamVector, StepMetrics)> {
        let calib = self.calibration()?;
        let bg = self.batch_gradient(data, indices, theta, streams.shots)?;
        let g = privatize(&bg.sum, calib.sigma2, self.delta_sens, indices.len(), streams.noise)?;
        let reduction = noise_reduction_pct(calib.c_dp, calib.sigma2).ok();
        Ok((
            update(theta, &g, self.config.lr),
            StepMetrics {
                step,
                loss: bg.loss,
                grad_norm: norm(&g),
                sigma2: calib.sigma2,
                eta_hat_b2: None,
                noise_reduction_pct: reduction,
            },
        ))
    }

    /// Adaptive step: the multiplier is recalibrated from this batch's
    /// shot statistics.
    pub fn adaptive_qshiftdp_step(
        &self,
        theta: &ParamVector,
        data: &Dataset,
        indices: &[usize],
        step: usize,
        streams: StepStreams,
    ) -> Result<(ParamVector, StepMetrics)> {
        let n_shots = match self.config.shots {
            Shots::Finite(n) => n,
            Shots::Infinite => return Err(Error::invalid("adaptive steps need finite shots")),
        };
        let calib = self.calibration()?;
        let bg = self.batch_gradient(data, indices, theta, streams.shots)?;
        let stats = bg.stats.as_ref().ok_or_else(|| Error::invalid("no shot statistics"))?;
        let z = critical_value(self.config.beta)?;
        let eta_hat = batch_variance_estimator(stats, z)?;
        let sigma2_b = adaptive_sigma(calib.c_dp, eta_hat, self.model.ansatz.frequencies(), n_shots, self.delta_sens)?;
        let g = privatize(&bg.sum, sigma2_b, self.delta_sens, indices.len(), streams.noise)?;
        Ok((
            update(theta, &g, self.config.lr),
            StepMetrics {
                step,
                loss: bg.loss,
                grad_norm: norm(&g),
                sigma2: sigma2_b,
                eta_hat_b2: Some(eta_hat),
                noise_reduction_pct: Some(noise_reduction_pct(calib.c_dp, sigma2_b)?),
            },
        ))
    }

    /// Gradient step without artificial noise.
    pub fn plain_step(
        &self,
        theta: &ParamVector,
        data: &Dataset,
        indices: &[usize],
        step: usize,
        streams: StepStreams,
    ) -> Result<(ParamVector, StepMetrics)> {
        let bg = self.batch_gradient(data, indices, theta, streams.shots)?;
        let g: Vec<f64> = bg.sum.iter().map(|v| v / indices.len() as f64).collect();
        Ok((
            update(theta, &g, self.config.lr),
            StepMetrics {
                step,
                loss: bg.loss,
                grad_norm: norm(&g),
                sigma2: 0.0,
                eta_hat_b2: None,
                noise_reduction_pct: None,
            },
        ))
    }
}

/// Randomness consumed by one step.
#[derive(Debug, Clone, Copy)]
pub struct StepStreams {
    pub batch: Stream,
    pub shots: Stream,
    pub noise: Stream,
}

impl StepStreams {
    /// Each purpose gets its own subtree so that runs differing only in
    /// shots or budget share batches and (standardised) noise draws.
    pub fn for_step(root: Stream, step: usize) -> Self {
        let t = step as u64;
        Self {
            batch: root.split2(purpose::BATCH, t),
            shots: root.split2(purpose::SHOTS, t),
            noise: root.split2(purpose::NOISE, t),
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub theta: ParamVector,
    pub metrics: MetricsRecord,
    pub calibration: Option<NoiseCalibration>,
}

/// Uniform mini-batch without replacement.
pub fn sample_batch(n_samples: usize, batch: usize, stream: Stream) -> Vec<usize> {
    index::sample(&mut stream.rng(), n_samples, batch).into_vec()
}

/// Runs `T` steps of the configured mode from a seeded uniform initialisation.
pub fn train(data: &Dataset, model: &Model, labels: &LabelObservables, config: TrainConfig) -> Result<TrainOutput> {
    if data.n_classes() > labels.n_classes() {
        return Err(Error::invalid("dataset has more classes than label observables"));
    }
    if data.input_dim() != model.encoder.input_len() {
        return Err(Error::DimensionMismatch {
            expected: model.encoder.input_len(),
            found: data.input_dim(),
        });
    }
    let trainer = Trainer::new(model, labels, config, data.len())?;
    let root = Stream::new(config.seed);
    let mut theta = ParamVector::random_uniform(&model.ansatz, root.split(purpose::INIT));

    let noised;
    let train_data = if config.mode == Mode::PixelDp {
        let pix = root.split(purpose::PIXEL);
        let inputs = data
            .inputs()
            .iter()
            .enumerate()
            .map(|(j, x)| {
                pixeldp_perturb(x, config.epsilon, config.delta, config.pixel_sensitivity, model.encoder, pix.split(j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        noised = data.with_inputs(inputs)?;
        &noised
    } else {
        data
    };

    let mut metrics = MetricsRecord::default();
    match config.mode {
        Mode::QShiftDp => {
            metrics.epsilon = Some(config.epsilon);
            metrics.delta_effective = Some(config.delta);
        }
        Mode::Adaptive => {
            metrics.epsilon = Some(config.epsilon);
            metrics.delta_effective = Some(config.budget(data.len())?.effective_delta());
        }
        Mode::PixelDp => {
            metrics.epsilon = Some(config.epsilon);
            metrics.delta_effective = Some(config.delta);
        }
        Mode::NonPrivate => {}
    }

    for step in 0..config.steps {
        let streams = StepStreams::for_step(root, step);
        let indices = sample_batch(train_data.len(), config.batch, streams.batch);
        let (next, row) = match config.mode {
            Mode::QShiftDp => trainer.qshiftdp_step(&theta, train_data, &indices, step, streams)?,
            Mode::Adaptive => trainer.adaptive_qshiftdp_step(&theta, train_data, &indices, step, streams)?,
            Mode::PixelDp | Mode::NonPrivate => trainer.plain_step(&theta, train_data, &indices, step, streams)?,
        };
        log::debug!("step {step}: loss {:.4} |g| {:.4} sigma2 {:.4}", row.loss, row.grad_norm, row.sigma2);
        theta = next;
        metrics.push(row);
    }
    Ok(TrainOutput {
        theta,
        metrics,
        calibration: trainer.calibration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean negative log of the renormalised true-class probability.
    pub nll: f64,
}

/// Accuracy and NLL of argmax predictions; probabilities are floored at 1e-15.
pub fn evaluate(theta: &ParamVector, data: &Dataset, model: &Model, labels: &LabelObservables) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let preds = data
        .inputs()
        .par_iter()
        .map(|x| model.predict(x, theta, labels))
        .collect::<Result<Vec<_>>>()?;
    let mut correct = 0usize;
    let mut nll = 0.0;
    for (p, &y) in preds.iter().zip(data.labels()) {
        correct += usize::from(p.class == y);
        nll -= p.probabilities[y].max(1e-15).ln();
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        nll: nll / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::AnsatzSpec;
    use crate::data::{gen_bars_stripes, BarsStripesOptions};
    use crate::psr::psr_gradient_analytic;

    fn setup() -> (Model, LabelObservables, Dataset) {
        let model = Model::new(EncoderSpec::Angle { n_qubits: 4 }, AnsatzSpec::strongly_entangling(4, 1).unwrap()).unwrap();
        let labels = LabelObservables::wire_readout(4, 1).unwrap();
        let data = gen_bars_stripes(40, BarsStripesOptions::default(), Stream::new(8)).unwrap();
        (model, labels, data)
    }

    #[test]
    fn mode_parsing() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!(matches!("dp-sgd".parse::<Mode>(), Err(Error::Config { .. })));
        let json = serde_json::to_string(&Mode::NonPrivate).unwrap();
        assert_eq!(json, "\"non-private\"");
    }

    #[test]
    fn config_validation() {
        let c = TrainConfig::default();
        assert!(c.validate(1000).is_ok());
        assert!(c.validate(100).is_err());
        assert!(TrainConfig { lr: 0.0, ..c }.validate(1000).is_err());
        let a = TrainConfig {
            mode: Mode::Adaptive,
            shots: Shots::Infinite,
            ..c
        };
        assert!(a.validate(1000).is_err());
        assert!(TrainConfig { shots: Shots::Finite(1), ..c }.validate(1000).is_err());
    }

    #[test]
    fn noiseless_full_batch_step_is_gradient_descent() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            mode: Mode::QShiftDp,
            shots: Shots::Infinite,
            batch: data.len(),
            epsilon: 1e12,
            ..Default::default()
        };
        let mut trainer = Trainer::new(&model, &labels, config, data.len()).unwrap();
        let mut calib = trainer.calibration.unwrap();
        calib.sigma2 = 0.0;
        trainer.calibration = Some(calib);
        let theta = ParamVector::random_uniform(&model.ansatz, Stream::new(1));
        let all: Vec<usize> = (0..data.len()).collect();
        let (next, _) = trainer
            .qshiftdp_step(&theta, &data, &all, 0, StepStreams::for_step(Stream::new(2), 0))
            .unwrap();
        let mut full = vec![0.0; 12];
        for j in 0..data.len() {
            let (x, y) = data.get(j);
            let g = psr_gradient_analytic(&model, x, &theta, labels.cost(y).unwrap()).unwrap();
            for (a, v) in full.iter_mut().zip(&g.values) {
                *a += v / data.len() as f64;
            }
        }
        for k in 0..12 {
            let expect = theta.as_slice()[k] - 0.2 * full[k];
            assert!((next.as_slice()[k] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_theta() {
        let (model, labels, data) = setup();
        // lr must be positive for a config, so step with the trainer directly
        let config = TrainConfig {
            batch: 8,
            ..Default::default()
        };
        let mut trainer = Trainer::new(&model, &labels, config, data.len()).unwrap();
        trainer.config.lr = 0.0;
        let theta = ParamVector::random_uniform(&model.ansatz, Stream::new(3));
        let idx = sample_batch(data.len(), 8, Stream::new(4));
        let s = StepStreams::for_step(Stream::new(5), 0);
        assert_eq!(trainer.qshiftdp_step(&theta, &data, &idx, 0, s).unwrap().0, theta);
        assert_eq!(trainer.adaptive_qshiftdp_step(&theta, &data, &idx, 0, s).unwrap().0, theta);
    }

    #[test]
    fn steps_are_deterministic() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            batch: 16,
            ..Default::default()
        };
        let trainer = Trainer::new(&model, &labels, config, data.len()).unwrap();
        let theta = ParamVector::random_uniform(&model.ansatz, Stream::new(3));
        let idx = sample_batch(data.len(), 16, Stream::new(4));
        let s = StepStreams::for_step(Stream::new(5), 3);
        let a = trainer.qshiftdp_step(&theta, &data, &idx, 3, s).unwrap();
        let b = trainer.qshiftdp_step(&theta, &data, &idx, 3, s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn privatize_passes_large_gradients_through_unclipped() {
        // a synthetic per-sample gradient of norm close to Delta
        let delta = 3f64.sqrt();
        let g: Vec<f64> = (0..12).map(|_| 0.4999).collect();
        assert!((norm(&g) - delta).abs() < 1e-3);
        let sum: Vec<f64> = g.iter().map(|v| v * 64.0).collect();
        assert_eq!(privatize(&sum, 0.0, delta, 64, Stream::new(1)).unwrap(), g);
        let out = privatize(&sum, 2.0, delta, 64, Stream::new(1)).unwrap();
        let z = sample_privacy_noise(12, 2.0, delta, Stream::new(1));
        for k in 0..12 {
            assert_eq!(out[k], (sum[k] + z[k]) / 64.0);
        }
        assert!(privatize(&sum, 1.0, delta, 0, Stream::new(1)).is_err());
    }

    #[test]
    fn privacy_noise_variance() {
        let z = sample_privacy_noise(100_000, 2.5, 1.7, Stream::new(7));
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (z.len() - 1) as f64;
        let target = 2.5 * 1.7 * 1.7;
        assert!((var / target - 1.0).abs() < 0.02);
    }

    #[test]
    fn pixeldp_examples() {
        let enc = EncoderSpec::Amplitude { n_qubits: 4 };
        let x = vec![0.5; 16];
        assert_eq!(pixeldp_perturb(&x, f64::INFINITY, 1e-3, 1.0, enc, Stream::new(1)).unwrap(), x);
        let a = pixeldp_std(1.0, 1e-3, 1.0).unwrap();
        assert!((pixeldp_std(0.5, 1e-3, 1.0).unwrap() - 2.0 * a).abs() < 1e-12);
        assert!(pixeldp_std(0.0, 1e-3, 1.0).is_err());
        let n = 100_000;
        let big = vec![0.0; n];
        let noisy = pixeldp_perturb(&big, 2.0, 1e-3, 1.0, enc, Stream::new(2)).unwrap();
        let std = (noisy.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        assert!((std / pixeldp_std(2.0, 1e-3, 1.0).unwrap() - 1.0).abs() < 0.02);
        let clamped = pixeldp_perturb(&[0.0, 1.0, 0.5, 0.2], 0.1, 1e-3, 1.0, EncoderSpec::Angle { n_qubits: 4 }, Stream::new(3)).unwrap();
        assert!(clamped.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_steps_return_initial_parameters() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            steps: 0,
            batch: 8,
            seed: 11,
            ..Default::default()
        };
        let out = train(&data, &model, &labels, config).unwrap();
        let init = ParamVector::random_uniform(&model.ansatz, Stream::new(11).split(purpose::INIT));
        assert_eq!(out.theta, init);
        assert!(out.metrics.steps().is_empty());
    }

    #[test]
    fn metrics_rows_and_declared_guarantee() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            mode: Mode::Adaptive,
            steps: 3,
            batch: 16,
            shots: Shots::Finite(100),
            beta: 1e-5,
            ..Default::default()
        };
        let out = train(&data, &model, &labels, config).unwrap();
        assert_eq!(out.metrics.steps().len(), 3);
        assert_eq!(out.metrics.delta_effective, Some((1.0 - 1e-5) * 1e-3 + 1e-5));
        let c_dp = out.calibration.unwrap().c_dp;
        for r in out.metrics.steps() {
            let pct = r.noise_reduction_pct.unwrap();
            assert!((pct - (c_dp - r.sigma2) / c_dp * 100.0).abs() < 1e-12);
            assert!(r.eta_hat_b2.is_some());
        }
        let mut buf = Vec::new();
        out.metrics.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,loss,grad_norm,sigma2,eta_hat_B2,noise_reduction_pct\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn adaptive_with_constant_outcomes_gets_no_credit() {
        // all shifted circuits are eigenstates of the cost, so every outcome set is constant
        use crate::circuit::{Axis, Op};
        let ansatz = AnsatzSpec::custom(1, vec![Op::Rotation { axis: Axis::Y, wire: 0, param: 0 }]).unwrap();
        let model = Model::new(EncoderSpec::Angle { n_qubits: 1 }, ansatz).unwrap();
        let labels = LabelObservables::basis_states(1, 2).unwrap();
        let data = Dataset::new("toy", vec![vec![0.0]; 4], vec![0; 4], 2).unwrap();
        let config = TrainConfig {
            mode: Mode::Adaptive,
            batch: 4,
            shots: Shots::Finite(50),
            ..Default::default()
        };
        let trainer = Trainer::new(&model, &labels, config, 4).unwrap();
        let theta = ParamVector::new(&model.ansatz, vec![std::f64::consts::FRAC_PI_2]).unwrap();
        let (_, row) = trainer
            .adaptive_qshiftdp_step(&theta, &data, &[0, 1, 2, 3], 0, StepStreams::for_step(Stream::new(1), 0))
            .unwrap();
        assert_eq!(row.eta_hat_b2, Some(0.0));
        assert_eq!(row.sigma2, trainer.calibration.unwrap().c_dp);
    }

    #[test]
    fn adaptive_rejects_analytic_mode() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            batch: 8,
            shots: Shots::Infinite,
            ..Default::default()
        };
        let mut trainer = Trainer::new(&model, &labels, config, data.len()).unwrap();
        trainer.config.mode = Mode::Adaptive;
        let theta = ParamVector::zeros(&model.ansatz);
        let r = trainer.adaptive_qshiftdp_step(&theta, &data, &[0, 1], 0, StepStreams::for_step(Stream::new(1), 0));
        assert!(r.is_err());
    }

    #[test]
    fn evaluate_examples() {
        use crate::circuit::{Axis, Op};
        let ansatz = AnsatzSpec::custom(1, vec![Op::Rotation { axis: Axis::Y, wire: 0, param: 0 }]).unwrap();
        let model = Model::new(EncoderSpec::Angle { n_qubits: 1 }, ansatz).unwrap();
        let labels = LabelObservables::basis_states(1, 2).unwrap();
        let toy = Dataset::new("toy", vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let theta = ParamVector::zeros(&model.ansatz);
        let e = evaluate(&theta, &toy, &model, &labels).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert!(e.nll >= 0.0 && e.nll < 1e-12);

        // labels independent of inputs: any fixed theta guesses at random
        let (model, labels, _) = setup();
        let big = gen_bars_stripes(4000, BarsStripesOptions::default(), Stream::new(9)).unwrap();
        let mut rng = Stream::new(10).rng();
        let coin: Vec<usize> = (0..big.len()).map(|_| rng.random_range(0..2)).collect();
        let shuffled = Dataset::new("coin", big.inputs().to_vec(), coin, 2).unwrap();
        let theta = ParamVector::random_uniform(&model.ansatz, Stream::new(11));
        let e = evaluate(&theta, &shuffled, &model, &labels).unwrap();
        assert!((e.accuracy - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt(), "{}", e.accuracy);
        assert!(e.nll >= 0.0);
    }

    #[test]
    fn adaptive_multiplier_beats_global_when_its_credit_is_larger() {
        let (model, labels, data) = setup();
        let config = TrainConfig {
            mode: Mode::Adaptive,
            batch: 32,
            alpha: 0.2,
            shots: Shots::Finite(100),
            epsilon: 0.5,
            ..Default::default()
        };
        let trainer = Trainer::new(&model, &labels, config, data.len()).unwrap();
        let calib = trainer.calibration.unwrap();
        let global_credit = 2.0 * 32.0 * calib.sigma2_shot_floor / 100.0;
        let mut theta = ParamVector::random_uniform(&model.ansatz, Stream::new(1));
        let mut compared = 0;
        for step in 0..10 {
            let s = StepStreams::for_step(Stream::new(2), step);
            let idx = sample_batch(data.len(), 32, s.batch);
            let (next, row) = trainer.adaptive_qshiftdp_step(&theta, &data, &idx, step, s).unwrap();
            let credit = row.eta_hat_b2.unwrap().max(0.0) / (4.0 * 100.0 * trainer.delta_sens.powi(2));
            if credit >= global_credit {
                assert!(row.sigma2 <= calib.sigma2);
                compared += 1;
            }
            theta = next;
        }
        assert!(compared > 0);
    }
}
