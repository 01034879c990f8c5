//! Differential-privacy arithmetic: the calibration constant, shot-noise
//! credited noise multipliers (global and per batch), per-iteration epsilon,
//! the depolarizing variance floor and the batch variance lower bound.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::psr::ShotStatistics;
use crate::sim::{uniform_variance, Observable};
use crate::Shots;

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("{name} = {v} must lie in (0,1)")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta = {beta} must lie in [0,1)")));
    }
    Ok(())
}

/// Target `(epsilon, delta)` guarantee and the quantities it is composed over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Significance level of the adaptive variance bound.
    pub beta: f64,
    pub c2: f64,
    /// Sampling rate `B / N`.
    pub q: f64,
    pub steps: usize,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, beta: f64, c2: f64, q: f64, steps: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
        }
        check_unit_open("delta", delta)?;
        check_beta(beta)?;
        if !(c2 > 0.0) {
            return Err(Error::invalid(format!("c2 = {c2} must be positive")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(format!("sampling rate q = {q} must lie in (0,1]")));
        }
        if steps == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        Ok(Self {
            epsilon,
            delta,
            beta,
            c2,
            q,
            steps,
        })
    }

    pub fn dp_constant(&self) -> f64 {
        // inputs validated in `new`
        dp_constant(self.q, self.steps, self.delta, self.epsilon, self.c2).unwrap_or(f64::NAN)
    }

    /// `(1 - beta) delta + beta`.
    pub fn effective_delta(&self) -> f64 {
        (1.0 - self.beta) * self.delta + self.beta
    }

    /// Applicability proxy `epsilon < q^2 T` (the composition constant is
    /// taken as 1 since its value is unknown). Only used for warnings.
    pub fn within_composition_regime(&self) -> bool {
        self.epsilon < self.q * self.q * self.steps as f64
    }
}

/// Noise multipliers used by one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCalibration {
    pub c_dp: f64,
    /// Sensitivity Delta of a per-sample gradient.
    pub delta_sens: f64,
    /// Global multiplier (non-adaptive).
    pub sigma2: f64,
    pub sigma2_shot_floor: f64,
    pub lambda_range: f64,
    /// Common generator frequency, when all are equal.
    pub omega: Option<f64>,
}

impl NoiseCalibration {
    pub fn new(
        budget: &PrivacyBudget,
        delta_sens: f64,
        sigma2_shot_floor: f64,
        batch: usize,
        shots: Shots,
        lambda_range: f64,
        omega: Option<f64>,
    ) -> Result<Self> {
        let c_dp = budget.dp_constant();
        let sigma2 = calibrate_sigma(c_dp, batch, sigma2_shot_floor, shots, lambda_range)?;
        Ok(Self {
            c_dp,
            delta_sens,
            sigma2,
            sigma2_shot_floor,
            lambda_range,
            omega,
        })
    }
}

/// `C_DP = (c2 q sqrt(T ln(1/delta)) / epsilon)^2`.
pub fn dp_constant(q: f64, steps: usize, delta: f64, epsilon: f64, c2: f64) -> Result<f64> {
    check_unit_open("delta", delta)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
    }
    if !(q > 0.0) || !(c2 > 0.0) || steps == 0 {
        return Err(Error::invalid("q, c2 and T must be positive"));
    }
    let root = c2 * q * (steps as f64 * (1.0 / delta).ln()).sqrt() / epsilon;
    Ok(root * root)
}

/// Shot-noise credit `2 B sigma2_shot / (N_s lambda_range^2)`; zero for analytic runs.
pub fn shot_credit(batch: usize, sigma2_shot: f64, shots: Shots, lambda_range: f64) -> Result<f64> {
    if !(lambda_range > 0.0) {
        return Err(Error::invalid("lambda range must be positive"));
    }
    if sigma2_shot < 0.0 {
        return Err(Error::invalid("shot variance must be nonnegative"));
    }
    Ok(match shots {
        Shots::Infinite => 0.0,
        Shots::Finite(0) => return Err(Error::invalid("shot count must be positive")),
        Shots::Finite(n) => 2.0 * batch as f64 * sigma2_shot / (n as f64 * lambda_range * lambda_range),
    })
}

/// `sigma^2 = max(0, C_DP - 2 B sigma2_shot / (N_s lambda_range^2))`.
pub fn calibrate_sigma(c_dp: f64, batch: usize, sigma2_shot: f64, shots: Shots, lambda_range: f64) -> Result<f64> {
    if c_dp < 0.0 {
        return Err(Error::invalid("C_DP must be nonnegative"));
    }
    let credit = shot_credit(batch, sigma2_shot, shots, lambda_range)?;
    Ok((c_dp - credit).max(0.0))
}

/// Per-iteration Gaussian-mechanism epsilon given artificial and shot noise.
pub fn per_iteration_epsilon(
    sigma2: f64,
    sigma2_shot: f64,
    batch: usize,
    shots: Shots,
    lambda_range: f64,
    delta0: f64,
) -> Result<f64> {
    check_unit_open("delta0", delta0)?;
    let total = shot_credit(batch, sigma2_shot, shots, lambda_range)? + sigma2;
    if !(total > 0.0) {
        return Err(Error::invalid("total noise is zero; epsilon is unbounded"));
    }
    Ok(gaussian_epsilon(total, delta0))
}

/// `sqrt(2 ln(1.25 / delta0)) / sqrt(total)`.
pub(crate) fn gaussian_epsilon(total_multiplier2: f64, delta0: f64) -> f64 {
    (2.0 * (1.25 / delta0).ln()).sqrt() / total_multiplier2.sqrt()
}

/// `alpha * sigma^2_uniform(O)`: a lower bound on the single-shot variance
/// after global depolarizing noise.
pub fn depolarizing_floor(alpha: f64, o: &Observable) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("depolarizing strength {alpha} outside [0,1]")));
    }
    Ok(alpha * uniform_variance(o))
}

/// One-sided normal critical value `z` with `P(Z <= z) = 1 - beta`.
pub fn critical_value(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - beta))
}

/// Probabilistic lower bound on the summed shot variance of a batch:
/// the summed sample variances minus `z` times the estimated standard error.
/// The spread sum can be slightly negative for tiny or near-degenerate groups;
/// it is clamped at zero before the square root.
pub fn batch_variance_estimator(stats: &ShotStatistics, z_beta: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::invalid("no shot statistics to estimate from"));
    }
    if stats.n_shots() < 2 {
        return Err(Error::invalid("variance estimation needs N_s >= 2"));
    }
    let n = stats.n_shots() as f64;
    let (mut eta2, mut spread) = (0.0, 0.0);
    for g in stats.groups() {
        let v = g.moments.variance;
        eta2 += v;
        spread += (g.moments.fourth_moment - v * v) / n;
    }
    if z_beta == 0.0 {
        return Ok(eta2);
    }
    let spread = spread.max(0.0);
    if spread == 0.0 {
        return Ok(eta2);
    }
    Ok(eta2 - z_beta * spread.sqrt())
}

/// Per-batch multiplier `max(0, C_DP - Omega^2 max(0, eta_hat) / (4 N_s Delta^2))`.
pub fn adaptive_sigma(c_dp: f64, eta_hat_b2: f64, omegas: &[f64], n_shots: u64, delta_sens: f64) -> Result<f64> {
    let omega = *omegas.first().ok_or_else(|| Error::invalid("empty frequency vector"))?;
    if omegas.iter().any(|&w| w != omega) {
        return Err(Error::invalid("adaptive calibration requires identical generator frequencies"));
    }
    if n_shots == 0 || !(delta_sens > 0.0) || c_dp < 0.0 {
        return Err(Error::invalid("adaptive calibration needs N_s > 0, Delta > 0, C_DP >= 0"));
    }
    let credit = omega * omega * eta_hat_b2.max(0.0) / (4.0 * n_shots as f64 * delta_sens * delta_sens);
    Ok((c_dp - credit).max(0.0))
}

/// `(1 - beta) delta + beta`.
pub fn effective_delta(beta: f64, delta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_unit_open("delta", delta)?;
    Ok((1.0 - beta) * delta + beta)
}

/// `(C_DP - sigma_B^2) / C_DP * 100`.
pub fn noise_reduction_pct(c_dp: f64, sigma2_b: f64) -> Result<f64> {
    if !(c_dp > 0.0) {
        return Err(Error::invalid("C_DP must be positive"));
    }
    Ok((c_dp - sigma2_b) / c_dp * 100.0)
}
