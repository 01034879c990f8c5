use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Probability of each distinct eigenvalue of an observable.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    levels: Vec<f64>,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub(crate) fn new(levels: Vec<f64>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(levels.len(), probs.len());
        Self { levels, probs }
    }

    /// A finite outcome law given directly, e.g. for synthetic experiments.
    pub fn from_parts(levels: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != probs.len() {
            return Err(Error::invalid("levels and probabilities must be nonempty and equally long"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("probabilities must be nonnegative and sum to 1"));
        }
        Ok(Self::new(levels, probs))
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().zip(&self.probs).map(|(l, p)| l * p).sum()
    }

    /// `sum lambda^2 p - (sum lambda p)^2`, evaluated in centred form.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.levels
            .iter()
            .zip(&self.probs)
            .map(|(l, p)| p * (l - mu) * (l - mu))
            .sum()
    }

    /// `(1 - alpha) p + alpha u`, where `u` is the outcome law of `I/d`.
    pub(crate) fn depolarized(&self, alpha: f64, uniform: &[f64]) -> Self {
        let probs = self
            .probs
            .iter()
            .zip(uniform)
            .map(|(p, u)| (1.0 - alpha) * p + alpha * u)
            .collect();
        Self {
            levels: self.levels.clone(),
            probs,
        }
    }

    /// Draws the explicit i.i.d. outcome sequence by inverse CDF.
    pub fn sample_shots<R: Rng + ?Sized>(&self, n_shots: usize, rng: &mut R) -> Result<ShotOutcomeSet> {
        if n_shots == 0 {
            return Err(Error::invalid("n_shots must be at least 1"));
        }
        let last = self.levels.len() - 1;
        let outcomes = (0..n_shots)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in self.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return self.levels[i];
                    }
                }
                // u landed in the rounding gap above the last cumulative sum
                let i = (0..=last).rev().find(|&i| self.probs[i] > 0.0).unwrap_or(last);
                self.levels[i]
            })
            .collect();
        Ok(ShotOutcomeSet { outcomes, n_shots })
    }

    /// Draws outcome counts for `n_shots` i.i.d. shots (multinomial via
    /// conditional binomials). Same law as the histogram of `sample_shots`.
    pub fn sample_counts<R: Rng + ?Sized>(&self, n_shots: u64, rng: &mut R) -> Result<ShotCounts> {
        if n_shots == 0 {
            return Err(Error::invalid("n_shots must be at least 1"));
        }
        let mut counts = vec![0u64; self.levels.len()];
        let mut remaining = n_shots;
        let mut mass: f64 = self.probs.iter().map(|p| p.max(0.0)).sum();
        let last = self.levels.len() - 1;
        for (i, &p) in self.probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let p = p.max(0.0);
            if i == last {
                counts[i] = remaining;
                break;
            }
            let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
            let c = if cond >= 1.0 {
                remaining
            } else if cond <= 0.0 {
                0
            } else {
                Binomial::new(remaining, cond)
                    .map_err(|e| Error::invalid(format!("binomial: {e}")))?
                    .sample(rng)
            };
            counts[i] = c;
            remaining -= c;
            mass -= p;
        }
        Ok(ShotCounts {
            levels: self.levels.clone(),
            counts,
            n_shots,
        })
    }
}

/// Sample mean, variance (denominator `n - 1`) and fourth central moment
/// (denominator `n`) of a set of shot outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub fourth_moment: f64,
}

impl SampleMoments {
    fn from_weighted<I>(pairs: I, n: u64) -> Result<Self>
    where
        I: Iterator<Item = (f64, f64)> + Clone,
    {
        if n < 2 {
            return Err(Error::invalid("sample variance needs at least 2 shots"));
        }
        let nf = n as f64;
        let mean = pairs.clone().map(|(v, w)| v * w).sum::<f64>() / nf;
        let (mut s2, mut s4) = (0.0, 0.0);
        for (v, w) in pairs {
            let d2 = (v - mean) * (v - mean);
            s2 += w * d2;
            s4 += w * d2 * d2;
        }
        Ok(Self {
            n,
            mean,
            variance: s2 / (nf - 1.0),
            fourth_moment: s4 / nf,
        })
    }
}

/// An explicit sequence of single-shot outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotOutcomeSet {
    outcomes: Vec<f64>,
    n_shots: usize,
}

impl ShotOutcomeSet {
    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().sum::<f64>() / self.n_shots as f64
    }

    pub fn moments(&self) -> Result<SampleMoments> {
        SampleMoments::from_weighted(self.outcomes.iter().map(|&v| (v, 1.0)), self.n_shots as u64)
    }

    /// Histogram over the given levels. Fails if an outcome is not one of them.
    pub fn to_counts(&self, levels: &[f64]) -> Result<ShotCounts> {
        let mut counts = vec![0u64; levels.len()];
        for &o in &self.outcomes {
            let i = levels
                .iter()
                .position(|&l| l == o)
                .ok_or_else(|| Error::invalid(format!("outcome {o} is not an eigenvalue")))?;
            counts[i] += 1;
        }
        Ok(ShotCounts {
            levels: levels.to_vec(),
            counts,
            n_shots: self.n_shots as u64,
        })
    }
}

/// Outcome counts per distinct eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCounts {
    levels: Vec<f64>,
    counts: Vec<u64>,
    n_shots: u64,
}

impl ShotCounts {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_shots(&self) -> u64 {
        self.n_shots
    }

    pub fn mean(&self) -> f64 {
        self.levels
            .iter()
            .zip(&self.counts)
            .map(|(l, &c)| l * c as f64)
            .sum::<f64>()
            / self.n_shots as f64
    }

    pub fn moments(&self) -> Result<SampleMoments> {
        SampleMoments::from_weighted(
            self.levels.iter().zip(&self.counts).map(|(&l, &c)| (l, c as f64)),
            self.n_shots,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn coin(p: f64) -> OutcomeDistribution {
        OutcomeDistribution::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    #[test]
    fn sequence_and_histogram_give_identical_moments() {
        let d = OutcomeDistribution::new(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]);
        let shots = d.sample_shots(997, &mut Stream::new(3).rng()).unwrap();
        let counts = shots.to_counts(d.levels()).unwrap();
        let a = shots.moments().unwrap();
        let b = counts.moments().unwrap();
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.variance - b.variance).abs() < 1e-12);
        assert!((a.fourth_moment - b.fourth_moment).abs() < 1e-12);
    }

    #[test]
    fn constant_outcomes_have_zero_spread() {
        let d = coin(1.0);
        let c = d.sample_counts(50, &mut Stream::new(1).rng()).unwrap();
        assert_eq!(c.counts(), &[0, 50]);
        let m = c.moments().unwrap();
        assert_eq!((m.mean, m.variance, m.fourth_moment), (1.0, 0.0, 0.0));
    }

    #[test]
    fn counts_sum_to_shots_and_track_probabilities() {
        let d = OutcomeDistribution::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]);
        let n = 1_000_000;
        let c = d.sample_counts(n, &mut Stream::new(9).rng()).unwrap();
        assert_eq!(c.counts().iter().sum::<u64>(), n);
        for (k, p) in c.counts().iter().zip(d.probabilities()) {
            let freq = *k as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * se, "{freq} vs {p}");
        }
    }

    #[test]
    fn moments_need_two_shots() {
        let s = coin(0.5).sample_shots(1, &mut Stream::new(0).rng()).unwrap();
        assert!(s.moments().is_err());
        assert!(coin(0.5).sample_shots(0, &mut Stream::new(0).rng()).is_err());
        assert!(coin(0.5).sample_counts(0, &mut Stream::new(0).rng()).is_err());
    }

    #[test]
    fn sample_fourth_moment_of_two_points() {
        // outcomes {0, 1}: mean 1/2, (1/2)^4 each, /2 -> 1/16; variance 1/2
        let s = ShotOutcomeSet { outcomes: vec![0.0, 1.0], n_shots: 2 };
        let m = s.moments().unwrap();
        assert_eq!(m.variance, 0.5);
        assert_eq!(m.fourth_moment, 0.0625);
    }
}
