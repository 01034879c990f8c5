//! Differentially private training of variational quantum classifiers.
//!
//! Per-sample gradients come from the parameter-shift rule, so their
//! l2-sensitivity is fixed by the observable spectrum and the generator
//! frequencies and no clipping is needed. Finite-shot measurement noise (and
//! depolarizing noise, when present) is credited against the Gaussian noise
//! the privacy budget demands, either with a global floor or with a per-batch
//! estimate built from the shot statistics.
//!
//! Modules, bottom up:
//! - [`sim`]: statevector/density-matrix simulator, observables, shots.
//! - [`circuit`]: encoders, the strongly-entangling ansatz, label observables.
//! - [`psr`]: parameter-shift gradients, sensitivity and the MSE bound.
//! - [`privacy`]: noise calibration and accounting.
//! - [`train`]: the private training loops, the PixelDP baseline, evaluation.
//! - [`data`] and [`experiment`]: datasets and grid runs.

pub mod circuit;
pub mod data;
pub mod error;
pub mod experiment;
pub mod privacy;
pub mod psr;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use rng::Stream;

/// Number of measurement shots per shifted circuit, or exact expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "ShotsRepr")]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl Shots {
    pub fn as_f64(&self) -> f64 {
        match self {
            Shots::Finite(n) => *n as f64,
            Shots::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Shots::Finite(_))
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" || t.eq_ignore_ascii_case("analytic") {
            return Ok(Shots::Infinite);
        }
        // accept 1e3-style literals too
        let v: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse shot count `{s}`")))?;
        if !(v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
            return Err(Error::invalid(format!("shot count must be a positive integer, got `{s}`")));
        }
        Ok(Shots::Finite(v as u64))
    }
}

impl From<Shots> for String {
    fn from(s: Shots) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Shots {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Config files may give shots as an integer, a float literal or a string.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Int(u64),
    Float(f64),
    Text(String),
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = Error;
    fn try_from(r: ShotsRepr) -> Result<Self> {
        match r {
            ShotsRepr::Int(n) => Shots::try_from(n.to_string()),
            ShotsRepr::Float(v) => Shots::try_from(v.to_string()),
            ShotsRepr::Text(s) => s.parse(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_parse_and_print() {
        assert_eq!("inf".parse::<Shots>().unwrap(), Shots::Infinite);
        assert_eq!("1e3".parse::<Shots>().unwrap(), Shots::Finite(1000));
        assert_eq!("100000".parse::<Shots>().unwrap(), Shots::Finite(100_000));
        assert!("0".parse::<Shots>().is_err());
        assert!("2.5".parse::<Shots>().is_err());
        assert_eq!(Shots::Infinite.to_string(), "inf");
        assert_eq!(serde_json::to_string(&Shots::Finite(10)).unwrap(), "\"10\"");
        let v: Vec<Shots> = serde_json::from_str("[10, 1e4, \"inf\"]").unwrap();
        assert_eq!(v, vec![Shots::Finite(10), Shots::Finite(10_000), Shots::Infinite]);
    }
}
