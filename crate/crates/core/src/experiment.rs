//! Experiment configuration (TOML), grid expansion and metric emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{AnsatzSpec, EncoderSpec, LabelObservables, Model, ParamVector};
use crate::data::{gen_binary_blobs, gen_bars_stripes, load_downscaled_mnist, BarsStripesOptions, Dataset};
use crate::error::{Error, Result};
use crate::rng::{purpose, Stream};
use crate::train::{evaluate, train, MetricsRecord, Mode, TrainConfig, METRICS_SCHEMA};
use crate::Shots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    BarsStripes,
    BinaryBlobs,
    Mnist,
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bars_stripes" | "bars_and_stripes" | "bas" => Ok(DatasetKind::BarsStripes),
            "binary_blobs" | "blobs" => Ok(DatasetKind::BinaryBlobs),
            "mnist" | "downscaled_mnist" => Ok(DatasetKind::Mnist),
            other => Err(Error::config("dataset", format!("unknown dataset {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::BarsStripes => "bars_stripes",
            DatasetKind::BinaryBlobs => "binary_blobs",
            DatasetKind::Mnist => "mnist",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    /// Binary Blobs bit-flip probability.
    pub flip_prob: f64,
    /// Bars & Stripes: keep the all-0/all-1 grids.
    pub include_uniform: bool,
    /// Downscaled-MNIST CSV.
    pub path: Option<PathBuf>,
    /// Downscaled-MNIST share of rows held out for testing.
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            name: DatasetKind::BarsStripes,
            n_train: 1000,
            n_test: 500,
            flip_prob: 0.05,
            include_uniform: false,
            path: None,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// `|y><y|` on one wire.
    Wire,
    /// `|y><y|` on the full register.
    Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub readout: Readout,
    pub readout_wire: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            readout: Readout::Wire,
            readout_wire: 1,
        }
    }
}

/// Axes swept by a run. An empty axis falls back to the `[train]` value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub modes: Vec<Mode>,
    pub eps: Vec<f64>,
    pub shots: Vec<Shots>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub out: PathBuf,
    /// Write measured wall time into summaries (breaks byte-identical reruns).
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            grid: GridConfig::default(),
            out: PathBuf::from("results"),
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// All grid cells in a fixed order: mode, epsilon, shots, alpha, seed.
    pub fn cells(&self) -> Vec<Cell> {
        fn axis<T: Copy>(v: &[T], default: T) -> Vec<T> {
            if v.is_empty() {
                vec![default]
            } else {
                v.to_vec()
            }
        }
        let t = &self.train;
        let mut out = Vec::new();
        for &mode in &axis(&self.grid.modes, t.mode) {
            for &epsilon in &axis(&self.grid.eps, t.epsilon) {
                for &shots in &axis(&self.grid.shots, t.shots) {
                    for &alpha in &axis(&self.grid.alphas, t.alpha) {
                        for &seed in &axis(&self.grid.seeds, t.seed) {
                            out.push(Cell {
                                mode,
                                epsilon,
                                shots,
                                alpha,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn validate_static(&self) -> Result<()> {
        let d = &self.dataset;
        match d.name {
            DatasetKind::BarsStripes | DatasetKind::BinaryBlobs => {
                if d.n_train < 2 {
                    return Err(Error::config("dataset.n_train", "need at least 2 training samples"));
                }
                if d.n_test < 1 {
                    return Err(Error::config("dataset.n_test", "need at least 1 test sample"));
                }
            }
            DatasetKind::Mnist => {
                if d.path.is_none() {
                    return Err(Error::config("dataset.path", "the mnist dataset needs a CSV path"));
                }
                if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
                    return Err(Error::config("dataset.test_fraction", "must lie in (0,1)"));
                }
            }
        }
        if !(0.0..1.0).contains(&d.flip_prob) {
            return Err(Error::config("dataset.flip_prob", "must lie in [0,1)"));
        }
        if self.model.layers == 0 {
            return Err(Error::config("model.layers", "need at least one layer"));
        }
        if self.model.readout_wire >= 4 {
            return Err(Error::config("model.readout_wire", "must be a wire in 0..4"));
        }
        Ok(())
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map(|s| format!(" (line {})", text[..s.start.min(text.len())].lines().count().max(1)))
        .unwrap_or_default()
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub mode: Mode,
    pub epsilon: f64,
    pub shots: Shots,
    pub alpha: f64,
    pub seed: u64,
}

impl Cell {
    /// File stem shared by the cell's CSV and JSON outputs.
    pub fn stem(&self) -> String {
        format!(
            "{}_eps{}_shots{}_alpha{}_seed{}",
            self.mode, self.epsilon, self.shots, self.alpha, self.seed
        )
    }

    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            epsilon: self.epsilon,
            shots: self.shots,
            alpha: self.alpha,
            seed: self.seed,
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Contents of a cell's JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub config: ConfigEcho,
    pub final_accuracy: f64,
    pub final_nll: f64,
    pub epsilon: Option<f64>,
    pub delta_effective: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub seed: u64,
    pub metrics_schema: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub summary: CellSummary,
    pub metrics: MetricsRecord,
    pub theta: ParamVector,
}

/// A validated configuration with its model and per-seed train/test splits.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub config: ExperimentConfig,
    pub model: Model,
    pub labels: LabelObservables,
    splits: BTreeMap<u64, (Dataset, Dataset)>,
    cells: Vec<Cell>,
}

fn split_for(config: &DatasetConfig, seed: u64, loaded: Option<&Dataset>) -> Result<(Dataset, Dataset)> {
    let data = Stream::new(seed).split(purpose::DATA);
    match config.name {
        DatasetKind::BarsStripes => {
            let opts = BarsStripesOptions {
                include_uniform: config.include_uniform,
                ..Default::default()
            };
            Ok((
                gen_bars_stripes(config.n_train, opts, data.split(0))?,
                gen_bars_stripes(config.n_test.max(2), opts, data.split(1))?,
            ))
        }
        DatasetKind::BinaryBlobs => Ok((
            gen_binary_blobs(config.n_train, config.flip_prob, 2, data.split(0))?,
            gen_binary_blobs(config.n_test.max(2), config.flip_prob, 2, data.split(1))?,
        )),
        DatasetKind::Mnist => {
            let all = loaded.ok_or_else(|| Error::config("dataset.path", "dataset not loaded"))?;
            let mut idx: Vec<usize> = (0..all.len()).collect();
            idx.shuffle(&mut data.rng());
            let n_test = ((all.len() as f64 * config.test_fraction).round() as usize).clamp(1, all.len() - 1);
            let pick = |ids: &[usize]| {
                let mut d = Dataset::new(
                    all.name.clone(),
                    ids.iter().map(|&i| all.inputs()[i].clone()).collect(),
                    ids.iter().map(|&i| all.labels()[i]).collect(),
                    all.n_classes(),
                )?;
                d.provenance = all.provenance.clone();
                Ok::<_, Error>(d)
            };
            Ok((pick(&idx[n_test..])?, pick(&idx[..n_test])?))
        }
    }
}

impl ExperimentPlan {
    /// Validates everything (including every cell's training config) before
    /// any training starts.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate_static()?;
        let cells = config.cells();
        let loaded = match config.dataset.name {
            DatasetKind::Mnist => {
                let d = load_downscaled_mnist(config.dataset.path.as_ref().expect("validated"))?;
                if d.len() < 2 {
                    return Err(Error::config("dataset.path", "need at least 2 rows"));
                }
                Some(d)
            }
            _ => None,
        };
        let mut splits = BTreeMap::new();
        for c in &cells {
            if !splits.contains_key(&c.seed) {
                splits.insert(c.seed, split_for(&config.dataset, c.seed, loaded.as_ref())?);
            }
        }
        let (train0, _) = splits.values().next().ok_or_else(|| Error::config("grid", "empty grid"))?;
        let dim = train0.input_dim();
        let n_qubits = 4;
        let encoder = if dim == n_qubits {
            EncoderSpec::Angle { n_qubits }
        } else if dim == 1 << n_qubits {
            EncoderSpec::Amplitude { n_qubits }
        } else {
            return Err(Error::config("dataset", format!("unsupported input width {dim}")));
        };
        let model = Model::new(encoder, AnsatzSpec::strongly_entangling(n_qubits, config.model.layers)?)?;
        let labels = match config.model.readout {
            Readout::Wire => LabelObservables::wire_readout(n_qubits, config.model.readout_wire)?,
            Readout::Basis => LabelObservables::basis_states(n_qubits, 2)?,
        };
        for c in &cells {
            let n = splits[&c.seed].0.len();
            c.train_config(&config.train).validate(n)?;
        }
        Ok(Self {
            config,
            model,
            labels,
            splits,
            cells,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn split(&self, seed: u64) -> Option<&(Dataset, Dataset)> {
        self.splits.get(&seed)
    }

    pub fn run_cell(&self, cell: Cell) -> Result<CellResult> {
        let (train_set, test_set) = self
            .splits
            .get(&cell.seed)
            .ok_or_else(|| Error::invalid(format!("no data split for seed {}", cell.seed)))?;
        let config = cell.train_config(&self.config.train);
        let start = Instant::now();
        let out = train(train_set, &self.model, &self.labels, config)?;
        let eval = evaluate(&out.theta, test_set, &self.model, &self.labels)?;
        let elapsed = start.elapsed().as_secs_f64();
        let summary = CellSummary {
            config: ConfigEcho {
                dataset: self.config.dataset.clone(),
                model: self.config.model,
                train: config,
            },
            final_accuracy: eval.accuracy,
            final_nll: eval.nll,
            epsilon: out.metrics.epsilon,
            delta_effective: out.metrics.delta_effective,
            wall_time_s: self.config.record_timing.then_some(elapsed),
            seed: cell.seed,
            metrics_schema: METRICS_SCHEMA,
        };
        Ok(CellResult {
            cell,
            summary,
            metrics: out.metrics,
            theta: out.theta,
        })
    }

    /// Runs every cell in parallel. Results keep grid order.
    pub fn run_all(&self) -> Result<Vec<CellResult>> {
        self.cells.par_iter().map(|&c| self.run_cell(c)).collect()
    }
}

/// Writes `<stem>.csv` (per-step metrics) and `<stem>.json` (summary).
pub fn write_cell(dir: &Path, result: &CellResult) -> Result<()> {
    let stem = result.cell.stem();
    let csv = fs::File::create(dir.join(format!("{stem}.csv")))?;
    result.metrics.write_csv(std::io::BufWriter::new(csv))?;
    let mut json = serde_json::to_string_pretty(&result.summary)?;
    json.push('\n');
    fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Validates, runs the whole grid and writes one CSV and one JSON per cell
/// into `config.out`.
pub fn run_experiment(config: ExperimentConfig) -> Result<Vec<CellResult>> {
    let plan = ExperimentPlan::new(config)?;
    let dir = plan.config.out.clone();
    fs::create_dir_all(&dir)?;
    let results = plan.run_all()?;
    for r in &results {
        write_cell(&dir, r)?;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            out = "runs"
            [dataset]
            name = "bars_stripes"
            n_train = 200
            [train]
            mode = "adaptive"
            shots = 1000
            steps = 5
            batch = 64
            [grid]
            eps = [0.1, 0.5, 1.0]
            shots = [1000, 1e4, "inf"]
            "#,
        )
        .unwrap();
        assert_eq!(c.dataset.n_train, 200);
        assert_eq!(c.dataset.n_test, 500);
        assert_eq!(c.train.mode, Mode::Adaptive);
        assert_eq!(c.train.lr, 0.2);
        assert_eq!(c.grid.shots, vec![Shots::Finite(1000), Shots::Finite(10_000), Shots::Infinite]);
        assert_eq!(c.cells().len(), 9);
        assert_eq!(c.out, PathBuf::from("runs"));
    }

    #[test]
    fn config_errors_name_fields() {
        let e = ExperimentConfig::from_toml_str("[train]\nmode = \"sgd\"\n").unwrap_err();
        assert!(e.to_string().contains("sgd"), "{e}");
        let e = ExperimentConfig::from_toml_str("[train]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let mut c = ExperimentConfig::default();
        c.dataset.n_train = 100;
        let e = ExperimentPlan::new(c).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "batch"), "{e}");
    }

    #[test]
    fn stems_are_distinct() {
        let mut c = ExperimentConfig::default();
        c.grid.eps = vec![0.1, 0.5, 1.0];
        c.grid.shots = vec![Shots::Finite(1000), Shots::Finite(10_000), Shots::Finite(100_000), Shots::Infinite];
        let stems: std::collections::BTreeSet<String> = c.cells().iter().map(Cell::stem).collect();
        assert_eq!(stems.len(), 12);
        assert!(stems.contains("qshiftdp_eps0.1_shotsinf_alpha0_seed0"));
    }
}
