//! Datasets: Bars & Stripes, Binary Blobs and a downscaled-MNIST CSV loader.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Labelled inputs plus a record of how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    pub provenance: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, inputs: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: labels.len(),
            });
        }
        let width = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::invalid(format!("label {y} outside 0..{n_classes}")));
        }
        Ok(Self {
            name: name.into(),
            inputs,
            labels,
            n_classes,
            provenance: BTreeMap::new(),
        })
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> (&[f64], usize) {
        (&self.inputs[i], self.labels[i])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Same labels with replaced inputs (used by input-perturbation baselines).
    pub fn with_inputs(&self, inputs: Vec<Vec<f64>>) -> Result<Self> {
        let mut d = Dataset::new(self.name.clone(), inputs, self.labels.clone(), self.n_classes)?;
        d.provenance = self.provenance.clone();
        Ok(d)
    }
}

/// Grid shape for Bars & Stripes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarsStripesOptions {
    pub rows: usize,
    pub cols: usize,
    /// Keep all-0 / all-1 grids, which fit both classes.
    pub include_uniform: bool,
}

impl Default for BarsStripesOptions {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            include_uniform: false,
        }
    }
}

/// Class of a flattened (row-major) binary grid: 0 for bars (rows constant),
/// 1 for stripes (columns constant). `None` for neither, or for uniform grids.
pub fn bars_stripes_class(grid: &[f64], rows: usize, cols: usize) -> Option<usize> {
    let at = |r: usize, c: usize| grid[r * cols + c];
    let bars = (0..rows).all(|r| (0..cols).all(|c| at(r, c) == at(r, 0)));
    let stripes = (0..cols).all(|c| (0..rows).all(|r| at(r, c) == at(0, c)));
    match (bars, stripes) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Balanced Bars & Stripes: labels are an exact half/half split in shuffled
/// order; each grid draws its row (or column) bits uniformly.
pub fn gen_bars_stripes(n_samples: usize, opts: BarsStripesOptions, stream: Stream) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::invalid("Bars & Stripes needs at least 2 samples"));
    }
    let (rows, cols) = (opts.rows, opts.cols);
    if rows < 2 || cols < 2 {
        return Err(Error::invalid("grid must be at least 2x2"));
    }
    let mut rng = stream.rng();
    let mut labels: Vec<usize> = (0..n_samples).map(|i| usize::from(i >= n_samples / 2)).collect();
    labels.shuffle(&mut rng);
    let mut inputs = Vec::with_capacity(n_samples);
    for &y in &labels {
        let grid = loop {
            let len = if y == 0 { rows } else { cols };
            let bits: Vec<bool> = (0..len).map(|_| rng.random()).collect();
            let uniform = bits.iter().all(|&b| b == bits[0]);
            if uniform && !opts.include_uniform {
                continue;
            }
            let grid: Vec<f64> = (0..rows * cols)
                .map(|i| {
                    let b = if y == 0 { bits[i / cols] } else { bits[i % cols] };
                    f64::from(u8::from(b))
                })
                .collect();
            break grid;
        };
        inputs.push(grid);
    }
    Ok(Dataset::new("bars_stripes", inputs, labels, 2)?
        .with("seed", stream.key())
        .with("rows", rows)
        .with("cols", cols)
        .with("include_uniform", opts.include_uniform))
}

/// The eight fixed 16-bit prototypes: bit `i` of prototype `a` is the parity
/// of `(a + 1) & i`. Distinct prototypes differ in exactly 8 bits.
pub fn blob_prototypes() -> [[u8; 16]; 8] {
    let mut p = [[0u8; 16]; 8];
    for (a, row) in p.iter_mut().enumerate() {
        for (i, bit) in row.iter_mut().enumerate() {
            *bit = (((a + 1) & i).count_ones() % 2) as u8;
        }
    }
    p
}

/// Binary Blobs: prototypes `0..n_classes` with i.i.d. bit flips. All-zero
/// strings cannot be amplitude-encoded and are redrawn.
pub fn gen_binary_blobs(n_samples: usize, flip_prob: f64, n_classes: usize, stream: Stream) -> Result<Dataset> {
    if !(0.0..1.0).contains(&flip_prob) {
        return Err(Error::invalid(format!("flip probability {flip_prob} outside [0,1)")));
    }
    if !(2..=8).contains(&n_classes) {
        return Err(Error::invalid("Binary Blobs supports 2 to 8 classes"));
    }
    if n_samples < n_classes {
        return Err(Error::invalid("fewer samples than classes"));
    }
    let protos = blob_prototypes();
    let mut rng = stream.rng();
    let mut labels: Vec<usize> = (0..n_samples).map(|i| i * n_classes / n_samples).collect();
    labels.shuffle(&mut rng);
    let mut inputs = Vec::with_capacity(n_samples);
    for &y in &labels {
        let x = loop {
            let x: Vec<f64> = protos[y]
                .iter()
                .map(|&b| {
                    let flip = rng.random::<f64>() < flip_prob;
                    f64::from(b ^ u8::from(flip))
                })
                .collect();
            if x.iter().any(|&v| v != 0.0) {
                break x;
            }
        };
        inputs.push(x);
    }
    Ok(Dataset::new("binary_blobs", inputs, labels, n_classes)?
        .with("seed", stream.key())
        .with("flip_prob", flip_prob))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

/// Reads `16 features in [0,1], label` rows. A non-numeric first row is
/// treated as a header. Labels are mapped to `0, 1` in sorted order.
pub fn load_downscaled_mnist(path: impl AsRef<Path>) -> Result<Dataset> {
    const WIDTH: usize = 16;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut rows: Vec<(Vec<f64>, i64)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != WIDTH + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {WIDTH} features and a label, found {} fields", rec.len()),
            ));
        }
        let mut x = Vec::with_capacity(WIDTH);
        for (c, field) in rec.iter().take(WIDTH).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("column {}: not a number: {field:?}", c + 1)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_err(path, line, format!("column {}: value {v} outside [0,1]", c + 1)));
            }
            x.push(v);
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(parse_err(path, line, "all-zero row cannot be amplitude-encoded"));
        }
        let label_field = &rec[WIDTH];
        let label: i64 = label_field
            .parse()
            .map_err(|_| parse_err(path, line, format!("label is not an integer: {label_field:?}")))?;
        rows.push((x, label));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    let classes: BTreeSet<i64> = rows.iter().map(|r| r.1).collect();
    if classes.len() > 2 {
        return Err(parse_err(path, 0, format!("expected at most two classes, found {}", classes.len())));
    }
    let index: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let names = classes.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
    let (inputs, labels): (Vec<_>, Vec<_>) = rows.into_iter().map(|(x, y)| (x, index[&y])).unzip();
    Ok(Dataset::new("mnist_downscaled", inputs, labels, 2)?
        .with("path", path.display())
        .with("source_labels", names))
}
