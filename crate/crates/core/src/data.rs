//! Dataset I/O and generation: LIBSVM text, global normalization to unit
//! row norm, the Gaussian synthetic generator, train/test splits, and the
//! dataset cache file (`n d scale` header followed by canonical LIBSVM lines).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::rng::{Stream, StreamRng};

/// One parsed LIBSVM line. Labels are already mapped to ±1 and feature
/// indices converted to 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct RawExample {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedLibsvm {
    pub examples: Vec<RawExample>,
    /// Human-readable notes, e.g. `0` labels remapped to `−1`.
    pub warnings: Vec<String>,
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...`, 1-based strictly
/// increasing indices, `#` comments, blank lines skipped.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<ParsedLibsvm> {
    let mut out = ParsedLibsvm::default();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if let Some(ex) = parse_line(&line, lineno + 1, &mut out.warnings)? {
            out.examples.push(ex);
        }
    }
    Ok(out)
}

pub fn parse_libsvm_str(text: &str) -> Result<ParsedLibsvm> {
    parse_libsvm(text.as_bytes())
}

fn parse_line(line: &str, lineno: usize, warnings: &mut Vec<String>) -> Result<Option<RawExample>> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = content.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let perr = |msg: String| Error::Parse { line: lineno, msg };
    let raw_label: f64 = label_tok
        .parse()
        .map_err(|_| perr(format!("invalid label `{label_tok}`")))?;
    let label = if raw_label == 1.0 {
        1.0
    } else if raw_label == -1.0 {
        -1.0
    } else if raw_label == 0.0 {
        let msg = format!("line {lineno}: label 0 remapped to -1");
        warn!("{msg}");
        warnings.push(msg);
        -1.0
    } else {
        return Err(perr(format!("label `{label_tok}` is not one of +1, 1, -1, 0")));
    };
    let mut features = Vec::new();
    let mut prev: Option<usize> = None;
    for tok in tokens {
        let (idx_s, val_s) = tok
            .split_once(':')
            .ok_or_else(|| perr(format!("token `{tok}` is not of the form index:value")))?;
        let idx: usize = idx_s
            .parse()
            .map_err(|_| perr(format!("invalid feature index `{idx_s}`")))?;
        if idx == 0 {
            return Err(perr("feature indices are 1-based; got 0".into()));
        }
        let val: f64 = val_s
            .parse()
            .map_err(|_| perr(format!("invalid feature value `{val_s}`")))?;
        if !val.is_finite() {
            return Err(perr(format!("non-finite feature value `{val_s}`")));
        }
        let idx = idx - 1;
        if prev.is_some_and(|p| p >= idx) {
            return Err(perr(format!("feature index {} is not strictly increasing", idx + 1)));
        }
        prev = Some(idx);
        features.push((idx, val));
    }
    Ok(Some(RawExample { label, features }))
}

/// Shortest decimal text that parses back to the same `f64`.
pub(crate) fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Canonical LIBSVM line for one example (no trailing newline).
pub fn format_example(label: f64, features: impl IntoIterator<Item = (usize, f64)>) -> String {
    let mut s = String::from(if label > 0.0 { "+1" } else { "-1" });
    for (j, v) in features {
        s.push(' ');
        s.push_str(&(j + 1).to_string());
        s.push(':');
        s.push_str(&format_value(v));
    }
    s
}

pub fn serialize_libsvm(examples: &[RawExample]) -> String {
    let mut s = String::new();
    for ex in examples {
        s.push_str(&format_example(ex.label, ex.features.iter().copied()));
        s.push('\n');
    }
    s
}

/// Builds a dataset with `d = 1 + max index` and rescales every row by the
/// single factor `1 / max(1, maxᵢ ‖xᵢ‖)`.
pub fn normalize(examples: &[RawExample]) -> Result<Dataset> {
    normalize_to_dim(examples, 0)
}

/// As [`normalize`] with `d` at least `min_d` (for test sets that must share
/// the training dimension).
pub fn normalize_to_dim(examples: &[RawExample], min_d: usize) -> Result<Dataset> {
    if examples.is_empty() {
        return Err(Error::Domain("cannot normalize an empty example list".into()));
    }
    let d = examples
        .iter()
        .filter_map(|e| e.features.last().map(|&(j, _)| j + 1))
        .max()
        .unwrap_or(0)
        .max(min_d);
    let rows: Vec<Vec<(usize, f64)>> = examples.iter().map(|e| e.features.clone()).collect();
    let labels: Vec<f64> = examples.iter().map(|e| e.label).collect();
    let ds = Dataset::from_rows(&rows, &labels, d, 1.0)?;
    Ok(normalize_dataset(ds))
}

/// Applies the global unit-norm scaling to an existing dataset. Idempotent.
pub fn normalize_dataset(mut ds: Dataset) -> Dataset {
    let factor = 1.0 / ds.max_row_norm().max(1.0);
    if factor != 1.0 {
        ds.rescale(factor);
    }
    // rounding can leave a row a hair above 1
    if ds.max_row_norm() > 1.0 {
        let f = 1.0 / ds.max_row_norm();
        ds.rescale(f);
    }
    assert!(ds.max_row_norm() <= 1.0 + 1e-12);
    ds
}

/// Gaussian synthetic data: `β* ~ N(0, I)`, `xᵢ ~ N(0, I)`,
/// `yᵢ = sign(⟨xᵢ, β*⟩ + εᵢ)` with scalar `εᵢ ~ N(0, noise_var)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub noise_var: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        SynthSpec {
            n,
            d,
            noise_var: 0.2,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Domain("synthetic data needs n >= 1 and d >= 1".into()));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::Domain("noise variance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Returns the normalized dataset and the generating coefficient vector.
pub fn synth_generate(spec: &SynthSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let mut rng = StreamRng::new(spec.seed, Stream::Synth);
    let beta: Vec<f64> = (0..spec.d).map(|_| rng.standard_normal()).collect();
    let ds = synth_with_beta(spec, &beta, &mut rng)?;
    Ok((ds, beta))
}

/// Same generator with a caller-supplied `β*`.
pub fn synth_generate_with_beta(spec: &SynthSpec, beta: &[f64]) -> Result<Dataset> {
    spec.validate()?;
    if beta.len() != spec.d {
        return Err(Error::Shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            spec.d
        )));
    }
    let mut rng = StreamRng::new(spec.seed, Stream::Synth);
    synth_with_beta(spec, beta, &mut rng)
}

fn synth_with_beta(spec: &SynthSpec, beta: &[f64], rng: &mut StreamRng) -> Result<Dataset> {
    let sd = spec.noise_var.sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.d).map(|_| rng.standard_normal()).collect();
        let eps = sd * rng.standard_normal();
        let margin: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + eps;
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
        rows.push(x.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect::<Vec<_>>());
    }
    let ds = Dataset::from_rows(&rows, &labels, spec.d, 1.0)?;
    Ok(normalize_dataset(ds))
}

/// Seeded shuffle, then the first `round(test_fraction · n)` shuffled rows
/// become the test set. Both parts keep the parent's scale.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Domain(format!("test fraction {test_fraction} not in [0, 1]")));
    }
    let mut rng = StreamRng::new(seed, Stream::Split);
    let perm = rng.permutation(ds.n());
    let n_test = (test_fraction * ds.n() as f64).round() as usize;
    let (test_idx, train_idx) = perm.split_at(n_test);
    Ok((ds.subset(train_idx), ds.subset(test_idx)))
}

/// Writes the dataset cache format.
pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {:.16e}", ds.n(), ds.d(), ds.scale())?;
    for i in 0..ds.n() {
        writeln!(w, "{}", format_example(ds.label(i), ds.row_pairs(i)))?;
    }
    Ok(())
}

/// Reads the dataset cache format. Rows are taken as stored.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (n, d, scale) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 0,
                msg: "missing header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        break parse_header(&line).ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected header `n d scale`, got `{line}`"),
        })?;
    };
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, line) in lines {
        if let Some(ex) = parse_line(&line?, i + 1, &mut warnings)? {
            labels.push(ex.label);
            rows.push(ex.features);
        }
    }
    if rows.len() != n {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header announces {n} rows, found {}", rows.len()),
        });
    }
    Dataset::from_rows(&rows, &labels, d, scale)
}

fn parse_header(line: &str) -> Option<(usize, usize, f64)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 3 || toks.iter().any(|t| t.contains(':')) {
        return None;
    }
    Some((toks[0].parse().ok()?, toks[1].parse().ok()?, toks[2].parse().ok()?))
}

/// Loads either a dataset cache file or raw LIBSVM text (normalized on load).
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if parse_header(first).is_some() {
        read_dataset(text.as_bytes())
    } else {
        normalize(&parse_libsvm_str(&text)?.examples)
    }
}

/// Writes the cache file atomically (temp file + rename).
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf)?;
    crate::util::write_atomic(path, &buf)
}
