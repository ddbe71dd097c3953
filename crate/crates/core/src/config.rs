//! Experiment configuration: flat `key = value` text with `[section]`
//! headers, overridable key by key.
//!
//! ```text
//! [dataset]
//! n = 5000
//! d = 100
//! data_seed = 0
//!
//! [params]
//! delta = 0.1
//! kappa = 1
//!
//! [solver]
//! algo = spprr
//! eta = 0.005
//! epochs = 10
//!
//! [output]
//! trace = spprr.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{load_dataset, synth_generate, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::ReferenceOptions;
use crate::model::{Dataset, GammaInit, LinkFunction, ProblemParams};
use crate::solvers::{Algo, BaselineConfig, SevrConfig, SpprrConfig};

/// Every recognised key, by section. Bare keys are unique across sections.
pub const KEYS: &[(&str, &[&str])] = &[
    ("dataset", &["path", "n", "d", "noise_var", "data_seed"]),
    ("params", &["delta", "kappa", "link", "gamma_init"]),
    (
        "solver",
        &[
            "algo",
            "seed",
            "eta",
            "k0",
            "epochs",
            "batch",
            "fixed_point_m",
            "iters",
            "checkpoint_every_passes",
            "max_passes",
            "reference_tol",
            "reference_budget",
        ],
    ),
    ("output", &["trace", "iterate"]),
];

/// Raw `section.key → value` map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

fn qualify(key: &str) -> Result<String> {
    if let Some((section, name)) = key.split_once('.') {
        let known = KEYS.iter().any(|(s, names)| *s == section && names.contains(&name));
        return if known {
            Ok(key.to_string())
        } else {
            Err(Error::Config(format!("unknown key `{key}`")))
        };
    }
    KEYS.iter()
        .find(|(_, names)| names.contains(&key))
        .map(|(s, _)| format!("{s}.{key}"))
        .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("bad section header `{line}`")))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(at(format!("unknown section `{name}`")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let section = section
                .as_deref()
                .ok_or_else(|| at(format!("key `{key}` outside any section")))?;
            let full = format!("{section}.{key}");
            qualify(&full).map_err(|e| at(e.to_string()))?;
            if map.entries.insert(full, value.to_string()).is_some() {
                return Err(at(format!("duplicate key `{key}`")));
            }
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ConfigMap::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets `key` (bare or `section.key`), replacing any previous value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let full = qualify(key)?;
        self.entries.insert(full, value.trim().to_string());
        Ok(())
    }

    /// Applies `--key value` pairs.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected `--key value`, got `{flag}`")))?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k, v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("missing value for `--{key}`")))?;
                    (key, v.clone())
                }
            };
            self.set(key, &value)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let full = qualify(key).ok()?;
        self.entries.get(&full).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// Dataset cache file or LIBSVM text.
    Path(PathBuf),
    Synthetic(SynthSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Path(p) => load_dataset(p),
            DatasetSource::Synthetic(spec) => Ok(synth_generate(spec)?.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverConfig {
    Sevr(SevrConfig),
    Spprr(SpprrConfig),
    Baseline(Algo, BaselineConfig),
}

impl SolverConfig {
    pub fn algo(&self) -> Algo {
        match self {
            SolverConfig::Sevr(_) => Algo::Sevr,
            SolverConfig::Spprr(_) => Algo::Spprr,
            SolverConfig::Baseline(a, _) => *a,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SolverConfig::Sevr(c) => c.seed,
            SolverConfig::Spprr(c) => c.seed,
            SolverConfig::Baseline(_, c) => c.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub params: ProblemParams,
    pub gamma_init: GammaInit,
    pub solver: SolverConfig,
    pub max_passes: Option<f64>,
    pub reference: ReferenceOptions,
    /// Trace CSV destination; standard output when absent.
    pub trace: Option<PathBuf>,
    /// Where to write the reported `β`, one value per line.
    pub iterate: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let synth_keys = ["n", "d", "noise_var", "data_seed"];
        let dataset = match map.get("path") {
            Some(path) => {
                if let Some(k) = synth_keys.iter().find(|k| map.get(k).is_some()) {
                    return Err(Error::Config(format!("dataset has both `path` and `{k}`")));
                }
                DatasetSource::Path(PathBuf::from(path))
            }
            None => {
                let mut spec = SynthSpec::new(map.or("n", 5000)?, map.or("d", 100)?, map.or("data_seed", 0)?);
                spec.noise_var = map.or("noise_var", spec.noise_var)?;
                DatasetSource::Synthetic(spec)
            }
        };

        let defaults = ProblemParams::default();
        let link: LinkFunction = map.or("link", defaults.link)?;
        let params = ProblemParams::new(map.or("delta", defaults.delta)?, map.or("kappa", defaults.kappa)?, link)?;
        let gamma_init = map.or("gamma_init", GammaInit::default())?;

        let algo: Algo = map
            .get("algo")
            .ok_or_else(|| Error::Config("missing `algo`".into()))?
            .parse()?;
        let seed = map.or("seed", 0u64)?;
        let solver = match algo {
            Algo::Sevr => {
                let d = SevrConfig::default();
                SolverConfig::Sevr(SevrConfig {
                    eta: map.or("eta", d.eta)?,
                    k0: map.or("k0", d.k0)?,
                    epochs: map.or("epochs", d.epochs)?,
                    batch: map.or("batch", d.batch)?,
                    seed,
                    checkpoint_every_passes: map.or("checkpoint_every_passes", d.checkpoint_every_passes)?,
                })
            }
            Algo::Spprr => {
                let d = SpprrConfig::default();
                SolverConfig::Spprr(SpprrConfig {
                    eta: map.or("eta", d.eta)?,
                    epochs: map.or("epochs", d.epochs)?,
                    fixed_point_m: map.or("fixed_point_m", d.fixed_point_m)?,
                    seed,
                    checkpoint_every_passes: map.or("checkpoint_every_passes", d.checkpoint_every_passes)?,
                })
            }
            other => {
                let d = BaselineConfig::default();
                SolverConfig::Baseline(
                    other,
                    BaselineConfig {
                        eta0: map.or("eta", d.eta0)?,
                        iters: map.or("iters", d.iters)?,
                        batch: map.or("batch", d.batch)?,
                        seed,
                        checkpoint_every_passes: map.or("checkpoint_every_passes", d.checkpoint_every_passes)?,
                    },
                )
            }
        };

        let max_passes: Option<f64> = map.parsed("max_passes")?;
        if let Some(m) = max_passes {
            if !(m > 0.0) {
                return Err(Error::Config(format!("max_passes must be positive, got {m}")));
            }
        }
        let rd = ReferenceOptions::default();
        let reference = ReferenceOptions {
            budget: map.or("reference_budget", rd.budget)?,
            tol_target: map.or("reference_tol", rd.tol_target)?,
        };
        Ok(ExperimentConfig {
            dataset,
            params,
            gamma_init,
            solver,
            max_passes,
            reference,
            trace: map.get("trace").map(PathBuf::from),
            iterate: map.get("iterate").map(PathBuf::from),
        })
    }

    /// Reads `path` and applies `overrides` on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut map = ConfigMap::from_file(path)?;
        map.apply_overrides(overrides)?;
        ExperimentConfig::from_map(&map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str =
        "# comment\n[dataset]\nn = 50\nd = 4\n\n[solver]\nalgo = sevr  # trailing\neta = 0.3\nbatch = 8\n";

    #[test]
    fn parses_sections_and_defaults() {
        let cfg = ExperimentConfig::from_map(&ConfigMap::parse(TEXT).unwrap()).unwrap();
        assert_eq!(cfg.dataset, DatasetSource::Synthetic(SynthSpec::new(50, 4, 0)));
        assert_eq!(cfg.params, ProblemParams::default());
        match cfg.solver {
            SolverConfig::Sevr(c) => {
                assert_eq!((c.eta, c.batch, c.k0), (0.3, 8, SevrConfig::default().k0));
            }
            other => panic!("unexpected solver {other:?}"),
        }
    }

    #[test]
    fn overrides_replace_values() {
        let mut map = ConfigMap::parse(TEXT).unwrap();
        map.apply_overrides(&["--eta".into(), "0.7".into(), "--dataset.n=60".into()])
            .unwrap();
        assert_eq!(map.get("eta"), Some("0.7"));
        assert_eq!(map.get("n"), Some("60"));
        assert!(map.apply_overrides(&["--nope".into(), "1".into()]).is_err());
        assert!(map.apply_overrides(&["--eta".into()]).is_err());
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(ConfigMap::parse("n = 5").is_err());
        assert!(ConfigMap::parse("[dataset]\nn 5").is_err());
        assert!(ConfigMap::parse("[nowhere]\n").is_err());
        assert!(ConfigMap::parse("[dataset]\nn = 1\nn = 2").is_err());
        assert!(ConfigMap::parse("[dataset]\nalgo = sevr").is_err());
        let map = ConfigMap::parse("[dataset]\npath = x\nn = 3\n[solver]\nalgo = sgda").unwrap();
        assert!(ExperimentConfig::from_map(&map).is_err());
        let map = ConfigMap::parse("[solver]\nalgo = sgda\neta = fast").unwrap();
        assert!(ExperimentConfig::from_map(&map).is_err());
    }
}
