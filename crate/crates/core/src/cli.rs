//! Command implementations behind the `drsl` binary. Each command writes its
//! human-readable output to the supplied writer.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, SolverConfig};
use crate::data::{save_dataset, synth_generate, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{reference_cached, robust_loss_w, test_metrics, ReferenceCache, ReferenceOptions, ReferenceSolution};
use crate::model::{Dataset, Iterate, ProblemParams};
use crate::solvers::{
    extragda_run, extrasgda_run, gda_run, sevr_run, sg_run, sgda_run, spprr_run, ssg_run, Algo, EvalHooks, SolverTrace,
};
use crate::util::{fmt17, write_atomic};

pub const CSV_HEADER: &str = "algo,seed,epoch,data_passes,component_evals,subopt,gap,wall_ms";

/// Threshold of the passes-to-threshold column in comparison summaries.
pub const SUMMARY_THRESHOLD: f64 = 1e-3;

/// Generates a synthetic dataset, writes it in the cache format and prints
/// `n d scale`.
pub fn cmd_datagen(spec: &SynthSpec, out: &Path, w: &mut dyn Write) -> Result<Dataset> {
    let (ds, _) = synth_generate(spec)?;
    save_dataset(&ds, out)?;
    writeln!(w, "{} {} {}", ds.n(), ds.d(), fmt17(ds.scale()))?;
    Ok(ds)
}

/// Loads or computes the reference and prints `f_star`, `tolerance` and
/// `converged`, preceded by `cached` on a cache hit.
pub fn cmd_reference(
    ds: &Dataset,
    p: &ProblemParams,
    opts: &ReferenceOptions,
    cache: &ReferenceCache,
    w: &mut dyn Write,
) -> Result<ReferenceSolution> {
    let (r, hit) = reference_cached(cache, ds, p, opts)?;
    if hit {
        writeln!(w, "cached")?;
    }
    writeln!(w, "f_star {}", fmt17(r.f_star))?;
    writeln!(w, "tolerance {}", fmt17(r.tolerance))?;
    writeln!(w, "converged {}", r.converged)?;
    Ok(r)
}

/// Runs the configured solver against a precomputed reference.
pub fn run_solver(cfg: &ExperimentConfig, ds: &Dataset, reference: &ReferenceSolution) -> Result<SolverTrace> {
    let hooks = EvalHooks {
        reference: Some(reference),
        max_passes: cfg.max_passes,
        initial: Some(Iterate::initial(ds, &cfg.params, cfg.gamma_init)),
    };
    let p = &cfg.params;
    match &cfg.solver {
        SolverConfig::Sevr(c) => sevr_run(ds, p, c, &hooks),
        SolverConfig::Spprr(c) => spprr_run(ds, p, c, &hooks),
        SolverConfig::Baseline(algo, c) => {
            let run = match algo {
                Algo::Gda => gda_run,
                Algo::ExtraGda => extragda_run,
                Algo::Sgda => sgda_run,
                Algo::ExtraSgda => extrasgda_run,
                Algo::Sg => sg_run,
                Algo::Ssg => ssg_run,
                Algo::Sevr | Algo::Spprr => unreachable!("handled above"),
            };
            run(ds, p, c, &hooks)
        }
    }
}

/// CSV rows (with header) for a set of traces.
pub fn format_trace_csv<'a>(traces: impl IntoIterator<Item = &'a SolverTrace>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in traces {
        for r in &t.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.algo,
                t.seed,
                r.epoch,
                fmt17(r.data_passes),
                r.component_evals,
                fmt17(r.subopt),
                fmt17(r.gap.unwrap_or(f64::NAN)),
                fmt17(r.wall_ms),
            ));
        }
    }
    out
}

fn write_output(path: Option<&Path>, text: &str, w: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => Ok(w.write_all(text.as_bytes())?),
    }
}

/// The point a method reports: the averaged output for SPPRR and the
/// subgradient methods, the raw iterate otherwise.
pub fn reported_iterate(trace: &SolverTrace) -> &Iterate {
    match trace.algo {
        Algo::Spprr | Algo::Sg | Algo::Ssg => &trace.averaged_iterate,
        _ => &trace.final_iterate,
    }
}

fn write_beta(path: &Path, beta: &[f64]) -> Result<()> {
    let text: String = beta.iter().map(|v| fmt17(*v) + "\n").collect();
    write_atomic(path, text.as_bytes())
}

/// Executes one experiment. The trace goes to the configured file, or to
/// `w` when none is set.
pub fn cmd_run(cfg: &ExperimentConfig, cache: &ReferenceCache, w: &mut dyn Write) -> Result<SolverTrace> {
    let ds = cfg.dataset.load()?;
    let (reference, _) = reference_cached(cache, &ds, &cfg.params, &cfg.reference)?;
    let trace = run_solver(cfg, &ds, &reference)?;
    write_output(cfg.trace.as_deref(), &format_trace_csv([&trace]), w)?;
    if let Some(path) = &cfg.iterate {
        write_beta(path, &reported_iterate(&trace).beta)?;
    }
    Ok(trace)
}

/// One line of the comparison summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub algo: Algo,
    pub passes_to_threshold: Option<f64>,
    pub final_subopt: f64,
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,algo,passes_to_1e-3,final_subopt\n");
    for r in rows {
        let passes = r.passes_to_threshold.map(fmt17).unwrap_or_else(|| "NaN".into());
        out.push_str(&format!("{},{},{},{}\n", r.name, r.algo, passes, fmt17(r.final_subopt)));
    }
    out
}

/// Config files of a comparison directory: `*.cfg`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg") && p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no *.cfg files in {}", dir.display())));
    }
    Ok(files)
}

/// Runs every config in `dir`, one thread per config, and writes the merged
/// trace CSV to `out`. Returns the summary rows in file order.
pub fn cmd_compare(
    dir: &Path,
    overrides: &[String],
    out: &Path,
    summary: Option<&Path>,
    cache: &ReferenceCache,
    w: &mut dyn Write,
) -> Result<Vec<SummaryRow>> {
    let files = config_files(dir)?;
    let mut jobs = Vec::with_capacity(files.len());
    for f in &files {
        let cfg = ExperimentConfig::load(f, overrides)?;
        let ds = cfg.dataset.load()?;
        // sequential so that configs sharing a dataset hit the cache
        let (reference, _) = reference_cached(cache, &ds, &cfg.params, &cfg.reference)?;
        let name = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        jobs.push((name, cfg, ds, reference));
    }
    let results: Vec<Result<SolverTrace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(_, cfg, ds, r)| scope.spawn(move || run_solver(cfg, ds, r)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::State("solver thread panicked".into())))
            })
            .collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_atomic(out, format_trace_csv(&traces).as_bytes())?;
    let rows: Vec<SummaryRow> = jobs
        .iter()
        .zip(&traces)
        .map(|((name, ..), t)| SummaryRow {
            name: name.clone(),
            algo: t.algo,
            passes_to_threshold: t.passes_to(SUMMARY_THRESHOLD),
            final_subopt: t.last().subopt,
        })
        .collect();
    let text = format_summary(&rows);
    if let Some(path) = summary {
        write_atomic(path, text.as_bytes())?;
    }
    w.write_all(text.as_bytes())?;
    Ok(rows)
}

/// Reads a `β` file written by `run` (one value per line).
pub fn read_beta(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad coefficient `{l}`"),
            })
        })
        .collect()
}

/// Prints `delta,robust_loss,argmin_lambda` for each radius, followed by
/// the error rate and mean loss on the unperturbed data.
pub fn cmd_eval_robust(
    beta: &[f64],
    ds: &Dataset,
    deltas: &[f64],
    p: &ProblemParams,
    w: &mut dyn Write,
) -> Result<Vec<f64>> {
    if beta.len() != ds.d() {
        return Err(Error::Shape(format!(
            "beta has {} entries, dataset has d = {}",
            beta.len(),
            ds.d()
        )));
    }
    writeln!(w, "delta,robust_loss,argmin_lambda")?;
    let mut values = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let r = robust_loss_w(beta, ds, delta, p)?;
        writeln!(w, "{},{},{}", fmt17(delta), fmt17(r.value), fmt17(r.argmin_lambda))?;
        values.push(r.value);
    }
    let (err, loss) = test_metrics(beta, ds, p)?;
    writeln!(w, "error_rate {}", fmt17(err))?;
    writeln!(w, "mean_loss {}", fmt17(loss))?;
    Ok(values)
}
