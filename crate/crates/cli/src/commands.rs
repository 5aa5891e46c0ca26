//! Subcommand implementations. Each writes its human-readable report to
//! `out` and its artifacts under the configured output directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use expbench_core::harness::{
    build_grid, convergence_study, load_or_build_reference, order_study_setup, run_pairwise, summarize, write_csv,
    write_reference_csv, ConvergenceStudy, ReferenceConfig, ReferenceTrajectory, RunMetadata, ARTIFACT_VERSION,
};
use expbench_core::problems::{GridRule, OdeProblem};
use expbench_core::schemes::classical::{rkf45_count, AdaptiveStats};
use expbench_core::{ConfiguredScheme, Scheme};
use serde::Serialize;

use crate::config::{RunConfig, UsageError};

/// Runs `f` on a pool of `jobs` threads (0 = one per core).
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_json(&cfg.out.join("config.json"), cfg)
}

fn reference_for(cfg: &RunConfig, p: &OdeProblem, n: usize) -> Result<(ReferenceTrajectory, ReferenceConfig, bool)> {
    let grid = build_grid(p, n)?;
    let ref_cfg = ReferenceConfig::with_substeps(cfg.substeps);
    let cache = cfg.cache_dir();
    let (reference, hit) = load_or_build_reference(p, &grid, &ref_cfg, Some(&cache))?;
    Ok((reference, ref_cfg, hit))
}

pub fn list(out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<16}{:<14}order", "scheme", "family")?;
    for s in Scheme::ALL {
        writeln!(out, "{:<16}{:<14}{}", s.name(), s.family().to_string(), s.order())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReferenceInfo<'a> {
    artifact_version: &'a str,
    model: &'a str,
    n: usize,
    grid_rule: GridRule,
    config: ReferenceConfig,
    verification_delta: f64,
    max_substeps_used: usize,
    refined_intervals: usize,
}

pub fn reference(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let p = cfg.problem_or(None)?;
    prepare_out_dir(cfg)?;
    let mut written = Vec::new();
    for n in cfg.grid_sizes(p.name()) {
        let (r, ref_cfg, hit) = with_pool(cfg.jobs, || reference_for(cfg, &p, n))??;
        let stem = format!("reference_{}_n{n}", p.name());
        let csv_path = cfg.out.join(format!("{stem}.csv"));
        let mut w = create_file(&csv_path)?;
        write_reference_csv(&r, &mut w).with_context(|| format!("writing {}", csv_path.display()))?;
        w.flush()?;
        let info = ReferenceInfo {
            artifact_version: ARTIFACT_VERSION,
            model: p.name(),
            n,
            grid_rule: r.grid.rule(),
            config: ref_cfg,
            verification_delta: r.verification_delta,
            max_substeps_used: r.max_substeps_used,
            refined_intervals: r.refined_intervals,
        };
        write_json(&cfg.out.join(format!("{stem}.json")), &info)?;
        writeln!(
            out,
            "{} n={n}: delta {:.3e}, max substeps {}, refined intervals {}{}",
            p.name(),
            r.verification_delta,
            r.max_substeps_used,
            r.refined_intervals,
            if hit { " (cached)" } else { "" }
        )?;
        written.push(csv_path);
    }
    Ok(written)
}

pub fn bench(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let p = cfg.problem_or(None)?;
    let schemes = cfg.schemes()?;
    let opts = cfg.scheme_options();
    prepare_out_dir(cfg)?;
    let mut written = Vec::new();
    for n in cfg.grid_sizes(p.name()) {
        let (records, metadata) = with_pool(cfg.jobs, || -> Result<_> {
            let (r, ref_cfg, _) = reference_for(cfg, &p, n)?;
            let mut records = Vec::new();
            let mut summaries = Vec::new();
            for &s in &schemes {
                let recs = run_pairwise(&p, &r, &ConfiguredScheme::new(s, opts));
                summaries.extend(summarize(&recs));
                records.extend(recs);
            }
            Ok((records, RunMetadata::new(&r, &ref_cfg, opts.newton, opts.sign_mode, summaries)))
        })??;

        let stem = format!("{}_n{n}", p.name());
        let csv_path = cfg.out.join(format!("{stem}.csv"));
        let mut w = create_file(&csv_path)?;
        write_csv(&records, &mut w).with_context(|| format!("writing {}", csv_path.display()))?;
        w.flush()?;
        write_json(&cfg.out.join(format!("{stem}.json")), &metadata)?;

        writeln!(out, "{} n={n} ({} pairs)", p.name(), n - 1)?;
        writeln!(out, "  {:<16}{:>10}{:>14}{:>14}", "scheme", "diverged", "max error", "median error")?;
        for s in &metadata.summaries {
            writeln!(out, "  {:<16}{:>10}{:>14.3e}{:>14.3e}", s.scheme, s.diverged, s.max_error, s.median_error)?;
        }
        written.push(csv_path);
    }
    Ok(written)
}

/// Order study of every selected scheme on a problem with a closed-form
/// solution (the smooth fixture unless `--model` names another).
pub fn convergence(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<ConvergenceStudy>> {
    let p = cfg.problem_or(Some("smooth"))?;
    if !p.has_exact() {
        return Err(UsageError(format!("model `{}` has no closed-form solution for an order study", p.name())).into());
    }
    let opts = cfg.scheme_options();
    let t0 = p.t_span().0;
    let mut studies = Vec::new();
    writeln!(out, "{:<16}{:>8}{:>10}", "scheme", "order", "slope")?;
    for s in cfg.schemes()? {
        let (t_end, h) = order_study_setup(s.order());
        let span = p.clone().with_t_span((t0, t0 + t_end));
        let study = convergence_study(&span, &ConfiguredScheme::new(s, opts), &h).with_context(|| format!("order study of {s}"))?;
        writeln!(out, "{:<16}{:>8}{:>10.3}", s.name(), s.order(), study.slope)?;
        studies.push(study);
    }
    Ok(studies)
}

#[derive(Serialize)]
struct StiffnessReport<'a> {
    model: &'a str,
    rtol: f64,
    atol: f64,
    stats: AdaptiveStats,
    /// How `function_evaluations` is counted.
    counter: &'static str,
}

/// Adaptive explicit integration of a stiff model, to show how many steps
/// stability forces on an explicit method.
pub fn demo_stiffness(cfg: &RunConfig, out: &mut dyn Write) -> Result<AdaptiveStats> {
    let p = cfg.problem_or(Some("vanderpol"))?;
    let (_, stats) = rkf45_count(&p, cfg.rtol, cfg.atol).map_err(|e| anyhow!("rkf45 on {}: {e}", p.name()))?;
    let report = StiffnessReport {
        model: p.name(),
        rtol: cfg.rtol,
        atol: cfg.atol,
        stats,
        counter: "every right-hand side call, including rejected attempts",
    };
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(stats)
}
