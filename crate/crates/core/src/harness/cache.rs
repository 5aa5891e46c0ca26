use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{build_reference, Grid, HarnessError, ReferenceConfig, ReferenceTrajectory, ARTIFACT_VERSION};
use crate::linalg::Vector;
use crate::problems::OdeProblem;

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CachedReference {
    format_version: u32,
    artifact_version: String,
    model: String,
    n: usize,
    config: ReferenceConfig,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    max_substeps_used: usize,
    refined_intervals: usize,
    verification_delta: f64,
}

fn cache_path(dir: &Path, model: &str, n: usize, substeps: usize) -> PathBuf {
    dir.join(format!("{model}_n{n}_m{substeps}_v{ARTIFACT_VERSION}.json"))
}

fn load(path: &Path, grid: &Grid, cfg: &ReferenceConfig) -> Option<ReferenceTrajectory> {
    let text = fs::read_to_string(path).ok()?;
    let c: CachedReference = serde_json::from_str(&text).ok()?;
    let matches = c.format_version == CACHE_FORMAT_VERSION
        && c.artifact_version == ARTIFACT_VERSION
        && c.model == grid.model()
        && c.config == *cfg
        && c.times == grid.points()
        && c.states.len() == grid.n();
    if !matches {
        return None;
    }
    Some(ReferenceTrajectory {
        grid: grid.clone(),
        states: c.states.into_iter().map(Vector::from).collect(),
        substeps: cfg.substeps,
        max_substeps_used: c.max_substeps_used,
        refined_intervals: c.refined_intervals,
        verification_delta: c.verification_delta,
    })
}

fn store(path: &Path, r: &ReferenceTrajectory, cfg: &ReferenceConfig) -> Result<(), HarnessError> {
    let c = CachedReference {
        format_version: CACHE_FORMAT_VERSION,
        artifact_version: ARTIFACT_VERSION.to_string(),
        model: r.grid.model().to_string(),
        n: r.n(),
        config: *cfg,
        times: r.grid.points().to_vec(),
        states: r.states.iter().map(|s| s.as_slice().to_vec()).collect(),
        max_substeps_used: r.max_substeps_used,
        refined_intervals: r.refined_intervals,
        verification_delta: r.verification_delta,
    };
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let text = serde_json::to_string(&c).map_err(|e| HarnessError::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    // Write-then-rename so a concurrent reader never sees half a file.
    let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Returns the cached reference for `(model, n, substeps)` when a matching
/// file exists in `cache_dir`, otherwise builds it and stores it there.
/// The flag is `true` on a cache hit.
pub fn load_or_build_reference(
    p: &OdeProblem,
    grid: &Grid,
    cfg: &ReferenceConfig,
    cache_dir: Option<&Path>,
) -> Result<(ReferenceTrajectory, bool), HarnessError> {
    let Some(dir) = cache_dir else {
        return Ok((build_reference(p, grid, cfg)?, false));
    };
    let path = cache_path(dir, p.name(), grid.n(), cfg.substeps);
    if let Some(r) = load(&path, grid, cfg) {
        return Ok((r, true));
    }
    let r = build_reference(p, grid, cfg)?;
    store(&path, &r, cfg)?;
    Ok((r, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::build_grid;

    #[test]
    fn cache_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = crate::problems::robertson();
        let g = build_grid(&p, 30).unwrap();
        let cfg = ReferenceConfig::with_substeps(8);
        let (built, hit) = load_or_build_reference(&p, &g, &cfg, Some(dir.path())).unwrap();
        assert!(!hit);
        let (loaded, hit) = load_or_build_reference(&p, &g, &cfg, Some(dir.path())).unwrap();
        assert!(hit);
        assert_eq!(built, loaded);

        // A different configuration is a miss.
        let other = ReferenceConfig { tolerance: 1e-9, ..cfg };
        let (_, hit) = load_or_build_reference(&p, &g, &other, Some(dir.path())).unwrap();
        assert!(!hit);
    }

    #[test]
    fn corrupt_cache_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let p = crate::problems::smooth_test();
        let g = build_grid(&p, 4).unwrap();
        let cfg = ReferenceConfig::with_substeps(4);
        fs::write(cache_path(dir.path(), p.name(), 4, 4), "{ not json").unwrap();
        let (_, hit) = load_or_build_reference(&p, &g, &cfg, Some(dir.path())).unwrap();
        assert!(!hit);
        let (_, hit) = load_or_build_reference(&p, &g, &cfg, Some(dir.path())).unwrap();
        assert!(hit);
    }
}
