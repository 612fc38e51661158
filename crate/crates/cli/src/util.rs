use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use genclus::bundle::RunOptions;
use genclus::driver::GenClusConfig;
use sha2::{Digest, Sha256};

use crate::TuningArgs;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool for 0.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

pub fn apply_tuning(t: &TuningArgs, config: &mut GenClusConfig, options: &mut RunOptions) {
    if let Some(s) = t.seed {
        config.seed = s;
    }
    if let Some(n) = t.threads {
        options.threads = n;
    }
    if let Some(n) = t.outer_iters {
        config.max_outer_iters = n;
    }
    if let Some(n) = t.inner_iters {
        config.em.max_inner_iters = n;
    }
    if let Some(n) = t.restarts {
        config.em.n_restarts = n;
    }
    if let Some(n) = t.probe_steps {
        config.em.restart_probe_steps = n;
    }
    if let Some(s) = t.sigma {
        config.newton.sigma = s;
    }
    if t.warm_theta {
        config.warm_theta = true;
    }
}

pub fn secs(d: std::time::Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}
