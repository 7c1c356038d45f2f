//! Worker budget for data-parallel stages.

use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "REWEIGH_THREADS";

/// Thread cap from [`THREADS_ENV`], if set.
pub fn worker_budget() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a pool sized by the worker budget, or on the global pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match worker_budget()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}
