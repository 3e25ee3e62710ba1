//! Execution context: hierarchical random streams and the work-unit pool.
//!
//! Every random decision in the crate draws from a stream addressed by a
//! path of `(label, index)` pairs below a master seed. Work units at the
//! same depth get sibling paths, so results do not depend on how many
//! threads execute them or in which order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The random number generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha20Rng;

/// A counter-based random stream keyed by `(master seed, path)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<(String, u64)>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, path: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    pub fn child(&self, label: &str, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push((label.to_string(), index));
        RngStream { seed: self.seed, path }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        for (label, index) in &self.path {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
            hasher.update(index.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha20Rng::from_seed(key)
    }
}

/// Stream for a hierarchical path below `master_seed`.
pub fn rng_stream(master_seed: u64, path: &[(&str, u64)]) -> StreamRng {
    path.iter()
        .fold(RngStream::new(master_seed), |s, (label, i)| s.child(label, *i))
        .rng()
}

/// Named parallelization levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Benchmark,
    Resample,
    #[serde(rename = "tune")]
    TuneParams,
    #[serde(rename = "featsel")]
    SelectFeatures,
}

impl Level {
    pub fn name(&self) -> &'static str {
        match self {
            Level::Benchmark => "mlr.benchmark",
            Level::Resample => "mlr.resample",
            Level::TuneParams => "mlr.tuneParams",
            Level::SelectFeatures => "mlr.selectFeatures",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" | "mlr.benchmark" => Ok(Level::Benchmark),
            "resample" | "mlr.resample" => Ok(Level::Resample),
            "tune" | "mlr.tuneParams" => Ok(Level::TuneParams),
            "featsel" | "mlr.selectFeatures" => Ok(Level::SelectFeatures),
            other => Err(Error::unknown("parallelization level", other)),
        }
    }
}

struct Pool {
    level: Level,
    workers: usize,
    pool: rayon::ThreadPool,
}

impl fmt::Debug for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pool")
            .field("level", &self.level)
            .field("workers", &self.workers)
            .finish()
    }
}

/// Random stream plus parallel execution settings, threaded through every
/// operation that trains models or draws random numbers.
#[derive(Clone, Debug)]
pub struct Ctx {
    stream: RngStream,
    pool: Option<Arc<Pool>>,
    inside_unit: bool,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx::new(0)
    }
}

impl Ctx {
    pub fn new(seed: u64) -> Self {
        Ctx { stream: RngStream::new(seed), pool: None, inside_unit: false }
    }

    /// Run units of `level` on `workers` threads. `workers <= 1` keeps
    /// everything sequential.
    pub fn with_parallel(mut self, workers: usize, level: Level) -> Result<Self> {
        if workers <= 1 {
            self.pool = None;
            return Ok(self);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
        self.pool = Some(Arc::new(Pool { level, workers, pool }));
        Ok(self)
    }

    pub fn stream(&self) -> &RngStream {
        &self.stream
    }

    pub fn seed(&self) -> u64 {
        self.stream.seed
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.workers)
    }

    pub fn child(&self, label: &str, index: u64) -> Ctx {
        Ctx {
            stream: self.stream.child(label, index),
            pool: self.pool.clone(),
            inside_unit: self.inside_unit,
        }
    }

    pub fn rng(&self) -> StreamRng {
        self.stream.rng()
    }

    /// Evaluate `n` independent units. Unit `i` receives `self.child(label, i)`.
    /// Units run on the pool only when `level` is the configured level and we
    /// are not already inside a parallel unit.
    pub fn map_units<T, F>(&self, level: Level, label: &str, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &Ctx) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) if pool.level == level && !self.inside_unit && n > 1 => {
                pool.pool.install(|| {
                    (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let mut c = self.child(label, i as u64);
                            c.inside_unit = true;
                            f(i, &c)
                        })
                        .collect()
                })
            }
            _ => (0..n).map(|i| f(i, &self.child(label, i as u64))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(mut rng: StreamRng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.random::<u64>()).collect()
    }

    #[test]
    fn same_path_same_stream() {
        let a = draws(rng_stream(7, &[("resample", 2), ("train", 0)]), 50);
        let b = draws(rng_stream(7, &[("resample", 2), ("train", 0)]), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn sibling_paths_differ() {
        let a = draws(rng_stream(7, &[("resample", 1)]), 1000);
        let b = draws(rng_stream(7, &[("resample", 2)]), 1000);
        let collisions = a.iter().zip(&b).filter(|(x, y)| x == y).count();
        assert_eq!(collisions, 0);
        let c = draws(rng_stream(8, &[("resample", 1)]), 1000);
        assert_ne!(a, c);
    }

    #[test]
    fn label_boundaries_are_unambiguous() {
        let a = draws(rng_stream(1, &[("ab", 1), ("c", 2)]), 8);
        let b = draws(rng_stream(1, &[("a", 1), ("bc", 2)]), 8);
        assert_ne!(a, b);
    }

    #[test]
    fn map_units_is_schedule_independent() {
        let run = |workers| {
            let ctx = Ctx::new(3).with_parallel(workers, Level::Resample).unwrap();
            ctx.map_units(Level::Resample, "iter", 16, |i, c| {
                let mut rng = c.rng();
                (i, rng.random::<u32>())
            })
        };
        assert_eq!(run(1), run(4));
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn level_parsing() {
        assert_eq!("tune".parse::<Level>().unwrap(), Level::TuneParams);
        assert_eq!("mlr.benchmark".parse::<Level>().unwrap(), Level::Benchmark);
        assert!("bogus".parse::<Level>().is_err());
    }
}
