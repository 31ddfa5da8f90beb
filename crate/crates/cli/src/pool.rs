//! Order-preserving parallel evaluation of γ grids.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use delay_horizon::spectrum::{Abscissa, GridEvaluator};
use delay_horizon::Result;

pub const WORKERS_ENV: &str = "DELAY_HORIZON_WORKERS";

/// Scoped worker threads pulling grid indices from a shared counter.
/// Results land in their input slot, so output order never depends on
/// scheduling.
#[derive(Debug, Clone, Copy)]
pub struct WorkerPool {
    pub workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    pub fn default_workers() -> usize {
        thread::available_parallelism().map_or(1, |n| n.get())
    }
}

impl GridEvaluator for WorkerPool {
    fn evaluate(&self, gammas: &[f64], f: &(dyn Fn(f64) -> Result<Abscissa> + Sync)) -> Vec<Result<Abscissa>> {
        let slots: Vec<Mutex<Option<Result<Abscissa>>>> = gammas.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        thread::scope(|s| {
            for _ in 0..self.workers.min(gammas.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= gammas.len() {
                        break;
                    }
                    let r = f(gammas[i]);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use delay_horizon::spectrum::Sequential;
    use delay_horizon::C64;

    #[test]
    fn matches_sequential_order() {
        let gammas: Vec<f64> = (0..37).map(|i| i as f64 * 0.1).collect();
        let f = |g: f64| {
            Ok(Abscissa {
                value: -g * g,
                root: C64::new(-g, g),
                order: 32,
                converged: true,
            })
        };
        let par = WorkerPool::new(5).evaluate(&gammas, &f);
        let seq = Sequential.evaluate(&gammas, &f);
        assert_eq!(par, seq);
    }
}
