//! Iterate averaging schemes.
//!
//! The iterates are `z_0, ..., z_T`; step `k` (counting from 1) is taken at
//! `z_{k-1}`. Averages run over the points where subgradients were queried,
//! `z_0, ..., z_{T-1}`, as in the rate guarantees; `last_iterate` returns
//! `z_T` and `best_iterate` the `z_k` with the smallest `J`.

use std::sync::OnceLock;

use crate::registry::Registry;

pub trait Averaging: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Normalized weight of `z_index` in a run of `t` steps.
    fn weight(&self, index: usize, t: usize) -> f64;

    /// Return the iterate with the smallest objective instead of the
    /// weighted average.
    fn selects_best(&self) -> bool {
        false
    }
}

#[derive(Debug)]
pub struct LastIterate;

impl Averaging for LastIterate {
    fn name(&self) -> &'static str {
        "last_iterate"
    }

    fn weight(&self, index: usize, t: usize) -> f64 {
        if index == t {
            1.0
        } else {
            0.0
        }
    }
}

/// `argmin_k J(z_k)` over `z_0, ..., z_T`. The objective is evaluated at
/// every iterate anyway, so the selection is free.
#[derive(Debug)]
pub struct BestIterate;

impl Averaging for BestIterate {
    fn name(&self) -> &'static str {
        "best_iterate"
    }

    fn weight(&self, index: usize, t: usize) -> f64 {
        LastIterate.weight(index, t)
    }

    fn selects_best(&self) -> bool {
        true
    }
}

#[derive(Debug)]
pub struct Uniform;

impl Averaging for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn weight(&self, index: usize, t: usize) -> f64 {
        match (t, index < t) {
            (0, _) => 1.0,
            (_, true) => 1.0 / t as f64,
            _ => 0.0,
        }
    }
}

/// Weight `2k / (T (T + 1))` on the point where step `k` is taken.
#[derive(Debug)]
pub struct WeightedK;

impl Averaging for WeightedK {
    fn name(&self) -> &'static str {
        "weighted_k"
    }

    fn weight(&self, index: usize, t: usize) -> f64 {
        match (t, index < t) {
            (0, _) => 1.0,
            (_, true) => 2.0 * (index + 1) as f64 / (t as f64 * (t + 1) as f64),
            _ => 0.0,
        }
    }
}

pub type AveragingBuilder = fn() -> Box<dyn Averaging>;

fn builtin() -> Registry<AveragingBuilder> {
    let mut r = Registry::new("averaging scheme");
    r.register("last_iterate", (|| Box::new(LastIterate)) as AveragingBuilder)
        .register("best_iterate", || Box::new(BestIterate))
        .register("uniform", || Box::new(Uniform))
        .register("weighted_k", || Box::new(WeightedK));
    r
}

pub fn averaging_schemes() -> &'static Registry<AveragingBuilder> {
    static REGISTRY: OnceLock<Registry<AveragingBuilder>> = OnceLock::new();
    REGISTRY.get_or_init(builtin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for name in ["last_iterate", "best_iterate", "uniform", "weighted_k"] {
            let a = (averaging_schemes().get(name).unwrap())();
            for t in [0, 1, 2, 7, 100] {
                let s: f64 = (0..=t).map(|i| a.weight(i, t)).sum();
                assert!((s - 1.0).abs() < 1e-12, "{name} t={t}: {s}");
            }
        }
    }

    #[test]
    fn weighted_k_example() {
        let w = WeightedK;
        assert_eq!(w.weight(0, 3), 2.0 / 12.0);
        assert_eq!(w.weight(2, 3), 6.0 / 12.0);
        assert_eq!(w.weight(3, 3), 0.0);
    }
}
