//! Slow, simple reference computations for cross-checking the fast paths.
//!
//! Nothing here calls the closed forms it is used to validate; only
//! primitive arithmetic and the raw problem data are shared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::meanvar::MeanVarProblem;

pub const MAX_PROJECTION_DIM: usize = 12;
pub const MAX_GRID_DIM: usize = 3;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub fn golden_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Projection onto the simplex by enumerating every support set.
///
/// On a support `S` the constrained minimizer shifts `y_S` uniformly so that
/// it sums to one; the best feasible candidate is the projection.
pub fn qp_projection_oracle(y: &[f64]) -> Result<Vec<f64>> {
    let d = y.len();
    if d == 0 || d > MAX_PROJECTION_DIM {
        return Err(Error::OracleScale { dim: d, max: MAX_PROJECTION_DIM });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let size = mask.count_ones() as f64;
        let sum: f64 = (0..d).filter(|i| mask >> i & 1 == 1).map(|i| y[i]).sum();
        let shift = (sum - 1.0) / size;
        let x: Vec<f64> = (0..d)
            .map(|i| if mask >> i & 1 == 1 { y[i] - shift } else { 0.0 })
            .collect();
        if x.iter().any(|v| *v < -1e-14) {
            continue;
        }
        let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
        let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, x));
        }
    }
    Ok(best.expect("the full support with a uniform shift is always feasible or beaten").1)
}

/// `min_{lambda > xnorm^2} lambda r^2 + lambda / (lambda - xnorm^2) * alpha_val`
/// by golden-section search in `log(lambda - xnorm^2)`.
pub fn lambda_dual_oracle(r: f64, xnorm: f64, alpha_val: f64) -> f64 {
    if r == 0.0 {
        return alpha_val;
    }
    let x2 = xnorm * xnorm;
    let objective = |t: f64| {
        let lambda = x2 + t.exp();
        lambda * r * r + lambda / (lambda - x2) * alpha_val
    };
    // Centre the bracket on the analytic minimizer; the search itself is
    // purely numeric.
    let centre = (xnorm * alpha_val.sqrt() / r).ln();
    golden_minimize(objective, centre - 20.0, centre + 20.0, 1e-12).1
}

/// Worst-case stress expectation of `psi` through the numeric dual.
pub fn v_worst_oracle(problem: &MeanVarProblem, q: f64, x: &[f64], a: f64) -> f64 {
    let gamma = problem.gamma();
    let mu = problem.stress().mean();
    let cov = problem.stress().cov();
    let d = x.len();
    let mut quad = 0.0;
    let mut mean = 0.0;
    for i in 0..d {
        mean += mu[i] * x[i];
        for j in 0..d {
            quad += x[i] * cov[(i, j)] * x[j];
        }
    }
    let shift = mean - (2.0 * a + gamma) / 2.0;
    let alpha_val = quad + shift * shift;
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = problem.ambiguity().r(q);
    lambda_dual_oracle(r, xnorm, alpha_val) - a * gamma - gamma * gamma / 4.0
}

/// Maximizer of `f` on an `n`-point uniform grid.
pub fn dense_grid_max(f: impl Fn(f64) -> f64, interval: Interval, n: usize) -> (f64, f64) {
    if interval.is_degenerate() {
        return (interval.lo, f(interval.lo));
    }
    interval
        .nodes(n)
        .map(|q| (q, f(q)))
        .fold((f64::NAN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
}

/// Rockafellar minimization over a fine `tau` grid followed by golden
/// polishing; independent of the sorted enumeration in the fast path.
pub fn cvar_grid_oracle(losses: &[f64], p: f64) -> f64 {
    let n = losses.len() as f64;
    let f = |tau: f64| tau + losses.iter().map(|l| (l - tau).max(0.0)).sum::<f64>() / (n * (1.0 - p));
    let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return f(lo);
    }
    let points: usize = 4096;
    let step = (hi - lo) / points as f64;
    let (i, _) = (0..=points)
        .map(|i| (i, f(lo + step * i as f64)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = (lo + step * (i + 1) as f64).min(hi);
    golden_minimize(f, a, b, 1e-14 * (1.0 + hi.abs().max(lo.abs()))).1
}

/// Lattice resolution and auxiliary-axis search for [`grid_minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// The simplex lattice is `{k / resolution : sum k = resolution}`.
    pub resolution: usize,
    pub aux: Interval,
    pub aux_points: usize,
    /// Local passes, each halving the lattice spacing.
    pub refinements: usize,
}

impl GridSpec {
    pub fn new(resolution: usize, aux: Interval) -> Self {
        GridSpec { resolution, aux, aux_points: 64, refinements: 1 }
    }

    pub fn refinements(mut self, n: usize) -> Self {
        self.refinements = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub x: Vec<f64>,
    pub aux: f64,
    pub value: f64,
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|k| {
            compositions(total - k, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, k);
                rest
            })
        })
        .collect()
}

/// Best `aux` for fixed `x`: grid scan, then golden polish around the best
/// node (the objective is convex in `aux`).
fn minimize_aux(f: &(dyn Fn(&[f64], f64) -> f64 + Sync), x: &[f64], spec: &GridSpec) -> (f64, f64) {
    let iv = spec.aux;
    if iv.is_degenerate() {
        return (iv.lo, f(x, iv.lo));
    }
    let nodes: Vec<f64> = iv.nodes(spec.aux_points.max(2)).collect();
    let (i, _) = nodes
        .iter()
        .enumerate()
        .map(|(i, &a)| (i, f(x, a)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let lo = nodes[i.saturating_sub(1)];
    let hi = nodes[(i + 1).min(nodes.len() - 1)];
    golden_minimize(|a| f(x, a), lo, hi, 1e-12 * (1.0 + iv.width()))
}

fn best_of(candidates: &[Vec<f64>], f: &(dyn Fn(&[f64], f64) -> f64 + Sync), spec: &GridSpec) -> GridMinimum {
    let evaluated: Vec<(f64, f64)> = candidates.par_iter().map(|x| minimize_aux(f, x, spec)).collect();
    let (i, &(aux, value)) = evaluated
        .iter()
        .enumerate()
        .fold(None::<(usize, &(f64, f64))>, |b, c| match b {
            Some(b) if b.1 .1 <= c.1 .1 => Some(b),
            _ => Some(c),
        })
        .expect("non-empty candidate set");
    GridMinimum { x: candidates[i].clone(), aux, value }
}

/// Exhaustive minimization over a simplex lattice times the auxiliary
/// interval, followed by local passes with halved spacing.
pub fn grid_minimize(
    f: &(dyn Fn(&[f64], f64) -> f64 + Sync),
    d: usize,
    spec: &GridSpec,
) -> Result<GridMinimum> {
    if d == 0 || d > MAX_GRID_DIM {
        return Err(Error::OracleScale { dim: d, max: MAX_GRID_DIM });
    }
    if spec.resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    let n = spec.resolution as f64;
    let lattice: Vec<Vec<f64>> = compositions(spec.resolution, d)
        .into_iter()
        .map(|k| k.into_iter().map(|v| v as f64 / n).collect())
        .collect();
    let mut best = best_of(&lattice, f, spec);

    let offsets: Vec<Vec<i32>> = {
        let mut all = vec![vec![]];
        for _ in 0..d {
            all = all
                .into_iter()
                .flat_map(|v: Vec<i32>| {
                    (-2..=2).map(move |o| {
                        let mut w = v.clone();
                        w.push(o);
                        w
                    })
                })
                .collect();
        }
        all.into_iter().filter(|v| v.iter().sum::<i32>() == 0).collect()
    };
    let mut spacing = 1.0 / n;
    for _ in 0..spec.refinements {
        spacing /= 2.0;
        let local: Vec<Vec<f64>> = offsets
            .iter()
            .map(|o| best.x.iter().zip(o).map(|(x, &k)| x + spacing * k as f64).collect::<Vec<f64>>())
            .filter(|x| x.iter().all(|v| *v >= 0.0))
            .collect();
        let candidate = best_of(&local, f, spec);
        if candidate.value < best.value {
            best = candidate;
        }
    }
    Ok(best)
}

/// Largest deviation of central differences from `grad`, relative to
/// `max(||grad||_inf, 1e-12)`.
pub fn finite_difference_check(f: &dyn Fn(&[f64]) -> f64, grad: &[f64], point: &[f64], h: f64) -> f64 {
    let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_oracle_examples() {
        assert_eq!(qp_projection_oracle(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        let p = qp_projection_oracle(&[0.8, 0.4]).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        assert_eq!(qp_projection_oracle(&[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(qp_projection_oracle(&[0.0; 13]), Err(Error::OracleScale { .. })));
    }

    #[test]
    fn lambda_dual_examples() {
        assert_eq!(lambda_dual_oracle(0.0, 1.0, 0.04), 0.04);
        assert!((lambda_dual_oracle(0.1, 1.0, 0.04) - 0.09).abs() < 1e-12);
    }

    #[test]
    fn grid_minimize_quadratic() {
        let target = [0.3, 0.7];
        let f = |x: &[f64], a: f64| (x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2) + (a - 0.25).powi(2);
        let spec = GridSpec::new(20, Interval::new(-1.0, 1.0));
        let best = grid_minimize(&f, 2, &spec).unwrap();
        assert!((best.x[0] - 0.3).abs() <= 1.0 / 20.0);
        assert!((best.aux - 0.25).abs() < 1e-6);
        let finer = grid_minimize(&f, 2, &GridSpec::new(40, Interval::new(-1.0, 1.0))).unwrap();
        assert!(finer.value <= best.value + 1e-15);
        assert!(grid_minimize(&f, 4, &spec).is_err());
        assert!(grid_minimize(&f, 2, &GridSpec::new(1, spec.aux)).is_err());
    }

    #[test]
    fn lattice_is_feasible() {
        let c = compositions(4, 3);
        assert_eq!(c.len(), 15);
        assert!(c.iter().all(|k| k.iter().sum::<usize>() == 4));
    }

    #[test]
    fn finite_differences_on_quadratic() {
        let f = |z: &[f64]| 3.0 * z[0] * z[0] + z[0] * z[1] - 2.0 * z[1];
        let z = [0.4, -1.2];
        let g = [6.0 * z[0] + z[1], z[0] - 2.0];
        assert!(finite_difference_check(&f, &g, &z, 1e-5) <= 1e-7);
    }

    #[test]
    fn cvar_oracle_examples() {
        assert!((cvar_grid_oracle(&[1.0, 2.0, 3.0, 4.0], 0.5) - 3.5).abs() < 1e-9);
        assert!((cvar_grid_oracle(&[1.0, 2.0, 3.0, 4.0], 0.75) - 4.0).abs() < 1e-9);
    }
}
