//! Inner maximization over the mixture weight `q`.
//!
//! A uniform grid locates the best bracket (guarding against several local
//! maxima), then golden-section search refines inside it. Grid radii are
//! cached because the weight interval is fixed for a problem.

use crate::ambiguity::AmbiguitySpec;
use crate::interval::Interval;

pub const GRID_POINTS: usize = 512;
pub const Q_TOLERANCE: f64 = 1e-10;
/// Grid values within this of the best are ties; the smallest `q` wins.
pub const TIE_TOLERANCE: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of the inner maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCase {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct QGrid {
    interval: Interval,
    nodes: Vec<f64>,
    radii: Vec<f64>,
    ambiguity: AmbiguitySpec,
}

impl QGrid {
    pub fn new(ambiguity: &AmbiguitySpec) -> Self {
        Self::with_points(ambiguity, GRID_POINTS)
    }

    pub fn with_points(ambiguity: &AmbiguitySpec, points: usize) -> Self {
        let interval = ambiguity.q_interval();
        let nodes: Vec<f64> = if interval.is_degenerate() {
            vec![interval.lo]
        } else {
            interval.nodes(points).collect()
        };
        let radii = nodes.iter().map(|&q| ambiguity.r(q)).collect();
        QGrid {
            interval,
            nodes,
            radii,
            ambiguity: ambiguity.clone(),
        }
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Maximizes `f(q, r(q))` over the weight interval.
    pub fn maximize(&self, f: impl Fn(f64, f64) -> f64) -> WorstCase {
        if self.nodes.len() == 1 {
            let q = self.nodes[0];
            return WorstCase { q, value: f(q, self.radii[0]) };
        }

        let values: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.radii)
            .map(|(&q, &r)| f(q, r))
            .collect();
        let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let i = values
            .iter()
            .position(|&v| v >= vmax - TIE_TOLERANCE)
            .unwrap_or(0);

        let mut best = WorstCase { q: self.nodes[i], value: values[i] };
        let lo = self.nodes[i.saturating_sub(1)];
        let hi = self.nodes[(i + 1).min(self.nodes.len() - 1)];
        let g = |q: f64| f(q, self.ambiguity.r(q));

        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = g(c);
        let mut fd = g(d);
        let consider = |q: f64, v: f64, best: &mut WorstCase| {
            if v > best.value {
                *best = WorstCase { q, value: v };
            }
        };
        consider(c, fc, &mut best);
        consider(d, fd, &mut best);
        while b - a > Q_TOLERANCE {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = g(c);
                consider(c, fc, &mut best);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = g(d);
                consider(d, fd, &mut best);
            }
        }
        best
    }
}
