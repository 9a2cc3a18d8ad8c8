use serde::{Deserialize, Serialize};

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Interval::new(-half_width, half_width)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn intersect(&self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval::new(lo, hi))
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    /// `min(max(v, lo), hi)`: the Euclidean projection onto the interval.
    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    /// `n >= 2` evenly spaced nodes including both endpoints.
    pub fn nodes(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        assert!(n >= 2);
        let step = self.width() / (n - 1) as f64;
        (0..n).map(move |i| if i + 1 == n { self.hi } else { self.lo + step * i as f64 })
    }
}

/// Clamps `v` into `interval`.
pub fn clamp_interval(v: f64, interval: Interval) -> f64 {
    interval.clamp(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_examples() {
        let i = Interval::new(-1.0, 2.0);
        assert_eq!(clamp_interval(0.5, i), 0.5);
        assert_eq!(clamp_interval(3.0, i), 2.0);
        assert_eq!(clamp_interval(-4.0, i), -1.0);
    }

    #[test]
    fn intersections() {
        let i = Interval::new(0.0, 2.0);
        assert_eq!(i.intersect(Interval::new(1.0, 3.0)), Some(Interval::new(1.0, 2.0)));
        assert_eq!(i.intersect(Interval::new(2.0, 3.0)), Some(Interval::new(2.0, 2.0)));
        assert_eq!(i.intersect(Interval::new(2.5, 3.0)), None);
    }

    #[test]
    fn nodes_hit_endpoints() {
        let i = Interval::new(0.1, 0.7);
        let v: Vec<f64> = i.nodes(4).collect();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[3], 0.7);
    }
}
