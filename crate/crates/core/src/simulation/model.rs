//! Two-regime generative model: Gaussian normal regime, multivariate-t
//! stress regime.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meancvar::SampleSet;
use crate::meanvar::MomentSpec;

/// How the stress `sigma_ij` rule is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StressMatrixReading {
    /// The rule gives the scale matrix; covariance is `nu / (nu - 2)` times it.
    #[default]
    Scale,
    /// The rule gives the covariance itself.
    Covariance,
}

fn default_q_true() -> f64 {
    0.03
}

fn default_nu() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeModel {
    pub d: usize,
    #[serde(default = "default_q_true")]
    pub q_true: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub stress_matrix: StressMatrixReading,
}

impl RegimeModel {
    pub fn new(d: usize) -> Self {
        RegimeModel {
            d,
            q_true: default_q_true(),
            nu: default_nu(),
            stress_matrix: StressMatrixReading::Scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::ModelInvalid("d must be at least 1".into()));
        }
        if !(self.q_true > 0.0 && self.q_true < 1.0) {
            return Err(Error::ModelInvalid(format!("q_true must lie in (0, 1), got {}", self.q_true)));
        }
        if !(self.nu.is_finite() && self.nu > 2.0) {
            return Err(Error::ModelInvalid(format!(
                "degrees of freedom must exceed 2 for a finite covariance, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// `mu_i = 0.03 i`, `i = 1..d`.
    pub fn normal_mean(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| 0.03 * (i + 1) as f64)
    }

    /// `sigma_ij = 0.02^2 + 0.025^2 i^2 delta_ij`.
    pub fn normal_cov(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| {
            let diag = if i == j { 0.025f64.powi(2) * ((i + 1) as f64).powi(2) } else { 0.0 };
            0.02f64.powi(2) + diag
        })
    }

    /// `mu_i = -0.05 (i + 1)`.
    pub fn stress_location(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| -0.05 * (i + 2) as f64)
    }

    /// `(0.1 + 0.03 i)(0.1 + 0.03 j)(0.7 + 0.3 delta_ij)`.
    pub fn stress_rule(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| {
            let si = 0.1 + 0.03 * (i + 1) as f64;
            let sj = 0.1 + 0.03 * (j + 1) as f64;
            si * sj * if i == j { 1.0 } else { 0.7 }
        })
    }

    fn t_variance_factor(&self) -> f64 {
        self.nu / (self.nu - 2.0)
    }

    /// Scale matrix fed to the t sampler.
    pub fn stress_scale(&self) -> DMatrix<f64> {
        match self.stress_matrix {
            StressMatrixReading::Scale => self.stress_rule(),
            StressMatrixReading::Covariance => self.stress_rule() / self.t_variance_factor(),
        }
    }

    pub fn stress_cov(&self) -> DMatrix<f64> {
        self.stress_scale() * self.t_variance_factor()
    }

    pub fn normal_moments(&self) -> Result<MomentSpec> {
        MomentSpec::new(self.normal_mean(), self.normal_cov())
            .map_err(|e| Error::ModelInvalid(e.to_string()))
    }

    pub fn stress_moments(&self) -> Result<MomentSpec> {
        MomentSpec::new(self.stress_location(), self.stress_cov())
            .map_err(|e| Error::ModelInvalid(e.to_string()))
    }

    /// Moments of `(1 - q) P_N + q P_S`, including the between-regime term.
    pub fn mixture_moments(&self, q: f64) -> Result<MomentSpec> {
        let mn = self.normal_mean();
        let ms = self.stress_location();
        let mean = &mn * (1.0 - q) + &ms * q;
        let diff = &mn - &ms;
        let cov = self.normal_cov() * (1.0 - q) + self.stress_cov() * q + &diff * diff.transpose() * (q * (1.0 - q));
        MomentSpec::new(mean, cov).map_err(|e| Error::ModelInvalid(e.to_string()))
    }
}

/// Labelled return matrix drawn from a [`RegimeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub d: usize,
    /// Row-major `n x d`.
    pub returns: Vec<f64>,
    /// `true` marks a stress-regime row.
    pub labels: Vec<bool>,
    pub seed: u64,
}

impl GeneratedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.returns[i * self.d..(i + 1) * self.d]
    }

    pub fn stress_fraction(&self) -> f64 {
        self.labels.iter().filter(|l| **l).count() as f64 / self.len().max(1) as f64
    }

    fn rows_where(&self, stress: bool) -> Vec<f64> {
        (0..self.len())
            .filter(|&i| self.labels[i] == stress)
            .flat_map(|i| self.row(i).iter().copied())
            .collect()
    }

    /// Rows of one regime; `None` when the regime has no rows.
    pub fn regime(&self, stress: bool) -> Option<SampleSet> {
        let rows = self.rows_where(stress);
        SampleSet::from_flat(self.d, rows).ok()
    }

    pub fn regime_count(&self, stress: bool) -> usize {
        self.labels.iter().filter(|l| **l == stress).count()
    }

    pub fn pooled(&self) -> SampleSet {
        SampleSet::from_flat(self.d, self.returns.clone()).expect("non-empty dataset")
    }
}

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::new(m)
        .map(|c| c.l())
        .ok_or_else(|| Error::ModelInvalid(format!("{what} is not positive definite")))
}

/// Draws `n` labelled rows; fully determined by `seed`.
pub fn sample_mixture(model: &RegimeModel, n: usize, seed: u64) -> Result<GeneratedDataset> {
    model.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let d = model.d;
    let ln = cholesky(model.normal_cov(), "normal covariance")?;
    let ls = cholesky(model.stress_scale(), "stress scale matrix")?;
    let mn = model.normal_mean();
    let ms = model.stress_location();
    let chi = ChiSquared::new(model.nu).map_err(|e| Error::ModelInvalid(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        let stress = rng.random_bool(model.q_true);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if stress {
            let w: f64 = chi.sample(&mut rng);
            let scale = (w / model.nu).sqrt();
            let row = &ms + (&ls * &z) / scale;
            returns.extend(row.iter());
        } else {
            let row = &mn + &ln * &z;
            returns.extend(row.iter());
        }
        labels.push(stress);
    }
    Ok(GeneratedDataset { d, returns, labels, seed })
}

/// Mixes `parts` into `master` with SplitMix64 finalization, so that
/// derived streams are independent of evaluation order.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, p| mix(acc ^ mix(*p)))
}

/// Sample mean and unbiased covariance of the rows of `s`.
pub fn sample_moments(s: &SampleSet) -> Result<MomentSpec> {
    let n = s.len();
    let d = s.dim();
    if n < 2 {
        return Err(Error::invalid("need at least two rows for a covariance"));
    }
    let mean = s.mean();
    let mut cov = DMatrix::zeros(d, d);
    for r in s.rows() {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    MomentSpec::new(DVector::from_vec(mean), cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_start_at_one() {
        let m = RegimeModel::new(3);
        assert!((m.normal_mean()[0] - 0.03).abs() < 1e-15);
        assert!((m.normal_cov()[(1, 1)] - (0.0004 + 0.000625 * 4.0)).abs() < 1e-15);
        assert!((m.stress_location()[0] + 0.1).abs() < 1e-15);
        let s = m.stress_rule();
        let corr = s[(0, 1)] / (s[(0, 0)] * s[(1, 1)]).sqrt();
        assert!((corr - 0.7).abs() < 1e-15);
    }

    #[test]
    fn matrices_positive_definite() {
        for d in 1..=30 {
            let m = RegimeModel::new(d);
            assert!(m.normal_moments().is_ok(), "d={d}");
            assert!(m.stress_moments().is_ok(), "d={d}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = RegimeModel::new(2);
        let a = sample_mixture(&m, 100, 9).unwrap();
        let b = sample_mixture(&m, 100, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_mixture(&m, 100, 10).unwrap();
        assert_ne!(a.returns, c.returns);
    }

    #[test]
    fn seeds_differ_by_part() {
        let a = derive_seed(1, &[0, 1]);
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 1]));
        assert_eq!(a, derive_seed(1, &[0, 1]));
    }

    #[test]
    fn readings_differ_by_t_factor() {
        let mut m = RegimeModel::new(2);
        let scale_cov = m.stress_cov();
        m.stress_matrix = StressMatrixReading::Covariance;
        assert!((m.stress_cov()[(0, 0)] - m.stress_rule()[(0, 0)]).abs() < 1e-15);
        assert!((scale_cov[(0, 0)] / m.stress_cov()[(0, 0)] - 5.0 / 3.0).abs() < 1e-12);
    }
}
