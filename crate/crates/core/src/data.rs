//! Datasets and the synthetic generators used by the desk-scale protocol.
//!
//! A [`Dataset`] is the index universe `0..n` that shuffling permutes plus
//! the per-sample payload the objectives consume. Features are stored
//! row-major in one flat buffer.

use crate::error::{Error, Result};
use crate::rng::RandomnessSource;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-sample labels. The variant must match the objective family:
/// real targets for quadratics (unused there), ±1 for logistic regression,
/// class indices for the MLP.
#[derive(Debug, Clone)]
pub enum Labels {
    Real(Vec<f64>),
    Sign(Vec<i8>),
    Class(Vec<usize>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Real(v) => v.len(),
            Labels::Sign(v) => v.len(),
            Labels::Class(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` feature vectors of dimension `d_in` with labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>, // row-major, n * d_in
    labels: Labels,
    n: usize,
    d_in: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Labels) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::InvalidSpec("dataset must be non-empty".into()));
        }
        let d_in = features[0].len();
        if d_in == 0 {
            return Err(Error::InvalidSpec("feature dimension must be positive".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != d_in {
                return Err(Error::InvalidSpec(format!(
                    "feature vector {i} has dimension {}, expected {d_in}",
                    row.len()
                )));
            }
        }
        if labels.len() != n {
            return Err(Error::InvalidSpec(format!(
                "labels length {} does not match n = {n}",
                labels.len()
            )));
        }
        if let Labels::Sign(v) = &labels {
            if v.iter().any(|&y| y != 1 && y != -1) {
                return Err(Error::InvalidSpec("sign labels must be +1 or -1".into()));
            }
        }
        let mut flat = Vec::with_capacity(n * d_in);
        for row in &features {
            flat.extend_from_slice(row);
        }
        Ok(Self {
            features: flat,
            labels,
            n,
            d_in,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.d_in..(i + 1) * self.d_in]
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n })
        }
    }
}

fn standard_normal(rng: &mut RandomnessSource) -> f64 {
    StandardNormal.sample(rng)
}

/// Centers for the quadratic family: `c_i ~ offset·1 + N(0, I_d)`.
/// With `sorted` the centers are ordered by their first coordinate, giving a
/// frozen "as stored on disk" ordering that an identity shuffler never breaks.
pub fn quadratic_centers(
    n: usize,
    d: usize,
    offset: f64,
    sorted: bool,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = RandomnessSource::from_seed(seed);
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| offset + standard_normal(&mut rng)).collect())
        .collect();
    if sorted {
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }
    Dataset::new(rows, Labels::Real(vec![0.0; n]))
}

/// Logistic-regression data from a planted model: `x ~ N(0, I_d)` and
/// `y = +1` with probability `sigmoid(<w_true, x>)`, so classes overlap and
/// the regularized optimum is well inside the parameter space.
pub fn synthetic_logistic(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = RandomnessSource::from_seed(seed);
    let scale = 2.0 / (d as f64).sqrt();
    let w_true: Vec<f64> = (0..d).map(|_| scale * standard_normal(&mut rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let margin: f64 = x.iter().zip(&w_true).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-margin).exp());
        let y: i8 = if rng.random::<f64>() < p { 1 } else { -1 };
        rows.push(x);
        labels.push(y);
    }
    Dataset::new(rows, Labels::Sign(labels))
}

/// Separable logistic-regression data: `x ~ N(0, I_d)`, labeled
/// `y = sign(<w_true, x>)` by a planted teacher of norm `teacher_scale`,
/// keeping only samples whose teacher margin is at least `margin_gap`.
/// With a real gap, per-sample gradients nearly vanish at the regularized
/// optimum and minibatch noise is small there.
pub fn synthetic_logistic_separable(
    n: usize,
    d: usize,
    teacher_scale: f64,
    margin_gap: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = RandomnessSource::from_seed(seed);
    let scale = teacher_scale / (d as f64).sqrt();
    let w_true: Vec<f64> = (0..d).map(|_| scale * standard_normal(&mut rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let margin: f64 = x.iter().zip(&w_true).map(|(a, b)| a * b).sum();
        if margin.abs() < margin_gap {
            continue;
        }
        labels.push(if margin >= 0.0 { 1 } else { -1 });
        rows.push(x);
    }
    Dataset::new(rows, Labels::Sign(labels))
}

/// Two tight clusters at `±separation·e_0` with within-cluster spread,
/// labeled by cluster. Mimics an easy near-interpolating classification
/// problem: per-sample gradients at the regularized optimum are nearly
/// identical, so minibatch noise there scales with `spread`.
pub fn synthetic_logistic_clusters(
    n: usize,
    d: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = RandomnessSource::from_seed(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let y: i8 = if k % 2 == 0 { 1 } else { -1 };
        let mut x: Vec<f64> = (0..d).map(|_| spread * standard_normal(&mut rng)).collect();
        x[0] += f64::from(y) * separation;
        rows.push(x);
        labels.push(y);
    }
    Dataset::new(rows, Labels::Sign(labels))
}

/// Gaussian blobs for the MLP: `classes` clusters with means
/// `separation · e_c` and unit covariance. Samples are stored grouped by
/// class, mirroring datasets that sit class-sorted on disk.
pub fn gaussian_blobs(
    n: usize,
    d: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidSpec("need at least 2 classes".into()));
    }
    if classes > d {
        return Err(Error::InvalidSpec(format!(
            "classes ({classes}) must not exceed feature dimension ({d})"
        )));
    }
    let mut rng = RandomnessSource::from_seed(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let count = n / classes + usize::from(c < n % classes);
        for _ in 0..count {
            let mut x: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
            x[c] += separation;
            rows.push(x);
            labels.push(c);
        }
    }
    Dataset::new(rows, Labels::Class(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_features() {
        let res = Dataset::new(
            vec![vec![1.0, 2.0], vec![3.0]],
            Labels::Real(vec![0.0, 0.0]),
        );
        assert!(res.is_err());
    }

    #[test]
    fn rejects_bad_sign_labels() {
        let res = Dataset::new(vec![vec![1.0]], Labels::Sign(vec![0]));
        assert!(res.is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = synthetic_logistic(20, 3, 5).unwrap();
        let b = synthetic_logistic(20, 3, 5).unwrap();
        assert_eq!(a.feature(7), b.feature(7));
    }

    #[test]
    fn blobs_cover_all_classes() {
        let data = gaussian_blobs(10, 4, 3, 2.0, 1).unwrap();
        assert_eq!(data.n(), 10);
        let Labels::Class(labels) = data.labels() else {
            panic!("expected class labels")
        };
        for c in 0..3 {
            assert!(labels.contains(&c));
        }
    }

    #[test]
    fn sorted_centers_are_monotone() {
        let data = quadratic_centers(50, 3, 2.0, true, 9).unwrap();
        for i in 1..50 {
            assert!(data.feature(i - 1)[0] <= data.feature(i)[0]);
        }
    }
}
