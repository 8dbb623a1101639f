//! Two-sample Hotelling T² statistics over labeled groups of 3-vectors,
//! with F-based p-values and pairwise test matrices.
//!
//! The statistic compares two mean vectors under a pooled covariance:
//! `T² = (n1·n2/(n1+n2)) · d' S⁻¹ d` with `d` the mean difference and
//! `S = ((n1-1)S1 + (n2-1)S2)/(n1+n2-2)`. Under equal covariances,
//! `T²·(n1+n2-p-1)/((n1+n2-2)p)` follows F(p, n1+n2-p-1), which supplies
//! the p-value. The internal engine works for any dimension, so the
//! one-dimensional case reduces to the squared pooled t statistic.

use std::fmt;
use std::io;
use std::str::FromStr;

use crate::colorimetry::UnitRgb;
use crate::perceptual::{h_map, loglog_map};

pub mod special;

use special::reg_inc_beta;

#[derive(Debug)]
pub enum StatError {
    /// Groups need at least two observations.
    TooFewObservations { label: String, n: usize },
    /// A coordinate is NaN or infinite.
    NonFinite { label: String, index: usize },
    /// Pooled covariance is singular and no fallback was requested.
    SingularCovariance,
    /// n1 + n2 - p - 1 must be positive to form the F statistic.
    InsufficientSample { n1: usize, n2: usize, dim: usize },
    /// Degrees of freedom must be positive.
    DegreesOfFreedom { d1: u64, d2: u64 },
    /// The F statistic must be finite and nonnegative.
    BadStatistic(f64),
    /// Pairwise testing needs at least two groups.
    TooFewGroups(usize),
    /// Observations must share one dimension.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for StatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatError::TooFewObservations { label, n } => {
                write!(f, "group {label:?} has {n} observations, need at least 2")
            }
            StatError::NonFinite { label, index } => {
                write!(
                    f,
                    "group {label:?} observation {index} has a non-finite entry"
                )
            }
            StatError::SingularCovariance => write!(f, "pooled covariance is singular"),
            StatError::InsufficientSample { n1, n2, dim } => write!(
                f,
                "samples too small for dimension {dim}: n1 = {n1}, n2 = {n2}"
            ),
            StatError::DegreesOfFreedom { d1, d2 } => {
                write!(f, "degrees of freedom must be positive, got ({d1}, {d2})")
            }
            StatError::BadStatistic(v) => write!(f, "statistic {v} must be finite and >= 0"),
            StatError::TooFewGroups(n) => write!(f, "need at least 2 groups, got {n}"),
            StatError::DimensionMismatch { expected, got } => {
                write!(f, "expected dimension {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for StatError {}

/// A labeled collection of 3-vector observations, one per image.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    label: String,
    observations: Vec<[f64; 3]>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, observations: Vec<[f64; 3]>) -> Result<Self, StatError> {
        let label = label.into();
        if observations.len() < 2 {
            return Err(StatError::TooFewObservations {
                label,
                n: observations.len(),
            });
        }
        for (index, obs) in observations.iter().enumerate() {
            if obs.iter().any(|v| !v.is_finite()) {
                return Err(StatError::NonFinite { label, index });
            }
        }
        Ok(Self {
            label,
            observations,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn observations(&self) -> &[[f64; 3]] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }
}

/// Componentwise map applied to every observation before testing.
///
/// `H` and `LogLog` expect unit-scale data; each coordinate is first clamped
/// into the open unit interval, then sent through `-ln` or `ln(-ln)`.
/// `None` leaves observations untouched (the statistic is affine invariant,
/// so raw channel scale does not matter there).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    None,
    H,
    LogLog,
}

impl Transform {
    pub fn apply(self, v: [f64; 3]) -> [f64; 3] {
        match self {
            Transform::None => v,
            Transform::H => h_map(UnitRgb::new(v[0], v[1], v[2])).components(),
            Transform::LogLog => loglog_map(UnitRgb::new(v[0], v[1], v[2])).components(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::H => "h",
            Transform::LogLog => "loglog",
        }
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Transform::None),
            "h" => Ok(Transform::H),
            "loglog" => Ok(Transform::LogLog),
            other => Err(format!("unknown transform {other:?} (none|h|loglog)")),
        }
    }
}

/// What to do when the pooled covariance cannot be factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPolicy {
    /// Report [`StatError::SingularCovariance`].
    Error,
    /// Retry once with a small ridge `S + λI`, `λ = 1e-8·trace(S)/p`,
    /// and flag the result.
    Ridge,
}

/// Result of one two-sample test.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Result {
    pub t2: f64,
    pub n1: usize,
    pub n2: usize,
    /// Dimension of the observations (3 for the color pipeline).
    pub dim: usize,
    pub f_stat: f64,
    pub p_value: f64,
    /// Set when the ridge fallback was needed to invert the covariance.
    pub singular_fallback: bool,
}

/// Arithmetic mean per coordinate.
pub fn mean_vector(group: &SampleGroup) -> [f64; 3] {
    let m = mean_obs(group.observations().iter().map(|o| &o[..]), group.n());
    [m[0], m[1], m[2]]
}

/// Unbiased sample covariance (divisor n-1).
pub fn covariance(group: &SampleGroup) -> [[f64; 3]; 3] {
    let cov = covariance_obs(group.observations().iter().map(|o| &o[..]), group.n(), 3);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cov[i][j];
        }
    }
    out
}

fn mean_obs<'a>(observations: impl Iterator<Item = &'a [f64]>, n: usize) -> Vec<f64> {
    assert!(n >= 1, "mean of an empty group");
    let mut sum: Option<Vec<f64>> = None;
    for obs in observations {
        let sum = sum.get_or_insert_with(|| vec![0.0; obs.len()]);
        for (s, v) in sum.iter_mut().zip(obs) {
            *s += v;
        }
    }
    let mut sum = sum.expect("mean of an empty group");
    for s in sum.iter_mut() {
        *s /= n as f64;
    }
    sum
}

#[allow(clippy::needless_range_loop)] // triangular update over two arrays
fn covariance_obs<'a>(
    observations: impl Iterator<Item = &'a [f64]> + Clone,
    n: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    assert!(n >= 2, "covariance needs at least two observations");
    let mean = mean_obs(observations.clone(), n);
    let mut cov = vec![vec![0.0; dim]; dim];
    for obs in observations {
        for i in 0..dim {
            let di = obs[i] - mean[i];
            for j in i..dim {
                cov[i][j] += di * (obs[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Cholesky factorization in place; `Err` on a nonpositive pivot relative
/// to the matrix scale.
fn cholesky(a: &mut [Vec<f64>]) -> Result<(), ()> {
    let p = a.len();
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(());
    }
    for j in 0..p {
        let mut d = a[j][j];
        for v in &a[j][..j] {
            d -= v * v;
        }
        if d <= scale * 1e-13 {
            return Err(());
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..p {
            let mut s = a[i][j];
            for (x, y) in a[i][..j].iter().zip(&a[j][..j]) {
                s -= x * y;
            }
            a[i][j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` given the Cholesky factor in the lower triangle.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = l.len();
    let mut x = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            x[i] -= l[i][k] * x[k];
        }
        x[i] /= l[i][i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            x[i] -= l[k][i] * x[k];
        }
        x[i] /= l[i][i];
    }
    x
}

/// Two-sample Hotelling T² on raw observation slices of any shared
/// dimension. See [`hotelling_t2`] for the 3-vector front end.
pub fn hotelling_t2_obs(
    group1: &[Vec<f64>],
    group2: &[Vec<f64>],
    policy: SingularPolicy,
) -> Result<T2Result, StatError> {
    let (n1, n2) = (group1.len(), group2.len());
    if n1 < 2 {
        return Err(StatError::TooFewObservations {
            label: "first".into(),
            n: n1,
        });
    }
    if n2 < 2 {
        return Err(StatError::TooFewObservations {
            label: "second".into(),
            n: n2,
        });
    }
    let dim = group1[0].len();
    for (index, obs) in group1.iter().chain(group2).enumerate() {
        if obs.len() != dim {
            return Err(StatError::DimensionMismatch {
                expected: dim,
                got: obs.len(),
            });
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(StatError::NonFinite {
                label: "observations".into(),
                index,
            });
        }
    }
    if n1 + n2 <= dim + 1 {
        return Err(StatError::InsufficientSample { n1, n2, dim });
    }

    let m1 = mean_obs(group1.iter().map(|o| &o[..]), n1);
    let m2 = mean_obs(group2.iter().map(|o| &o[..]), n2);
    let s1 = covariance_obs(group1.iter().map(|o| &o[..]), n1, dim);
    let s2 = covariance_obs(group2.iter().map(|o| &o[..]), n2, dim);

    let df = (n1 + n2 - 2) as f64;
    let mut pooled = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            pooled[i][j] = ((n1 - 1) as f64 * s1[i][j] + (n2 - 1) as f64 * s2[i][j]) / df;
        }
    }

    let d: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| b - a).collect();

    let mut factor = pooled.clone();
    let mut singular_fallback = false;
    if cholesky(&mut factor).is_err() {
        match policy {
            SingularPolicy::Error => return Err(StatError::SingularCovariance),
            SingularPolicy::Ridge => {
                let trace: f64 = (0..dim).map(|i| pooled[i][i]).sum();
                let lambda = 1e-8 * trace / dim as f64;
                factor = pooled.clone();
                for (i, row) in factor.iter_mut().enumerate() {
                    row[i] += lambda;
                }
                if cholesky(&mut factor).is_err() {
                    return Err(StatError::SingularCovariance);
                }
                singular_fallback = true;
            }
        }
    }

    let solved = cholesky_solve(&factor, &d);
    let quad: f64 = d.iter().zip(&solved).map(|(a, b)| a * b).sum();
    let t2 = (n1 * n2) as f64 / (n1 + n2) as f64 * quad.max(0.0);

    let f_df2 = (n1 + n2 - dim - 1) as u64;
    let f_stat = t2 * f_df2 as f64 / (df * dim as f64);
    let p_value = f_upper_tail(f_stat, dim as u64, f_df2)?;

    Ok(T2Result {
        t2,
        n1,
        n2,
        dim,
        f_stat,
        p_value,
        singular_fallback,
    })
}

/// Two-sample Hotelling T² between labeled 3-vector groups.
pub fn hotelling_t2(
    g1: &SampleGroup,
    g2: &SampleGroup,
    policy: SingularPolicy,
) -> Result<T2Result, StatError> {
    let to_vecs = |g: &SampleGroup| -> Vec<Vec<f64>> {
        g.observations().iter().map(|o| o.to_vec()).collect()
    };
    hotelling_t2_obs(&to_vecs(g1), &to_vecs(g2), policy)
}

/// Upper tail probability of the F(d1, d2) distribution at `f`, through the
/// regularized incomplete beta function. Monotone decreasing in `f`.
pub fn f_upper_tail(f: f64, d1: u64, d2: u64) -> Result<f64, StatError> {
    if d1 == 0 || d2 == 0 {
        return Err(StatError::DegreesOfFreedom { d1, d2 });
    }
    if f < 0.0 || !f.is_finite() {
        return Err(StatError::BadStatistic(f));
    }
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    let x = d2f / (d2f + d1f * f);
    Ok(reg_inc_beta(d2f / 2.0, d1f / 2.0, x))
}

/// Symmetric matrix of pairwise test results with a zero diagonal.
#[derive(Debug)]
pub struct PairwiseMatrix {
    labels: Vec<String>,
    t2: Vec<Vec<f64>>,
    p_values: Vec<Vec<f64>>,
    /// Cells that failed, recorded as NaN in the matrices.
    failures: Vec<(usize, usize, StatError)>,
}

impl PairwiseMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn t2(&self) -> &[Vec<f64>] {
        &self.t2
    }

    pub fn p_values(&self) -> &[Vec<f64>] {
        &self.p_values
    }

    pub fn failures(&self) -> &[(usize, usize, StatError)] {
        &self.failures
    }

    /// T² matrix as CSV: header of labels, one row per group, fixed
    /// six-decimal cells, zero diagonal.
    pub fn write_t2_csv<W: io::Write>(&self, w: W) -> io::Result<()> {
        write_labeled_matrix(w, &self.labels, &self.t2, |v| format!("{v:.6}"))
    }

    /// p-value matrix as CSV in scientific notation.
    pub fn write_p_values_csv<W: io::Write>(&self, w: W) -> io::Result<()> {
        write_labeled_matrix(w, &self.labels, &self.p_values, |v| format!("{v:.6e}"))
    }
}

fn write_labeled_matrix<W: io::Write>(
    w: W,
    labels: &[String],
    cells: &[Vec<f64>],
    fmt_cell: impl Fn(f64) -> String,
) -> io::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header = vec!["group".to_string()];
    header.extend(labels.iter().cloned());
    writer.write_record(&header).map_err(io_from_csv)?;
    for (label, row) in labels.iter().zip(cells) {
        let mut record = vec![label.clone()];
        record.extend(row.iter().map(|v| {
            if v.is_finite() {
                fmt_cell(*v)
            } else {
                "NaN".to_string()
            }
        }));
        writer.write_record(&record).map_err(io_from_csv)?;
    }
    writer.flush()
}

fn io_from_csv(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Runs the selected transform over every observation, then fills the
/// symmetric matrix of pairwise T² tests with a zero diagonal. Failed cells
/// become NaN and are recorded; they do not abort the matrix.
pub fn pairwise_t2(
    groups: &[SampleGroup],
    transform: Transform,
    policy: SingularPolicy,
) -> Result<PairwiseMatrix, StatError> {
    if groups.len() < 2 {
        return Err(StatError::TooFewGroups(groups.len()));
    }
    let transformed: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| {
            g.observations()
                .iter()
                .map(|o| transform.apply(*o).to_vec())
                .collect()
        })
        .collect();

    let k = groups.len();
    let mut t2 = vec![vec![0.0; k]; k];
    let mut p_values = vec![vec![0.0; k]; k];
    let mut failures = Vec::new();
    for i in 0..k {
        p_values[i][i] = 1.0;
        for j in i + 1..k {
            match hotelling_t2_obs(&transformed[i], &transformed[j], policy) {
                Ok(result) => {
                    t2[i][j] = result.t2;
                    t2[j][i] = result.t2;
                    p_values[i][j] = result.p_value;
                    p_values[j][i] = result.p_value;
                }
                Err(e) => {
                    t2[i][j] = f64::NAN;
                    t2[j][i] = f64::NAN;
                    p_values[i][j] = f64::NAN;
                    p_values[j][i] = f64::NAN;
                    failures.push((i, j, e));
                }
            }
        }
    }
    Ok(PairwiseMatrix {
        labels: groups.iter().map(|g| g.label().to_string()).collect(),
        t2,
        p_values,
        failures,
    })
}
