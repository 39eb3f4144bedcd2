//! Spectrum ingestion and canonicalization.
//!
//! A [`Spectrum`] describes the law of
//!
//! ```text
//!     W = sum_k lambda_k (Z_k - a_k)^2 + offset,      Z_k iid standard normal
//! ```
//!
//! by its weights `lambda_k > 0`, shifts `a_k`, and deterministic `offset`.
//! Every constructor canonicalizes: weights sorted descending, shifts permuted
//! in lock-step (stable, so equal weights keep their input order). All other
//! modules assume that ordering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;

/// Canonical description of a weighted sum of shifted squared normals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    weights: Vec<f64>,
    shifts: Vec<f64>,
    offset: f64,
}

impl Spectrum {
    /// Validates and canonicalizes a weight/shift/offset triple.
    ///
    /// Weights must be strictly positive and finite; shifts and offset finite.
    /// The weights are sorted descending with shifts carried along; ties keep
    /// their input order.
    pub fn new(weights: Vec<f64>, shifts: Vec<f64>, offset: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if weights.len() != shifts.len() {
            return Err(Error::LengthMismatch {
                weights: weights.len(),
                shifts: shifts.len(),
            });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteInput { context: "weight" });
            }
            if w <= 0.0 {
                return Err(Error::NonPositiveWeight { index, value: w });
            }
        }
        if shifts.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFiniteInput { context: "shift" });
        }
        if !offset.is_finite() {
            return Err(Error::NonFiniteInput { context: "offset" });
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]));
        let sorted_weights = order.iter().map(|&i| weights[i]).collect();
        let sorted_shifts = order.iter().map(|&i| shifts[i]).collect();
        Ok(Self {
            weights: sorted_weights,
            shifts: sorted_shifts,
            offset,
        })
    }

    /// Central spectrum: all shifts zero, offset zero.
    pub fn central(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::new(weights, vec![0.0; n], 0.0)
    }

    /// Weights, sorted descending.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shifts, permuted in lock-step with the weights.
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Deterministic additive offset.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Number of components.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when there are zero components (never: constructors reject it).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when all shifts are exactly zero.
    pub fn is_central(&self) -> bool {
        self.shifts.iter().all(|&a| a == 0.0)
    }

    /// Scales the distribution by `c > 0`: the law of `c * W`.
    ///
    /// Weights and offset scale by `c`; shifts are invariant. Density heights
    /// scale by `1/c`, which is what makes the analytic bounds scale-covariant.
    pub fn rescale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::NonPositiveScale { value: c });
        }
        Ok(Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            shifts: self.shifts.clone(),
            offset: self.offset * c,
        })
    }
}

/// Moment-type functionals of a spectrum used throughout the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedStats {
    /// `A1 = sum_k lambda_k^2`.
    pub a1: f64,
    /// `A2 = sum_{k >= 2} lambda_k^2` (the largest weight excluded).
    pub a2: f64,
    /// `B1 = sum_k lambda_k^2 a_k^2`.
    pub b1: f64,
    /// `E W = sum_k lambda_k (1 + a_k^2) + offset`.
    pub mean: f64,
    /// `Var W = 2 A1 + 4 B1`.
    pub variance: f64,
}

/// Computes [`DerivedStats`] for a canonical spectrum.
///
/// Each squared shifted normal has mean `1 + a^2` and variance `2 + 4 a^2`,
/// which summed with weights gives the mean and variance below.
pub fn derived_stats(s: &Spectrum) -> DerivedStats {
    let mut a1 = 0.0;
    let mut b1 = 0.0;
    let mut mean = s.offset();
    for (&w, &a) in s.weights().iter().zip(s.shifts()) {
        a1 += w * w;
        b1 += w * w * a * a;
        mean += w * (1.0 + a * a);
    }
    let a2 = a1 - s.weights()[0] * s.weights()[0];
    DerivedStats {
        a1,
        a2,
        b1,
        mean,
        variance: 2.0 * a1 + 4.0 * b1,
    }
}

/// Spectral decomposition of the squared norm of a Gaussian vector.
///
/// If `Y ~ N(mean, cov)` in dimension `d`, then `||Y||^2` is distributed as a
/// weighted sum of shifted squared normals: the weights are the positive
/// eigenvalues of `cov`, each shift is `<mean, e_k> / sqrt(lambda_k)` for the
/// matching unit eigenvector, and mean mass along null eigendirections goes
/// into the deterministic offset.
///
/// `cov` is row-major `d x d`. Eigenvalues within `1e-12 * max|cov| * d` of
/// zero are treated as zero; anything below minus that tolerance is an error,
/// as is asymmetry beyond the same tolerance.
pub fn decompose_gaussian(cov: &[Vec<f64>], mean: &[f64]) -> Result<Spectrum> {
    let d = cov.len();
    if d == 0 || mean.len() != d {
        return Err(Error::LengthMismatch {
            weights: d,
            shifts: mean.len(),
        });
    }
    let mut flat = vec![0.0; d * d];
    let mut max_abs = 0.0_f64;
    for (i, row) in cov.iter().enumerate() {
        if row.len() != d {
            return Err(Error::LengthMismatch {
                weights: d,
                shifts: row.len(),
            });
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFiniteInput { context: "covariance entry" });
            }
            flat[i * d + j] = x;
            max_abs = max_abs.max(x.abs());
        }
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFiniteInput { context: "mean entry" });
    }
    if max_abs == 0.0 {
        return Err(Error::AllZeroCovariance);
    }
    let tol = 1e-12 * max_abs * d as f64;
    for i in 0..d {
        for j in (i + 1)..d {
            let delta = (flat[i * d + j] - flat[j * d + i]).abs();
            if delta > tol {
                return Err(Error::NotSymmetric { i, j, delta });
            }
        }
    }
    // Symmetrize exactly so Jacobi sees a symmetric matrix even when the
    // input only passes within tolerance.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (flat[i * d + j] + flat[j * d + i]);
            flat[i * d + j] = avg;
            flat[j * d + i] = avg;
        }
    }

    let eigen = jacobi_eigen(&flat, d);
    let mut weights = Vec::new();
    let mut shifts = Vec::new();
    let mut offset = 0.0;
    for k in 0..d {
        let value = eigen.values[k];
        let e_k = eigen.vector(k);
        let proj: f64 = mean.iter().zip(&e_k).map(|(m, e)| m * e).sum();
        if value > tol {
            weights.push(value);
            shifts.push(proj / value.sqrt());
        } else if value >= -tol {
            // Null direction: the squared mean component is deterministic.
            offset += proj * proj;
        } else {
            return Err(Error::NegativeEigenvalue { value, tol });
        }
    }
    if weights.is_empty() {
        return Err(Error::AllZeroCovariance);
    }
    Spectrum::new(weights, shifts, offset)
}

/// Serializes a spectrum in the `lambda,shift` CSV format.
///
/// One row per component, plus a trailing `# offset=<value>` comment whenever
/// the offset is nonzero. Numbers use `.` decimal points regardless of locale.
pub fn to_csv(s: &Spectrum) -> String {
    let mut out = String::from("lambda,shift\n");
    for (&w, &a) in s.weights().iter().zip(s.shifts()) {
        out.push_str(&format!("{w},{a}\n"));
    }
    if s.offset() != 0.0 {
        out.push_str(&format!("# offset={}\n", s.offset()));
    }
    out
}

/// Parses the `lambda,shift` CSV format produced by [`to_csv`].
///
/// Expects a `lambda,shift` header, one `weight,shift` row per component, and
/// optionally a `# offset=<value>` comment. Other `#` comments and blank lines
/// are ignored; the result is canonicalized through [`Spectrum::new`].
pub fn from_csv(text: &str) -> Result<Spectrum> {
    let mut weights = Vec::new();
    let mut shifts = Vec::new();
    let mut offset = 0.0;
    let mut saw_header = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("offset=") {
                offset = value.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad offset value {value:?}: {e}"),
                })?;
            }
            continue;
        }
        if !saw_header {
            let normalized: String = line.split(',').map(str::trim).collect::<Vec<_>>().join(",");
            if !normalized.eq_ignore_ascii_case("lambda,shift") {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected header `lambda,shift`, found {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let (Some(wf), Some(af), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected two comma-separated fields, found {line:?}"),
            });
        };
        let w = wf.trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("bad weight {wf:?}: {e}"),
        })?;
        let a = af.trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("bad shift {af:?}: {e}"),
        })?;
        weights.push(w);
        shifts.push(a);
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: "missing `lambda,shift` header".into(),
        });
    }
    Spectrum::new(weights, shifts, offset)
}
