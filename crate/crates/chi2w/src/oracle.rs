//! Monte Carlo ground truth: reproducible sampling of the weighted sum,
//! histogram-based density-maximum estimation, and a Kolmogorov-Smirnov
//! check of the analytic distribution function.
//!
//! Sampling splits the seed into fixed-size substreams, one per chunk of
//! output, so the result is a deterministic function of `(spectrum, n, seed)`
//! alone — thread count and scheduling never change a single bit. The
//! statistical contract (i.i.d. draws of the weighted sum) is what other
//! implementations should reproduce; bit-level equality is promised only
//! within one build of this crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::density::{cdf_point, EvalConfig};
use crate::error::{Error, Result};
use crate::inversion::build_cache;
use crate::spectrum::{derived_stats, Spectrum};

/// Samples drawn per RNG substream; chunk `i` uses stream `i` of the seed.
const CHUNK: usize = 8192;

/// Summary of a histogram pass over a Monte Carlo sample.
///
/// `m_hat` is the tallest bin of a fixed-width histogram, an estimator of the
/// density maximum that is biased *downward* for peaked densities (a bin
/// averages the density over its width, and averaging can only lose against
/// the supremum). `bias_bound` quantifies that loss from finite differences
/// of the neighbouring bins; comparisons against an analytic maximum should
/// allow `4 * m_stderr + bias_bound` of slack.
#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    /// Number of samples behind the histogram.
    pub n_samples: usize,
    /// Maximum bin height (empirical density maximum).
    pub m_hat: f64,
    /// Binomial standard error of the peak bin height.
    pub m_stderr: f64,
    /// Kolmogorov-Smirnov statistic against the analytic distribution;
    /// `NaN` until filled in from [`ks_check`] (the histogram pass alone
    /// cannot compute it — it has no spectrum to compare against).
    pub ks_stat: f64,
    /// Width of the histogram bins.
    pub bin_width: f64,
    /// Bound on the peak-flattening bias of `m_hat`, estimated from finite
    /// differences at the tallest bin and inflated for estimation noise.
    pub bias_bound: f64,
}

/// Draws `n` independent samples of `sum_k lambda_k (Z_k - a_k)^2 + offset`.
///
/// Identical `(spectrum, n, seed)` give bit-identical output regardless of
/// the rayon thread pool in use: the output is split into chunks of
/// [`CHUNK`] samples and chunk `i` draws from substream `i` of `seed`.
pub fn sample(spec: &Spectrum, n: usize, seed: u64) -> Vec<f64> {
    let weights = spec.weights();
    let shifts = spec.shifts();
    let offset = spec.offset();
    let mut out = vec![0.0f64; n];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, slot)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            for v in slot.iter_mut() {
                let mut acc = offset;
                for (&w, &a) in weights.iter().zip(shifts) {
                    let z: f64 = rng.sample(StandardNormal);
                    let d = z - a;
                    acc += w * d * d;
                }
                *v = acc;
            }
        });
    out
}

/// Default histogram bin width for a spectrum: one twentieth of its
/// standard deviation.
pub fn default_bin_width(spec: &Spectrum) -> f64 {
    derived_stats(spec).variance.sqrt() / 20.0
}

/// Mean and unbiased variance of a sample.
pub fn sample_moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n < 2 {
        let mean = samples.first().copied().unwrap_or(0.0);
        return (mean, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1) as f64)
}

/// Histogram pass over a sample: empirical density maximum with a standard
/// error and a peak-bias bound.
///
/// The histogram covers `[min, max]` of the sample with bins of width
/// `bin_width`. The tallest bin gives `m_hat = count / (n * bin_width)` and
/// its binomial standard error. The downward bias of a bin against the true
/// supremum is bounded through finite differences at the peak:
///
/// - interior peak: a second difference of the three central heights
///   estimates the curvature `p''` at the mode, and the flattening of a
///   quadratic peak over one bin is at most `|p''| w^2 / 6`;
/// - boundary peak (support edge): a first difference estimates the slope,
///   and averaging a linear ramp over the edge bin loses at most
///   `|p'| w / 2`.
///
/// Both estimates are inflated by 1.5 and padded with one `m_stderr` to
/// absorb the sampling noise of the finite differences themselves.
///
/// `ks_stat` of the result is `NaN`; run [`ks_check`] separately when a
/// distributional comparison is wanted.
pub fn empirical_max(samples: &[f64], bin_width: f64) -> Result<MCEstimate> {
    assert!(
        bin_width.is_finite() && bin_width > 0.0,
        "bin_width must be positive and finite"
    );
    let n = samples.len();
    if n < 10_000 {
        return Err(Error::DegenerateSample {
            context: "histogram needs at least 10^4 samples",
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in samples {
        if !x.is_finite() {
            return Err(Error::DegenerateSample {
                context: "sample contains a non-finite value",
            });
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let nbins = ((hi - lo) / bin_width).ceil() as usize;
    if nbins < 3 {
        return Err(Error::DegenerateSample {
            context: "bin width spans the whole sample range",
        });
    }
    let mut counts = vec![0u64; nbins];
    for &x in samples {
        let j = (((x - lo) / bin_width) as usize).min(nbins - 1);
        counts[j] += 1;
    }
    let scale = 1.0 / (n as f64 * bin_width);
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
    let (peak, &m_hat) = heights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nbins >= 3");
    let p_hat = counts[peak] as f64 / n as f64;
    let m_stderr = (p_hat * (1.0 - p_hat) / n as f64).sqrt() / bin_width;

    let bias_bound = if peak > 0 && peak + 1 < nbins {
        let d2 = (heights[peak - 1] - 2.0 * heights[peak] + heights[peak + 1]).abs();
        1.5 * d2 / 6.0 + m_stderr
    } else {
        let neighbour = if peak == 0 {
            heights[1]
        } else {
            heights[peak - 1]
        };
        1.5 * (heights[peak] - neighbour).abs() / 2.0 + m_stderr
    };

    Ok(MCEstimate {
        n_samples: n,
        m_hat,
        m_stderr,
        ks_stat: f64::NAN,
        bin_width,
        bias_bound,
    })
}

/// Kolmogorov-Smirnov statistic of a sample against the analytic
/// distribution function of `spec`.
///
/// The analytic values come from the same machinery as
/// [`cdf_point`](crate::density::cdf_point); for spectra with two or more
/// components the quadrature nodes are computed once and reused across all
/// samples, so a million-sample check stays in seconds.
pub fn ks_check(samples: &[f64], spec: &Spectrum, cfg: &EvalConfig) -> Result<f64> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::DegenerateSample {
            context: "no samples to compare",
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;

    let fvals: Vec<f64> = if spec.len() == 1 {
        sorted
            .par_iter()
            .map(|&x| cdf_point(spec, x, cfg))
            .collect::<Result<_>>()?
    } else {
        let x_max1 = (sorted[sorted.len() - 1] - spec.offset()).max(1e-12);
        let cache = build_cache(spec, x_max1, cfg.eps_quad, cfg.eps_tail)?;
        sorted
            .par_iter()
            .map(|&x| cache.cdf(x - spec.offset()))
            .collect()
    };

    let mut d = 0.0f64;
    for (i, &f) in fvals.iter().enumerate() {
        let below = f - i as f64 / n;
        let above = (i + 1) as f64 / n - f;
        d = d.max(below).max(above);
    }
    Ok(d)
}
