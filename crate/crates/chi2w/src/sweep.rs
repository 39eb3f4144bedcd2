//! Randomized verification sweeps: families of spectra drawn from named
//! weight and shift laws, evaluated into [`BoundReport`]s in parallel.
//!
//! A sweep is a pure function of its [`SweepSpec`]: spectrum `i` is drawn
//! from substream `i` of the seed, so results are reproducible and
//! independent of thread count, and any single index can be regenerated in
//! isolation (handy when chasing one failure out of a thousand).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{build_report, BoundReport, Verdict};
use crate::density::EvalConfig;
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// How the raw weight profile of a sweep spectrum is generated (before the
/// global scale draw).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightLaw {
    /// All weights equal.
    Equal,
    /// `lambda_k = k^{-exponent}` — one dominant weight with a power tail.
    PolynomialDecay { exponent: f64 },
    /// `lambda_k = e^{-rate k}` — geometric decay, strongly dominant top.
    ExponentialDecay { rate: f64 },
    /// A uniformly random point of the weight simplex (normalized
    /// standard-exponential draws) — near-equal weights with fluctuations.
    DirichletRandom,
}

/// How the shifts of a sweep spectrum are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftLaw {
    /// Central spectra: every shift zero.
    Zero,
    /// Independent `N(0, scale^2)` shifts.
    Gaussian { scale: f64 },
}

/// Optional structural constraint imposed on every generated spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepConstraint {
    /// No constraint.
    None,
    /// Flatten the weight profile until `lambda_1^2 <= A1/3`, the hypothesis
    /// of the two-sided square-root bound. Component counts below 3 are
    /// promoted to 3 (no flatter profile can satisfy the constraint with
    /// fewer components).
    Theorem2Hypothesis,
}

/// Description of one whole sweep; spectra are a deterministic function of
/// this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Number of spectra.
    pub count: usize,
    /// Inclusive range the component count is drawn from.
    pub n_range: (usize, usize),
    pub weight_law: WeightLaw,
    pub shift_law: ShiftLaw,
    pub constraint: SweepConstraint,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::InvalidConfig {
                context: "sweep count must be at least 1",
            });
        }
        let (lo, hi) = self.n_range;
        if lo < 1 || hi < lo || hi > 10_000 {
            return Err(Error::InvalidConfig {
                context: "n_range must satisfy 1 <= lo <= hi <= 10^4",
            });
        }
        match self.weight_law {
            WeightLaw::PolynomialDecay { exponent } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(Error::InvalidConfig {
                        context: "polynomial-decay exponent must be finite and > 0",
                    });
                }
            }
            WeightLaw::ExponentialDecay { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::InvalidConfig {
                        context: "exponential-decay rate must be finite and > 0",
                    });
                }
            }
            WeightLaw::Equal | WeightLaw::DirichletRandom => {}
        }
        if let ShiftLaw::Gaussian { scale } = self.shift_law {
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(Error::InvalidConfig {
                    context: "gaussian shift scale must be finite and >= 0",
                });
            }
        }
        Ok(())
    }

    /// The `index`-th spectrum of the sweep (same value whether generated
    /// alone or as part of [`SweepSpec::spectra`]).
    pub fn spectrum_at(&self, index: usize) -> Spectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);

        let (lo, hi) = self.n_range;
        let mut n = rng.random_range(lo..=hi);
        if self.constraint == SweepConstraint::Theorem2Hypothesis {
            n = n.max(3);
        }

        let mut weights: Vec<f64> = match self.weight_law {
            WeightLaw::Equal => vec![1.0; n],
            WeightLaw::PolynomialDecay { exponent } => {
                (1..=n).map(|k| (k as f64).powf(-exponent)).collect()
            }
            WeightLaw::ExponentialDecay { rate } => {
                (1..=n).map(|k| (-rate * k as f64).exp()).collect()
            }
            WeightLaw::DirichletRandom => {
                let draws: Vec<f64> = (0..n)
                    .map(|_| rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE))
                    .collect();
                let total: f64 = draws.iter().sum();
                draws.into_iter().map(|e| e / total).collect()
            }
        };

        if self.constraint == SweepConstraint::Theorem2Hypothesis {
            flatten_to_dominance(&mut weights, 1.0 / 3.0);
        }

        // Global scale, log-uniform over [1/4, 4]: keeps the sweep exercising
        // the homogeneity of every bound instead of a single normalization.
        let ln4 = (4.0f64).ln();
        let scale = rng.random_range(-ln4..ln4).exp();
        for w in &mut weights {
            *w *= scale;
        }

        let shifts: Vec<f64> = match self.shift_law {
            ShiftLaw::Zero => vec![0.0; n],
            ShiftLaw::Gaussian { scale } => (0..n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };

        Spectrum::new(weights, shifts, 0.0).expect("generated weights are positive")
    }

    /// All spectra of the sweep, in index order.
    pub fn spectra(&self) -> Vec<Spectrum> {
        (0..self.count).map(|i| self.spectrum_at(i)).collect()
    }
}

/// Ratio `max(w)^2 / sum w^2` of a weight profile.
fn dominance_ratio(weights: &[f64]) -> f64 {
    let top = weights.iter().cloned().fold(f64::MIN, f64::max);
    let a1: f64 = weights.iter().map(|w| w * w).sum();
    top * top / a1
}

/// Flattens a weight profile in place until `max(w)^2 <= cap * sum(w^2)`, by
/// raising every weight to a power `tau` found by bisection.
///
/// `tau = 1` keeps the profile; `tau = 0` makes it flat, where the ratio is
/// `1/n` — so the cap must satisfy `cap >= 1/n` to be reachable (with
/// equality allowed: the flat profile then sits exactly on the cap). The
/// ratio is continuous and increasing in `tau`, so the bisection keeps its
/// lower endpoint feasible and lands on the least-flattened profile that
/// satisfies the constraint in floating-point evaluation.
///
/// Panics when the cap is unreachable (`cap < 1/n`).
pub fn flatten_to_dominance(weights: &mut [f64], cap: f64) {
    let n = weights.len() as f64;
    assert!(
        n * cap >= 1.0 - 1e-12,
        "dominance cap {cap} unreachable with {n} weights"
    );
    if dominance_ratio(weights) <= cap {
        return;
    }
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let profile = |tau: f64| -> Vec<f64> { logs.iter().map(|l| (tau * l).exp()).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dominance_ratio(&profile(mid)) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flat = profile(lo);
    weights.copy_from_slice(&flat);
}

/// Evaluates every sweep spectrum into a [`BoundReport`], in parallel, in
/// index order. Fails on the first spectrum whose measurement does not
/// converge.
pub fn run_reports(sweep: &SweepSpec, cfg: &EvalConfig) -> Result<Vec<BoundReport>> {
    sweep.validate()?;
    cfg.validate()?;
    (0..sweep.count)
        .into_par_iter()
        .map(|i| build_report(&sweep.spectrum_at(i), cfg))
        .collect()
}

/// Verdict counts for one named bound across a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundTally {
    pub name: &'static str,
    pub pass: usize,
    pub inconclusive: usize,
    pub fail: usize,
    pub not_applicable: usize,
}

/// Aggregates sweep reports into per-bound verdict counts, in the entry
/// order of the individual reports.
pub fn tally(reports: &[BoundReport]) -> Vec<BoundTally> {
    let mut out: Vec<BoundTally> = Vec::new();
    for report in reports {
        for entry in &report.entries {
            let slot = match out.iter_mut().find(|t| t.name == entry.name) {
                Some(t) => t,
                None => {
                    out.push(BoundTally {
                        name: entry.name,
                        pass: 0,
                        inconclusive: 0,
                        fail: 0,
                        not_applicable: 0,
                    });
                    out.last_mut().expect("just pushed")
                }
            };
            match entry.verdict {
                Verdict::Pass => slot.pass += 1,
                Verdict::Inconclusive => slot.inconclusive += 1,
                Verdict::Fail => slot.fail += 1,
                Verdict::NotApplicable => slot.not_applicable += 1,
            }
        }
    }
    out
}
