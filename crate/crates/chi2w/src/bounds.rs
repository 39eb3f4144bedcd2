//! Analytic bounds on the density maximum and pass/fail reporting.
//!
//! Every bound is an explicit closed-form function of the spectrum's summary
//! statistics. Constants are kept as exact expressions (`1/(4 e^2 sqrt(2 pi))`,
//! `2/sqrt(pi)`, `1/(4 sqrt 3)`), not as their one-sided decimal roundings.
//!
//! [`build_report`] measures the density maximum and lines every bound up
//! against it, classifying each as pass, fail, inconclusive (a nominal
//! violation smaller than the measurement's certified error), or
//! not-applicable. All bounds are homogeneous of degree -1 under rescaling
//! of the weights, matching how the density maximum itself transforms.

use serde::Serialize;

use crate::density::{density_max, DensityMax, EvalConfig};
use crate::error::{Error, Result};
use crate::spectrum::{derived_stats, DerivedStats, Spectrum};

/// `1/(4 e^2 sqrt(2 pi))`, the constant of the lower fourth-root bound.
pub fn fourth_root_lower_constant() -> f64 {
    0.25 / ((2.0f64).exp() * (2.0 * std::f64::consts::PI).sqrt())
}

/// `2/sqrt(pi)`, the constant of the upper fourth-root bound.
pub fn fourth_root_upper_constant() -> f64 {
    2.0 / std::f64::consts::PI.sqrt()
}

/// Two-sided fourth-root bound for central spectra:
///
/// ```text
///     c0 (A1 A2)^{-1/4}  <=  M  <=  c1 (A1 A2)^{-1/4}
/// ```
///
/// where `A1 = sum lambda_k^2` and `A2` excludes the largest weight.
/// `None` when the spectrum is shifted or `A2 = 0` (fewer than two
/// components), where the right-hand side degenerates consistently with the
/// unbounded single-component density.
pub fn theorem1_bounds(stats: &DerivedStats, central: bool) -> Option<(f64, f64)> {
    if !central || stats.a2 <= 0.0 {
        return None;
    }
    let scale = (stats.a1 * stats.a2).powf(-0.25);
    Some((
        fourth_root_lower_constant() * scale,
        fourth_root_upper_constant() * scale,
    ))
}

/// Square-root bound in terms of `A1 + B1` (with `B1 = sum lambda_k^2 a_k^2`):
/// the lower bound `(1/(4 sqrt 3)) (A1 + B1)^{-1/2}` holds unconditionally;
/// the upper bound `2 (A1 + B1)^{-1/2}` requires the flatness hypothesis
/// `lambda_1^2 <= A1/3` and is `None` otherwise.
pub fn theorem2_bounds(stats: &DerivedStats, lambda1: f64) -> (f64, Option<f64>) {
    let scale = (stats.a1 + stats.b1).sqrt().recip();
    let lower = scale / (4.0 * 3.0f64.sqrt());
    let upper = if lambda1 * lambda1 <= stats.a1 / 3.0 + 1e-12 * stats.a1 {
        Some(2.0 * scale)
    } else {
        None
    };
    (lower, upper)
}

/// Variance lower bound `M >= (12 Var)^{-1/2}`, from `M^2 Var >= 1/12`
/// (equality exactly for the uniform distribution).
pub fn statulyavichus_lower(variance: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::NonPositiveVariance { value: variance });
    }
    Ok(1.0 / (12.0 * variance).sqrt())
}

/// Flat-spectrum upper bound for central spectra via the envelope of the
/// characteristic function: with normalized weights `alpha_k = lambda_k /
/// sqrt(A1)`, if all `alpha_k^2 <= 1/4` then `M <= 0.5/sqrt(A1)`; if all
/// `alpha_k^2 <= 1/3` then `M <= 0.723/sqrt(A1)`. `None` when the top weight
/// is too dominant (or the spectrum is shifted).
pub fn lemma3_upper(spec: &Spectrum) -> Option<f64> {
    if !spec.is_central() {
        return None;
    }
    let stats = derived_stats(spec);
    let top = spec.weights()[0];
    let alpha1_sq = top * top / stats.a1;
    let tol = 1e-12;
    if alpha1_sq <= 0.25 + tol {
        Some(0.5 / stats.a1.sqrt())
    } else if alpha1_sq <= 1.0 / 3.0 + tol {
        Some(0.723 / stats.a1.sqrt())
    } else {
        None
    }
}

/// Which side of the measured value a bound constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Upper,
}

/// Outcome of one bound-versus-measurement comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The bound holds with nonnegative margin (or vacuously, for a lower
    /// bound against an unbounded density).
    Pass,
    /// Nominal violation within the measurement's certified error.
    Inconclusive,
    /// Violation exceeding the certified error.
    Fail,
    /// The bound's hypothesis does not cover this spectrum.
    NotApplicable,
}

/// One evaluated bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundEntry {
    pub name: &'static str,
    pub kind: BoundKind,
    pub applicable: bool,
    /// Human-readable hypothesis of the bound.
    pub hypothesis: &'static str,
    /// The bound's numeric value when applicable.
    pub value: Option<f64>,
    /// Signed margin: `measured - value` for lower bounds, `value - measured`
    /// for upper bounds. `None` when not applicable or vacuous.
    pub margin: Option<f64>,
    pub verdict: Verdict,
}

/// Full comparison of one spectrum's measured density maximum against every
/// bound. Serializes to the versioned `chi2w-report/1` JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub schema: &'static str,
    pub spectrum: Spectrum,
    pub stats: DerivedStats,
    pub measured: DensityMax,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    /// True when no entry records a certified violation.
    pub fn all_sound(&self) -> bool {
        self.entries.iter().all(|e| e.verdict != Verdict::Fail)
    }
}

fn entry(
    name: &'static str,
    kind: BoundKind,
    hypothesis: &'static str,
    value: Option<f64>,
    measured: &DensityMax,
) -> BoundEntry {
    let Some(bound) = value else {
        return BoundEntry {
            name,
            kind,
            applicable: false,
            hypothesis,
            value: None,
            margin: None,
            verdict: Verdict::NotApplicable,
        };
    };
    match *measured {
        DensityMax::Unbounded => {
            // A finite lower bound on an infinite supremum holds vacuously;
            // a finite upper bound against it cannot.
            let verdict = match kind {
                BoundKind::Lower => Verdict::Pass,
                BoundKind::Upper => Verdict::Fail,
            };
            BoundEntry {
                name,
                kind,
                applicable: true,
                hypothesis,
                value: Some(bound),
                margin: None,
                verdict,
            }
        }
        DensityMax::Finite {
            value: m,
            certified_error,
            ..
        } => {
            let margin = match kind {
                BoundKind::Lower => m - bound,
                BoundKind::Upper => bound - m,
            };
            let verdict = if margin >= 0.0 {
                Verdict::Pass
            } else if margin >= -certified_error {
                Verdict::Inconclusive
            } else {
                Verdict::Fail
            };
            BoundEntry {
                name,
                kind,
                applicable: true,
                hypothesis,
                value: Some(bound),
                margin: Some(margin),
                verdict,
            }
        }
    }
}

/// Measures the density maximum and evaluates every bound against it.
pub fn build_report(spec: &Spectrum, cfg: &EvalConfig) -> Result<BoundReport> {
    let stats = derived_stats(spec);
    let measured = density_max(spec, cfg)?;
    let central = spec.is_central();

    let t1 = theorem1_bounds(&stats, central);
    let (t2_lower, t2_upper) = theorem2_bounds(&stats, spec.weights()[0]);
    let var_lower = statulyavichus_lower(stats.variance)?;
    let l3 = lemma3_upper(spec);

    let entries = vec![
        entry(
            "theorem1_lower",
            BoundKind::Lower,
            "central spectrum with at least two components",
            t1.map(|(lo, _)| lo),
            &measured,
        ),
        entry(
            "theorem1_upper",
            BoundKind::Upper,
            "central spectrum with at least two components",
            t1.map(|(_, hi)| hi),
            &measured,
        ),
        entry(
            "theorem2_lower",
            BoundKind::Lower,
            "none (holds for every spectrum)",
            Some(t2_lower),
            &measured,
        ),
        entry(
            "theorem2_upper",
            BoundKind::Upper,
            "largest squared weight at most a third of A1",
            t2_upper,
            &measured,
        ),
        entry(
            "statulyavichus_lower",
            BoundKind::Lower,
            "none (holds for every distribution)",
            Some(var_lower),
            &measured,
        ),
        entry(
            "lemma3_upper",
            BoundKind::Upper,
            "central spectrum with no dominant weight",
            l3,
            &measured,
        ),
    ];

    Ok(BoundReport {
        schema: "chi2w-report/1",
        spectrum: spec.clone(),
        stats,
        measured,
        entries,
    })
}
