//! Characteristic function of a weighted sum of shifted squared normals.
//!
//! For `W = sum_k lambda_k (Z_k - a_k)^2 + offset` the characteristic
//! function factors over components:
//!
//! ```text
//!     f(t) = e^{i t offset} * prod_k (1 - 2 i lambda_k t)^{-1/2}
//!                          * exp( i lambda_k a_k^2 t / (1 - 2 i lambda_k t) )
//! ```
//!
//! The shifted factor carries `1 - 2 i lambda_k t` in its denominator — the
//! same root as the central factor — which is exactly what makes the closed
//! form for `-log |f|` in [`neg_log_cf_modulus`] hold identically. The two
//! routes are computed independently (complex arithmetic here, real closed
//! form there) and their agreement is enforced by tests to ~1e-12.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::{derived_stats, Spectrum};

/// Past this many factors the product is accumulated as a complex log sum
/// (log-modulus plus phase) to avoid underflow of the raw product.
const LOG_ACCUM_THRESHOLD: usize = 64;

/// One factor of the characteristic function at real argument `t`.
#[inline]
fn cf_factor(lambda: f64, shift: f64, t: f64) -> Complex64 {
    let root = Complex64::new(1.0, -2.0 * lambda * t);
    let mut factor = root.sqrt().inv();
    if shift != 0.0 {
        let arg = Complex64::new(0.0, lambda * shift * shift * t) / root;
        factor *= arg.exp();
    }
    factor
}

/// Characteristic function `f(t) = E e^{itW}` evaluated by the factor product.
///
/// `f(0) = 1` exactly; conjugate symmetry `f(-t) = conj(f(t))` holds by
/// construction. For more than 64 components the product switches to a
/// complex log-sum accumulation so very small moduli do not underflow.
pub fn cf_value(s: &Spectrum, t: f64) -> Complex64 {
    let phase0 = Complex64::new(0.0, s.offset() * t).exp();
    if s.len() <= LOG_ACCUM_THRESHOLD {
        let mut product = phase0;
        for (&w, &a) in s.weights().iter().zip(s.shifts()) {
            product *= cf_factor(w, a, t);
        }
        product
    } else {
        let mut log_sum = Complex64::new(0.0, s.offset() * t);
        for (&w, &a) in s.weights().iter().zip(s.shifts()) {
            let root = Complex64::new(1.0, -2.0 * w * t);
            log_sum -= 0.5 * root.ln();
            if a != 0.0 {
                log_sum += Complex64::new(0.0, w * a * a * t) / root;
            }
        }
        log_sum.exp()
    }
}

/// Closed form for `-log |f(t)|`:
///
/// ```text
///     (1/4) sum_k log(1 + 4 lambda_k^2 t^2)
///   + 2 sum_k a_k^2 lambda_k^2 t^2 / (1 + 4 lambda_k^2 t^2)
/// ```
///
/// Even in `t`, zero at `t = 0`, and strictly increasing in `|t|`, so
/// `|f|` itself is strictly decreasing away from the origin — several
/// truncation bounds in the quadrature engine rely on that monotonicity.
pub fn neg_log_cf_modulus(s: &Spectrum, t: f64) -> f64 {
    let t2 = t * t;
    let mut sum = 0.0;
    for (&w, &a) in s.weights().iter().zip(s.shifts()) {
        let q = 4.0 * w * w * t2;
        sum += 0.25 * q.ln_1p();
        if a != 0.0 {
            sum += 2.0 * a * a * (w * w * t2) / (1.0 + q);
        }
    }
    sum
}

/// `|f(t)|` through the closed-form log-modulus (never underflows to junk).
pub fn cf_modulus(s: &Spectrum, t: f64) -> f64 {
    (-neg_log_cf_modulus(s, t)).exp()
}

/// Worst-case envelope `(1 + 4 t^2 / m)^{-m/4}` for central spectra with
/// `sum lambda_k^2 = 1` and every `lambda_k^2 <= 1/m`.
///
/// The envelope is the modulus attained when exactly `m` squared weights sit
/// at the cap `1/m`; every admissible spectrum lies below it pointwise.
pub fn envelope_lemma3(m: u32, t: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::HypothesisViolated {
            context: "envelope order m must be >= 1".into(),
        });
    }
    if !t.is_finite() {
        return Err(Error::NonFiniteInput { context: "envelope argument t" });
    }
    let m = m as f64;
    Ok((1.0 + 4.0 * t * t / m).powf(-m / 4.0))
}

/// Non-central modulus envelope for normalized spectra:
///
/// ```text
///     |f(t)| <= (1 + t^2)^{-3/4}
///               * exp( -2 sum_k a_k^2 lambda_k^2 t^2 / (1 + 4 lambda_k^2 t^2) )
/// ```
///
/// Requires `A1 = sum lambda_k^2 = 1` (within 1e-9) and `lambda_1^2 <= 1/3`
/// (within 1e-12); both are genuine hypotheses of the envelope, so violations
/// are reported as errors rather than silently producing a non-bound.
pub fn envelope_noncentral(s: &Spectrum, t: f64) -> Result<f64> {
    let stats = derived_stats(s);
    if (stats.a1 - 1.0).abs() > 1e-9 {
        return Err(Error::HypothesisViolated {
            context: format!("spectrum must be normalized to A1 = 1, got A1 = {}", stats.a1),
        });
    }
    let top = s.weights()[0];
    if top * top > 1.0 / 3.0 + 1e-12 {
        return Err(Error::HypothesisViolated {
            context: format!(
                "largest squared weight {} exceeds A1/3",
                top * top
            ),
        });
    }
    if !t.is_finite() {
        return Err(Error::NonFiniteInput { context: "envelope argument t" });
    }
    let t2 = t * t;
    let mut shift_decay = 0.0;
    for (&w, &a) in s.weights().iter().zip(s.shifts()) {
        if a != 0.0 {
            shift_decay += a * a * (w * w * t2) / (1.0 + 4.0 * w * w * t2);
        }
    }
    Ok((1.0 + t2).powf(-0.75) * (-2.0 * shift_decay).exp())
}

/// Truncation point for integrals of `|f|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCutoff {
    /// Integrals over `[t_star, inf)` of `|f|` are below `tail_bound`.
    pub t_star: f64,
    /// Certified bound on the discarded tail mass, `<= eps_tail` requested.
    pub tail_bound: f64,
}

use serde::Serialize;

/// Certified truncation point from the three-largest-weights envelope.
///
/// For `n >= 3`, `|f(t)| <= (8 lambda_1 lambda_2 lambda_3 t^3)^{-1/2}`
/// (shifts only shrink the modulus further), which integrates in closed form:
///
/// ```text
///     int_T^inf |f| dt <= 2 (8 lambda_1 lambda_2 lambda_3)^{-1/2} T^{-1/2}
/// ```
///
/// `t_star` solves that for `eps_tail`. The cutoff can be astronomically
/// large for heavy slow-decaying spectra — callers that integrate `|f|`
/// should pair it with a logarithmic substitution rather than marching
/// linearly to `t_star`.
pub fn tail_cutoff(s: &Spectrum, eps_tail: f64) -> Result<TailCutoff> {
    if s.len() < 3 {
        return Err(Error::TooFewTerms { n: s.len() });
    }
    if !eps_tail.is_finite() || eps_tail <= 0.0 {
        return Err(Error::InvalidConfig {
            context: "eps_tail must be finite and > 0",
        });
    }
    let w = s.weights();
    let c = (8.0 * w[0] * w[1] * w[2]).sqrt();
    // 2 / (c sqrt(T)) = eps  =>  T = (2 / (c eps))^2
    let t_star = (2.0 / (c * eps_tail)).powi(2);
    let tail_bound = 2.0 / (c * t_star.sqrt());
    Ok(TailCutoff { t_star, tail_bound })
}

/// Closed-form bound on `int_T^inf |f| dt` from the top-three envelope.
///
/// Panics if the spectrum has fewer than three components (the top-three
/// envelope does not exist there — see [`tail_cutoff`] for the checked
/// entry point).
pub fn envelope_tail_integral(s: &Spectrum, t_from: f64) -> f64 {
    assert!(s.len() >= 3, "tail envelope needs at least 3 weights");
    let w = s.weights();
    let c = (8.0 * w[0] * w[1] * w[2]).sqrt();
    2.0 / (c * t_from.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn cf_at_zero_is_one() {
        let s = Spectrum::new(vec![2.0, 1.0, 0.5], vec![1.0, 0.0, -2.0], 0.7).unwrap();
        let f = cf_value(&s, 0.0);
        assert_eq!(f, Complex64::new(1.0, 0.0));
        assert_eq!(neg_log_cf_modulus(&s, 0.0), 0.0);
    }

    #[test]
    fn central_single_weight_modulus() {
        // |f(t)| = (1 + 4 t^2)^{-1/4} for one unit weight.
        let s = Spectrum::central(vec![1.0]).unwrap();
        close(cf_value(&s, 1.0).norm(), 5f64.powf(-0.25), 1e-15);
        close(neg_log_cf_modulus(&s, 1.0), 0.25 * 5f64.ln(), 1e-15);
    }

    #[test]
    fn shifted_single_weight_modulus() {
        // lambda = 1, a = 2, t = 0.3:
        // |f| = (1 + 4 t^2)^{-1/4} exp(-2 a^2 t^2 / (1 + 4 t^2)).
        let s = Spectrum::new(vec![1.0], vec![2.0], 0.0).unwrap();
        let t = 0.3f64;
        let expect = (1.0 + 4.0 * t * t).powf(-0.25) * (-2.0 * 4.0 * t * t / (1.0 + 4.0 * t * t)).exp();
        close(cf_value(&s, t).norm(), expect, 1e-14);
        close((-neg_log_cf_modulus(&s, t)).exp(), expect, 1e-14);
    }

    #[test]
    fn conjugate_symmetry_and_consistency() {
        let s = Spectrum::new(vec![1.5, 0.7, 0.2], vec![0.5, -1.0, 2.0], 0.3).unwrap();
        for &t in &[0.1, 0.9, 3.7, 25.0] {
            let plus = cf_value(&s, t);
            let minus = cf_value(&s, -t);
            close(plus.re, minus.re, 1e-14);
            close(plus.im, -minus.im, 1e-14);
            let modulus = (-neg_log_cf_modulus(&s, t)).exp();
            close(plus.norm(), modulus, 1e-12 * modulus.max(1e-300));
            assert!(plus.norm() <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn log_accumulation_matches_direct_product() {
        // 70 components forces the log-sum path; compare against an
        // explicitly chunked direct product of the same factors.
        let n = 70;
        let weights: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
        let shifts: Vec<f64> = (1..=n).map(|k| if k % 3 == 0 { 0.4 } else { 0.0 }).collect();
        let s = Spectrum::new(weights.clone(), shifts.clone(), 0.2).unwrap();
        for &t in &[0.5, 4.0] {
            let direct: Complex64 = weights
                .iter()
                .zip(&shifts)
                .map(|(&w, &a)| cf_factor(w, a, t))
                .fold(Complex64::new(0.0, s.offset() * t).exp(), |acc, f| acc * f);
            let viaf = cf_value(&s, t);
            close((viaf - direct).norm(), 0.0, 1e-13);
        }
    }

    #[test]
    fn offset_only_rotates_phase() {
        let base = Spectrum::central(vec![1.0, 0.5]).unwrap();
        let shifted = Spectrum::new(vec![1.0, 0.5], vec![0.0, 0.0], 2.0).unwrap();
        let t = 0.77;
        let rot = Complex64::new(0.0, 2.0 * t).exp();
        let lhs = cf_value(&shifted, t);
        let rhs = cf_value(&base, t) * rot;
        close((lhs - rhs).norm(), 0.0, 1e-14);
        close(
            neg_log_cf_modulus(&base, t),
            neg_log_cf_modulus(&shifted, t),
            1e-15,
        );
    }

    #[test]
    fn lemma3_envelope_values() {
        // m = 4, t = 2: (1 + 4*4/4)^{-1} = 1/5.
        close(envelope_lemma3(4, 2.0).unwrap(), 0.2, 1e-15);
        // m = 1, t = 1: (1 + 4)^{-1/4}.
        close(envelope_lemma3(1, 1.0).unwrap(), 5f64.powf(-0.25), 1e-15);
        // m = 2, t = 1: (1 + 2)^{-1/2}.
        close(envelope_lemma3(2, 1.0).unwrap(), 3f64.powf(-0.5), 1e-15);
        assert!(matches!(
            envelope_lemma3(0, 1.0),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn lemma3_envelope_dominates_admissible_spectra() {
        // Three equal squared weights at the cap 1/3 sit exactly on the
        // m = 3 envelope; flatter spectra sit strictly below it.
        let cap = Spectrum::central(vec![1.0 / 3f64.sqrt(); 3]).unwrap();
        let flat = Spectrum::central(vec![0.5; 4]).unwrap();
        for &t in &[0.3, 1.0, 2.5, 10.0] {
            let env3 = envelope_lemma3(3, t).unwrap();
            let env4 = envelope_lemma3(4, t).unwrap();
            close(cf_modulus(&cap, t), env3, 1e-12);
            close(cf_modulus(&flat, t), env4, 1e-12);
            assert!(cf_modulus(&flat, t) <= env3 + 1e-12);
        }
    }

    #[test]
    fn noncentral_envelope_requires_hypotheses() {
        let ok = Spectrum::new(vec![1.0 / 3f64.sqrt(); 3], vec![1.0, 0.0, 0.0], 0.0).unwrap();
        let env = envelope_noncentral(&ok, 1.0).unwrap();
        assert!(cf_value(&ok, 1.0).norm() <= env + 1e-12);

        let unnormalized = Spectrum::central(vec![2.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            envelope_noncentral(&unnormalized, 1.0),
            Err(Error::HypothesisViolated { .. })
        ));
        // Normalized but top-heavy: lambda_1^2 = 0.9 > 1/3.
        let top_heavy =
            Spectrum::central(vec![0.9f64.sqrt(), 0.05f64.sqrt(), 0.05f64.sqrt()]).unwrap();
        assert!(matches!(
            envelope_noncentral(&top_heavy, 1.0),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn tail_cutoff_scales_and_certifies() {
        let s = Spectrum::central(vec![1.0, 1.0, 1.0]).unwrap();
        let cut = tail_cutoff(&s, 1e-8).unwrap();
        // T = (2 / (sqrt(8) eps))^2 = 1 / (2 eps^2).
        close(cut.t_star, 0.5e16, 1e3);
        assert!(cut.tail_bound <= 1e-8 * (1.0 + 1e-12));

        // Tighter tolerance pushes the cutoff out; looser pulls it in.
        let tight = tail_cutoff(&s, 1e-9).unwrap();
        let loose = tail_cutoff(&s, 1e-4).unwrap();
        assert!(tight.t_star > cut.t_star && loose.t_star < cut.t_star);

        let pair = Spectrum::central(vec![1.0, 1.0]).unwrap();
        assert_eq!(tail_cutoff(&pair, 1e-8), Err(Error::TooFewTerms { n: 2 }));
        assert!(matches!(
            tail_cutoff(&s, 0.0),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn tail_bound_dominates_numerical_tail_integral() {
        // Integrate |f| over [t*, 10 t*] for a loose eps; together with the
        // closed-form remainder past 10 t* this must stay below tail_bound.
        let s = Spectrum::central(vec![2.0, 1.0, 0.5]).unwrap();
        let cut = tail_cutoff(&s, 1e-3).unwrap();
        // Log-spaced trapezoid: |f| is smooth and monotone in log t.
        let steps = 4000;
        let (lo, hi) = (cut.t_star, 10.0 * cut.t_star);
        let lr = (hi / lo).ln();
        let mut integral = 0.0;
        let mut prev = cf_modulus(&s, lo) * lo;
        for i in 1..=steps {
            let v = (lo.ln() + lr * i as f64 / steps as f64).exp();
            let cur = cf_modulus(&s, v) * v;
            integral += 0.5 * (prev + cur) * (lr / steps as f64);
            prev = cur;
        }
        let remainder = envelope_tail_integral(&s, hi);
        assert!(
            integral + remainder <= cut.tail_bound * (1.0 + 1e-6),
            "integral {integral} + remainder {remainder} vs bound {}",
            cut.tail_bound
        );
    }
}
