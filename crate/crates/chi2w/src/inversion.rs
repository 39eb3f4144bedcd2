//! Fourier inversion of the characteristic function.
//!
//! Densities and distribution functions are recovered from
//!
//! ```text
//!     p(x) = (1/pi) Re int_0^inf e^{-itx} f(t) dt
//!     F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-itx} f(t)) / t dt
//! ```
//!
//! (x measured relative to the offset, f without the offset phase).
//!
//! A direct truncation of these integrals is hopeless for three or four
//! components: `|f|` decays like `t^{-n/2}`, so pushing the absolute tail
//! below 1e-9 would require integrating out to ~1e15 against an oscillating
//! factor. Instead the contour is bent: integrate along the real axis only to
//! a corner `T`, then straight down into the lower half-plane,
//!
//! ```text
//!     int_T^inf e^{-itx} f(t) dt  =  -i e^{-iTx} int_0^inf e^{-sx} f(T - is) ds,
//! ```
//!
//! which is legitimate because the integrand is analytic below the real axis
//! until the branch points at `t = -i/(2 lambda_k)` — all safely away from
//! the vertical line Re t = T — and the quarter-circle at infinity vanishes
//! for n >= 3 (n >= 2 with the extra 1/t of the distribution integral). On
//! the vertical leg nothing oscillates: the integrand decays like `s^{-n/2}`
//! times `e^{-sx}`, so a logarithmic panel ladder reaches astronomically far
//! truncation points in a few hundred evaluations.
//!
//! The corner is placed at
//!
//! ```text
//!     T = max( 3/(2 lambda_1),  sqrt(sum_k a_k^2/(16 lambda_k^2)) )
//! ```
//!
//! The first term puts the bend of the dominant factor well inside the real
//! leg; the second keeps the non-central exponential factors from inflating
//! the vertical leg by more than e^{1/2} (their log-modulus gain on the line
//! Re t = T is at most `a_k^2/(32 lambda_k^2 T^2)` per factor, whatever T).
//! Deliberately absent is any term like `1/(2 lambda_n)`: it would make the
//! real leg scale with the weight spread `lambda_1/lambda_n`, which is
//! ruinous for spectra spanning many orders of magnitude. The price is that
//! a factor with `2 lambda_k T < 1` can amplify on the vertical leg — near
//! `s = 1/(2 lambda_k)` the modulus of `(1 - 2 i lambda_k (T - is))^{-1/2}`
//! peaks at `(2 lambda_k T)^{-1/2}` — so the certified envelopes charge
//! every non-envelope factor its worst modulus over the panel at hand, and
//! tail truncation starts only past `s = 1/lambda_n`, where each factor has
//! `|1 - 2 lambda_k s| >= 1` and hence modulus at most one.

use num_complex::Complex64;

use crate::charfn::neg_log_cf_modulus;
use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadOpts, Quadrature};
use crate::spectrum::Spectrum;

/// Geometry and certified-tail data for the bent contour of one spectrum.
pub(crate) struct Contour {
    /// Corner abscissa `T` where the contour turns down.
    pub t_corner: f64,
    /// Bound on the log-inflation of the non-central factors on the vertical
    /// leg: their product has modulus at most `e^{k_nc}` there.
    pub k_nc: f64,
    /// From this `s` on, the top-m envelope `env_c * s^{-m/2}` is valid.
    pub s_lo: f64,
    /// `(prod of the m largest weights)^{-1/2}`.
    pub env_c: f64,
    /// Number of envelope factors, `min(n, 3)`.
    pub m: usize,
    /// Phase-speed bound of `f` on the real axis (the quadratic-part mean).
    pub mean_q: f64,
    /// Weights beyond the envelope factors; each can amplify on the vertical
    /// leg near `s = 1/(2 lambda_k)` when `2 lambda_k T < 1`.
    pub amp_weights: Vec<f64>,
    /// Past this `s` (namely `1/lambda_n`), every factor has modulus <= 1 on
    /// the vertical line, so tail formulas may drop the non-envelope factors.
    pub s_amp_end: f64,
}

pub(crate) fn contour_for(s: &Spectrum) -> Contour {
    let w = s.weights();
    let n = s.len();
    let mut shift_scale = 0.0;
    let mut mean_q = 0.0;
    for (&l, &a) in w.iter().zip(s.shifts()) {
        shift_scale += a * a / (16.0 * l * l);
        mean_q += l * (1.0 + a * a);
    }
    let t_corner = (1.5 / w[0]).max(shift_scale.sqrt());
    // Log-modulus gain of factor k's non-central exponential on Re t = T:
    // with u = 2 lambda s and B = 4 lambda^2 T^2 it is
    // (a^2/2) (u - u^2 - B) / ((1 - u)^2 + B) <= (a^2/2) / (4B), valid for
    // every T > 0; the shift term of the corner keeps the sum below 1/2.
    let mut k_nc = 0.0;
    for (&l, &a) in w.iter().zip(s.shifts()) {
        k_nc += a * a / (32.0 * l * l * t_corner * t_corner);
    }
    let m = n.min(3);
    let env_c = 1.0 / w[..m].iter().product::<f64>().sqrt();
    let s_lo = 2.0 / w[m - 1];
    Contour {
        t_corner,
        k_nc,
        s_lo,
        env_c,
        m,
        mean_q,
        amp_weights: w[m..].to_vec(),
        s_amp_end: 1.0 / w[n - 1],
    }
}

/// Largest possible product of the non-envelope factor moduli over the
/// vertical-leg panel `[a, b]`: factor k's modulus is
/// `((1 - 2 lambda_k s)^2 + 4 lambda_k^2 T^2)^{-1/4}`, maximal where
/// `(1 - 2 lambda_k s)^2` is smallest on the panel.
fn amp_allowance(ct: &Contour, a: f64, b: f64) -> f64 {
    let bb = 4.0 * ct.t_corner * ct.t_corner;
    let mut amp = 1.0;
    for &l in &ct.amp_weights {
        let peak = 0.5 / l;
        let r = if peak >= a && peak <= b {
            0.0
        } else {
            let ra = 1.0 - 2.0 * l * a;
            let rb = 1.0 - 2.0 * l * b;
            (ra * ra).min(rb * rb)
        };
        amp *= (r + bb * l * l).powf(-0.25);
    }
    amp
}

/// log f(T - is) for the quadratic part (no offset phase), factor by factor.
///
/// Working in logs keeps the product well-defined when the modulus underflows
/// and lets the caller fold in `-s x` before exponentiating.
fn log_cf_vertical(spec: &Spectrum, t_corner: f64, s: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (&l, &a) in spec.weights().iter().zip(spec.shifts()) {
        // 1 - 2 i l (T - is) = (1 - 2 l s) - 2 i l T
        let root = Complex64::new(1.0 - 2.0 * l * s, -2.0 * l * t_corner);
        acc -= 0.5 * root.ln();
        if a != 0.0 {
            // i l a^2 t / (1 - 2 i l t) at t = T - is has numerator l a^2 (s + iT).
            acc += Complex64::new(l * a * a * s, l * a * a * t_corner) / root;
        }
    }
    acc
}

/// `f(t)` on the real axis without the offset phase.
fn cf_real_quadratic(spec: &Spectrum, t: f64) -> Complex64 {
    let mut offsetless = Complex64::new(1.0, 0.0);
    if spec.len() <= 64 {
        for (&l, &a) in spec.weights().iter().zip(spec.shifts()) {
            let root = Complex64::new(1.0, -2.0 * l * t);
            let mut factor = root.sqrt().inv();
            if a != 0.0 {
                factor *= (Complex64::new(0.0, l * a * a * t) / root).exp();
            }
            offsetless *= factor;
        }
        offsetless
    } else {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&l, &a) in spec.weights().iter().zip(spec.shifts()) {
            let root = Complex64::new(1.0, -2.0 * l * t);
            acc -= 0.5 * root.ln();
            if a != 0.0 {
                acc += Complex64::new(0.0, l * a * a * t) / root;
            }
        }
        acc.exp()
    }
}

/// Remainder of the vertical leg beyond `s_max` for the density integral.
/// Valid for `s_max >= max(s_lo, s_amp_end)` and `m = 3` (the non-envelope
/// factors all have modulus <= 1 past `s_amp_end`).
fn vertical_remainder_pdf(ct: &Contour, s_max: f64) -> f64 {
    debug_assert!(ct.m == 3);
    ct.k_nc.exp() * ct.env_c * 2.0 / s_max.sqrt()
}

/// Truncation point making the density remainder at most `target`.
fn s_max_for_pdf(ct: &Contour, target: f64) -> f64 {
    let s = (ct.k_nc.exp() * ct.env_c * 2.0 / target).powi(2);
    s.max(2.0 * ct.s_lo).max(ct.s_amp_end)
}

/// Remainder of the vertical leg for the distribution-function integral;
/// the extra `1/|T - is|` factor makes `m = 2` sufficient.
fn vertical_remainder_cdf(ct: &Contour, s_max: f64) -> f64 {
    match ct.m {
        3 => ct.k_nc.exp() * ct.env_c * 2.0 / (s_max.sqrt() * ct.t_corner),
        2 => ct.k_nc.exp() * ct.env_c / s_max,
        _ => unreachable!("cdf inversion needs n >= 2"),
    }
}

fn s_max_for_cdf(ct: &Contour, target: f64) -> f64 {
    let s = match ct.m {
        3 => (ct.k_nc.exp() * ct.env_c * 2.0 / (target * ct.t_corner)).powi(2),
        2 => ct.k_nc.exp() * ct.env_c / target,
        _ => unreachable!(),
    };
    s.max(2.0 * ct.s_lo).max(ct.s_amp_end)
}

/// Geometric break ladder `[0, lo, 2lo, 4lo, ..., hi]`.
fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    let mut b = lo.min(hi);
    if b <= 0.0 || !b.is_finite() {
        breaks.push(hi);
        return breaks;
    }
    while b < hi {
        breaks.push(b);
        b *= 2.0;
        if breaks.len() > 4000 {
            break;
        }
    }
    breaks.push(hi);
    breaks
}

/// Envelope bound on `|int_a^b |f| dt|` for real-leg pruning: `|f|` is
/// strictly decreasing in `t`, so the left endpoint dominates.
fn real_leg_bound(spec: &Spectrum, a: f64, b: f64) -> f64 {
    (b - a) * (-neg_log_cf_modulus(spec, a)).exp()
}

/// Integral of the vertical-leg envelope over `[a, b]`, valid past `s_lo`:
/// the top-m factors give the integrable `env_c s^{-m/2}` part, and every
/// other factor is charged its worst modulus on the panel (which exceeds one
/// only inside that factor's amplification window).
fn vertical_bound(ct: &Contour, x1: f64, a: f64, b: f64) -> f64 {
    if a < ct.s_lo {
        return f64::INFINITY;
    }
    let damp = (-a * x1).exp();
    let scale = ct.k_nc.exp() * ct.env_c * damp * amp_allowance(ct, a, b);
    match ct.m {
        3 => scale * 2.0 * (1.0 / a.sqrt() - 1.0 / b.sqrt()),
        2 => scale * (b / a).ln(),
        _ => f64::INFINITY,
    }
}

/// Per-panel phase budget on the real leg: the integrand's local frequency is
/// at most `x + mean_q`, and a GK15 panel is trusted up to ~2.5 pi of phase.
fn trusted_real_width(freq: f64) -> f64 {
    2.5 * std::f64::consts::PI / freq.max(1e-300)
}

struct LegResult {
    value: Complex64,
    err: f64,
    panels: Vec<(f64, f64)>,
}

/// Real leg `int_0^T e^{-itx} f(t) dt`.
fn real_leg_pdf(spec: &Spectrum, ct: &Contour, x1: f64, eps_abs: f64, max_panels: usize) -> LegResult {
    let freq = x1 + ct.mean_q;
    let b_lo = (0.5 / spec.weights()[0]).min(ct.t_corner * 0.5);
    let breaks = geometric_breaks(b_lo, ct.t_corner);
    let trusted = move |_a: f64| trusted_real_width(freq);
    let hard = |a: f64, b: f64| real_leg_bound(spec, a, b);
    let opts = QuadOpts {
        eps_abs,
        max_panels,
        trusted_width: Some(&trusted),
        hard_bound: Some(&hard),
    };
    let mut f = |t: f64| {
        let phase = Complex64::new(0.0, -t * x1).exp();
        phase * cf_real_quadratic(spec, t)
    };
    let q: Quadrature<Complex64> = integrate_with_breaks(&mut f, &breaks, &opts);
    LegResult {
        value: q.value,
        err: q.err,
        panels: q.panels,
    }
}

/// Vertical leg `int_0^{s_max} e^{-sx} f(T - is) ds` (times nothing yet; the
/// caller applies the `-i e^{-iTx}` prefactor).
fn vertical_leg(
    spec: &Spectrum,
    ct: &Contour,
    x1: f64,
    s_max: f64,
    cdf_mode: bool,
    eps_abs: f64,
    max_panels: usize,
) -> LegResult {
    let mut lo = 0.5 / spec.weights()[0];
    if x1 > 0.0 {
        lo = lo.min(1.0 / x1);
    }
    let breaks = geometric_breaks(lo.min(s_max * 0.5), s_max);
    let hard = |a: f64, b: f64| {
        let base = vertical_bound(ct, x1, a, b);
        if cdf_mode {
            base / ct.t_corner.max(a)
        } else {
            base
        }
    };
    let opts = QuadOpts {
        eps_abs,
        max_panels,
        trusted_width: None,
        hard_bound: Some(&hard),
    };
    let t_corner = ct.t_corner;
    let mut f = |s: f64| {
        let mut lg = log_cf_vertical(spec, t_corner, s);
        lg.re -= s * x1;
        let g = lg.exp();
        if cdf_mode {
            g / Complex64::new(t_corner, -s)
        } else {
            g
        }
    };
    let q: Quadrature<Complex64> = integrate_with_breaks(&mut f, &breaks, &opts);
    LegResult {
        value: q.value,
        err: q.err,
        panels: q.panels,
    }
}

/// Density at `x1 = x - offset >= 0` by contour inversion, with a certified
/// absolute error bound. Requires `n >= 3`.
///
/// The bound sums the panel error charges of both legs, the analytic
/// truncation remainder of the vertical leg, and nothing else; the caller's
/// `eps_quad`/`eps_tail` shape the targets.
pub(crate) fn pdf_inversion(
    spec: &Spectrum,
    x1: f64,
    eps_quad: f64,
    eps_tail: f64,
) -> Result<(f64, f64)> {
    debug_assert!(spec.len() >= 3);
    if x1 <= 0.0 {
        // Density vanishes at and left of the support edge for n >= 3.
        return Ok((0.0, 0.0));
    }
    let ct = contour_for(spec);
    let pi = std::f64::consts::PI;
    let leg_eps = 0.45 * pi * eps_quad;
    let s_max = s_max_for_pdf(&ct, 0.9 * pi * eps_tail);
    let remainder = vertical_remainder_pdf(&ct, s_max);

    let real = real_leg_pdf(spec, &ct, x1, leg_eps, 3000);
    let vert = vertical_leg(spec, &ct, x1, s_max, false, leg_eps, 3000);

    let prefactor = -Complex64::i() * Complex64::new(0.0, -ct.t_corner * x1).exp();
    let value = (real.value + prefactor * vert.value).re / pi;
    let err = (real.err + vert.err + remainder) / pi;
    let target = eps_quad + eps_tail;
    if err > 4.0 * target {
        return Err(Error::NonConvergedQuadrature {
            context: "density inversion",
            estimate: err,
            target,
        });
    }
    Ok((value.max(0.0), err))
}

/// Distribution function at `x1 = x - offset` by contour inversion with a
/// certified absolute error bound. Requires `n >= 2`.
pub(crate) fn cdf_inversion(
    spec: &Spectrum,
    x1: f64,
    eps_quad: f64,
    eps_tail: f64,
) -> Result<(f64, f64)> {
    debug_assert!(spec.len() >= 2);
    if x1 <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let ct = contour_for(spec);
    let pi = std::f64::consts::PI;
    let leg_eps = 0.45 * pi * eps_quad;
    let s_max = s_max_for_cdf(&ct, 0.9 * pi * eps_tail);
    let remainder = vertical_remainder_cdf(&ct, s_max);

    let freq = x1 + ct.mean_q;
    let b_lo = (0.5 / spec.weights()[0]).min(ct.t_corner * 0.5);
    let breaks = geometric_breaks(b_lo, ct.t_corner);
    let trusted = move |_a: f64| trusted_real_width(freq);
    let hard = |a: f64, b: f64| {
        if a <= 0.0 {
            f64::INFINITY
        } else {
            real_leg_bound(spec, a, b) / a
        }
    };
    let opts = QuadOpts {
        eps_abs: leg_eps,
        max_panels: 3000,
        trusted_width: Some(&trusted),
        hard_bound: Some(&hard),
    };
    let mut f_real = |t: f64| {
        let phase = Complex64::new(0.0, -t * x1).exp();
        (phase * cf_real_quadratic(spec, t)).im / t
    };
    let real: Quadrature<f64> = integrate_with_breaks(&mut f_real, &breaks, &opts);
    let vert = vertical_leg(spec, &ct, x1, s_max, true, leg_eps, 3000);

    let prefactor = -Complex64::i() * Complex64::new(0.0, -ct.t_corner * x1).exp();
    let integral = real.value + (prefactor * vert.value).im;
    let value = 0.5 - integral / pi;
    let err = (real.err + vert.err + remainder) / pi;
    let target = eps_quad + eps_tail;
    if err > 4.0 * target {
        return Err(Error::NonConvergedQuadrature {
            context: "distribution inversion",
            estimate: err,
            target,
        });
    }
    Ok((value.clamp(0.0, 1.0), err))
}

/// Reusable node set: the adapted panelizations of both legs with the
/// characteristic function cached at every node, so evaluating the density or
/// distribution at a new point is a weighted sum instead of a fresh
/// adaptive integration.
///
/// The panel layout is adapted for the worst oscillation in `[0, x_max]`; the
/// per-point accuracy is that of the build (`build_err`), without a per-point
/// estimate. Callers that certify results re-evaluate through
/// [`pdf_inversion`] at the points that matter and treat the cache as a
/// scanning device.
pub(crate) struct InversionCache {
    t_corner: f64,
    real_t: Vec<f64>,
    real_w: Vec<f64>,
    real_f: Vec<Complex64>,
    vert_s: Vec<f64>,
    vert_w: Vec<f64>,
    vert_g: Vec<Complex64>,
    vert_g_over: Vec<Complex64>,
    /// Summed panel error charges of the build runs plus the vertical
    /// truncation remainder, divided by pi: the accuracy of every lookup.
    pub build_err: f64,
}

pub(crate) fn build_cache(spec: &Spectrum, x_max1: f64, eps_quad: f64, eps_tail: f64) -> Result<InversionCache> {
    debug_assert!(spec.len() >= 2);
    let ct = contour_for(spec);
    let pi = std::f64::consts::PI;
    let leg_eps = 0.45 * pi * eps_quad;
    let n = spec.len();
    // Density-scale truncation for n >= 3; distribution-scale for n = 2,
    // where the cache only ever serves cdf queries.
    let (s_max, remainder) = if n >= 3 {
        let sm = s_max_for_pdf(&ct, 0.9 * pi * eps_tail);
        (sm, vertical_remainder_pdf(&ct, sm))
    } else {
        let sm = s_max_for_cdf(&ct, 0.9 * pi * eps_tail);
        (sm, vertical_remainder_cdf(&ct, sm))
    };

    let real = real_leg_pdf(spec, &ct, x_max1, leg_eps, 4000);
    // Vertical panels: adapt once without damping (covers the far tail),
    // then re-adapt with the strongest damping starting from those panels
    // (resolves the boundary layer near s ~ 1/x_max).
    let v0 = vertical_leg(spec, &ct, 0.0, s_max, false, leg_eps, 4000);
    let mut breaks: Vec<f64> = v0.panels.iter().map(|p| p.0).collect();
    breaks.push(s_max);
    let hard = |a: f64, b: f64| vertical_bound(&ct, x_max1, a, b);
    let opts = QuadOpts {
        eps_abs: leg_eps,
        max_panels: 6000,
        trusted_width: None,
        hard_bound: Some(&hard),
    };
    let t_corner = ct.t_corner;
    let mut g_damped = |s: f64| {
        let mut lg = log_cf_vertical(spec, t_corner, s);
        lg.re -= s * x_max1;
        lg.exp()
    };
    let v1: Quadrature<Complex64> = integrate_with_breaks(&mut g_damped, &breaks, &opts);

    let mut real_t = Vec::new();
    let mut real_w = Vec::new();
    let mut real_f = Vec::new();
    for &(a, b) in &real.panels {
        for (t, w) in crate::quad::panel_nodes(a, b) {
            real_t.push(t);
            real_w.push(w);
            real_f.push(cf_real_quadratic(spec, t));
        }
    }
    let mut vert_s = Vec::new();
    let mut vert_w = Vec::new();
    let mut vert_g = Vec::new();
    let mut vert_g_over = Vec::new();
    for &(a, b) in &v1.panels {
        for (s, w) in crate::quad::panel_nodes(a, b) {
            let g = log_cf_vertical(spec, t_corner, s).exp();
            vert_s.push(s);
            vert_w.push(w);
            vert_g.push(g);
            vert_g_over.push(g / Complex64::new(t_corner, -s));
        }
    }
    let build_err = (real.err + v0.err.max(v1.err) + remainder) / pi;
    let target = eps_quad + eps_tail;
    if build_err > 4.0 * target {
        return Err(Error::NonConvergedQuadrature {
            context: "inversion cache build",
            estimate: build_err,
            target,
        });
    }
    Ok(InversionCache {
        t_corner,
        real_t,
        real_w,
        real_f,
        vert_s,
        vert_w,
        vert_g,
        vert_g_over,
        build_err,
    })
}

impl InversionCache {
    /// Density at a single `x1` through the cached nodes.
    pub fn pdf(&self, x1: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut acc_r = 0.0;
        for i in 0..self.real_t.len() {
            let (sin, cos) = (self.real_t[i] * x1).sin_cos();
            let f = self.real_f[i];
            // Re(e^{-itx} f) = cos * f.re + sin * f.im
            acc_r += self.real_w[i] * (cos * f.re + sin * f.im);
        }
        let mut acc_v = Complex64::new(0.0, 0.0);
        for i in 0..self.vert_s.len() {
            acc_v += self.vert_w[i] * (-self.vert_s[i] * x1).exp() * self.vert_g[i];
        }
        let prefactor = -Complex64::i() * Complex64::new(0.0, -self.t_corner * x1).exp();
        ((acc_r + (prefactor * acc_v).re) / pi).max(0.0)
    }

    /// Density on the uniform grid `x1 = x0 + j h`, `j = 0..count`, sharing
    /// the per-node phase rotations across grid points.
    pub fn pdf_grid(&self, x0: f64, h: f64, count: usize) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        let nr = self.real_t.len();
        let nv = self.vert_s.len();
        // e^{-i t x} evolves by a fixed rotation per grid step.
        let mut phase: Vec<Complex64> = self
            .real_t
            .iter()
            .map(|&t| Complex64::new(0.0, -t * x0).exp())
            .collect();
        let step: Vec<Complex64> = self
            .real_t
            .iter()
            .map(|&t| Complex64::new(0.0, -t * h).exp())
            .collect();
        let mut damp: Vec<f64> = self.vert_s.iter().map(|&s| (-s * x0).exp()).collect();
        let dstep: Vec<f64> = self.vert_s.iter().map(|&s| (-s * h).exp()).collect();
        let mut corner_phase = Complex64::new(0.0, -self.t_corner * x0).exp();
        let corner_step = Complex64::new(0.0, -self.t_corner * h).exp();

        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut acc_r = 0.0;
            for i in 0..nr {
                let f = self.real_f[i];
                let p = phase[i];
                acc_r += self.real_w[i] * (p.re * f.re - p.im * f.im);
            }
            let mut acc_v = Complex64::new(0.0, 0.0);
            for i in 0..nv {
                acc_v += self.vert_w[i] * damp[i] * self.vert_g[i];
            }
            let prefactor = -Complex64::i() * corner_phase;
            out.push(((acc_r + (prefactor * acc_v).re) / pi).max(0.0));
            for i in 0..nr {
                phase[i] *= step[i];
            }
            for i in 0..nv {
                damp[i] *= dstep[i];
            }
            corner_phase *= corner_step;
        }
        out
    }

    /// Distribution function at `x1` through the cached nodes.
    pub fn cdf(&self, x1: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut acc_r = 0.0;
        for i in 0..self.real_t.len() {
            let (sin, cos) = (self.real_t[i] * x1).sin_cos();
            let f = self.real_f[i];
            // Im(e^{-itx} f) = cos * f.im - sin * f.re
            acc_r += self.real_w[i] * (cos * f.im - sin * f.re) / self.real_t[i];
        }
        let mut acc_v = Complex64::new(0.0, 0.0);
        for i in 0..self.vert_s.len() {
            acc_v += self.vert_w[i] * (-self.vert_s[i] * x1).exp() * self.vert_g_over[i];
        }
        let prefactor = -Complex64::i() * Complex64::new(0.0, -self.t_corner * x1).exp();
        (0.5 - (acc_r + (prefactor * acc_v).im) / pi).clamp(0.0, 1.0)
    }
}

/// Rigorous modulus of continuity of the density from the characteristic
/// function:
///
/// ```text
///     |p(x + d) - p(x)| <= (1/pi) int_0^inf min(t |d|, 2) |f(t)| dt
/// ```
///
/// (from `|e^{-itd} - 1| <= min(t|d|, 2)`). Converges for n >= 3; useful
/// (O(delta)) for n >= 5, where `int t |f| dt` is finite.
pub(crate) fn continuity_modulus(spec: &Spectrum, delta: f64) -> f64 {
    debug_assert!(spec.len() >= 3);
    let pi = std::f64::consts::PI;
    let w = spec.weights();
    let c = (8.0 * w[0] * w[1] * w[2]).sqrt();
    let knee = 2.0 / delta;
    // Truncate where the envelope remainder is negligible against the knee
    // part: int_T^inf 2 |f| <= 4 / (c sqrt(T)).
    let mut t_hi = knee.max(1.0 / w[0]);
    let mut remainder = 4.0 / (c * t_hi.sqrt());
    for _ in 0..200 {
        if remainder <= 1e-4 * delta.min(1.0) || remainder <= 1e-14 {
            break;
        }
        t_hi *= 4.0;
        remainder = 4.0 / (c * t_hi.sqrt());
    }
    let hard = |a: f64, b: f64| {
        (b - a) * (a * delta).min(2.0) * (-neg_log_cf_modulus(spec, a)).exp()
    };
    let opts = QuadOpts {
        eps_abs: 1e-3 * delta.min(1.0),
        max_panels: 1500,
        trusted_width: None,
        hard_bound: Some(&hard),
    };
    let mut f = |t: f64| (t * delta).min(2.0) * (-neg_log_cf_modulus(spec, t)).exp();
    let breaks = geometric_breaks((0.5 / w[0]).min(t_hi * 0.5), t_hi);
    let q: Quadrature<f64> = integrate_with_breaks(&mut f, &breaks, &opts);
    (q.value + q.err + remainder) / pi
}

/// Exponentially tilted tail bound on the density: for every `y1 >= 0`,
///
/// ```text
///     p(offset + y1) <= u * e^{-h y1},     h = 1/(4 lambda_1),
/// ```
///
/// with `u = (1/pi) int_0^inf |f(t - ih)| dt` obtained by shifting the
/// inversion contour down by `h` — legal since `h` stays inside the
/// analyticity strip (branch points at `1/(2 lambda_k) >= 2h`). Used to
/// certify that no density mass hides beyond the scan window. Needs n >= 3.
pub(crate) struct TiltedBound {
    pub u: f64,
    pub h: f64,
}

impl TiltedBound {
    pub fn at(&self, y1: f64) -> f64 {
        self.u * (-self.h * y1).exp()
    }
}

pub(crate) fn tilted_bound(spec: &Spectrum) -> TiltedBound {
    debug_assert!(spec.len() >= 3);
    let pi = std::f64::consts::PI;
    let w = spec.weights();
    let h = 0.25 / w[0];
    let modulus = |t: f64| -> f64 {
        let mut neg_log = 0.0;
        for (&l, &a) in spec.weights().iter().zip(spec.shifts()) {
            let re = 1.0 - 2.0 * l * h;
            let norm2 = re * re + 4.0 * l * l * t * t;
            neg_log += 0.25 * norm2.ln();
            if a != 0.0 {
                // Re of l a^2 (h + it) / ((1 - 2lh) - 2ilt)
                neg_log -= l * a * a * (h * re - 2.0 * l * t * t) / norm2;
            }
        }
        (-neg_log).exp()
    };
    let c = (8.0 * w[0] * w[1] * w[2]).sqrt();
    let shift_sum: f64 = spec
        .weights()
        .iter()
        .zip(spec.shifts())
        .map(|(&l, &a)| a * a / l)
        .sum();
    let mut t_hi = 4.0 / w[0];
    let mut remainder;
    loop {
        let k_u = 0.25 * h * shift_sum / (t_hi * t_hi);
        remainder = k_u.exp() * 2.0 / (c * t_hi.sqrt());
        if remainder <= 1e-12 * (1.0 + 1.0 / w[0]) || t_hi > 1e40 {
            break;
        }
        t_hi *= 4.0;
    }
    let hard = |a: f64, b: f64| (b - a) * modulus(a);
    let opts = QuadOpts {
        eps_abs: 1e-9,
        max_panels: 1500,
        trusted_width: None,
        hard_bound: Some(&hard),
    };
    let mut f = |t: f64| modulus(t);
    let breaks = geometric_breaks(0.5 / w[0], t_hi);
    let q: Quadrature<f64> = integrate_with_breaks(&mut f, &breaks, &opts);
    TiltedBound {
        u: (q.value + q.err + remainder) / pi,
        h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Spectrum;

    #[test]
    fn corner_ignores_weight_spread() {
        // A 10^4 weight spread must not inflate the corner: the real leg
        // would otherwise grow with lambda_1/lambda_n.
        let s = Spectrum::central(vec![1.0, 0.5, 1e-4]).unwrap();
        let ct = contour_for(&s);
        assert_eq!(ct.t_corner, 1.5);
        assert!((ct.s_amp_end - 1e4).abs() < 1e-6);
    }

    #[test]
    fn vertical_envelope_covers_amplifying_factors() {
        // With a small corner the tiny weights amplify on the vertical leg
        // near s = 1/(2 lambda_k); the panel bound must still dominate the
        // true integrand through those windows.
        let s = Spectrum::new(
            vec![1.0, 0.6, 0.2, 1e-3, 2e-4],
            vec![0.4, 0.0, -0.3, 0.0, 0.0],
            0.0,
        )
        .unwrap();
        let ct = contour_for(&s);
        assert!(ct.t_corner < 2.0, "corner {}", ct.t_corner);
        let mut a = ct.s_lo;
        while a < 4.0 * ct.s_amp_end {
            let b = 2.0 * a;
            let bound = vertical_bound(&ct, 0.0, a, b);
            // Midpoint sample of int_a^b |f(T - is)| ds. The amplification
            // windows span an O(1) fraction of their panel, so 64 samples
            // cannot miss them.
            let steps = 64;
            let mut riemann = 0.0;
            for j in 0..steps {
                let sv = a + (b - a) * (j as f64 + 0.5) / steps as f64;
                riemann += log_cf_vertical(&s, ct.t_corner, sv).exp().norm();
            }
            riemann *= (b - a) / steps as f64;
            assert!(
                bound >= 0.98 * riemann,
                "bound {bound} under integrand {riemann} on [{a}, {b}]"
            );
            a = b;
        }
    }

    #[test]
    fn wide_spread_contour_still_closes() {
        // Rectangle identity with a 5000:1 weight spread and shifts: the
        // vertical leg at T equals the real band [T, 4T] plus the leg at 4T.
        let s = Spectrum::new(vec![1.0, 0.7, 2e-4], vec![0.5, -0.3, 0.0], 0.0).unwrap();
        let ct = contour_for(&s);
        let x1 = 0.9;
        let tail_at = |t_corner: f64| -> Complex64 {
            let ct2 = Contour { t_corner, ..contour_for(&s) };
            let s_max = s_max_for_pdf(&ct2, 1e-11);
            let leg = vertical_leg(&s, &ct2, x1, s_max, false, 1e-12, 4000);
            let pref = -Complex64::i() * Complex64::new(0.0, -t_corner * x1).exp();
            pref * leg.value
        };
        let t1 = ct.t_corner;
        let t2 = 4.0 * t1;
        let mut f = |t: f64| Complex64::new(0.0, -t * x1).exp() * cf_real_quadratic(&s, t);
        let opts = QuadOpts {
            eps_abs: 1e-12,
            max_panels: 4000,
            trusted_width: None,
            hard_bound: None,
        };
        let band: Quadrature<Complex64> = integrate_with_breaks(&mut f, &[t1, t2], &opts);
        let lhs = tail_at(t1);
        let rhs = band.value + tail_at(t2);
        assert!(
            (lhs - rhs).norm() < 1e-9,
            "contour mismatch: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn vertical_leg_matches_real_tail_for_chi2() {
        // For weights (1,1,1) the real-axis integral of e^{-itx} f(t) over
        // [T, T'] plus the vertical legs at T and T' must agree (both equal
        // the integral to infinity): closes the contour rectangle.
        let s = Spectrum::central(vec![1.0; 3]).unwrap();
        let ct = contour_for(&s);
        let x1 = 1.3;
        let tail_at = |t_corner: f64| -> Complex64 {
            let ct2 = Contour { t_corner, ..contour_for(&s) };
            let s_max = s_max_for_pdf(&ct2, 1e-11);
            let leg = vertical_leg(&s, &ct2, x1, s_max, false, 1e-12, 4000);
            let pref = -Complex64::i() * Complex64::new(0.0, -t_corner * x1).exp();
            pref * leg.value
        };
        let t1 = ct.t_corner;
        let t2 = 4.0 * t1;
        let mut f = |t: f64| Complex64::new(0.0, -t * x1).exp() * cf_real_quadratic(&s, t);
        let opts = QuadOpts {
            eps_abs: 1e-12,
            max_panels: 4000,
            trusted_width: None,
            hard_bound: None,
        };
        let band: Quadrature<Complex64> = integrate_with_breaks(&mut f, &[t1, t2], &opts);
        let lhs = tail_at(t1);
        let rhs = band.value + tail_at(t2);
        assert!(
            (lhs - rhs).norm() < 1e-9,
            "contour mismatch: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn pdf_inversion_matches_chi2_3() {
        // Density of chi-square(3): p(x) = sqrt(x/(2 pi)) e^{-x/2}.
        let s = Spectrum::central(vec![1.0; 3]).unwrap();
        for &x in &[0.5, 1.0, 2.0, 5.0, 12.0] {
            let want = (x / (2.0 * std::f64::consts::PI)).sqrt() * (-x / 2.0).exp();
            let (got, err) = pdf_inversion(&s, x, 1e-9, 1e-10).unwrap();
            assert!(
                (got - want).abs() <= err.max(1e-9),
                "x = {x}: {got} vs {want} (err {err})"
            );
        }
    }

    #[test]
    fn pdf_inversion_matches_chi2_5() {
        // chi-square(5): p(x) = x^{3/2} e^{-x/2} / (3 sqrt(2 pi)).
        let s = Spectrum::central(vec![1.0; 5]).unwrap();
        for &x in &[1.0f64, 3.0, 4.0, 9.0] {
            let want = x.powf(1.5) * (-x / 2.0).exp() / (3.0 * (2.0 * std::f64::consts::PI).sqrt());
            let (got, err) = pdf_inversion(&s, x, 1e-9, 1e-10).unwrap();
            assert!(
                (got - want).abs() <= err.max(1e-9),
                "x = {x}: {got} vs {want} (err {err})"
            );
        }
    }

    #[test]
    fn cdf_inversion_matches_exponential() {
        // Weights (1,1): W is exponential with mean 2, F(x) = 1 - e^{-x/2}.
        let s = Spectrum::central(vec![1.0, 1.0]).unwrap();
        for &x in &[0.4, 2.0 * 2f64.ln(), 5.0, 11.0] {
            let want = 1.0 - (-x / 2.0).exp();
            let (got, err) = cdf_inversion(&s, x, 1e-9, 1e-10).unwrap();
            assert!(
                (got - want).abs() <= err.max(1e-8),
                "x = {x}: {got} vs {want} (err {err})"
            );
        }
    }

    #[test]
    fn cache_agrees_with_direct_inversion() {
        let s = Spectrum::new(vec![1.5, 1.0, 0.5, 0.25], vec![0.3, 0.0, -1.0, 0.7], 0.0).unwrap();
        let cache = build_cache(&s, 25.0, 1e-9, 1e-10).unwrap();
        for &x in &[0.7, 2.9, 6.3, 14.0, 24.0] {
            let (pdf, perr) = pdf_inversion(&s, x, 1e-10, 1e-11).unwrap();
            let (cdf, cerr) = cdf_inversion(&s, x, 1e-10, 1e-11).unwrap();
            assert!(
                (cache.pdf(x) - pdf).abs() < 1e-6 + 10.0 * perr,
                "pdf cache {} vs {} at {x}",
                cache.pdf(x),
                pdf
            );
            assert!(
                (cache.cdf(x) - cdf).abs() < 1e-6 + 10.0 * cerr,
                "cdf cache {} vs {} at {x}",
                cache.cdf(x),
                cdf
            );
        }
    }

    #[test]
    fn pdf_grid_matches_pointwise_cache() {
        let s = Spectrum::central(vec![2.0, 1.0, 0.7, 0.1]).unwrap();
        let cache = build_cache(&s, 20.0, 1e-8, 1e-9).unwrap();
        let grid = cache.pdf_grid(0.5, 0.37, 40);
        for (j, &g) in grid.iter().enumerate() {
            let direct = cache.pdf(0.5 + 0.37 * j as f64);
            assert!(
                (g - direct).abs() < 1e-10 * (1.0 + direct),
                "grid point {j}: {g} vs {direct}"
            );
        }
    }

    #[test]
    fn continuity_modulus_scales_with_delta() {
        let s = Spectrum::central(vec![1.0; 6]).unwrap();
        let w1 = continuity_modulus(&s, 1e-2);
        let w2 = continuity_modulus(&s, 1e-3);
        assert!(w2 < w1 && w2 > 0.0);
        // For n = 6 the integral int t |f| dt is finite, so the modulus is
        // roughly linear in delta.
        assert!(w1 / w2 > 5.0 && w1 / w2 < 20.0, "ratio {}", w1 / w2);
    }

    #[test]
    fn tilted_bound_dominates_true_density() {
        let s = Spectrum::central(vec![1.0; 4]).unwrap();
        let tb = tilted_bound(&s);
        // chi-square(4): p(x) = x e^{-x/2} / 4.
        for &x in &[1.0f64, 5.0, 20.0, 40.0] {
            let p = x * (-x / 2.0).exp() / 4.0;
            assert!(
                tb.at(x) >= p,
                "tilted bound {} below density {p} at x = {x}",
                tb.at(x)
            );
        }
        // And it actually decays fast enough to be useful at the window edge.
        assert!(tb.at(60.0) < 1e-5);
    }
}
