//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 15-point Kronrod rule (embedded 7-point Gauss) drives a worst-panel-first
//! bisection loop. Two hooks make it safe for the oscillatory Fourier
//! integrands used by the inversion engine:
//!
//! * `trusted_width`: the Kronrod error estimate is only believed on panels
//!   narrower than this; wider panels can alias an oscillation and produce a
//!   spuriously small estimate. On a wider panel only the hard bound counts.
//! * `hard_bound`: a rigorous bound on `int_a^b |f|`; a panel whose bound is
//!   already negligible is settled cheaply because the error charge
//!   `bound + |panel value|` certifies it regardless of resolution.
//!
//! Both hooks are optional; smooth integrands run with neither. Callers
//! integrating power-law tails over many decades should supply break points
//! on a logarithmic ladder so no single panel spans more than a scale factor
//! of ~2; the Kronrod estimate on a wildly under-resolved smooth panel can be
//! deceptively small.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (nonnegative half).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (odd-index abscissae).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Value types the panel integrator can accumulate: real or complex.
pub(crate) trait PanelValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn norm(self) -> f64;
}

impl PanelValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl PanelValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

/// One evaluated panel.
struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    /// Error charged to this panel (estimate or hard bound, see `eval_panel`).
    err: f64,
    /// Whether bisecting this panel can still improve the result.
    splittable: bool,
}

/// Result of an adaptive integration.
pub(crate) struct Quadrature<V> {
    pub value: V,
    /// Sum of per-panel error charges.
    pub err: f64,
    /// Final panels, sorted by left endpoint.
    pub panels: Vec<(f64, f64)>,
}

/// Integration controls. `eps_abs` is the target for the summed panel errors.
pub(crate) struct QuadOpts<'a> {
    pub eps_abs: f64,
    pub max_panels: usize,
    /// Maximum panel width (as a function of the left endpoint) on which the
    /// Kronrod error estimate is trusted.
    pub trusted_width: Option<&'a dyn Fn(f64) -> f64>,
    /// Rigorous bound on `|integral over [a, b]|`.
    pub hard_bound: Option<&'a dyn Fn(f64, f64) -> f64>,
}

impl Default for QuadOpts<'_> {
    fn default() -> Self {
        QuadOpts {
            eps_abs: 1e-10,
            max_panels: 2000,
            trusted_width: None,
            hard_bound: None,
        }
    }
}

/// Core 15-point Kronrod evaluation on `[a, b]`.
///
/// Returns the Kronrod value, the QUADPACK-style error estimate, and the
/// integral of `|f|` (used for round-off floors).
fn gk15<V: PanelValue>(f: &mut dyn FnMut(f64) -> V, a: f64, b: f64) -> (V, f64) {
    let hlgth = 0.5 * (b - a);
    let centr = 0.5 * (a + b);

    let fc = f(centr);
    let mut fv1 = [V::zero(); 7];
    let mut fv2 = [V::zero(); 7];
    let mut resg = fc.scale(WG[3]);
    let mut resk = fc.scale(WGK[7]);
    let mut resabs = fc.norm() * WGK[7];
    for j in 0..7 {
        let absc = hlgth * XGK[j];
        fv1[j] = f(centr - absc);
        fv2[j] = f(centr + absc);
        let fsum = fv1[j].add(fv2[j]);
        if j % 2 == 1 {
            resg = resg.add(fsum.scale(WG[j / 2]));
        }
        resk = resk.add(fsum.scale(WGK[j]));
        resabs += WGK[j] * (fv1[j].norm() + fv2[j].norm());
    }
    let reskh = resk.scale(0.5);
    let mut resasc = WGK[7] * fc.sub(reskh).norm();
    for j in 0..7 {
        resasc += WGK[j] * (fv1[j].sub(reskh).norm() + fv2[j].sub(reskh).norm());
    }
    let result = resk.scale(hlgth);
    resabs *= hlgth.abs();
    resasc *= hlgth.abs();
    let mut err = resk.sub(resg).norm() * hlgth.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round_floor = 50.0 * f64::EPSILON * resabs;
    if round_floor > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(round_floor);
    }
    (result, err)
}

/// Evaluates a panel and decides the error charge per the two hooks.
fn eval_panel<V: PanelValue>(
    f: &mut dyn FnMut(f64) -> V,
    a: f64,
    b: f64,
    opts: &QuadOpts,
) -> Panel<V> {
    let width = b - a;
    let bound = opts.hard_bound.map(|h| h(a, b));
    let trusted = match opts.trusted_width {
        Some(tw) => width <= tw(a).max(1e-300),
        None => true,
    };
    let (value, est) = gk15(f, a, b);
    // `bound + |value|` certifies the panel independently of resolution:
    // |true - value| <= |true| + |value| <= bound + |value|.
    let certified = bound.map(|hb| hb + value.norm());
    let err = match (trusted, certified) {
        (true, Some(cert)) => est.min(cert),
        (true, None) => est,
        // Estimate not trustworthy at this width: only the bound counts.
        (false, Some(cert)) => cert,
        (false, None) => f64::INFINITY,
    };
    Panel {
        a,
        b,
        value,
        err,
        splittable: true,
    }
}

/// Heap ordering: largest error first.
struct ByErr(usize, f64);
impl PartialEq for ByErr {
    fn eq(&self, other: &Self) -> bool {
        self.1 == other.1
    }
}
impl Eq for ByErr {}
impl PartialOrd for ByErr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByErr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.1.total_cmp(&other.1)
    }
}

/// Adaptive integration over the union of `[breaks[i], breaks[i+1]]`.
///
/// Panels are bisected worst-error-first until the summed error charge drops
/// below `opts.eps_abs`, no panel can be improved, or `opts.max_panels` is
/// reached. The result reports whatever error level was actually achieved;
/// callers decide whether that is acceptable.
pub(crate) fn integrate_with_breaks<V: PanelValue>(
    f: &mut dyn FnMut(f64) -> V,
    breaks: &[f64],
    opts: &QuadOpts,
) -> Quadrature<V> {
    assert!(breaks.len() >= 2, "need at least one segment");
    let mut panels: Vec<Panel<V>> = Vec::new();
    for pair in breaks.windows(2) {
        if pair[1] > pair[0] {
            panels.push(eval_panel(f, pair[0], pair[1], opts));
        }
    }
    let mut heap: BinaryHeap<ByErr> = panels
        .iter()
        .enumerate()
        .map(|(i, p)| ByErr(i, p.err))
        .collect();

    loop {
        let total: f64 = panels.iter().map(|p| p.err).sum();
        if total <= opts.eps_abs || panels.len() >= opts.max_panels {
            break;
        }
        let Some(ByErr(idx, err_when_pushed)) = heap.pop() else {
            break;
        };
        // Stale heap entry (panel already replaced): skip.
        if panels[idx].err != err_when_pushed || !panels[idx].splittable {
            continue;
        }
        let (a, b) = (panels[idx].a, panels[idx].b);
        let mid = 0.5 * (a + b);
        if !(a < mid && mid < b) {
            // Width exhausted at machine precision; freeze this panel.
            panels[idx].splittable = false;
            continue;
        }
        let left = eval_panel(f, a, mid, opts);
        let right = eval_panel(f, mid, b, opts);
        panels[idx] = left;
        heap.push(ByErr(idx, panels[idx].err));
        panels.push(right);
        heap.push(ByErr(panels.len() - 1, panels.last().unwrap().err));
    }

    let mut value = V::zero();
    let mut err = 0.0;
    for p in &panels {
        value = value.add(p.value);
        err += p.err;
    }
    let mut spans: Vec<(f64, f64)> = panels.iter().map(|p| (p.a, p.b)).collect();
    spans.sort_by(|x, y| x.0.total_cmp(&y.0));
    Quadrature {
        value,
        err,
        panels: spans,
    }
}

/// Convenience wrapper for a single interval.
pub(crate) fn integrate<V: PanelValue>(
    f: &mut dyn FnMut(f64) -> V,
    a: f64,
    b: f64,
    opts: &QuadOpts,
) -> Quadrature<V> {
    integrate_with_breaks(f, &[a, b], opts)
}

/// The 15 Kronrod nodes and weights for a panel `[a, b]`, in ascending order.
pub(crate) fn panel_nodes(a: f64, b: f64) -> [(f64, f64); 15] {
    let hlgth = 0.5 * (b - a);
    let centr = 0.5 * (a + b);
    let mut out = [(0.0, 0.0); 15];
    for j in 0..7 {
        out[j] = (centr - hlgth * XGK[j], WGK[j] * hlgth);
        out[14 - j] = (centr + hlgth * XGK[j], WGK[j] * hlgth);
    }
    out[7] = (centr, WGK[7] * hlgth);
    out
}
