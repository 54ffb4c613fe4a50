//! Cahen-Mellin check for the smoothed linear twist:
//! `F_X(s, alpha) = (1/2 pi i) int_{Re w = c} F(s + w) Gamma(w) z_X^{-w} dw`
//! with `c = 2 - sigma` (`c = 1/2` once `sigma >= 2`) and `z_X = 1/X + 2 pi i alpha`.
//!
//! The line integral is a trapezoid sum in `v = Im w`. `F(s + w)` is summed
//! per node by Euler-Maclaurin from a table of `n^{-s-w}` that is advanced by
//! the factor `n^{-i h}` from node to node.

use rug::Float;

use crate::bernoulli::bernoulli_numbers;
use crate::catalog::{CoeffSource, LSeries};
use crate::error::{Error, Result};
use crate::mp::{two_pi, Cx, Prec};
use crate::special::{em_plan, em_tail_with, gamma};
use crate::twists::{smoothed_twist_eval, z_x};

/// Working precision of the quadrature side.
pub const QUAD_PREC: Prec = 128;
/// Target bits for each Euler-Maclaurin evaluation on the line.
const EM_BITS: u32 = 80;
/// `|Gamma(c + iv)| <= K sqrt(2 pi) |v|^{c - 1/2} e^{-pi |v| / 2}` for `|v| >= max(1, 2c^2)`.
pub const GAMMA_BOUND_FACTOR: f64 = 1.5;
/// Terms of the direct sum used on the doubled part of the range.
const CRUDE_TERMS: usize = 64;
/// Upper limit on the summed Dirichlet-polynomial lengths over all nodes.
const MAX_WORK: f64 = 4e9;

#[derive(Clone, Debug)]
pub struct MellinOptions {
    /// Nodes per unit length of `Im w`; derived from the strip of analyticity when `None`.
    pub quad_points: Option<usize>,
    /// Budget for the certified tail and for the change under range doubling.
    pub tol: f64,
    /// Accept `alpha = 0` (pure Abel smoothing).
    pub allow_degenerate: bool,
}

impl Default for MellinOptions {
    fn default() -> Self {
        MellinOptions { quad_points: None, tol: 1e-13, allow_degenerate: false }
    }
}

#[derive(Clone, Debug)]
pub struct MellinOutcome {
    /// `F_X(s, alpha)` from its series.
    pub smoothed: Cx,
    pub smoothed_radius: f64,
    /// Trapezoid sum over `-V_- <= v <= V_+`.
    pub integral: Cx,
    /// Same nodes continued to `-2 V_- <= v <= 2 V_+`.
    pub doubled: Cx,
    pub residual: f64,
    pub doubling_change: f64,
    /// Certified bound for `|v| > V` on the line.
    pub tail_bound: f64,
    /// Trapezoid discretisation bound.
    pub discretization_bound: f64,
    /// Accumulated evaluation radius of `F(s + w)` over the nodes.
    pub eval_radius: f64,
    pub step: f64,
    pub range: (f64, f64),
    pub nodes: usize,
}

impl MellinOutcome {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual < tol && self.doubling_change < tol
    }
}

/// `ln Gamma` by Stirling's series with coefficients fixed once.
struct LnGamma {
    prec: Prec,
    coeffs: Vec<Float>,
    shift_to: f64,
}

impl LnGamma {
    fn new(prec: Prec) -> Self {
        let kmax = prec as usize / 2 + 8;
        let b = bernoulli_numbers(2 * kmax);
        let coeffs = (1..=kmax)
            .map(|k| Float::with_val(prec, &b[2 * k]) / ((2 * k) * (2 * k - 1)) as u64)
            .collect();
        LnGamma { prec, coeffs, shift_to: 0.12 * f64::from(prec) + 8.0 }
    }

    /// Up to a multiple of `2 pi i`; `Re w > 0`.
    fn eval(&self, w: &Cx) -> Cx {
        let p = self.prec;
        let w = w.with_prec(p);
        let mut shift = 0i64;
        if w.abs().to_f64() < self.shift_to {
            shift = (self.shift_to - w.re.to_f64()).ceil().max(0.0) as i64;
        }
        let ws = w.add_i64(shift);
        let ln_w = ws.ln();
        let mut acc = &ws.add_real(&Float::with_val(p, -0.5f64)) * &ln_w;
        acc -= &ws;
        acc.re += Float::with_val(p, two_pi(p).ln_ref()) / 2u32;
        let inv = ws.recip();
        let inv2 = &inv * &inv;
        let mut pw = inv;
        let floor = acc.abs().to_f64().max(1.0).log2() - f64::from(p);
        for c in &self.coeffs {
            let term = pw.scale(c);
            acc += &term;
            if term.abs().to_f64().log2() < floor {
                break;
            }
            pw = &pw * &inv2;
        }
        if shift > 0 {
            let mut prod = w.clone();
            for k in 1..shift {
                prod = &prod * &w.add_i64(k);
            }
            acc -= &prod.ln();
        }
        acc
    }
}

/// `x <- x y` without allocating.
fn mul_in_place(x: &mut Cx, y: &Cx, t0: &mut Float, t1: &mut Float) {
    use rug::Assign;
    t0.assign(&x.re * &y.im);
    t1.assign(&x.im * &y.im);
    x.re *= &y.re;
    x.re -= &*t1;
    x.im *= &y.re;
    x.im += &*t0;
}

/// Bound for `(1/2 pi) int_{v >= V} |F| |Gamma(c + iv)| |z|^{-c} e^{v arg z} dv`
/// with decay rate `lambda = pi/2 - arg z`.
fn tail_bound(f_max: f64, c: f64, abs_z: f64, lambda: f64, v: f64) -> f64 {
    let e = (c - 0.5).max(0.0);
    let rate = lambda - e / v;
    if v < envelope_start(c) || rate <= 0.0 {
        return f64::INFINITY;
    }
    let pref = f_max * GAMMA_BOUND_FACTOR * (2.0 * std::f64::consts::PI).sqrt() * abs_z.powf(-c)
        / (2.0 * std::f64::consts::PI);
    pref * v.powf(e) * (-lambda * v).exp() / rate
}

fn envelope_start(c: f64) -> f64 {
    (2.0 * c * c).max(1.0)
}

/// Smallest `V` (to 0.1%) with `tail_bound(V) <= tol`.
fn truncation_point(f_max: f64, c: f64, abs_z: f64, lambda: f64, tol: f64) -> f64 {
    let start = envelope_start(c);
    let mut hi = start;
    while tail_bound(f_max, c, abs_z, lambda, hi) > tol {
        hi *= 1.5;
    }
    let mut lo = (hi / 1.5).max(start);
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if tail_bound(f_max, c, abs_z, lambda, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `(1/2 pi) int |Gamma(a + iv) z^{-a - iv}| dv` bounded with `Gamma(a)` on
/// `|v| < max(1, 2a^2)` and the Stirling envelope beyond.
fn line_mass(a: f64, abs_z: f64, arg_z: f64) -> f64 {
    let ga = gamma(&Cx::from_f64(64, a, 0.0)).re.to_f64();
    let zf = abs_z.powf(-a);
    let v0 = envelope_start(a);
    let mut total = 0.0;
    let env = GAMMA_BOUND_FACTOR * (2.0 * std::f64::consts::PI).sqrt() * zf;
    for sign in [1.0f64, -1.0] {
        let lambda = std::f64::consts::FRAC_PI_2 - sign * arg_z;
        // int_0^{v0} Gamma(a) |z|^{-a} e^{-sign arg z v} dv
        let slope = -sign * arg_z;
        total += ga * zf * if slope.abs() < 1e-12 { v0 } else { ((slope * v0).exp() - 1.0) / slope };
        let mut v = v0;
        let dv = (0.25 / lambda).min(0.5);
        loop {
            let g = env * v.powf(a - 0.5) * (-lambda * v).exp();
            total += g * dv * 1.5;
            if g < 1e-40 && v > 2.0 / lambda {
                break;
            }
            v += dv;
        }
    }
    total / (2.0 * std::f64::consts::PI)
}

/// `sum_{n <= N} d(n) n^{-sigma}` in f64.
fn divisor_partial(n_max: usize, sigma: f64) -> f64 {
    let mut d = vec![0u32; n_max + 1];
    for a in 1..=n_max {
        for m in (a..=n_max).step_by(a) {
            d[m] += 1;
        }
    }
    (1..=n_max).map(|n| f64::from(d[n]) * (n as f64).powf(-sigma)).sum()
}

/// Sweeps the nodes `v = dir * j h`, `j0 <= j <= j2`; the Euler-Maclaurin
/// evaluation is used up to `j1` and the crude direct sum beyond.
struct Sweep<'a> {
    u: &'a [i64],
    v: &'a [i64],
    modulus: usize,
    base: Cx,
    c: Float,
    ln_z: Cx,
    h: Float,
    lg: &'a LnGamma,
    bern: &'a [Float],
    crude_coeffs: &'a [Cx],
    crude_eps: f64,
}

struct SweepSums {
    inner: Cx,
    outer: Cx,
    radius: f64,
    nodes: usize,
}

impl Sweep<'_> {
    fn run(&self, dir: i64, j0: usize, j1: usize, j2: usize) -> SweepSums {
        let p = QUAD_PREC;
        let m = self.modulus;
        let node = |j: usize| -> Cx {
            let mut s = self.base.clone();
            s.im += Float::with_val(p, &self.h * (dir * j as i64));
            s
        };
        let ln_step = Cx::new(Float::new(p), Float::with_val(p, &self.h * (-dir)));
        let mut pw: Vec<Cx> = vec![Cx::zero(p)];
        let mut step: Vec<Cx> = vec![Cx::zero(p)];
        let (mut t0, mut t1) = (Float::new(p), Float::new(p));
        let mut inner = Cx::zero(p);
        let mut outer = Cx::zero(p);
        let mut radius = 0f64;
        let mut nodes = 0usize;
        for j in j0..=j2 {
            let sp = node(j);
            let crude = j > j1;
            let top = if crude { self.crude_coeffs.len() } else { (em_plan(&sp, m, EM_BITS).n_direct + 1) * m };
            // bring the table to this node's length
            let neg = -&sp;
            while pw.len() <= top {
                let n = pw.len();
                let ln_n = Float::with_val(p, Float::ln_u(n as u32));
                pw.push(neg.scale(&ln_n).exp());
                step.push(ln_step.scale(&ln_n).exp());
            }
            let w = Cx::new(self.c.clone(), Float::with_val(p, &sp.im - &self.base.im));
            let g = (&self.lg.eval(&w) - &(&w * &self.ln_z)).exp().with_prec(p);
            let g_abs = g.abs().to_f64();
            let (fv, fr) = if crude {
                let mut acc = Cx::zero(p);
                for (k, a) in self.crude_coeffs.iter().enumerate() {
                    if !a.is_zero() {
                        acc += &(a * &pw[k + 1]);
                    }
                }
                (acc, self.crude_eps)
            } else {
                self.em_value(&sp, &pw)
            };
            let val = &g * &fv;
            if crude {
                outer += &val;
            } else {
                inner += &val;
            }
            radius += g_abs * fr;
            nodes += 1;
            // advance n^{-s'} to the next node
            let upto = if crude { self.crude_coeffs.len() } else { pw.len() - 1 };
            for n in 1..=upto.min(pw.len() - 1) {
                let (a, b) = (&mut pw[n], &step[n]);
                mul_in_place(a, b, &mut t0, &mut t1);
            }
        }
        SweepSums { inner, outer, radius, nodes }
    }

    /// `F(s') = U(s') V(s')` from the residue sums modulo `M`.
    fn em_value(&self, sp: &Cx, pw: &[Cx]) -> (Cx, f64) {
        let p = QUAD_PREC;
        let m = self.modulus;
        let plan = em_plan(sp, m, EM_BITS);
        let mut sums = Vec::with_capacity(m);
        for beta in 1..=m {
            let mut acc = Cx::zero(p);
            for i in 0..plan.n_direct {
                acc += &pw[i * m + beta];
            }
            let x = plan.n_direct * m + beta;
            let (tail, r) = em_tail_with(sp, &pw[x], x, m, plan.n_corr, self.bern);
            acc += &tail;
            sums.push((acc, r));
        }
        let combine = |coef: &[i64]| -> (Cx, f64) {
            let mut acc = Cx::zero(p);
            let mut r = 0f64;
            for beta in 1..=m {
                let c = coef[beta % coef.len()];
                if c != 0 {
                    acc += &sums[beta - 1].0.scale_i64(c);
                    r += c.unsigned_abs() as f64 * sums[beta - 1].1;
                }
            }
            (acc, r)
        };
        let (uu, ru) = combine(self.u);
        let (vv, rv) = combine(self.v);
        let (au, av) = (uu.abs().to_f64(), vv.abs().to_f64());
        (&uu * &vv, au * rv + ru * av + ru * rv)
    }
}

/// Compares `F_X(s, alpha)` from its series with the contour integral.
pub fn mellin_smoothing_check(
    f: &LSeries,
    s: &Cx,
    alpha: &Float,
    x: &Float,
    opts: &MellinOptions,
) -> Result<MellinOutcome> {
    if *x <= 0 {
        return Err(Error::InvalidInput("X must be positive".into()));
    }
    if *alpha < 0 || (alpha.is_zero() && !opts.allow_degenerate) {
        return Err(Error::InvalidInput("alpha must be positive (alpha = 0 needs the degenerate flag)".into()));
    }
    let sigma = s.re.to_f64();
    let (u, v) = match &f.source {
        CoeffSource::PeriodicConvolution { u, v } => (u.as_slice(), v.as_slice()),
        _ => return Err(Error::Unsupported(format!("line evaluation of {} on the Mellin contour", f.name))),
    };
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let p = QUAD_PREC;
    let modulus = num_integer::lcm(u.len(), v.len());
    let norm = |c: &[i64]| c.iter().map(|a| a.unsigned_abs()).max().unwrap_or(0) as f64;
    let coef_norm = norm(u) * norm(v);

    let base = s.with_prec(p);
    let c = if sigma < 2.0 { Float::with_val(p, 2u32) - &base.re } else { Float::with_val(p, 0.5f64) };
    let cf = c.to_f64();
    let sigma_line = sigma + cf;
    let mut sp0 = base.clone();
    sp0.re = Float::with_val(p, &sp0.re + &c);
    let z = z_x(&Float::with_val(p, alpha), &Float::with_val(p, x));
    let ln_z = z.ln();
    let abs_z = z.abs().to_f64();
    let arg_z = z.arg().to_f64();
    let half_pi = std::f64::consts::FRAC_PI_2;

    // |F| <= ||u|| ||v|| zeta(sigma')^2 on Re = sigma'
    let zeta_sq = |x: f64| crate::special::zeta(&Cx::from_f64(64, x, 0.0)).re.to_f64().powi(2);
    let zeta_line_sq = zeta_sq(sigma_line);
    let f_max = coef_norm * zeta_line_sq * (1.0 + 1e-12);
    let tail_tol = opts.tol / 4.0;
    let v_pos = truncation_point(f_max, cf, abs_z, half_pi - arg_z, tail_tol);
    let v_neg = truncation_point(f_max, cf, abs_z, half_pi + arg_z, tail_tol);
    let tail = tail_bound(f_max, cf, abs_z, half_pi - arg_z, v_pos) + tail_bound(f_max, cf, abs_z, half_pi + arg_z, v_neg);

    // analyticity strip |Re w - c| < d: Gamma's pole at 0, F's pole at s + w = 1
    let d = 0.9 * cf.min(sigma_line - 1.0).min(1.0);
    let mass = |a: f64| coef_norm * zeta_sq(sigma_line + a - cf) * line_mass(a, abs_z, arg_z);
    let m_strip = mass(cf - d).max(mass(cf + d));
    let h = match opts.quad_points {
        Some(n) if n > 0 => 1.0 / n as f64,
        Some(_) => return Err(Error::InvalidInput("quad_points must be positive".into())),
        None => 2.0 * std::f64::consts::PI * d / (1.0 + 2.0 * m_strip / tail_tol).ln(),
    };
    let disc = 2.0 * m_strip / ((2.0 * std::f64::consts::PI * d / h).exp() - 1.0);

    let j_pos = (v_pos / h).ceil() as usize;
    let j_neg = (v_neg / h).ceil() as usize;
    let work = (j_pos * j_pos + j_neg * j_neg) as f64 * h / std::f64::consts::PI * modulus as f64;
    if work > MAX_WORK {
        return Err(Error::Unsupported(format!(
            "contour needs |Im w| up to {v_pos:.0}; X is too large for the line quadrature"
        )));
    }

    let bern: Vec<Float> = bernoulli_numbers(2 * em_plan(&Cx::from_f64(p, 2.0, 1e6), modulus, EM_BITS).n_corr + 4)
        .iter()
        .map(|r| Float::with_val(p, r))
        .collect();
    let crude_n = CRUDE_TERMS * modulus;
    let crude_coeffs = f.coefficients(crude_n, p)?;
    let crude_eps = coef_norm * (zeta_line_sq - divisor_partial(crude_n, sigma_line)).max(0.0) * (1.0 + 1e-9) + 1e-15;
    let lg = LnGamma::new(p + 48);
    let hf = Float::with_val(p, h);
    let sweep = Sweep {
        u,
        v,
        modulus,
        base: sp0,
        c: c.clone(),
        ln_z,
        h: hf.clone(),
        lg: &lg,
        bern: &bern,
        crude_coeffs: &crude_coeffs,
        crude_eps,
    };
    let up = sweep.run(1, 0, j_pos, 2 * j_pos);
    let down = sweep.run(-1, 1, j_neg, 2 * j_neg);
    let w = Float::with_val(p, &hf / two_pi(p));
    let integral = (&up.inner + &down.inner).scale(&w);
    let doubled = &integral + &(&up.outer + &down.outer).scale(&w);
    let eval_radius = (up.radius + down.radius) * h / (2.0 * std::f64::consts::PI);

    let fx = smoothed_twist_eval(f, s, alpha, x, 1e-30)?;
    let residual = fx.value.with_prec(p).dist(&integral).to_f64();
    let doubling_change = doubled.dist(&integral).to_f64();
    if doubling_change > opts.tol {
        return Err(Error::NoConvergence { change: doubling_change, tol: opts.tol });
    }
    Ok(MellinOutcome {
        smoothed: fx.value,
        smoothed_radius: fx.radius,
        integral,
        doubled,
        residual,
        doubling_change,
        tail_bound: tail,
        discretization_bound: disc,
        eval_radius,
        step: h,
        range: (-(j_neg as f64) * h, j_pos as f64 * h),
        nodes: up.nodes + down.nodes,
    })
}
