//! Evaluation of twisted Dirichlet series `sum a(n) w(n) n^{-s}`.
//!
//! Three routes are available:
//!
//! * `Direct`: truncated summation with the tail radius
//!   `kappa sum_{n > N} n^{1/2 - sigma}`.
//! * `Hurwitz`: for periodic convolutions `a = u * v`, any periodic twist is a
//!   finite combination of products of residue-class zeta sums, each computed
//!   by Euler-Maclaurin summation.
//! * `Afe`: for cusp forms, the Mellin integral of the twisted form split at a
//!   cusp, giving rapidly convergent incomplete-Gamma series. Additive twists
//!   `a/q` with `N | q` and the untwisted series are supported.

use rug::Float;

use crate::arith::{gcd, inv_mod, lcm, reduce_frac};
use crate::catalog::{CoeffSource, LSeries};
use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::mp::{two_pi, Cx, Prec};
use crate::special::{gamma, residue_sums, upper_gamma, PowerTable};

/// Multiplicative weight `w(n)` applied to the coefficients.
#[derive(Clone, Debug)]
pub enum Twist {
    None,
    /// `w(n) = e(-n num/den)`.
    Additive { num: i64, den: u64 },
    /// `w(n) = e(-n alpha)` for real `alpha` (direct route only).
    AdditiveReal(Float),
    Character(DirichletCharacter),
}

impl Twist {
    pub fn additive(num: i64, den: u64) -> Twist {
        let (n, d) = reduce_frac(num, den as i64);
        if d == 1 {
            Twist::None
        } else {
            Twist::Additive { num: n.rem_euclid(d), den: d as u64 }
        }
    }

    /// Period of `w`, if periodic.
    fn period(&self) -> Option<u64> {
        match self {
            Twist::None => Some(1),
            Twist::Additive { den, .. } => Some(*den),
            Twist::AdditiveReal(_) => None,
            Twist::Character(c) => Some(c.modulus),
        }
    }

    /// `w(n)` for periodic twists.
    fn weight(&self, n: i64, prec: Prec) -> Cx {
        match self {
            Twist::None => Cx::one(prec),
            Twist::Additive { num, den } => Cx::e_frac(prec, -n * num, *den as i64),
            Twist::Character(c) => c.value(n, prec),
            Twist::AdditiveReal(a) => {
                let mut th = two_pi(prec);
                th *= a;
                th *= -n;
                Cx::cis(&th)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Direct,
    Hurwitz,
    Afe,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::Hurwitz => "hurwitz",
            Route::Afe => "afe",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesValue {
    pub value: Cx,
    /// Bound on the truncation error.
    pub radius: f64,
    /// Number of coefficients used.
    pub n_terms: u64,
    pub route: Route,
}

/// Direct truncated summation with `n_terms` terms.
pub fn evaluate_direct(f: &LSeries, s: &Cx, twist: &Twist, conj: bool, n_terms: usize) -> Result<SeriesValue> {
    let sigma = s.re.to_f64();
    if sigma < f.sigma_floor {
        return Err(Error::BelowConvergenceFloor { sigma, floor: f.sigma_floor });
    }
    let p = s.prec();
    let wp = p + 16 + (n_terms.max(2) as f64).log2() as u32;
    let sw = s.with_prec(wp);
    let a = f.coefficients(n_terms, wp)?;
    let pw = PowerTable::new(&sw, n_terms);
    let mut acc = Cx::zero(wp);
    match twist {
        Twist::AdditiveReal(alpha) => {
            let mut th = two_pi(wp);
            th *= alpha;
            let step = Cx::cis(&Float::with_val(wp, -th));
            let mut w = step.clone();
            for n in 1..=n_terms {
                let c = if conj { a[n - 1].conj() } else { a[n - 1].clone() };
                acc += &(&c * pw.get(n)) * &w;
                w = &w * &step;
            }
        }
        _ => {
            let per = twist.period().expect("periodic twist") as usize;
            let weights: Vec<Cx> = (0..per).map(|r| twist.weight(r as i64, wp)).collect();
            for n in 1..=n_terms {
                let w = &weights[n % per];
                if w.is_zero() || a[n - 1].is_zero() {
                    continue;
                }
                let c = if conj { a[n - 1].conj() } else { a[n - 1].clone() };
                acc += &(&c * pw.get(n)) * w;
            }
        }
    }
    Ok(SeriesValue { value: acc.with_prec(p), radius: direct_tail(f.kappa, sigma, n_terms), n_terms: n_terms as u64, route: Route::Direct })
}

/// `kappa sum_{n > N} n^{1/2 - sigma} <= kappa N^{3/2 - sigma} / (sigma - 3/2)`.
pub fn direct_tail(kappa: f64, sigma: f64, n: usize) -> f64 {
    if sigma <= 1.5 {
        return f64::INFINITY;
    }
    kappa * (n as f64).powf(1.5 - sigma) / (sigma - 1.5)
}

/// Hurwitz route for periodic convolutions.
fn evaluate_hurwitz(u: &[i64], v: &[i64], s: &Cx, twist: &Twist, target_bits: u32) -> Result<SeriesValue> {
    let per = twist
        .period()
        .ok_or_else(|| Error::Unsupported("non-periodic twist on the Hurwitz route".into()))?;
    let m = lcm(lcm(u.len() as u64, v.len() as u64), per) as usize;
    let p = s.prec();
    let wp = p + 16 + (2.0 * (m as f64).log2()).ceil() as u32;
    let sw = s.with_prec(wp);
    let sums = residue_sums(&sw, m, target_bits + 8);
    let mut acc = Cx::zero(wp);
    let mut radius = 0f64;
    let weights: Vec<Cx> = (0..m).map(|r| twist.weight(r as i64, wp)).collect();
    for beta in 1..=m {
        let ub = u[beta % u.len()];
        if ub == 0 {
            continue;
        }
        let rb = &sums[beta - 1];
        for gam in 1..=m {
            let vg = v[gam % v.len()];
            if vg == 0 {
                continue;
            }
            let w = &weights[(beta * gam) % m];
            if w.is_zero() {
                continue;
            }
            let w = w.scale_i64(ub * vg);
            let rg = &sums[gam - 1];
            acc += &(&rb.value * &rg.value) * &w;
            let wa = w.abs().to_f64();
            let (ab, ag) = (rb.value.abs().to_f64(), rg.value.abs().to_f64());
            radius += wa * (ab * rg.radius + rb.radius * ag + rb.radius * rg.radius);
        }
    }
    radius += acc.abs().to_f64() * 2f64.powi(-(p as i32));
    Ok(SeriesValue { value: acc.with_prec(p), radius, n_terms: 0, route: Route::Hurwitz })
}

/// Which functional equation feeds the incomplete-Gamma expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfeKind {
    /// Fricke involution at level `N` (untwisted series).
    Fricke,
    /// Additive twists with denominator `q`, `N | q`.
    Twisted { q: u64 },
}

/// Incomplete-Gamma expansion of a cusp form's twisted L-series at one point.
///
/// With split point `Y`,
/// `(2 pi)^{-s} Gamma(s) L = sum b(n) phi_1(n) (2 pi n)^{-s} Gamma(s, 2 pi n Y)
///   + P sum b(n) phi_2(n) (2 pi n)^{s-k} Gamma(k - s, 2 pi n / (M Y))`,
/// where `M = N, P = omega N^{k/2 - s}` (Fricke) or `M = q^2,
/// P = i^k q^{k - 2s}` (twist by `a/q`, `phi_1 = e(na/q), phi_2 = e(-nd/q)`,
/// `ad = 1 mod q`). The value does not depend on `Y`.
pub struct CuspAfe {
    kind: AfeKind,
    prec: Prec,
    wp: Prec,
    g1: Vec<Cx>,
    g2: Vec<Cx>,
    pref: Cx,
    norm: Cx,
    radius: f64,
}

impl CuspAfe {
    /// `s` is the analytic variable; `split` scales the default split point
    /// (`1` gives `Y = 1/q` or `1/sqrt(N)`).
    pub fn new(f: &LSeries, s: &Cx, kind: AfeKind, split: f64) -> Result<Self> {
        let (weight, level) = match &f.source {
            CoeffSource::CuspForm { weight, level, .. } => (*weight, *level),
            _ => return Err(Error::Unsupported("incomplete-Gamma route needs a cusp form".into())),
        };
        let k = i64::from(weight);
        let p = s.prec();
        let t = s.im.to_f64().abs();
        let sig_ar = s.re.to_f64() + (k as f64 - 1.0) / 2.0;
        let big_m: f64 = match kind {
            AfeKind::Fricke => level as f64,
            AfeKind::Twisted { q } => {
                if q % level != 0 {
                    return Err(Error::Unsupported(format!("twist denominator {q} is not a multiple of the level {level}")));
                }
                (q as f64) * (q as f64)
            }
        };
        let y = split / big_m.sqrt();
        // crude size of the cutoff in x
        let target = f64::from(p) * std::f64::consts::LN_2 + 20.0 + 1.6 * t;
        let mut xstar = target;
        for _ in 0..4 {
            xstar = target + (sig_ar.abs() + k as f64 + 2.0) * (xstar + 1.0).ln();
        }
        let two_pi_f = 2.0 * std::f64::consts::PI;
        let n1 = (xstar / (two_pi_f * y)).ceil() as usize + 2;
        let n2 = (xstar * big_m * y / two_pi_f).ceil() as usize + 2;
        let n_max = n1.max(n2);
        let wp = p + 32 + (2.27 * t).ceil() as u32 + (n_max as f64).log2().ceil() as u32;

        let b = f.integer_coeffs(n_max).expect("cusp form")?;
        let half_shift = Float::with_val(wp, k - 1) / 2u32;
        let s_ar = s.with_prec(wp).add_real(&half_shift);
        let ks = &Cx::from_int(wp, k) - &s_ar;
        let g_s = gamma(&s_ar.with_prec(wp + 64));
        let g_ks = gamma(&ks.with_prec(wp + 64));
        let two_pi_w = two_pi(wp);
        let ln_2pi = Float::with_val(wp, two_pi_w.ln_ref());
        let yw = Float::with_val(wp, split) / Float::with_val(wp, big_m_exact(kind, level, wp).sqrt_ref());
        let m_exact = big_m_exact(kind, level, wp);
        let x1_step = Float::with_val(wp, &two_pi_w * &yw);
        let x2_step = Float::with_val(wp, &two_pi_w / Float::with_val(wp, &m_exact * &yw));
        let neg_s = -&s_ar;
        let s_minus_k = -&ks;

        let mut g1 = Vec::with_capacity(n_max);
        let mut g2 = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let bn = b[n - 1];
            if bn == 0 {
                g1.push(Cx::zero(wp));
                g2.push(Cx::zero(wp));
                continue;
            }
            let bf = Float::with_val(wp, bn);
            let ln_2pin = Float::with_val(wp, &ln_2pi + Float::with_val(wp, Float::ln_u(n as u32)));
            let x1 = Float::with_val(wp, &x1_step * n as u32);
            let x2 = Float::with_val(wp, &x2_step * n as u32);
            let a1 = &neg_s.scale(&ln_2pin).exp() * &upper_gamma(&s_ar, &x1, Some(&g_s));
            let a2 = &s_minus_k.scale(&ln_2pin).exp() * &upper_gamma(&ks, &x2, Some(&g_ks));
            g1.push(a1.scale(&bf));
            g2.push(a2.scale(&bf));
        }

        // P
        let pref = match kind {
            AfeKind::Fricke => {
                let ln_n = Float::with_val(wp, Float::ln_u(level as u32));
                let e = &Cx::from_real(Float::with_val(wp, k) / 2u32) - &s_ar;
                &f.gamma.omega.with_prec(wp) * &e.scale(&ln_n).exp()
            }
            AfeKind::Twisted { q } => {
                let ln_q = Float::with_val(wp, Float::ln_u(q as u32));
                let e = &Cx::from_int(wp, k) - &s_ar.scale_i64(2);
                let ik = match k.rem_euclid(4) {
                    0 => Cx::one(wp),
                    1 => Cx::i(wp),
                    2 => Cx::from_int(wp, -1),
                    _ => -Cx::i(wp),
                };
                &ik * &e.scale(&ln_q).exp()
            }
        };
        let norm = &s_ar.scale(&ln_2pi).exp() / &g_s.with_prec(wp);

        // tail beyond n_max, in units of the final value
        let nn = (n_max + 1) as f64;
        let x1 = two_pi_f * y * nn;
        let x2 = two_pi_f * nn / (big_m * y);
        let ln_bn = 0.5 * (3.0 * nn).ln() + (k as f64 - 1.0) / 2.0 * nn.ln();
        let ln_2pin = (two_pi_f * nn).ln();
        let t1 = ln_bn - sig_ar * ln_2pin + (sig_ar - 1.0) * x1.ln() - x1 + 2f64.ln();
        let ln_pref = Float::with_val(wp, pref.abs().ln_ref()).to_f64();
        let t2 = ln_bn + ln_pref + (sig_ar - k as f64) * ln_2pin + (k as f64 - sig_ar - 1.0) * x2.ln() - x2 + 2f64.ln();
        let rho = (-(two_pi_f * y).min(two_pi_f / (big_m * y))).exp();
        // |norm| grows like e^{pi t / 2}, beyond f64 range for t > 450
        let ln_norm = Float::with_val(wp, norm.abs().ln_ref()).to_f64();
        let radius = (t1 + ln_norm).exp() * 4.0 / (1.0 - rho) + (t2 + ln_norm).exp() * 4.0 / (1.0 - rho);
        let radius = if radius.is_finite() { radius } else { f64::INFINITY };

        Ok(CuspAfe { kind, prec: p, wp, g1, g2, pref, norm, radius })
    }

    pub fn n_terms(&self) -> usize {
        self.g1.len()
    }

    /// Evaluates the series twisted by `e(n a/q)` (`a = 0` for Fricke).
    pub fn eval_arith(&self, a: i64) -> Result<SeriesValue> {
        let wp = self.wp;
        let mut s1 = Cx::zero(wp);
        let mut s2 = Cx::zero(wp);
        match self.kind {
            AfeKind::Fricke => {
                for (x, y) in self.g1.iter().zip(&self.g2) {
                    s1 += x;
                    s2 += y;
                }
            }
            AfeKind::Twisted { q } => {
                let qi = q as i64;
                let d = inv_mod(a, qi).ok_or_else(|| Error::InvalidInput(format!("{a} is not a unit mod {q}")))?;
                let e1: Vec<Cx> = (0..qi).map(|r| Cx::e_frac(wp, a * r, qi)).collect();
                let e2: Vec<Cx> = (0..qi).map(|r| Cx::e_frac(wp, -d * r, qi)).collect();
                for (n, (x, y)) in self.g1.iter().zip(&self.g2).enumerate() {
                    let r = ((n + 1) as i64).rem_euclid(qi) as usize;
                    s1 += x * &e1[r];
                    s2 += y * &e2[r];
                }
            }
        }
        let total = &s1 + &(&self.pref * &s2);
        let value = &self.norm * &total;
        let radius = self.radius + value.abs().to_f64() * 2f64.powi(-(self.prec as i32));
        Ok(SeriesValue { value: value.with_prec(self.prec), radius, n_terms: self.g1.len() as u64, route: Route::Afe })
    }
}

fn big_m_exact(kind: AfeKind, level: u64, wp: Prec) -> Float {
    match kind {
        AfeKind::Fricke => Float::with_val(wp, level),
        AfeKind::Twisted { q } => Float::with_val(wp, q) * Float::with_val(wp, q),
    }
}

/// Route selection for one evaluation.
fn plan(f: &LSeries, twist: &Twist) -> Route {
    match (&f.source, twist) {
        (_, Twist::AdditiveReal(_)) => Route::Direct,
        (CoeffSource::PeriodicConvolution { .. }, _) => Route::Hurwitz,
        (CoeffSource::CuspForm { .. }, Twist::None) => Route::Afe,
        (CoeffSource::CuspForm { level, .. }, Twist::Additive { den, .. }) if den % level == 0 => Route::Afe,
        _ => Route::Direct,
    }
}

/// Default number of terms for the direct route.
pub const DEFAULT_DIRECT_TERMS: usize = 100_000;

/// Evaluates `sum a(n) w(n) n^{-s}` (or the conjugate-coefficient series) at
/// the precision of `s`, picking the fastest exact route available.
pub fn evaluate(f: &LSeries, s: &Cx, twist: &Twist, conj: bool) -> Result<SeriesValue> {
    let twist = normalize(twist);
    match plan(f, &twist) {
        // u and v are integer valued, so conjugating the coefficients is a no-op
        Route::Hurwitz => match &f.source {
            CoeffSource::PeriodicConvolution { u, v } => evaluate_hurwitz(u, v, s, &twist, s.prec() + 8),
            _ => unreachable!("hurwitz route is only planned for periodic convolutions"),
        },
        Route::Afe => {
            let (kind, a) = afe_target(f, &twist)?;
            // coefficients of the catalog cusp forms are real, so the
            // conjugate-coefficient series is the same series
            if conj && !f.real_coeffs {
                return evaluate_direct(f, s, &twist, conj, DEFAULT_DIRECT_TERMS);
            }
            CuspAfe::new(f, s, kind, 1.0)?.eval_arith(a)
        }
        Route::Direct => evaluate_direct(f, s, &twist, conj, DEFAULT_DIRECT_TERMS),
    }
}

/// Evaluates several twists at one point, sharing work between them.
pub fn evaluate_many(f: &LSeries, s: &Cx, twists: &[Twist], conj: bool) -> Vec<Result<SeriesValue>> {
    let mut tables: Vec<(AfeKind, Result<CuspAfe>)> = Vec::new();
    twists
        .iter()
        .map(|tw| {
            let tw = normalize(tw);
            if plan(f, &tw) != Route::Afe || (conj && !f.real_coeffs) {
                return evaluate(f, s, &tw, conj);
            }
            let (kind, a) = afe_target(f, &tw)?;
            if !tables.iter().any(|(k, _)| *k == kind) {
                tables.push((kind, CuspAfe::new(f, s, kind, 1.0)));
            }
            let (_, t) = tables.iter().find(|(k, _)| *k == kind).expect("inserted");
            match t {
                Ok(t) => t.eval_arith(a),
                Err(e) => Err(Error::Unsupported(e.to_string())),
            }
        })
        .collect()
}

fn normalize(twist: &Twist) -> Twist {
    match twist {
        Twist::Additive { num, den } => Twist::additive(*num, *den),
        other => other.clone(),
    }
}

fn afe_target(f: &LSeries, twist: &Twist) -> Result<(AfeKind, i64)> {
    let level = match &f.source {
        CoeffSource::CuspForm { level, .. } => *level,
        _ => return Err(Error::Unsupported("not a cusp form".into())),
    };
    match twist {
        Twist::None if level == 1 => Ok((AfeKind::Twisted { q: 1 }, 0)),
        Twist::None => Ok((AfeKind::Fricke, 0)),
        // w(n) = e(-n num/den) = e(n a/q) with a = -num
        Twist::Additive { num, den } => {
            debug_assert_eq!(gcd(num.unsigned_abs(), *den), 1);
            Ok((AfeKind::Twisted { q: *den }, (-num).rem_euclid(*den as i64)))
        }
        _ => Err(Error::Unsupported("twist not handled by the incomplete-Gamma route".into())),
    }
}

/// Largest `|a(n)| / (kappa sqrt(n))` over `n <= n_max`; at most 1 when the
/// tail constant is valid.
pub fn kappa_check(f: &LSeries, n_max: usize) -> Result<f64> {
    let a = f.coefficients(n_max, 64)?;
    Ok(a.iter()
        .enumerate()
        .map(|(i, c)| c.abs().to_f64() / (f.kappa * ((i + 1) as f64).sqrt()))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;
    use crate::characters::character_group;

    const P: Prec = 192;

    fn check_against_direct(name: &str, s: &Cx, twist: &Twist) {
        let f = catalog(name, P).unwrap();
        let fast = evaluate(&f, s, twist, false).unwrap();
        assert_ne!(fast.route, Route::Direct, "{name}");
        let slow = evaluate_direct(&f, s, twist, false, 20_000).unwrap();
        let d = fast.value.dist(&slow.value).to_f64();
        assert!(d < slow.radius + fast.radius + 1e-40, "{name} {twist:?}: {d:e} vs radius {:e}", slow.radius);
        assert!(slow.radius < 1e-14);
    }

    #[test]
    fn hurwitz_route_matches_direct_sum() {
        let s = Cx::from_f64(P, 5.0, 2.5);
        for name in ["zeta2", "zeta_chi3"] {
            check_against_direct(name, &s, &Twist::None);
            check_against_direct(name, &s, &Twist::additive(1, 6));
            check_against_direct(name, &s, &Twist::additive(5, 7));
            for chi in character_group(5) {
                check_against_direct(name, &s, &Twist::Character(chi));
            }
        }
    }

    #[test]
    fn afe_route_matches_direct_sum() {
        let s = Cx::from_f64(P, 5.0, -1.5);
        check_against_direct("level11", &s, &Twist::None);
        check_against_direct("level11", &s, &Twist::additive(1, 11));
        check_against_direct("level11", &s, &Twist::additive(7, 22));
        check_against_direct("delta", &s, &Twist::None);
        check_against_direct("delta", &s, &Twist::additive(2, 3));
    }

    #[test]
    fn afe_is_independent_of_split_point() {
        let f = catalog("level11", P).unwrap();
        for s in [Cx::from_f64(P, 1.8, 3.0), Cx::from_f64(P, 2.0, 50.0), Cx::from_f64(P, 0.5, 7.0)] {
            for kind in [AfeKind::Fricke, AfeKind::Twisted { q: 11 }, AfeKind::Twisted { q: 33 }] {
                let a = if kind == AfeKind::Fricke { 0 } else { 2 };
                let v1 = CuspAfe::new(&f, &s, kind, 1.0).unwrap().eval_arith(a).unwrap();
                let v2 = CuspAfe::new(&f, &s, kind, 1.37).unwrap().eval_arith(a).unwrap();
                let d = v1.value.dist(&v2.value).to_f64();
                assert!(d < 1e-50, "{kind:?} s={s:?}: {d:e}");
                assert!(v1.radius < 1e-50, "{kind:?} s={s:?}: radius {:e}", v1.radius);
            }
        }
    }

    #[test]
    fn twists_by_one_collapse() {
        let f = catalog("zeta2", P).unwrap();
        let s = Cx::from_f64(P, 2.0, 1.0);
        let a = evaluate(&f, &s, &Twist::additive(3, 3), false).unwrap();
        let z = crate::special::zeta(&s);
        assert!(a.value.dist(&(&z * &z)) < 1e-50);
    }

    #[test]
    fn direct_rejects_low_abscissa() {
        let f = catalog("zeta2", P).unwrap();
        let r = evaluate_direct(&f, &Cx::from_f64(P, 1.5, 0.0), &Twist::None, false, 10);
        assert!(matches!(r, Err(Error::BelowConvergenceFloor { .. })));
    }

    #[test]
    fn kappa_bound_holds() {
        for name in crate::catalog::CATALOG_NAMES {
            let f = catalog(name, P).unwrap();
            assert!(kappa_check(&f, 3000).unwrap() <= 1.0 + 1e-12, "{name}");
        }
    }
}
