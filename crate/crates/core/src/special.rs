//! Complex Gamma, upper incomplete Gamma and Hurwitz-type zeta sums.

use rug::Float;

use crate::arith::smallest_prime_factors;
use crate::bernoulli::bernoulli_numbers;
use crate::mp::{two_pi, Cx, Prec};

fn log2_abs(z: &Cx) -> f64 {
    if z.is_zero() {
        return f64::NEG_INFINITY;
    }
    let r = z.abs();
    let (m, e) = r.to_f64_exp();
    m.abs().log2() + f64::from(e)
}

fn is_nonpositive_integer(z: &Cx) -> bool {
    z.im.is_zero() && z.re <= 0 && z.re.is_integer()
}

/// `ln Gamma(w)` by the Stirling series, assuming `|w|` is large and
/// `Re w > 0`.
fn stirling(w: &Cx, eps_bits: u32) -> Cx {
    let p = w.prec();
    let ln_w = w.ln();
    let mut acc = &w.add_real(&Float::with_val(p, -0.5f64)) * &ln_w;
    acc -= w;
    acc.re += Float::with_val(p, two_pi(p).ln_ref()) / 2u32;
    let inv = w.recip();
    let inv2 = &inv * &inv;
    let mut pw = inv;
    let max_k = 2 * (eps_bits as usize) + 8;
    let b = bernoulli_numbers(max_k.min(1200));
    let scale = log2_abs(&acc).max(0.0);
    let mut k = 1usize;
    while 2 * k < b.len() {
        let c = Float::with_val(p, &b[2 * k]) / ((2 * k) * (2 * k - 1)) as u64;
        let term = pw.scale(&c);
        acc += &term;
        if log2_abs(&term) < scale - f64::from(eps_bits) {
            break;
        }
        pw = &pw * &inv2;
        k += 1;
    }
    acc
}

fn shift_target(prec: Prec) -> f64 {
    0.12 * f64::from(prec) + 8.0
}

/// Complex Gamma function.
pub fn gamma(z: &Cx) -> Cx {
    let p = z.prec();
    if is_nonpositive_integer(z) {
        return Cx::new(Float::with_val(p, f64::INFINITY), Float::new(p));
    }
    let mag = z.abs().to_f64().max(2.0);
    let wp = p + 24 + (mag * mag.ln()).log2().max(0.0) as u32;
    let z = z.with_prec(wp);
    let r = shift_target(wp);
    let re = z.re.to_f64();
    let m = if re < r { (r - re).ceil() as i64 } else { 0 };
    let w = z.add_i64(m);
    let mut prod = Cx::one(wp);
    for k in 0..m {
        prod = &prod * &z.add_i64(k);
    }
    let g = &stirling(&w, wp).exp() / &prod;
    g.with_prec(p)
}

/// `ln Gamma(z)` up to an integer multiple of `2 pi i`.
pub fn ln_gamma(z: &Cx) -> Cx {
    let p = z.prec();
    let mag = z.abs().to_f64().max(2.0);
    let wp = p + 24 + (mag * mag.ln()).log2().max(0.0) as u32;
    let z = z.with_prec(wp);
    let r = shift_target(wp);
    let re = z.re.to_f64();
    let m = if re < r { (r - re).ceil() as i64 } else { 0 };
    let w = z.add_i64(m);
    let mut acc = stirling(&w, wp);
    for k in 0..m {
        acc -= z.add_i64(k).ln();
    }
    acc.with_prec(p)
}

/// Lower series: `gamma(s, x) = x^s e^{-x} sum_k x^k / (s)_{k+1}`.
fn lower_series(s: &Cx, x: &Float, ln_x: &Float) -> Cx {
    let p = s.prec();
    let mut term = s.recip();
    let mut sum = term.clone();
    let bits = f64::from(p);
    let xf = x.to_f64();
    let mut k = 1i64;
    loop {
        let den = s.add_i64(k);
        term = &term.scale(x) / &den;
        sum += &term;
        if (k as f64) > xf - s.re.to_f64() && log2_abs(&term) < log2_abs(&sum) - bits {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    let mut e = s.scale(ln_x);
    e.re -= x;
    &e.exp() * &sum
}

/// Legendre continued fraction, modified Lentz. Returns `None` if it fails to
/// converge within the iteration budget.
fn upper_cf(s: &Cx, x: &Float, ln_x: &Float) -> Option<Cx> {
    let p = s.prec();
    let tiny = Float::with_val(p, Float::i_exp(1, -(p as i32) * 4));
    let one = Cx::one(p);
    let b0 = &Cx::from_real(Float::with_val(p, x + 1u32)) - s;
    let mut f = if b0.is_zero() { Cx::from_real(tiny.clone()) } else { b0 };
    let mut c = f.clone();
    let mut d = Cx::zero(p);
    let eps_bits = f64::from(p) - 2.0;
    for n in 1..200_000i64 {
        // a_n = -n (n - s), b_n = x + 2n + 1 - s
        let a = (&Cx::from_int(p, n) - s).scale_i64(-n);
        let b = &Cx::from_real(Float::with_val(p, x + (2 * n + 1))) - s;
        d = &b + &(&a * &d);
        if d.is_zero() {
            d = Cx::from_real(tiny.clone());
        }
        c = &b + &(&a / &c);
        if c.is_zero() {
            c = Cx::from_real(tiny.clone());
        }
        d = d.recip();
        let delta = &c * &d;
        f = &f * &delta;
        if log2_abs(&(&delta - &one)) < -eps_bits {
            let mut e = s.scale(ln_x);
            e.re -= x;
            return Some(&e.exp() / &f);
        }
    }
    None
}

/// Upper incomplete Gamma `Gamma(s, x)` for real `x > 0`.
///
/// `gamma_s` may carry a precomputed `Gamma(s)` at the same or higher
/// precision; it is only used on the series branch.
pub fn upper_gamma(s: &Cx, x: &Float, gamma_s: Option<&Cx>) -> Cx {
    let p = s.prec();
    let xf = x.to_f64();
    let sm = s.abs().to_f64();
    let mut guard = 24u32;
    if xf > sm.max(4.0) + 4.0 {
        let wp = p + guard;
        let sw = s.with_prec(wp);
        let xw = Float::with_val(wp, x);
        let lx = Float::with_val(wp, xw.ln_ref());
        if let Some(v) = upper_cf(&sw, &xw, &lx) {
            return v.with_prec(p);
        }
    }
    loop {
        let wp = p + guard;
        let sw = s.with_prec(wp);
        let xw = Float::with_val(wp, x);
        let lx = Float::with_val(wp, xw.ln_ref());
        let g = match gamma_s {
            Some(g) if g.prec() >= wp => g.with_prec(wp),
            _ => gamma(&sw),
        };
        let low = lower_series(&sw, &xw, &lx);
        let out = &g - &low;
        let big = log2_abs(&g).max(log2_abs(&low));
        let loss = big - log2_abs(&out);
        if loss + 16.0 < f64::from(guard) || guard > 4 * p + 4096 {
            return out.with_prec(p);
        }
        guard = (loss as u32) + 40;
    }
}

/// Table of `m^{-s}` for `1 <= m <= len`, built multiplicatively.
pub struct PowerTable {
    pub values: Vec<Cx>,
}

impl PowerTable {
    pub fn new(s: &Cx, len: usize) -> Self {
        let p = s.prec();
        let spf = smallest_prime_factors(len.max(1));
        let mut values = Vec::with_capacity(len + 1);
        values.push(Cx::zero(p));
        if len >= 1 {
            values.push(Cx::one(p));
        }
        let neg_s = -s;
        for m in 2..=len {
            let q = spf[m] as usize;
            let v = if q == m {
                let lm = Float::with_val(p, Float::ln_u(m as u32));
                neg_s.scale(&lm).exp()
            } else {
                &values[q] * &values[m / q]
            };
            values.push(v);
        }
        PowerTable { values }
    }

    pub fn get(&self, m: usize) -> &Cx {
        &self.values[m]
    }
}

/// Euler-Maclaurin plan for Hurwitz-type sums at one point `s`.
#[derive(Clone, Copy, Debug)]
pub struct EmPlan {
    pub n_direct: usize,
    pub n_corr: usize,
}

/// Chooses the number of directly summed terms and correction terms so that
/// the truncation error of every residue sum modulo `modulus` is below
/// `2^{-target_bits}`.
pub fn em_plan(s: &Cx, modulus: usize, target_bits: u32) -> EmPlan {
    let sa = s.abs().to_f64();
    let rho: f64 = if sa > 200.0 { 0.5 } else { 0.25 };
    let n_corr = ((f64::from(target_bits) + 8.0) / (2.0 * (1.0 / rho).log2())).ceil() as usize + 2;
    let need = (sa + 2.0 * n_corr as f64 + 2.0) / (2.0 * std::f64::consts::PI * rho);
    let n_direct = need.ceil() as usize + 1;
    let _ = modulus;
    EmPlan { n_direct, n_corr }
}

/// A residue-class Dirichlet sum with a truncation radius.
#[derive(Clone, Debug)]
pub struct Bounded {
    pub value: Cx,
    pub radius: f64,
}

/// `R_beta(s) = sum_{m >= 1, m = beta mod M} m^{-s}` for `beta = 1..=M`
/// (index `beta - 1`; `beta = M` is the class of multiples of `M`).
pub fn residue_sums(s: &Cx, modulus: usize, target_bits: u32) -> Vec<Bounded> {
    let p = s.prec();
    let plan = em_plan(s, modulus, target_bits);
    let wp = p + 16 + (plan.n_direct as f64 * modulus as f64).log2() as u32;
    let s = s.with_prec(wp);
    let top = (plan.n_direct + 1) * modulus;
    let table = PowerTable::new(&s, top);
    let mut out = Vec::with_capacity(modulus);
    for beta in 1..=modulus {
        let mut acc = Cx::zero(wp);
        for n in 0..plan.n_direct {
            acc += table.get(n * modulus + beta);
        }
        let x = plan.n_direct * modulus + beta;
        let (tail, radius) = em_tail(&s, table.get(x), x, modulus, plan.n_corr);
        acc += &tail;
        out.push(Bounded { value: acc.with_prec(p), radius });
    }
    out
}

/// Euler-Maclaurin tail `sum_{n >= 0} (x + n M)^{-s}` given `x^{-s}`.
pub fn em_tail(s: &Cx, x_pow: &Cx, x: usize, modulus: usize, n_corr: usize) -> (Cx, f64) {
    let p = s.prec();
    let b: Vec<Float> = bernoulli_numbers(2 * n_corr + 2).iter().map(|r| Float::with_val(p, r)).collect();
    em_tail_with(s, x_pow, x, modulus, n_corr, &b)
}

/// [`em_tail`] with `B_0..=B_{2 n_corr + 2}` supplied as floats.
pub fn em_tail_with(s: &Cx, x_pow: &Cx, x: usize, modulus: usize, n_corr: usize, b: &[Float]) -> (Cx, f64) {
    let p = s.prec();
    let xf = Float::with_val(p, x);
    let mf = Float::with_val(p, modulus);
    let ratio = Float::with_val(p, &mf / &xf);
    let ratio2 = Float::with_val(p, ratio.square_ref());
    // x / (M (s - 1)) + 1/2
    let mut bracket = Cx::from_real(Float::with_val(p, &xf / &mf)) / s.add_i64(-1);
    bracket.re += 0.5f64;
    // P_j = (s)_{2j-1} / (2j)! * ratio^{2j-1}
    let mut pj = s.scale(&ratio) / Cx::from_int(p, 2);
    let mut last = f64::INFINITY;
    for j in 1..=n_corr {
        bracket += pj.scale(&b[2 * j]);
        let a = s.add_i64(2 * j as i64 - 1);
        let c = s.add_i64(2 * j as i64);
        let k = ((2 * j + 1) * (2 * j + 2)) as i64;
        pj = (&(&pj * &a) * &c).scale(&ratio2);
        pj = pj.scale(&Float::with_val(p, Float::with_val(p, 1) / k));
        if j == n_corr {
            let next = pj.scale(&b[2 * j + 2]);
            let sigma = s.re.to_f64();
            let grow = c.add_i64(1).abs().to_f64() / (sigma + 2.0 * j as f64 + 1.0).max(1.0);
            last = 2.0 * grow * next.abs().to_f64();
        }
    }
    let tail = x_pow * &bracket;
    let radius = last * x_pow.abs().to_f64();
    (tail, radius)
}

/// Hurwitz zeta `zeta(s, a)` for real `0 < a <= 1`, using exponentials for
/// every term (no multiplicative table). Used as an independent reference.
pub fn hurwitz_zeta(s: &Cx, a: &Float) -> Cx {
    let p = s.prec();
    let wp = p + 24;
    let s = s.with_prec(wp);
    let plan = em_plan(&s, 1, wp);
    let neg_s = -&s;
    let mut acc = Cx::zero(wp);
    for n in 0..plan.n_direct {
        let base = Float::with_val(wp, a + n as u32);
        acc += neg_s.scale(&Float::with_val(wp, base.ln_ref())).exp();
    }
    let x = Float::with_val(wp, a + plan.n_direct as u32);
    let x_pow = neg_s.scale(&Float::with_val(wp, x.ln_ref())).exp();
    // same tail as em_tail with modulus 1 but a real (non-integer) x
    let b = bernoulli_numbers(2 * plan.n_corr + 2);
    let inv = Float::with_val(wp, x.recip_ref());
    let inv2 = Float::with_val(wp, inv.square_ref());
    let mut bracket = Cx::from_real(x.clone()) / s.add_i64(-1);
    bracket.re += 0.5f64;
    let mut pj = s.scale(&inv) / Cx::from_int(wp, 2);
    for j in 1..=plan.n_corr {
        bracket += pj.scale(&Float::with_val(wp, &b[2 * j]));
        let k = ((2 * j + 1) * (2 * j + 2)) as i64;
        pj = (&(&pj * &s.add_i64(2 * j as i64 - 1)) * &s.add_i64(2 * j as i64)).scale(&inv2);
        pj = pj.scale(&Float::with_val(wp, Float::with_val(wp, 1) / k));
    }
    acc += &x_pow * &bracket;
    acc.with_prec(p)
}

/// Riemann zeta.
pub fn zeta(s: &Cx) -> Cx {
    residue_sums(s, 1, s.prec() + 8).pop().unwrap().value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::pi;

    const P: Prec = 256;

    #[test]
    fn gamma_integers_and_half() {
        let g5 = gamma(&Cx::from_int(P, 5));
        assert!(g5.dist(&Cx::from_int(P, 24)) < 1e-70);
        let gh = gamma(&Cx::from_f64(P, 0.5, 0.0));
        let sp = Float::with_val(P, pi(P).sqrt_ref());
        assert!(gh.dist(&Cx::from_real(sp)) < 1e-70);
    }

    #[test]
    fn gamma_reflection() {
        // Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        let z = Cx::from_f64(P, 0.3, 7.5);
        let lhs = &gamma(&z) * &gamma(&(&Cx::one(P) - &z));
        let piz = z.scale(&pi(P));
        let sin = (&(&piz.mul_i()).exp() - &(&(-&piz).mul_i()).exp()) / Cx::i(P).scale_i64(2);
        let rhs = &Cx::from_real(pi(P)) / &sin;
        assert!((&lhs - &rhs).abs() / rhs.abs() < 1e-70);
    }

    #[test]
    fn gamma_large_imaginary() {
        // |Gamma(1/2 + it)|^2 = pi / cosh(pi t)
        let t = 300.0;
        let g = gamma(&Cx::from_f64(P, 0.5, t));
        let mut rhs = Float::with_val(P, pi(P) * t);
        rhs = Float::with_val(P, rhs.cosh_ref());
        rhs = Float::with_val(P, pi(P) / &rhs);
        let rel = Float::with_val(P, g.norm_sqr() / &rhs) - 1u32;
        assert!(rel.abs() < 1e-70);
    }

    #[test]
    fn ln_gamma_consistent() {
        let z = Cx::from_f64(P, -2.5, 3.0);
        let a = ln_gamma(&z).exp();
        let b = gamma(&z);
        assert!((&a - &b).abs() / b.abs() < 1e-70);
    }

    #[test]
    fn incomplete_gamma_branches_agree() {
        // Both branches near the switch point, and Gamma(1, x) = e^{-x}.
        for (sr, si, x) in [(2.5, 0.0, 9.0), (2.5, 3.0, 12.0), (-9.5, 10.0, 30.0), (0.3, -1.0, 9.5)] {
            let s = Cx::from_f64(P, sr, si);
            let xf = Float::with_val(P, x);
            let lx = Float::with_val(P, xf.ln_ref());
            let cf = upper_cf(&s.with_prec(P + 24), &Float::with_val(P + 24, x), &Float::with_val(P + 24, &lx))
                .unwrap()
                .with_prec(P);
            let g = gamma(&s);
            let ser = &g - &lower_series(&s.with_prec(P + 64), &Float::with_val(P + 64, x), &Float::with_val(P + 64, &lx)).with_prec(P);
            assert!((&cf - &ser).abs() / cf.abs() < 1e-60, "s={sr}+{si}i x={x}");
        }
        let v = upper_gamma(&Cx::one(P), &Float::with_val(P, 3.25), None);
        let e = Float::with_val(P, Float::with_val(P, -3.25f64).exp_ref());
        assert!(v.dist(&Cx::from_real(e)) < 1e-70);
    }

    #[test]
    fn zeta_special_values() {
        let z2 = zeta(&Cx::from_int(P, 2));
        let pi2 = Float::with_val(P, pi(P).square_ref()) / 6u32;
        assert!(z2.dist(&Cx::from_real(Float::with_val(P, pi2))) < 1e-70);
        let t = crate::mp::parse_real(P, "14.134725141734693790457251983562470270784257115699").unwrap();
        let zh = zeta(&Cx::new(crate::mp::real(P, 0.5), t));
        assert!(zh.abs() < 1e-45);
    }

    #[test]
    fn residue_sums_add_to_zeta() {
        let s = Cx::from_f64(P, 1.8, 3.0);
        let parts = residue_sums(&s, 6, P);
        let mut tot = Cx::zero(P);
        for b in &parts {
            tot += &b.value;
            assert!(b.radius < 1e-70);
        }
        assert!(tot.dist(&zeta(&s)) < 1e-70);
        // R_beta = M^{-s} zeta(s, beta/M) through the independent routine
        let a = Float::with_val(P, rug::Rational::from((5, 6)));
        let h = hurwitz_zeta(&s, &a);
        let m_s = (-&s).scale(&Float::with_val(P, Float::ln_u(6))).exp();
        assert!(parts[4].value.dist(&(&m_s * &h)) < 1e-70);
    }

    #[test]
    fn zeta_at_large_height() {
        // functional-equation-free check: zeta(s) by two different moduli
        let s = Cx::from_f64(P, 2.0, 1000.0);
        let a = zeta(&s);
        let mut b = Cx::zero(P);
        for v in residue_sums(&s, 4, P) {
            b += &v.value;
        }
        assert!(a.dist(&b) < 1e-65);
    }
}
