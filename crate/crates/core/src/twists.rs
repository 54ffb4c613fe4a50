//! Linear, character and smoothed twists, and the finite identities relating
//! them: the Ramanujan-sum lemma, the character decomposition of `F(s, 1/p)`
//! and its shifted form `G_k`.

use rug::Float;

use crate::arith::{divisors, gcd, is_prime, is_squarefree, mobius, prime_divisors, ramanujan_sum};
use crate::catalog::LSeries;
use crate::characters::{character_group, reconstruction_coefficient};
use crate::error::{Error, Result};
use crate::mp::{two_pi, Cx, Prec};
use crate::series::{evaluate, evaluate_direct, evaluate_many, Route, SeriesValue, Twist};

/// How twisted series are summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Fastest route with a certified radius.
    Auto,
    /// Direct truncation at the given number of terms.
    Direct(usize),
}

fn eval_many(f: &LSeries, s: &Cx, twists: &[Twist], method: Method) -> Result<Vec<SeriesValue>> {
    match method {
        Method::Auto => evaluate_many(f, s, twists, false).into_iter().collect(),
        Method::Direct(n) => twists.iter().map(|t| evaluate_direct(f, s, t, false, n)).collect(),
    }
}

/// Which twisted value is meant.
#[derive(Clone, Debug)]
pub enum TwistMode {
    Character(crate::characters::DirichletCharacter),
    /// `alpha = num/den`.
    Rational { num: i64, den: u64 },
    /// Real `alpha`; direct summation only.
    Linear(Float),
    /// `F_X(s, alpha)` with `z_X = 1/X + 2 pi i alpha`.
    Smoothed { alpha: Float, x: Float },
}

/// A twisted series attached to a base L-series.
#[derive(Clone, Debug)]
pub struct TwistEval<'a> {
    pub base: &'a LSeries,
    pub mode: TwistMode,
}

impl TwistEval<'_> {
    /// Value at `s`; `tol` bounds the accepted truncation radius.
    pub fn eval(&self, s: &Cx, tol: f64) -> Result<SeriesValue> {
        let out = match &self.mode {
            TwistMode::Character(chi) => evaluate(self.base, s, &Twist::Character(chi.clone()), false)?,
            TwistMode::Rational { num, den } => evaluate(self.base, s, &Twist::additive(*num, *den), false)?,
            TwistMode::Linear(alpha) => {
                linear_twist_eval(self.base, s, alpha, crate::series::DEFAULT_DIRECT_TERMS, tol)?
            }
            TwistMode::Smoothed { alpha, x } => smoothed_twist_eval(self.base, s, alpha, x, tol)?,
        };
        if out.radius > tol {
            return Err(Error::TailTooLarge { bound: out.radius, tol });
        }
        Ok(out)
    }
}

/// `F(s, alpha) = sum a(n) n^{-s} e(-n alpha)` by direct summation.
pub fn linear_twist_eval(f: &LSeries, s: &Cx, alpha: &Float, n_terms: usize, tol: f64) -> Result<SeriesValue> {
    let twist = if alpha.is_integer() { Twist::None } else { Twist::AdditiveReal(alpha.clone()) };
    let v = evaluate_direct(f, s, &twist, false, n_terms)?;
    if v.radius > tol {
        return Err(Error::TailTooLarge { bound: v.radius, tol });
    }
    Ok(v)
}

/// `z_X = 1/X + 2 pi i alpha`.
pub fn z_x(alpha: &Float, x: &Float) -> Cx {
    let p = alpha.prec();
    let re = Float::with_val(p, x.recip_ref());
    let mut im = two_pi(p);
    im *= alpha;
    Cx::new(re, im)
}

/// Number of terms after which `kappa sum_{n > N} n^{1/2 - sigma} e^{-n/X}` is
/// below `tol`, together with that bound.
pub fn smoothed_cutoff(kappa: f64, sigma: f64, x: f64, tol: f64) -> (usize, f64) {
    let a = 0.5 - sigma;
    // for N >= 2 a X each term is <= kappa N^a e^{-N/X} e^{-(n-N)/(2X)}
    let ln_den = (1.0 / (2.0 * x)).exp_m1().ln();
    let bound = |n: f64| (kappa.ln() + a * n.ln() - n / x - ln_den).exp();
    let mut n = (2.0 * a * x).max(1.0).ceil();
    while bound(n) > tol {
        n = (n * 1.25).ceil() + 1.0;
    }
    // shrink back to the smallest adequate cutoff on a fine grid
    let mut lo = (2.0 * a * x).max(1.0).ceil();
    while lo < n {
        let mid = ((lo + n) / 2.0).floor();
        if bound(mid) <= tol {
            n = mid;
        } else {
            lo = mid + 1.0;
        }
    }
    (n as usize, bound(n))
}

/// `F_X(s, alpha) = sum a(n) n^{-s} exp(-n z_X)`, truncated once the
/// exponential envelope certifies the tail below `tol`. Valid for every `s`.
pub fn smoothed_twist_eval(f: &LSeries, s: &Cx, alpha: &Float, x: &Float, tol: f64) -> Result<SeriesValue> {
    if *x <= 0 {
        return Err(Error::InvalidInput("X must be positive".into()));
    }
    let p = s.prec();
    let sigma = s.re.to_f64();
    let (n, radius) = smoothed_cutoff(f.kappa, sigma, x.to_f64(), tol);
    let wp = p + 16 + (n.max(2) as f64).log2().ceil() as u32;
    let sw = s.with_prec(wp);
    let a = f.coefficients(n, wp)?;
    let step = (-z_x(&Float::with_val(wp, alpha), &Float::with_val(wp, x))).exp();
    let pw = crate::special::PowerTable::new(&sw, n);
    let mut damp = step.clone();
    let mut acc = Cx::zero(wp);
    for k in 1..=n {
        if !a[k - 1].is_zero() {
            acc += &(&a[k - 1] * pw.get(k)) * &damp;
        }
        damp = &damp * &step;
    }
    Ok(SeriesValue { value: acc.with_prec(p), radius, n_terms: n as u64, route: Route::Direct })
}

/// Result of one identity check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub check: &'static str,
    pub fname: String,
    pub q_or_p: u64,
    pub s: Cx,
    pub n_terms: u64,
    pub residual: f64,
    pub tail_radius: f64,
}

impl CheckOutcome {
    pub fn passes(&self, residual_tol: f64, tail_tol: f64) -> bool {
        self.residual.is_finite() && self.residual < residual_tol && self.tail_radius < tail_tol
    }
}

/// `sum_{d | q} d mu(q/d) prod_{p | d} (1 - F_p(s)^{-1})`.
pub fn sum_lemma_multiplier(f: &LSeries, q: u64, s: &Cx) -> Result<Cx> {
    if q == 0 || !is_squarefree(q) {
        return Err(Error::InvalidInput(format!("q = {q} must be square-free")));
    }
    let prec = s.prec();
    let primes = prime_divisors(q);
    let local: Vec<(u64, Cx)> = primes
        .iter()
        .map(|&p| Ok((p, Cx::one(prec) - f.local_factor_inverse(p, s)?)))
        .collect::<Result<_>>()?;
    let mut acc = Cx::zero(prec);
    for d in divisors(q) {
        let mut term = Cx::from_int(prec, d as i64 * mobius(q / d));
        for (p, l) in &local {
            if d % p == 0 {
                term = &term * l;
            }
        }
        acc += term;
    }
    Ok(acc)
}

/// Twists `a/q` for `1 <= a <= q`, `(a, q) = 1`.
fn reduced_twists(q: u64) -> Vec<Twist> {
    (1..=q).filter(|&a| gcd(a, q) == 1).map(|a| Twist::additive(a as i64, q)).collect()
}

/// `|sum_{(a,q)=1} F(s, a/q) - F(s) M_q(s)|` with `M_q` the divisor-sum
/// multiplier of [`sum_lemma_multiplier`].
pub fn sum_lemma_check(f: &LSeries, q: u64, s: &Cx, method: Method) -> Result<CheckOutcome> {
    let m = sum_lemma_multiplier(f, q, s)?;
    let mut twists = reduced_twists(q);
    twists.push(Twist::None);
    let vals = eval_many(f, s, &twists, method)?;
    let (base, parts) = vals.split_last().expect("nonempty");
    let mut lhs = Cx::zero(s.prec());
    let mut radius = 0f64;
    let mut n_terms = base.n_terms;
    for v in parts {
        lhs += &v.value;
        radius += v.radius;
        n_terms = n_terms.max(v.n_terms);
    }
    radius += m.abs().to_f64() * base.radius;
    let rhs = &base.value * &m;
    Ok(CheckOutcome {
        check: "sum-lemma",
        fname: f.name.clone(),
        q_or_p: q,
        s: s.clone(),
        n_terms,
        residual: lhs.dist(&rhs).to_f64(),
        tail_radius: radius,
    })
}

/// `|F(s,1/p) - sum_{chi != chi_0} c(chi,p) F^chi(s) - (1 - p/(p-1) F_p(s)^{-1}) F(s)|`.
pub fn twist_decomposition_check(f: &LSeries, p: u64, s: &Cx, method: Method) -> Result<CheckOutcome> {
    if !is_prime(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    let prec = s.prec();
    let group = character_group(p);
    let mut twists = vec![Twist::additive(1, p), Twist::None];
    twists.extend(group.iter().skip(1).map(|c| Twist::Character(c.clone())));
    let vals = eval_many(f, s, &twists, method)?;
    let mut radius = 0f64;
    let mut n_terms = 0;
    for v in &vals {
        n_terms = n_terms.max(v.n_terms);
    }
    let mut rhs = Cx::zero(prec);
    for (chi, v) in group.iter().skip(1).zip(&vals[2..]) {
        let c = reconstruction_coefficient(chi, prec);
        rhs += &c * &v.value;
        radius += c.abs().to_f64() * v.radius;
    }
    let inv = f.local_factor_inverse(p, s)?;
    let mut k = inv.scale(&Float::with_val(prec, Float::with_val(prec, p) / (p - 1)));
    k = Cx::one(prec) - k;
    rhs += &k * &vals[1].value;
    radius += k.abs().to_f64() * vals[1].radius + vals[0].radius;
    Ok(CheckOutcome {
        check: "twist-decomp",
        fname: f.name.clone(),
        q_or_p: p,
        s: s.clone(),
        n_terms,
        residual: vals[0].value.dist(&rhs).to_f64(),
        tail_radius: radius,
    })
}

/// `(1/F(s)) sum_{(a,q)=1} F(s, a/q)` with its propagated radius.
pub fn gk_value(f: &LSeries, q: u64, s: &Cx, method: Method) -> Result<(Cx, f64, u64)> {
    let mut twists = reduced_twists(q);
    twists.push(Twist::None);
    let vals = eval_many(f, s, &twists, method)?;
    let (base, parts) = vals.split_last().expect("nonempty");
    let mut sum = Cx::zero(s.prec());
    let mut rad = 0f64;
    let mut n_terms = base.n_terms;
    for v in parts {
        sum += &v.value;
        rad += v.radius;
        n_terms = n_terms.max(v.n_terms);
    }
    let fabs = base.value.abs().to_f64();
    if fabs <= base.radius {
        return Err(Error::TailTooLarge { bound: base.radius, tol: fabs });
    }
    let g = &sum / &base.value;
    // |S/F - S'/F'| <= (dS + |S/F| dF) / (|F| - dF)
    let radius = (rad + g.abs().to_f64() * base.radius) / (fabs - base.radius);
    Ok((g, radius, n_terms))
}

/// `|G(s + i tau) - sum_{d|q} d mu(q/d) prod_{p|d}(1 - F_p(s + i tau)^{-1})|`.
pub fn gk_identity_check(f: &LSeries, q: u64, s: &Cx, tau: &Float, method: Method) -> Result<CheckOutcome> {
    let mut st = s.clone();
    st.im += tau;
    let m = sum_lemma_multiplier(f, q, &st)?;
    let (g, radius, n_terms) = gk_value(f, q, &st, method)?;
    Ok(CheckOutcome {
        check: "gk",
        fname: f.name.clone(),
        q_or_p: q,
        s: st,
        n_terms,
        residual: g.dist(&m).to_f64(),
        tail_radius: radius,
    })
}

/// Largest `|c_q(n) - sum_{(a,q)=1} e(an/q)|` over `q, n <= bound`.
pub fn kluyver_check(bound: u64, prec: Prec) -> f64 {
    let mut worst = Float::new(prec);
    for q in 1..=bound {
        let roots: Vec<Cx> = (0..q).map(|k| Cx::e_frac(prec, k as i64, q as i64)).collect();
        let units: Vec<u64> = (1..=q).filter(|&a| gcd(a, q) == 1).collect();
        for n in 1..=bound {
            let mut acc = Cx::zero(prec);
            for &a in &units {
                acc += &roots[((a * n) % q) as usize];
            }
            let d = acc.dist(&Cx::from_int(prec, ramanujan_sum(q, n as i64)));
            if d > worst {
                worst = d;
            }
        }
    }
    worst.to_f64()
}
