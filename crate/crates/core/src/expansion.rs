//! The expansion algebra: the falling-factorial coefficients `C_{mu,l}`, the
//! polynomials `R_nu`, `V_mu`, `A_{mu,nu}`, `Q_nu` in `s`, the residual
//! oracles for the asymptotic identities they satisfy, and a text cache.

use std::fmt::Write as _;
use std::path::Path;

use rug::{Float, Integer, Rational};

use crate::bernoulli::{bernoulli_poly, RationalPoly};
use crate::error::{Error, Result};
use crate::mp::{fmt_real, parse_real, roundtrip_digits, Cx, Prec};
use crate::selberg::{h_invariant, invariants, GammaFactorData};

/// Largest `mu` for which `V_{mu,N}` is built from the literal composition sum.
pub const MAX_COMPOSITION: usize = 12;
/// Largest index accepted by [`compute_c`].
pub const MAX_C_INDEX: usize = 64;

/// Complex polynomial in `s`, lowest power first.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyC {
    pub coeffs: Vec<Cx>,
    pub prec: Prec,
}

impl PolyC {
    pub fn new(mut coeffs: Vec<Cx>, prec: Prec) -> Self {
        while coeffs.last().map_or(false, Cx::is_zero) {
            coeffs.pop();
        }
        PolyC { coeffs, prec }
    }

    pub fn zero(prec: Prec) -> Self {
        PolyC { coeffs: Vec::new(), prec }
    }

    pub fn constant(c: Cx) -> Self {
        let p = c.prec();
        PolyC::new(vec![c], p)
    }

    /// `a + b s`.
    pub fn linear(a: Cx, b: Cx) -> Self {
        let p = a.prec();
        PolyC::new(vec![a, b], p)
    }

    pub fn monomial(k: usize, prec: Prec) -> Self {
        let mut c = vec![Cx::zero(prec); k + 1];
        c[k] = Cx::one(prec);
        PolyC { coeffs: c, prec }
    }

    pub fn coeff(&self, k: usize) -> Cx {
        self.coeffs.get(k).cloned().unwrap_or_else(|| Cx::zero(self.prec))
    }

    /// `2^{-prec/2}`: coefficients below this modulus count as zero.
    pub fn zero_threshold(prec: Prec) -> Float {
        let mut t = Float::with_val(prec, 1);
        t >>= prec / 2;
        t
    }

    /// Index of the last coefficient above the zero threshold.
    pub fn degree(&self) -> Option<usize> {
        let t = Self::zero_threshold(self.prec);
        self.coeffs.iter().rposition(|c| c.abs() > t)
    }

    pub fn eval(&self, s: &Cx) -> Cx {
        let mut acc = Cx::zero(s.prec());
        for c in self.coeffs.iter().rev() {
            acc = &acc * s;
            acc += c;
        }
        acc
    }

    pub fn add(&self, other: &PolyC) -> PolyC {
        let n = self.coeffs.len().max(other.coeffs.len());
        PolyC::new((0..n).map(|k| &self.coeff(k) + &other.coeff(k)).collect(), self.prec)
    }

    pub fn sub(&self, other: &PolyC) -> PolyC {
        let n = self.coeffs.len().max(other.coeffs.len());
        PolyC::new((0..n).map(|k| &self.coeff(k) - &other.coeff(k)).collect(), self.prec)
    }

    pub fn mul(&self, other: &PolyC) -> PolyC {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return PolyC::zero(self.prec);
        }
        let mut out = vec![Cx::zero(self.prec); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j].add_mul(a, b);
            }
        }
        PolyC::new(out, self.prec)
    }

    pub fn scale(&self, k: &Cx) -> PolyC {
        PolyC::new(self.coeffs.iter().map(|c| c * k).collect(), self.prec)
    }

    pub fn scale_rational(&self, q: &Rational) -> PolyC {
        PolyC::new(self.coeffs.iter().map(|c| c.scale_rational(q)).collect(), self.prec)
    }

    pub fn pow(&self, n: usize) -> PolyC {
        let mut acc = PolyC::constant(Cx::one(self.prec));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// `p(x(s))` for a rational polynomial `p`.
    pub fn compose(p: &RationalPoly, x: &PolyC) -> PolyC {
        let mut acc = PolyC::zero(x.prec);
        for c in p.coeffs.iter().rev() {
            acc = acc.mul(x).add(&PolyC::constant(Cx::from_rational(x.prec, c)));
        }
        acc
    }

    /// `max_k |a_k - b_k|`.
    pub fn max_dist(&self, other: &PolyC) -> Float {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut m = Float::new(self.prec);
        for k in 0..n {
            let d = self.coeff(k).dist(&other.coeff(k));
            if d > m {
                m = d;
            }
        }
        m
    }
}

/// Exact table of `C_{mu,l}` with `1/w^mu ~ sum_l C_{mu,l} / ((w-1)...(w-l))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CTable {
    pub max_index: usize,
    /// `entries[mu-1][l-mu]`.
    entries: Vec<Vec<Rational>>,
}

impl CTable {
    pub fn get(&self, mu: usize, ell: usize) -> &Rational {
        assert!(1 <= mu && mu <= ell && ell <= self.max_index, "C index ({mu}, {ell}) out of range");
        &self.entries[mu - 1][ell - mu]
    }

    pub fn is_unitriangular(&self) -> bool {
        (1..=self.max_index).all(|m| *self.get(m, m) == 1)
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().flatten().all(|c| *c.denom() == 1)
    }
}

/// Coefficients `D[l][n]` of `w^{-n}` in `1/((w-1)...(w-l))`, `1 <= l <= n <= m`.
/// Multiplying by `w - l` gives `D[l][n+1] = D[l-1][n] + l D[l][n]`.
pub fn falling_series(m: usize) -> Vec<Vec<Integer>> {
    let mut d = vec![vec![Integer::new(); m + 1]; m + 1];
    if m == 0 {
        return d;
    }
    // 1/(w-1) = sum_{n>=1} w^{-n}
    for n in 1..=m {
        d[1][n] = Integer::from(1);
    }
    for l in 2..=m {
        d[l][l] = Integer::from(1);
        for n in l..m {
            let next = Integer::from(&d[l - 1][n] + Integer::from(&d[l][n] * l as u32));
            d[l][n + 1] = next;
        }
    }
    d
}

/// Solves the unitriangular system for `C_{mu,l}` order by order in `1/w`.
pub fn compute_c(m: usize) -> Result<CTable> {
    if !(1..=MAX_C_INDEX).contains(&m) {
        return Err(Error::InvalidInput(format!("C table size {m} outside 1..={MAX_C_INDEX}")));
    }
    let d = falling_series(m);
    let mut entries = Vec::with_capacity(m);
    for mu in 1..=m {
        let mut row: Vec<Rational> = Vec::with_capacity(m - mu + 1);
        for n in mu..=m {
            // coefficient of w^{-n}: sum_{l=mu}^{n} C_{mu,l} D[l][n] = [n = mu]
            let mut rhs = Rational::from(if n == mu { 1 } else { 0 });
            for l in mu..n {
                rhs -= Rational::from(&row[l - mu] * &d[l][n]);
            }
            row.push(rhs / Rational::from(&d[n][n]));
        }
        entries.push(row);
    }
    Ok(CTable { max_index: m, entries })
}

/// `|1/w^mu - sum_{l=mu}^{m} C_{mu,l} / ((w-1)...(w-l))|`, requires `|w| >= 2m`.
pub fn asymptotic_residual_c(ct: &CTable, mu: usize, m: usize, w: &Cx) -> Result<Float> {
    if !(1 <= mu && mu <= m && m <= ct.max_index) {
        return Err(Error::InvalidInput(format!("need 1 <= mu={mu} <= M={m} <= {}", ct.max_index)));
    }
    if w.abs() < 2 * m as u32 {
        return Err(Error::OutsideRegime(format!("|w| < 2M = {}", 2 * m)));
    }
    let p = w.prec();
    let mut sum = Cx::zero(p);
    let mut fall = Cx::one(p);
    for l in 1..=m {
        fall = &fall * &w.add_i64(-(l as i64));
        if l >= mu {
            sum += fall.recip().scale_rational(ct.get(mu, l));
        }
    }
    Ok(w.powi(-(mu as i64)).dist(&sum))
}

/// `theta_F` and `eta(s) = 2s - 1 + 2 i theta_F` as a polynomial in `s`.
fn eta_poly(g: &GammaFactorData) -> Result<(Float, PolyC)> {
    let p = g.prec();
    let theta = invariants(g)?.theta;
    let a = Cx::new(Float::with_val(p, -1), Float::with_val(p, &theta * 2u32));
    Ok((theta, PolyC::linear(a, Cx::from_int(p, 2))))
}

/// Generalized binomial `C(-mu, k) = (-1)^k C(mu + k - 1, k)`.
pub fn neg_binomial(mu: usize, k: usize) -> Integer {
    let b = Integer::from(mu + k - 1).binomial(k as u32);
    if k % 2 == 1 {
        -b
    } else {
        b
    }
}

fn a_from_eta(ct: &CTable, eta: &PolyC, mu: usize, nu: usize) -> PolyC {
    let p = eta.prec;
    let mut acc = PolyC::zero(p);
    let mut eta_k = PolyC::constant(Cx::one(p));
    for k in 0..=nu - mu {
        let c = Rational::from(neg_binomial(mu, k)) * ct.get(mu + k, nu);
        acc = acc.add(&eta_k.scale_rational(&c));
        eta_k = eta_k.mul(eta);
    }
    acc
}

/// `A_{mu,nu}(s) = sum_{k=0}^{nu-mu} C(-mu,k) C_{mu+k,nu} (2s - 1 + 2 i theta_F)^k`.
pub fn compute_a(g: &GammaFactorData, ct: &CTable, mu: usize, nu: usize) -> Result<PolyC> {
    if !(1 <= mu && mu <= nu && nu <= ct.max_index) {
        return Err(Error::InvalidInput(format!("need 1 <= mu={mu} <= nu={nu} <= {}", ct.max_index)));
    }
    let (_, eta) = eta_poly(g)?;
    Ok(a_from_eta(ct, &eta, mu, nu))
}

/// `R_nu(s)` from the Bernoulli polynomials and the H-invariants.
pub fn compute_r(g: &GammaFactorData, nu: usize) -> Result<PolyC> {
    if nu == 0 {
        return Err(Error::InvalidInput("R_nu needs nu >= 1".into()));
    }
    let p = g.prec();
    let (theta, _) = eta_poly(g)?;
    let n1 = nu + 1;
    let b = bernoulli_poly(n1);
    let arg = PolyC::linear(Cx::new(Float::with_val(p, 1), Float::with_val(p, &theta * -2i32)), Cx::from_int(p, -2));
    let mut out = PolyC::compose(&b, &arg);
    out = out.add(&PolyC::constant(Cx::from_rational(p, &b.eval(&Rational::from(1)))));

    let one_minus_s = PolyC::linear(Cx::one(p), Cx::from_int(p, -1));
    let sign = if nu % 2 == 0 { 1 } else { -1 };
    let mut half_sum = PolyC::zero(p);
    let mut binom = Integer::from(1);
    for k in 0..=n1 {
        let h = h_invariant(g, k);
        let bk = Cx::from_rational(p, &Rational::from(&binom));
        let t1 = PolyC::monomial(n1 - k, p).scale(&(&h * &bk).scale_i64(sign));
        let t2 = one_minus_s.pow(n1 - k).scale(&(&h.conj() * &bk));
        half_sum = half_sum.add(&t1.sub(&t2));
        binom *= (n1 - k) as u32;
        binom /= (k + 1) as u32;
    }
    Ok(out.add(&half_sum.scale_rational(&Rational::from((1, 2)))))
}

/// `R_nu / (nu (nu + 1))`.
fn r_weighted(r: &[PolyC], nu: usize) -> PolyC {
    r[nu - 1].scale_rational(&Rational::from((1, (nu * (nu + 1)) as u64)))
}

/// `V_{mu,N}` for `mu = 1..=max_mu` as the literal sum over ordered
/// compositions with parts at most `n_cap`, weighted by `1/m!`.
/// `r` must hold `R_1..R_{min(n_cap, max_mu)}`.
pub fn compute_v_all(r: &[PolyC], max_mu: usize, n_cap: usize) -> Result<Vec<PolyC>> {
    if max_mu > MAX_COMPOSITION {
        return Err(Error::InvalidInput(format!("V_mu limited to mu <= {MAX_COMPOSITION}")));
    }
    if n_cap == 0 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    let top = n_cap.min(max_mu);
    if r.len() < top {
        return Err(Error::InvalidInput(format!("need R_1..R_{top}, have {}", r.len())));
    }
    let prec = r.first().map_or(64, |p| p.prec);
    let parts: Vec<PolyC> = (1..=top).map(|nu| r_weighted(r, nu)).collect();
    // by_len[mu][m]: sum over compositions of mu with m parts of the product
    let mut by_len = vec![vec![PolyC::zero(prec); max_mu + 1]; max_mu + 1];

    fn dfs(parts: &[PolyC], max_mu: usize, sum: usize, m: usize, prod: &PolyC, by_len: &mut [Vec<PolyC>]) {
        for (i, part) in parts.iter().enumerate() {
            let next = sum + i + 1;
            if next > max_mu {
                break;
            }
            let p = prod.mul(part);
            by_len[next][m + 1] = by_len[next][m + 1].add(&p);
            dfs(parts, max_mu, next, m + 1, &p, by_len);
        }
    }
    dfs(&parts, max_mu, 0, 0, &PolyC::constant(Cx::one(prec)), &mut by_len);

    let mut out = Vec::with_capacity(max_mu);
    for mu in 1..=max_mu {
        let mut acc = PolyC::zero(prec);
        let mut fact = Integer::from(1);
        for m in 1..=mu {
            fact *= m as u32;
            acc = acc.add(&by_len[mu][m].scale_rational(&Rational::from((Integer::from(1), fact.clone()))));
        }
        if mu % 2 == 1 {
            acc = acc.scale(&Cx::from_int(prec, -1));
        }
        out.push(acc);
    }
    Ok(out)
}

/// `V_{mu,N}(s)`.
pub fn compute_v(g: &GammaFactorData, mu: usize, n_cap: usize) -> Result<PolyC> {
    if mu == 0 {
        return Err(Error::InvalidInput("V_mu needs mu >= 1".into()));
    }
    let r = (1..=n_cap.min(mu)).map(|nu| compute_r(g, nu)).collect::<Result<Vec<_>>>()?;
    Ok(compute_v_all(&r, mu, n_cap)?.pop().expect("mu >= 1"))
}

/// Coefficients `e_1..e_max` of `exp(sum_{nu<=N} (-1)^nu R_nu/(nu(nu+1)) x^nu)`
/// via `e_mu = (1/mu) sum_k k p_k e_{mu-k}`.
pub fn exp_series_coeffs(r: &[PolyC], max_mu: usize, n_cap: usize) -> Vec<PolyC> {
    let prec = r.first().map_or(64, |p| p.prec);
    let p_k: Vec<PolyC> = (1..=max_mu)
        .map(|k| {
            if k > n_cap {
                PolyC::zero(prec)
            } else {
                let w = r_weighted(r, k);
                if k % 2 == 1 {
                    w.scale(&Cx::from_int(prec, -1))
                } else {
                    w
                }
            }
        })
        .collect();
    let mut e = vec![PolyC::constant(Cx::one(prec))];
    for mu in 1..=max_mu {
        let mut acc = PolyC::zero(prec);
        for k in 1..=mu {
            acc = acc.add(&p_k[k - 1].mul(&e[mu - k]).scale(&Cx::from_int(prec, k as i64)));
        }
        e.push(acc.scale_rational(&Rational::from((1, mu as u64))));
    }
    e.remove(0);
    e
}

/// `Q_nu = sum_{mu=1}^{nu} V_mu A_{mu,nu}`, `Q_0 = 1`.
/// `v[mu-1] = V_mu`, `a[mu-1][nu-mu] = A_{mu,nu}`.
pub fn compute_q(v: &[PolyC], a: &[Vec<PolyC>], nu: usize, prec: Prec) -> Result<PolyC> {
    if nu == 0 {
        return Ok(PolyC::constant(Cx::one(prec)));
    }
    if v.len() < nu || a.len() < nu {
        return Err(Error::InvalidInput(format!("Q_{nu} needs V and A up to index {nu}")));
    }
    let mut acc = PolyC::zero(prec);
    for mu in 1..=nu {
        let amn = a[mu - 1]
            .get(nu - mu)
            .ok_or_else(|| Error::InvalidInput(format!("missing A_{{{mu},{nu}}}")))?;
        acc = acc.add(&v[mu - 1].mul(amn));
    }
    Ok(acc)
}

/// Recorded growth constants: `|Q_nu(s)| <= (A(|s|+1))^{2nu}/nu!` and
/// `|R_nu(s)| <= (c'(|s|+1))^{nu+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub a: Float,
    pub cprime: Float,
}

/// Number of sample points used by the calibration.
pub const CALIBRATION_SAMPLES: usize = 100;
/// Radius of the calibration disc.
pub const CALIBRATION_RADIUS: f64 = 20.0;
/// Highest `nu` entering the calibration.
pub const CALIBRATION_NU: usize = 10;
/// Factor applied to the observed maxima before recording.
pub const CALIBRATION_MARGIN: f64 = 1.1;

/// Golden-angle spiral filling the disc `|s| <= radius`.
pub fn spiral_samples(n: usize, radius: f64, prec: Prec) -> Vec<Cx> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let r = radius * ((k as f64 + 1.0) / n as f64).sqrt();
            let a = golden * k as f64;
            Cx::from_f64(prec, r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Observed `max (nu! |Q_nu(s)|)^{1/(2nu)}/(|s|+1)` and
/// `max |R_nu(s)|^{1/(nu+1)}/(|s|+1)` over the samples.
pub fn growth_ratios(r: &[PolyC], q: &[PolyC], samples: &[Cx], nu_max: usize) -> (f64, f64) {
    let mut a_max = 0f64;
    let mut c_max = 0f64;
    for s in samples {
        let scale = s.abs().to_f64() + 1.0;
        let mut ln_fact = 0f64;
        for nu in 1..=nu_max {
            ln_fact += (nu as f64).ln();
            if let Some(qn) = q.get(nu) {
                let v = qn.eval(s).abs().to_f64();
                if v > 0.0 {
                    let t = ((ln_fact + v.ln()) / (2 * nu) as f64).exp() / scale;
                    a_max = a_max.max(t);
                }
            }
            if let Some(rn) = r.get(nu - 1) {
                let v = rn.eval(s).abs().to_f64();
                if v > 0.0 {
                    c_max = c_max.max((v.ln() / (nu + 1) as f64).exp() / scale);
                }
            }
        }
    }
    (a_max, c_max)
}

/// All polynomial tables for one gamma-factor datum and cutoff `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTables {
    pub gamma: GammaFactorData,
    pub cutoff: usize,
    pub theta: Float,
    pub ctable: CTable,
    /// `R_1..R_N`.
    pub r: Vec<PolyC>,
    /// `V_1..V_N`.
    pub v: Vec<PolyC>,
    /// `a[mu-1][nu-mu] = A_{mu,nu}`.
    pub a: Vec<Vec<PolyC>>,
    /// `Q_0..Q_N`.
    pub q: Vec<PolyC>,
    pub calibration: Calibration,
}

impl ExpansionTables {
    pub fn build(g: &GammaFactorData, cutoff: usize) -> Result<Self> {
        if !(1..=MAX_COMPOSITION).contains(&cutoff) {
            return Err(Error::InvalidInput(format!("cutoff N = {cutoff} outside 1..={MAX_COMPOSITION}")));
        }
        let prec = g.prec();
        let (theta, eta) = eta_poly(g)?;
        let ctable = compute_c(cutoff)?;
        let r = (1..=cutoff).map(|nu| compute_r(g, nu)).collect::<Result<Vec<_>>>()?;
        let v = compute_v_all(&r, cutoff, cutoff)?;
        let a: Vec<Vec<PolyC>> =
            (1..=cutoff).map(|mu| (mu..=cutoff).map(|nu| a_from_eta(&ctable, &eta, mu, nu)).collect()).collect();
        let q = (0..=cutoff).map(|nu| compute_q(&v, &a, nu, prec)).collect::<Result<Vec<_>>>()?;
        let samples = spiral_samples(CALIBRATION_SAMPLES, CALIBRATION_RADIUS, prec);
        let (a_obs, c_obs) = growth_ratios(&r, &q, &samples, cutoff.min(CALIBRATION_NU));
        let calibration = Calibration {
            a: Float::with_val(prec, a_obs * CALIBRATION_MARGIN),
            cprime: Float::with_val(prec, c_obs * CALIBRATION_MARGIN),
        };
        Ok(ExpansionTables { gamma: g.clone(), cutoff, theta, ctable, r, v, a, q, calibration })
    }

    pub fn prec(&self) -> Prec {
        self.gamma.prec()
    }

    pub fn a_entry(&self, mu: usize, nu: usize) -> &PolyC {
        &self.a[mu - 1][nu - mu]
    }

    /// `eta(s) = 2s - 1 + 2 i theta_F`.
    pub fn eta_at(&self, s: &Cx) -> Cx {
        let p = s.prec();
        let mut e = s.scale_i64(2).add_i64(-1);
        e.im += Float::with_val(p, &self.theta * 2u32);
        e
    }

    /// `|w + eta| >= 2 (c'(|s|+1))^2`.
    pub fn check_regime(&self, s: &Cx, w: &Cx) -> Result<Cx> {
        let we = w + &self.eta_at(s);
        let mut bound = Float::with_val(s.prec(), s.abs() + 1u32) * &self.calibration.cprime;
        bound.square_mut();
        bound *= 2u32;
        if we.abs() < bound {
            return Err(Error::OutsideRegime(format!("|w + eta| < 2(c'(|s|+1))^2 = {}", bound.to_f64())));
        }
        Ok(we)
    }

    /// `exp(sum_{nu<=N} (-1)^nu R_nu(s) / (nu (nu+1) (w+eta)^nu))`.
    fn exp_side(&self, s: &Cx, we: &Cx) -> Cx {
        let p = s.prec();
        let inv = we.recip();
        let mut pw = Cx::one(p);
        let mut sum = Cx::zero(p);
        for nu in 1..=self.cutoff {
            pw = &pw * &inv;
            let mut t = &self.r[nu - 1].eval(s) * &pw;
            t = t.scale_rational(&Rational::from((1, (nu * (nu + 1)) as u64)));
            if nu % 2 == 1 {
                sum -= t;
            } else {
                sum += t;
            }
        }
        sum.exp()
    }

    /// `V_{mu,N}` for `mu <= m`, from the table or the literal sum beyond `N`.
    pub fn v_truncated(&self, m: usize) -> Result<Vec<PolyC>> {
        if m <= self.cutoff {
            Ok(self.v[..m].to_vec())
        } else {
            compute_v_all(&self.r, m, self.cutoff)
        }
    }

    /// `|exp(...) - 1 - sum_{mu<=M} V_{mu,N}(s)/(w+eta)^mu|`.
    pub fn asymptotic_residual_exp_v(&self, m: usize, s: &Cx, w: &Cx) -> Result<Float> {
        let we = self.check_regime(s, w)?;
        let v = self.v_truncated(m)?;
        let p = s.prec();
        let inv = we.recip();
        let mut pw = Cx::one(p);
        let mut sum = Cx::one(p);
        for vm in &v {
            pw = &pw * &inv;
            sum += &vm.eval(s) * &pw;
        }
        Ok(self.exp_side(s, &we).dist(&sum))
    }

    /// `|exp(...) - sum_{nu=0}^{M} Q_nu(s) / ((w-1)...(w-nu))|`.
    pub fn assembly_residual(&self, m: usize, s: &Cx, w: &Cx) -> Result<Float> {
        if m > self.cutoff {
            return Err(Error::InvalidInput(format!("M = {m} exceeds cutoff {}", self.cutoff)));
        }
        let we = self.check_regime(s, w)?;
        let p = s.prec();
        let mut fall = Cx::one(p);
        let mut sum = Cx::zero(p);
        for nu in 0..=m {
            if nu > 0 {
                fall = &fall * &w.add_i64(-(nu as i64));
            }
            sum += &self.q[nu].eval(s) * &fall.recip();
        }
        Ok(self.exp_side(s, &we).dist(&sum))
    }

    pub fn to_cache_string(&self) -> String {
        let digits = roundtrip_digits(self.prec());
        let mut out = String::new();
        let _ = writeln!(out, "# exptable v1");
        let _ = writeln!(out, "# prec={} N={}", self.prec(), self.cutoff);
        let _ = writeln!(out, "ctable M={}", self.ctable.max_index);
        for mu in 1..=self.ctable.max_index {
            for ell in mu..=self.ctable.max_index {
                let c = self.ctable.get(mu, ell);
                let _ = writeln!(out, "{mu} {ell} {} {}", c.numer(), c.denom());
            }
        }
        let mut block = |name: &str, index: String, p: &PolyC| {
            let deg = p.degree().map_or(-1, |d| d as i64);
            let _ = writeln!(out, "poly {name} {index} deg={deg}");
            for (k, c) in p.coeffs.iter().enumerate() {
                let _ = writeln!(out, "{k} {} {}", fmt_real(&c.re, digits), fmt_real(&c.im, digits));
            }
        };
        for (i, p) in self.r.iter().enumerate() {
            block("R", (i + 1).to_string(), p);
        }
        for (i, p) in self.v.iter().enumerate() {
            block("V", (i + 1).to_string(), p);
        }
        for mu in 1..=self.cutoff {
            for nu in mu..=self.cutoff {
                block("A", format!("{mu},{nu}"), self.a_entry(mu, nu));
            }
        }
        for (i, p) in self.q.iter().enumerate() {
            block("Q", i.to_string(), p);
        }
        let _ = writeln!(
            out,
            "calib A={} cprime={}",
            fmt_real(&self.calibration.a, digits),
            fmt_real(&self.calibration.cprime, digits)
        );
        out
    }

    /// Parses a cache produced by [`to_cache_string`](Self::to_cache_string) for the data `g`.
    pub fn from_cache_str(text: &str, g: &GammaFactorData) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::ParseLine { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).peekable();
        match lines.next() {
            Some((_, "# exptable v1")) => {}
            _ => return Err(err(1, "missing header `# exptable v1`")),
        }
        let mut prec = g.prec();
        let mut cutoff = None;
        while let Some(&(ln, l)) = lines.peek() {
            if !l.starts_with('#') {
                break;
            }
            for tok in l.trim_start_matches('#').split_whitespace() {
                if let Some(v) = tok.strip_prefix("prec=") {
                    prec = v.parse().map_err(|_| err(ln, "bad prec"))?;
                } else if let Some(v) = tok.strip_prefix("N=") {
                    cutoff = Some(v.parse::<usize>().map_err(|_| err(ln, "bad N"))?);
                }
            }
            lines.next();
        }
        let g = g.with_prec(prec);

        let (ln, l) = lines.next().ok_or_else(|| err(0, "missing ctable block"))?;
        let m: usize = l
            .strip_prefix("ctable M=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, "expected `ctable M=<M>`"))?;
        if !(1..=MAX_C_INDEX).contains(&m) {
            return Err(err(ln, "ctable size out of range"));
        }
        let mut entries: Vec<Vec<Rational>> = (1..=m).map(|mu| Vec::with_capacity(m - mu + 1)).collect();
        for mu in 1..=m {
            for ell in mu..=m {
                let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated ctable"))?;
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() != 4 || f[0].parse::<usize>().ok() != Some(mu) || f[1].parse::<usize>().ok() != Some(ell) {
                    return Err(err(ln, &format!("expected ctable entry ({mu}, {ell})")));
                }
                let num: Integer = f[2].parse().map_err(|_| err(ln, "bad numerator"))?;
                let den: Integer = f[3].parse().map_err(|_| err(ln, "bad denominator"))?;
                if den == 0 {
                    return Err(err(ln, "zero denominator"));
                }
                entries[mu - 1].push(Rational::from((num, den)));
            }
        }
        let ctable = CTable { max_index: m, entries };
        let cutoff = cutoff.unwrap_or(m);

        let mut r = Vec::new();
        let mut v = Vec::new();
        let mut a: Vec<Vec<PolyC>> = (1..=cutoff).map(|_| Vec::new()).collect();
        let mut q = Vec::new();
        let mut calibration = None;
        while let Some((ln, l)) = lines.next() {
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix("calib ") {
                let mut ca = None;
                let mut cc = None;
                for tok in rest.split_whitespace() {
                    if let Some(x) = tok.strip_prefix("A=") {
                        ca = Some(parse_real(prec, x).map_err(|_| err(ln, "bad A"))?);
                    } else if let Some(x) = tok.strip_prefix("cprime=") {
                        cc = Some(parse_real(prec, x).map_err(|_| err(ln, "bad cprime"))?);
                    }
                }
                match (ca, cc) {
                    (Some(a), Some(cprime)) => calibration = Some(Calibration { a, cprime }),
                    _ => return Err(err(ln, "calib needs A= and cprime=")),
                }
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 || f[0] != "poly" {
                return Err(err(ln, "expected `poly <name> <index> deg=<d>`"));
            }
            let deg: i64 = f[3]
                .strip_prefix("deg=")
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| err(ln, "bad degree field"))?;
            let mut coeffs = Vec::new();
            while let Some(&(cl, c)) = lines.peek() {
                let t: Vec<&str> = c.split_whitespace().collect();
                if t.len() != 3 || t[0].parse::<usize>().is_err() {
                    break;
                }
                if t[0].parse::<usize>().ok() != Some(coeffs.len()) {
                    return Err(err(cl, "coefficient index out of order"));
                }
                let re = parse_real(prec, t[1]).map_err(|_| err(cl, "bad real part"))?;
                let im = parse_real(prec, t[2]).map_err(|_| err(cl, "bad imaginary part"))?;
                coeffs.push(Cx::new(re, im));
                lines.next();
            }
            let poly = PolyC::new(coeffs, prec);
            if poly.degree().map_or(-1, |d| d as i64) != deg {
                return Err(err(ln, "declared degree does not match coefficients"));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| err(ln, "bad index"));
            match f[1] {
                "R" if idx(f[2])? == r.len() + 1 => r.push(poly),
                "V" if idx(f[2])? == v.len() + 1 => v.push(poly),
                "Q" if idx(f[2])? == q.len() => q.push(poly),
                "A" => {
                    let (mu, nu) = f[2].split_once(',').ok_or_else(|| err(ln, "A index must be mu,nu"))?;
                    let (mu, nu) = (idx(mu)?, idx(nu)?);
                    if mu == 0 || mu > cutoff || nu != mu + a[mu - 1].len() || nu > cutoff {
                        return Err(err(ln, "A block out of order"));
                    }
                    a[mu - 1].push(poly);
                }
                _ => return Err(err(ln, "unexpected polynomial block")),
            }
        }
        let calibration = calibration.ok_or_else(|| err(0, "missing calib line"))?;
        if r.len() != cutoff || v.len() != cutoff || q.len() != cutoff + 1 || a.iter().enumerate().any(|(i, row)| row.len() != cutoff - i)
        {
            return Err(err(0, "incomplete tables"));
        }
        let theta = eta_poly(&g)?.0;
        Ok(ExpansionTables { gamma: g, cutoff, theta, ctable, r, v, a, q, calibration })
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_cache_string())?;
        Ok(())
    }

    pub fn load_cache(path: &Path, g: &GammaFactorData) -> Result<Self> {
        Self::from_cache_str(&std::fs::read_to_string(path)?, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{catalog, CATALOG_NAMES};

    const P: Prec = 256;

    fn zeta2() -> GammaFactorData {
        catalog("zeta2", P).unwrap().gamma
    }

    fn rat_poly(p: &PolyC, expect: &[(i64, i64)]) -> Float {
        let e = PolyC::new(expect.iter().map(|&(n, d)| Cx::from_rational(P, &Rational::from((n, d)))).collect(), P);
        p.max_dist(&e)
    }

    /// Signed Stirling numbers of the first kind.
    fn stirling1(m: usize) -> Vec<Vec<Integer>> {
        let mut s = vec![vec![Integer::new(); m + 1]; m + 1];
        s[0][0] = Integer::from(1);
        for n in 0..m {
            for k in 1..=n + 1 {
                let v = Integer::from(&s[n][k - 1] - Integer::from(&s[n][k] * n as u32));
                s[n + 1][k] = v;
            }
        }
        s
    }

    #[test]
    fn c_table_small_values() {
        let ct = compute_c(5).unwrap();
        assert_eq!(*ct.get(1, 1), 1);
        assert_eq!(*ct.get(1, 2), -1);
        assert_eq!(*ct.get(1, 3), 2);
        assert!(compute_c(0).is_err());
        assert!(compute_c(65).is_err());
    }

    #[test]
    fn c_table_matches_stirling_recurrence() {
        let m = 40;
        let ct = compute_c(m).unwrap();
        let s = stirling1(m);
        assert!(ct.is_unitriangular());
        assert!(ct.is_integral());
        for mu in 1..=m {
            for ell in mu..=m {
                assert_eq!(*ct.get(mu, ell), s[ell][mu], "({mu}, {ell})");
            }
        }
    }

    #[test]
    fn c_table_against_naive_series() {
        // multiply the geometric series of 1/(w - j) term by term
        let m = 14;
        let ct = compute_c(m).unwrap();
        let mut prod: Vec<Rational> = vec![Rational::from(1)];
        prod.resize(m + 1, Rational::new());
        let mut series: Vec<Vec<Rational>> = vec![prod.clone()];
        for j in 1..=m {
            let mut next = vec![Rational::new(); m + 1];
            for (a, ca) in prod.iter().enumerate() {
                let mut jp = Rational::from(1);
                for b in 1..=m - a {
                    next[a + b] += Rational::from(ca * &jp);
                    jp *= j as u32;
                }
            }
            prod = next;
            series.push(prod.clone());
        }
        for mu in 1..=m {
            for n in 1..=m {
                let mut acc = Rational::new();
                for ell in mu..=m {
                    acc += Rational::from(ct.get(mu, ell) * &series[ell][n]);
                }
                assert_eq!(acc, Rational::from(if n == mu { 1 } else { 0 }), "mu={mu} n={n}");
            }
        }
    }

    #[test]
    fn residual_c_values_and_decay() {
        let ct = compute_c(8).unwrap();
        let w = Cx::from_f64(P, 1e6, 0.0);
        assert!(asymptotic_residual_c(&ct, 1, 1, &w).unwrap() < 1e-11);
        let w = Cx::from_f64(P, 1e3, 0.0);
        let bound = 10.0 * 4.0 * 2.0 / (1e3 * 999.0 * 998.0);
        assert!(asymptotic_residual_c(&ct, 2, 2, &w).unwrap() < bound);
        for m in 1..=6 {
            let w = Cx::from_f64(P, 500.0, 300.0);
            let r1 = asymptotic_residual_c(&ct, 1, m, &w).unwrap();
            let r2 = asymptotic_residual_c(&ct, 1, m, &w.scale_i64(2)).unwrap();
            assert!(Float::with_val(P, &r1 / &r2) >= f64::from(1u32 << m), "M={m}");
        }
        assert!(asymptotic_residual_c(&ct, 1, 4, &Cx::from_f64(P, 7.0, 0.0)).is_err());
    }

    #[test]
    fn a_entries() {
        let g = zeta2();
        let ct = compute_c(10).unwrap();
        assert!(rat_poly(&compute_a(&g, &ct, 1, 1).unwrap(), &[(1, 1)]) < 1e-70);
        assert!(rat_poly(&compute_a(&g, &ct, 1, 2).unwrap(), &[(0, 1), (-2, 1)]) < 1e-70);
        for nu in 1..=10 {
            for mu in 1..=nu {
                let a = compute_a(&g, &ct, mu, nu).unwrap();
                assert!(a.degree().map_or(true, |d| d <= nu - mu));
            }
        }
        assert!(compute_a(&g, &ct, 2, 1).is_err());
    }

    /// `R_nu` with the H-sum folded into per-factor Bernoulli polynomials.
    fn r_oracle(g: &GammaFactorData, nu: usize) -> PolyC {
        let b = bernoulli_poly(nu + 1);
        let theta = invariants(g).unwrap().theta;
        let arg = PolyC::linear(Cx::new(Float::with_val(P, 1), Float::with_val(P, &theta * -2i32)), Cx::from_int(P, -2));
        let mut acc = PolyC::compose(&b, &arg).add(&PolyC::constant(Cx::from_rational(P, &b.eval(&Rational::from(1)))));
        for f in &g.factors {
            let lam = Cx::from_real(f.lambda.clone());
            let scale = Cx::from_real(Float::with_val(P, rug::ops::Pow::pow(&f.lambda, -(nu as i32))));
            let x1 = PolyC::linear(f.mu.clone(), lam.clone());
            let x2 = PolyC::linear(&f.mu.conj() + &lam, -&lam);
            let mut t = PolyC::compose(&b, &x1);
            if nu % 2 == 1 {
                t = t.scale(&Cx::from_int(P, -1));
            }
            acc = acc.add(&t.sub(&PolyC::compose(&b, &x2)).scale(&scale));
        }
        acc
    }

    #[test]
    fn r_polynomials() {
        let g = zeta2();
        let r1 = compute_r(&g, 1).unwrap();
        assert!(rat_poly(&r1, &[(0, 1), (0, 1), (2, 1)]) < 1e-70);
        for name in CATALOG_NAMES {
            let g = catalog(name, P).unwrap().gamma;
            for nu in 1..=10 {
                let r = compute_r(&g, nu).unwrap();
                assert_eq!(r.degree(), Some(nu + 1), "{name} nu={nu}");
                let lead = if nu % 2 == 0 { -1 } else { 1 } * ((1i64 << (nu + 1)) - 2);
                assert!(r.coeff(nu + 1).dist(&Cx::from_int(P, lead)) < 1e-60);
                assert!(r.max_dist(&r_oracle(&g, nu)) < 1e-60, "{name} nu={nu}");
            }
        }
    }

    #[test]
    fn v_literal_matches_exp_recurrence() {
        for name in CATALOG_NAMES {
            let g = catalog(name, P).unwrap().gamma;
            let r: Vec<PolyC> = (1..=8).map(|nu| compute_r(&g, nu).unwrap()).collect();
            for n_cap in 1..=8 {
                let lit = compute_v_all(&r, 10, n_cap).unwrap();
                let rec = exp_series_coeffs(&r, 10, n_cap);
                for mu in 0..10 {
                    assert!(lit[mu].max_dist(&rec[mu]) < 1e-50, "{name} N={n_cap} mu={}", mu + 1);
                }
            }
            let full = compute_v_all(&r, 8, 8).unwrap();
            for n_cap in 1..=8 {
                let part = compute_v_all(&r, n_cap, n_cap).unwrap();
                for mu in 0..n_cap {
                    assert!(part[mu].max_dist(&full[mu]) < 1e-30);
                }
            }
        }
    }

    #[test]
    fn v_small_cases() {
        let g = zeta2();
        let r1 = compute_r(&g, 1).unwrap();
        let r2 = compute_r(&g, 2).unwrap();
        let v1 = compute_v(&g, 1, 5).unwrap();
        assert!(v1.max_dist(&r1.scale_rational(&Rational::from((-1, 2)))) < 1e-70);
        let v2 = compute_v(&g, 2, 3).unwrap();
        let expect = r2
            .scale_rational(&Rational::from((1, 6)))
            .add(&r1.mul(&r1).scale_rational(&Rational::from((1, 8))));
        assert!(v2.max_dist(&expect) < 1e-70);
        assert!(compute_v_all(&[r1], 13, 1).is_err());
    }

    #[test]
    fn tables_structure() {
        for name in CATALOG_NAMES {
            let t = ExpansionTables::build(&catalog(name, P).unwrap().gamma, 10).unwrap();
            assert!(t.q[0].max_dist(&PolyC::constant(Cx::one(P))) < 1e-70);
            for nu in 1..=10 {
                assert_eq!(t.q[nu].degree(), Some(2 * nu), "{name} nu={nu}");
            }
            assert!(t.calibration.a < 10);
        }
        let t = ExpansionTables::build(&zeta2(), 4).unwrap();
        assert!(rat_poly(&t.q[1], &[(0, 1), (0, 1), (-1, 1)]) < 1e-70);
    }

    #[test]
    fn exp_v_and_assembly_residuals() {
        let t = ExpansionTables::build(&zeta2(), 8).unwrap();
        let s = Cx::from_f64(P, 2.0, 0.0);
        let w = Cx::from_f64(P, 1e4, 0.0);
        assert!(t.asymptotic_residual_exp_v(3, &s, &w).unwrap() < 1e-12);
        assert!(t.asymptotic_residual_exp_v(0, &s, &w).unwrap().is_finite());
        for m in 1..=5 {
            let r1 = t.asymptotic_residual_exp_v(m, &s, &w).unwrap();
            let r2 = t.asymptotic_residual_exp_v(m, &s, &w.scale_i64(2)).unwrap();
            assert!(Float::with_val(P, &r1 / &r2) >= f64::from(1u32 << m), "M={m}");
            let q1 = t.assembly_residual(m, &s, &w).unwrap();
            let q2 = t.assembly_residual(m, &s, &w.scale_i64(2)).unwrap();
            assert!(Float::with_val(P, &q1 / &q2) >= f64::from(1u32 << m), "M={m}");
        }
        assert!(t.asymptotic_residual_exp_v(2, &s, &Cx::from_f64(P, 1.0, 0.0)).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let t = ExpansionTables::build(&catalog("zeta_chi3", P).unwrap().gamma, 5).unwrap();
        let text = t.to_cache_string();
        assert!(text.starts_with("# exptable v1\n"));
        let back = ExpansionTables::from_cache_str(&text, &t.gamma).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_cache_string(), text);
        let broken = text.replacen("poly R 2", "poly R 3", 1);
        assert!(matches!(
            ExpansionTables::from_cache_str(&broken, &t.gamma),
            Err(Error::ParseLine { .. })
        ));
    }
}
