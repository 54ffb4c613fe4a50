//! L-series definitions: the built-in catalog, coefficient generation, the
//! coefficient file format and Euler-factor data.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rug::Float;

use crate::arith::{divisor_count, gcd, is_prime, sigma1};
use crate::error::{Error, Result};
use crate::mp::{parse_real, pi, ratio, Cx, Prec};
use crate::selberg::{invariants, GammaFactor, GammaFactorData};

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 4] = ["zeta2", "zeta_chi3", "delta", "level11"];

/// `q^shift prod_m prod_n (1 - q^{m n})^{r_m}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaProduct {
    pub terms: Vec<(u64, i32)>,
    pub shift: u64,
}

impl EtaProduct {
    /// Coefficients `b(1), ..., b(n_max)` of the q-expansion, using the
    /// logarithmic-derivative recurrence `n p_n = -sum_k e_k p_{n-k}` with
    /// `e_k = sum_{m | k} r_m m sigma(k/m)`, in checked 128-bit arithmetic.
    pub fn coefficients(&self, n_max: usize) -> Result<Vec<i128>> {
        let shift = self.shift as usize;
        if n_max < shift {
            return Ok(vec![0; n_max]);
        }
        let len = n_max + 1 - shift;
        let mut e = vec![0i128; len];
        for (k, ek) in e.iter_mut().enumerate().skip(1) {
            for &(m, r) in &self.terms {
                let m = m as usize;
                if k % m == 0 {
                    *ek += i128::from(r) * m as i128 * i128::from(sigma1((k / m) as u64));
                }
            }
        }
        let mut p = vec![0i128; len];
        p[0] = 1;
        let overflow = || Error::Overflow("expanding an eta product".into());
        for n in 1..len {
            let mut acc: i128 = 0;
            for k in 1..=n {
                let t = e[k].checked_mul(p[n - k]).ok_or_else(overflow)?;
                acc = acc.checked_add(t).ok_or_else(overflow)?;
            }
            if acc % n as i128 != 0 {
                return Err(Error::Overflow("non-integral eta recurrence step".into()));
            }
            p[n] = -acc / n as i128;
        }
        let mut out = vec![0i128; shift.saturating_sub(1)];
        out.extend_from_slice(&p);
        out.truncate(n_max);
        Ok(out)
    }
}

/// `q prod (1 - q^n)^2 (1 - q^{11 n})^2`, the level-11 weight-2 newform.
pub fn level11_eta() -> EtaProduct {
    EtaProduct { terms: vec![(1, 2), (11, 2)], shift: 1 }
}

/// `q prod (1 - q^n)^24`.
pub fn delta_eta() -> EtaProduct {
    EtaProduct { terms: vec![(1, 24)], shift: 1 }
}

/// Coefficients `b(1..=n_max)` of the level-11 newform.
pub fn eta_product_coeffs(n_max: usize) -> Result<Vec<i128>> {
    level11_eta().coefficients(n_max)
}

#[derive(Clone, Debug)]
pub enum CoeffSource {
    /// `a(n) = sum_{bc = n} u(b) v(c)` with `u`, `v` periodic and completely
    /// multiplicative; `u[r]` is `u(n)` for `n = r mod u.len()`.
    PeriodicConvolution { u: Vec<i64>, v: Vec<i64> },
    /// Holomorphic newform with trivial character given by an eta product;
    /// `a(n) = b(n) n^{-(k-1)/2}`.
    CuspForm { eta: EtaProduct, weight: u32, level: u64 },
    /// Explicit coefficients `a(1), a(2), ...`.
    Table(Arc<Vec<Cx>>),
}

#[derive(Debug)]
pub struct LSeries {
    pub name: String,
    pub gamma: GammaFactorData,
    pub source: CoeffSource,
    /// Whether every `a(n)` is real, so that the conjugate series coincides.
    pub real_coeffs: bool,
    pub pole_order: u32,
    /// Constant `kappa` in `|a(n)| <= kappa sqrt(n)`.
    pub kappa: f64,
    /// Smallest abscissa accepted by direct summation.
    pub sigma_floor: f64,
    int_cache: Mutex<Vec<i128>>,
}

impl Clone for LSeries {
    fn clone(&self) -> Self {
        LSeries {
            name: self.name.clone(),
            gamma: self.gamma.clone(),
            source: self.source.clone(),
            real_coeffs: self.real_coeffs,
            pole_order: self.pole_order,
            kappa: self.kappa,
            sigma_floor: self.sigma_floor,
            int_cache: Mutex::new(self.int_cache.lock().unwrap_or_else(|e| e.into_inner()).clone()),
        }
    }
}

fn chi3(n: i64) -> i64 {
    match n.rem_euclid(3) {
        1 => 1,
        2 => -1,
        _ => 0,
    }
}

/// Looks up a catalog entry at the given working precision.
pub fn catalog(name: &str, prec: Prec) -> Result<LSeries> {
    let half = || ratio(prec, 1, 2);
    let zero = || Cx::zero(prec);
    let (gamma, source, pole) = match name {
        "zeta2" => {
            let q = Float::with_val(prec, pi(prec).recip_ref());
            let f = GammaFactor { lambda: half(), mu: zero() };
            let g = GammaFactorData::new(q, vec![f.clone(), f], Cx::one(prec))?;
            (g, CoeffSource::PeriodicConvolution { u: vec![1], v: vec![1] }, 2)
        }
        "zeta_chi3" => {
            let mut q = Float::with_val(prec, 3u32);
            q.sqrt_mut();
            q /= pi(prec);
            let f0 = GammaFactor { lambda: half(), mu: zero() };
            let f1 = GammaFactor { lambda: half(), mu: Cx::from_real(half()) };
            let g = GammaFactorData::new(q, vec![f0, f1], Cx::one(prec))?;
            let v = (0..3).map(chi3).collect();
            (g, CoeffSource::PeriodicConvolution { u: vec![1], v }, 1)
        }
        "delta" => {
            let q = Float::with_val(prec, crate::mp::two_pi(prec).recip_ref());
            let f = GammaFactor { lambda: Float::with_val(prec, 1), mu: Cx::from_real(ratio(prec, 11, 2)) };
            let g = GammaFactorData::new(q, vec![f], Cx::one(prec))?;
            (g, CoeffSource::CuspForm { eta: delta_eta(), weight: 12, level: 1 }, 0)
        }
        "level11" => {
            let mut q = Float::with_val(prec, 11u32);
            q.sqrt_mut();
            q /= crate::mp::two_pi(prec);
            let f = GammaFactor { lambda: Float::with_val(prec, 1), mu: Cx::from_real(half()) };
            let g = GammaFactorData::new(q, vec![f], Cx::one(prec))?;
            (g, CoeffSource::CuspForm { eta: level11_eta(), weight: 2, level: 11 }, 0)
        }
        other => return Err(Error::UnknownSeries(other.to_string())),
    };
    Ok(LSeries {
        name: name.to_string(),
        gamma,
        source,
        real_coeffs: true,
        pole_order: pole,
        kappa: 3f64.sqrt(),
        sigma_floor: 1.75,
        int_cache: Mutex::new(Vec::new()),
    })
}

impl LSeries {
    pub fn prec(&self) -> Prec {
        self.gamma.prec()
    }

    /// Replaces the coefficient source with an explicit table.
    pub fn with_table(&self, file: &CoefficientFile) -> LSeries {
        let mut out = self.clone();
        out.source = CoeffSource::Table(Arc::new(file.coeffs.clone()));
        out.real_coeffs = file.real;
        out.int_cache = Mutex::new(Vec::new());
        out
    }

    pub fn with_prec(&self, prec: Prec) -> LSeries {
        let mut out = self.clone();
        out.gamma = self.gamma.with_prec(prec);
        if let CoeffSource::Table(t) = &self.source {
            out.source = CoeffSource::Table(Arc::new(t.iter().map(|c| c.with_prec(prec)).collect()));
        }
        out
    }

    /// Rounded conductor `q_F` when it is an integer.
    pub fn conductor(&self) -> Result<u64> {
        let inv = invariants(&self.gamma)?;
        let q = inv.conductor.to_f64();
        let r = q.round();
        if (q - r).abs() > 1e-20 * r.max(1.0) || r < 1.0 {
            return Err(Error::InvalidInput(format!("conductor {q} of {} is not an integer", self.name)));
        }
        Ok(r as u64)
    }

    /// Integer-valued unnormalized coefficients `b(1..=n_max)` when available:
    /// `a(n)` itself for periodic convolutions, the q-expansion for cusp forms.
    pub fn integer_coeffs(&self, n_max: usize) -> Option<Result<Vec<i128>>> {
        match &self.source {
            CoeffSource::PeriodicConvolution { u, v } => {
                let mut a = vec![0i128; n_max];
                for b in 1..=n_max {
                    let ub = u[b % u.len()];
                    if ub == 0 {
                        continue;
                    }
                    let mut c = 1;
                    while b * c <= n_max {
                        a[b * c - 1] += i128::from(ub * v[c % v.len()]);
                        c += 1;
                    }
                }
                Some(Ok(a))
            }
            CoeffSource::CuspForm { eta, .. } => {
                let mut cache = self.int_cache.lock().unwrap_or_else(|e| e.into_inner());
                if cache.len() < n_max {
                    match eta.coefficients(n_max.max(64)) {
                        Ok(v) => *cache = v,
                        Err(e) => return Some(Err(e)),
                    }
                }
                Some(Ok(cache[..n_max].to_vec()))
            }
            CoeffSource::Table(_) => None,
        }
    }

    /// Normalized coefficients `a(1..=n_max)`.
    pub fn coefficients(&self, n_max: usize, prec: Prec) -> Result<Vec<Cx>> {
        match &self.source {
            CoeffSource::Table(t) => {
                if t.len() < n_max {
                    return Err(Error::InsufficientCoefficients {
                        name: self.name.clone(),
                        available: t.len() as u64,
                        requested: n_max as u64,
                    });
                }
                Ok(t[..n_max].iter().map(|c| c.with_prec(prec)).collect())
            }
            CoeffSource::PeriodicConvolution { .. } => {
                let b = self.integer_coeffs(n_max).expect("integer source")?;
                Ok(b.iter().map(|&x| Cx::from_real(Float::with_val(prec, x))).collect())
            }
            CoeffSource::CuspForm { weight, .. } => {
                let b = self.integer_coeffs(n_max).expect("integer source")?;
                let w = ratio(prec, 1 - i64::from(*weight), 2);
                Ok(b.iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let mut nf = Float::with_val(prec, i + 1);
                        rug::ops::PowAssign::pow_assign(&mut nf, &w);
                        Cx::from_real(Float::with_val(prec, x) * nf)
                    })
                    .collect())
            }
        }
    }

    /// Polynomial `P` with `F_p(s)^{-1} = P(p^{-s})`, when the local factor is
    /// known in closed form.
    pub fn local_factor_inverse_poly(&self, p: u64, prec: Prec) -> Option<Vec<Cx>> {
        match &self.source {
            CoeffSource::PeriodicConvolution { u, v } => {
                let up = u[(p % u.len() as u64) as usize];
                let vp = v[(p % v.len() as u64) as usize];
                Some(vec![Cx::one(prec), Cx::from_int(prec, -(up + vp)), Cx::from_int(prec, up * vp)])
            }
            CoeffSource::CuspForm { level, .. } => {
                let ap = self.coefficients(p as usize, prec).ok()?.pop()?;
                let mut out = vec![Cx::one(prec), -ap];
                if level % p != 0 {
                    out.push(Cx::one(prec));
                }
                Some(out)
            }
            CoeffSource::Table(_) => None,
        }
    }

    /// `a(p^0), a(p^1), ..., a(p^k_max)`.
    pub fn prime_power_coeffs(&self, p: u64, k_max: usize, prec: Prec) -> Result<Vec<Cx>> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        match &self.source {
            CoeffSource::PeriodicConvolution { u, v } => {
                let up = u[(p % u.len() as u64) as usize];
                let vp = v[(p % v.len() as u64) as usize];
                Ok((0..=k_max)
                    .map(|k| {
                        let s: i64 = (0..=k).map(|j| up.pow(j as u32) * vp.pow((k - j) as u32)).sum();
                        Cx::from_int(prec, s)
                    })
                    .collect())
            }
            CoeffSource::CuspForm { level, .. } => {
                // a(p^{j+1}) = a(p) a(p^j) - [p not | N] a(p^{j-1})
                let ap = self.coefficients(p as usize, prec)?.pop().expect("p >= 2");
                let chi = level % p != 0;
                let mut out = vec![Cx::one(prec), ap.clone()];
                while out.len() <= k_max {
                    let j = out.len() - 1;
                    let mut next = &ap * &out[j];
                    if chi {
                        next -= &out[j - 1];
                    }
                    out.push(next);
                }
                out.truncate(k_max + 1);
                Ok(out)
            }
            CoeffSource::Table(t) => {
                let mut out = vec![Cx::one(prec)];
                let mut pk: u64 = 1;
                for _ in 1..=k_max {
                    pk = pk.checked_mul(p).ok_or_else(|| Error::Overflow("prime power".into()))?;
                    let c = t.get(pk as usize - 1).ok_or_else(|| Error::InsufficientCoefficients {
                        name: self.name.clone(),
                        available: t.len() as u64,
                        requested: pk,
                    })?;
                    out.push(c.with_prec(prec));
                }
                Ok(out)
            }
        }
    }

    /// `F_p(s)^{-1}`, from the closed form when known and otherwise from the
    /// inverted local series (truncated where `p^{-m sigma}` drops below the
    /// working precision).
    pub fn local_factor_inverse(&self, p: u64, s: &Cx) -> Result<Cx> {
        let prec = s.prec();
        let x = (-s).scale(&Float::with_val(prec, Float::ln_u(p as u32))).exp();
        let coeffs = match self.local_factor_inverse_poly(p, prec) {
            Some(c) => c,
            None => {
                let sigma = s.re.to_f64();
                let m = ((f64::from(prec) + 8.0) / (sigma * (p as f64).log2())).ceil().max(1.0) as usize;
                euler_inverse_coeffs(self, p, m, prec)?
            }
        };
        let mut acc = Cx::zero(prec);
        for c in coeffs.iter().rev() {
            acc = &acc * &x;
            acc += c;
        }
        Ok(acc)
    }
}

/// `c(p^0..p^m_max)` with `F_p(s)^{-1} = sum_m c(p^m) p^{-ms}`, by inverting
/// the power series `sum_k a(p^k) x^k`.
pub fn euler_inverse_coeffs(f: &LSeries, p: u64, m_max: usize, prec: Prec) -> Result<Vec<Cx>> {
    let a = f.prime_power_coeffs(p, m_max, prec)?;
    let mut c = vec![Cx::one(prec)];
    for m in 1..=m_max {
        let mut acc = Cx::zero(prec);
        for j in 1..=m {
            acc.add_mul(&a[j], &c[m - j]);
        }
        c.push(-acc);
    }
    Ok(c)
}

/// `b(p^1..p^k_max)` with `log F_p(s) = sum_k b(p^k) p^{-ks}`.
pub fn log_euler_coeffs(f: &LSeries, p: u64, k_max: usize, prec: Prec) -> Result<Vec<Cx>> {
    let a = f.prime_power_coeffs(p, k_max, prec)?;
    // A' = A L'  =>  k a_k = sum_{j=1}^{k} j b_j a_{k-j}
    let mut b: Vec<Cx> = vec![Cx::zero(prec)];
    for k in 1..=k_max {
        let mut acc = a[k].scale_i64(k as i64);
        for j in 1..k {
            acc -= (&b[j] * &a[k - j]).scale_i64(j as i64);
        }
        b.push(acc.scale(&Float::with_val(prec, Float::with_val(prec, 1) / k as u32)));
    }
    b.remove(0);
    Ok(b)
}

/// Parsed coefficient file.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFile {
    pub name: String,
    pub real: bool,
    pub coeffs: Vec<Cx>,
}

const LSERIES_HEADER: &str = "# lseries v1";

/// Parses the `# lseries v1` format; `n` must run through `1, 2, 3, ...`
/// without gaps or repeats.
pub fn parse_coefficient_file(text: &str, prec: Prec) -> Result<CoefficientFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let bad = |line: usize, msg: String| Error::ParseLine { line, msg };
    match lines.next() {
        Some((_, l)) if l.trim() == LSERIES_HEADER => {}
        Some((n, l)) => return Err(bad(n, format!("expected header {LSERIES_HEADER:?}, found {l:?}"))),
        None => return Err(bad(1, "empty file".into())),
    }
    let mut name = None;
    let mut real = None;
    let mut coeffs: Vec<Cx> = Vec::new();
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("name=") {
            name = Some(v.trim().to_string());
            continue;
        }
        if let Some(v) = line.strip_prefix("real=") {
            real = Some(match v.trim() {
                "true" | "1" => true,
                "false" | "0" => false,
                other => return Err(bad(ln, format!("real= expects true or false, found {other:?}"))),
            });
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(bad(ln, "expected `n re [im]`".into()));
        }
        let n: u64 = fields[0].parse().map_err(|_| bad(ln, format!("bad index {:?}", fields[0])))?;
        let expect = coeffs.len() as u64 + 1;
        if n < expect {
            return Err(bad(ln, format!("duplicate index {n}")));
        }
        if n > expect {
            return Err(bad(ln, format!("gap: expected index {expect}, found {n}")));
        }
        let re = parse_real(prec, fields[1]).map_err(|e| bad(ln, e.to_string()))?;
        let im = match fields.get(2) {
            Some(t) => parse_real(prec, t).map_err(|e| bad(ln, e.to_string()))?,
            None => Float::new(prec),
        };
        coeffs.push(Cx::new(re, im));
    }
    let name = name.ok_or_else(|| bad(0, "missing name=".into()))?;
    let real = real.ok_or_else(|| bad(0, "missing real=".into()))?;
    if real && coeffs.iter().any(|c| !c.im.is_zero()) {
        return Err(bad(0, "real=true but an imaginary part is nonzero".into()));
    }
    Ok(CoefficientFile { name, real, coeffs })
}

pub fn load_coefficient_file(path: &Path, prec: Prec) -> Result<CoefficientFile> {
    let text = std::fs::read_to_string(path)?;
    parse_coefficient_file(&text, prec)
}

/// Serializes in the `# lseries v1` format with round-trip exact decimals.
pub fn format_coefficient_file(file: &CoefficientFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{LSERIES_HEADER}");
    let _ = writeln!(out, "name={}", file.name);
    let _ = writeln!(out, "real={}", file.real);
    for (i, c) in file.coeffs.iter().enumerate() {
        let d = crate::mp::roundtrip_digits(c.prec());
        if file.real {
            let _ = writeln!(out, "{} {}", i + 1, crate::mp::fmt_real(&c.re, d));
        } else {
            let _ = writeln!(out, "{} {} {}", i + 1, crate::mp::fmt_real(&c.re, d), crate::mp::fmt_real(&c.im, d));
        }
    }
    out
}

/// Largest `|a(n)| / d(n)` over `n <= n_max`; at most 1 under the Ramanujan
/// bound.
pub fn ramanujan_ratio(f: &LSeries, n_max: usize, prec: Prec) -> Result<f64> {
    let a = f.coefficients(n_max, prec)?;
    Ok(a.iter()
        .enumerate()
        .map(|(i, c)| c.abs().to_f64() / divisor_count(i as u64 + 1) as f64)
        .fold(0.0, f64::max))
}

/// Checks `gcd`-multiplicativity `a(mn) = a(m) a(n)` for coprime `m, n` with
/// `mn <= n_max`; returns the largest violation.
pub fn multiplicativity_defect(f: &LSeries, n_max: usize, prec: Prec) -> Result<f64> {
    let a = f.coefficients(n_max, prec)?;
    let mut worst = 0f64;
    for m in 2..=n_max {
        for n in 2..=n_max / m {
            if gcd(m as u64, n as u64) == 1 {
                let d = a[m * n - 1].dist(&(&a[m - 1] * &a[n - 1])).to_f64();
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}
