//! The main-term sum of the transformation formula for linear twists of
//! degree-2 functions, and the defect left after subtracting it.
//!
//! `term_nu(s) = -i omega* (sqrt(q) alpha)^{2s-1+2i theta} (i q alpha / 2 pi)^nu
//!  Q_nu(s) conj-F(s + nu + 2 i theta, -1/(q alpha))` and
//! `H_K(s, alpha) = F(s, alpha) - sum_{nu <= K} term_nu(s)`.

use rug::Float;

use crate::catalog::LSeries;
use crate::error::{Error, Result};
use crate::expansion::ExpansionTables;
use crate::mp::{two_pi, Cx, Prec};
use crate::selberg::invariants;
use crate::series::{evaluate, Twist};

#[derive(Clone, Debug)]
pub struct ProbePoint {
    pub s: Cx,
    /// `H_K(s, alpha)`.
    pub defect: Cx,
    /// `|term_nu(s)|` for `nu = 0..=K`.
    pub term_magnitudes: Vec<f64>,
    /// `|H_{K+1} - H_K + term_{K+1}|`, with `H_{K+1}` summed afresh.
    pub telescoping: f64,
    /// Largest truncation radius among the series used.
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub k: usize,
    pub alpha: (i64, u64),
    pub points: Vec<ProbePoint>,
    /// Least-squares slope of `log |H_K|` against `log(1 + |t|)`.
    pub growth_slope: Option<f64>,
    /// `2K + A` with the recorded calibration constant `A`.
    pub calibrated_bound: f64,
}

/// Evaluates `F(s, alpha)` and `term_0..term_{kmax}` at one point.
pub struct MainTerms<'a> {
    f: &'a LSeries,
    tables: &'a ExpansionTables,
    alpha: (i64, u64),
    q: u64,
    omega_star: Cx,
    theta: Float,
}

impl<'a> MainTerms<'a> {
    pub fn new(f: &'a LSeries, tables: &'a ExpansionTables, alpha: (i64, u64)) -> Result<Self> {
        if alpha.0 <= 0 || alpha.1 == 0 {
            return Err(Error::InvalidInput("alpha must be a positive rational".into()));
        }
        let inv = invariants(&f.gamma)?;
        let q = f.conductor()?;
        Ok(MainTerms { f, tables, alpha, q, omega_star: inv.omega_star, theta: inv.theta })
    }

    /// `F(s, alpha)` with its radius.
    pub fn twisted(&self, s: &Cx) -> Result<(Cx, f64)> {
        let v = evaluate(self.f, s, &Twist::additive(self.alpha.0, self.alpha.1), false)?;
        Ok((v.value, v.radius))
    }

    /// `term_0..=term_kmax` with the largest radius.
    pub fn terms(&self, s: &Cx, kmax: usize) -> Result<(Vec<Cx>, f64)> {
        if kmax > self.tables.cutoff {
            return Err(Error::InvalidInput(format!("Q_nu available up to {}", self.tables.cutoff)));
        }
        let p = s.prec();
        let (an, ad) = (self.alpha.0, self.alpha.1);
        let alpha = Float::with_val(p, an) / ad;
        // (sqrt(q) alpha)^{2s - 1 + 2 i theta}
        let mut base = Float::with_val(p, self.q);
        base.sqrt_mut();
        base *= &alpha;
        let ln_base = Float::with_val(p, base.ln_ref());
        let mut expo = s.scale_i64(2).add_i64(-1);
        expo.im += Float::with_val(p, &self.theta * 2u32);
        let pref = -(&self.omega_star.with_prec(p) * &expo.exp_with_log(&ln_base)).mul_i();
        // i q alpha / 2 pi
        let step = Cx::new(Float::new(p), Float::with_val(p, &alpha * self.q) / two_pi(p));
        // dual twist -1/(q alpha) = -ad / (q an)
        let dual = Twist::additive(-(ad as i64), self.q * an as u64);
        let mut out = Vec::with_capacity(kmax + 1);
        let mut radius = 0f64;
        let mut pw = Cx::one(p);
        for nu in 0..=kmax {
            let mut sn = s.add_i64(nu as i64);
            sn.im += Float::with_val(p, &self.theta * 2u32);
            let v = evaluate(self.f, &sn, &dual, true)?;
            let q_nu = self.tables.q[nu].eval(s);
            let t = &(&pref * &pw) * &(&q_nu * &v.value);
            radius = radius.max(v.radius * (&pref * &(&pw * &q_nu)).abs().to_f64());
            out.push(t);
            pw = &pw * &step;
        }
        Ok((out, radius))
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `n` equally spaced points `sigma0 + i t`, `t in [1, t_max]`.
pub fn vertical_grid(sigma0: f64, t_max: f64, n: usize, prec: Prec) -> Vec<Cx> {
    (0..n)
        .map(|j| {
            let t = if n == 1 { t_max } else { 1.0 + (t_max - 1.0) * j as f64 / (n - 1) as f64 };
            Cx::from_f64(prec, sigma0, t)
        })
        .collect()
}

pub fn theorem2_probe(f: &LSeries, alpha: (i64, u64), k: usize, grid: &[Cx]) -> Result<ProbeReport> {
    let prec = f.prec();
    for s in grid {
        if s.re.to_f64() <= f.sigma_floor {
            return Err(Error::BelowConvergenceFloor { sigma: s.re.to_f64(), floor: f.sigma_floor });
        }
    }
    let tables = ExpansionTables::build(&f.gamma, k + 1)?;
    let mt = MainTerms::new(f, &tables, alpha)?;
    let mut points = Vec::with_capacity(grid.len());
    for s in grid {
        let s = s.with_prec(prec);
        let (fa, r0) = mt.twisted(&s)?;
        let (terms, r1) = mt.terms(&s, k + 1)?;
        let mut h_k = fa.clone();
        for t in &terms[..=k] {
            h_k -= t;
        }
        let mut h_k1 = fa;
        for t in &terms {
            h_k1 -= t;
        }
        let tele = (&(&h_k1 - &h_k) + &terms[k + 1]).abs().to_f64();
        points.push(ProbePoint {
            s,
            defect: h_k,
            term_magnitudes: terms[..=k].iter().map(|t| t.abs().to_f64()).collect(),
            telescoping: tele,
            radius: r0.max(r1),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|pt| !pt.defect.is_zero())
        .map(|pt| ((1.0 + pt.s.im.to_f64().abs()).ln(), pt.defect.abs().to_f64().ln()))
        .unzip();
    Ok(ProbeReport {
        k,
        alpha,
        growth_slope: ls_slope(&xs, &ys),
        calibrated_bound: 2.0 * k as f64 + tables.calibration.a.to_f64(),
        points,
    })
}
