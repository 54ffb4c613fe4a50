//! Gamma-factor data of the extended Selberg class and the invariants derived
//! from it.

use rug::Float;

use crate::bernoulli::bernoulli_poly;
use crate::error::{Error, Result};
use crate::mp::{two_pi, Cx, Prec};

/// One factor `Gamma(lambda s + mu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaFactor {
    pub lambda: Float,
    pub mu: Cx,
}

/// `gamma(s) = Q^s prod_j Gamma(lambda_j s + mu_j)` together with the root
/// number `omega` of the functional equation.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaFactorData {
    pub big_q: Float,
    pub factors: Vec<GammaFactor>,
    pub omega: Cx,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invariants {
    /// Degree `d_F`.
    pub degree: Float,
    /// Conductor `q_F`.
    pub conductor: Float,
    pub omega_f: Cx,
    /// `xi_F = eta_F + i d_F theta_F`.
    pub xi: Cx,
    pub eta: Float,
    pub theta: Float,
    pub omega_star: Cx,
    /// `tau_F = max_j |Im mu_j / lambda_j|`.
    pub tau: Float,
}

impl GammaFactorData {
    pub fn new(big_q: Float, factors: Vec<GammaFactor>, omega: Cx) -> Result<Self> {
        let g = GammaFactorData { big_q, factors, omega };
        g.validate()?;
        Ok(g)
    }

    pub fn prec(&self) -> Prec {
        self.big_q.prec()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidInput("degree zero: no gamma factors".into()));
        }
        if self.big_q <= 0 {
            return Err(Error::InvalidInput("Q must be positive".into()));
        }
        if self.factors.iter().any(|f| f.lambda <= 0) {
            return Err(Error::InvalidInput("every lambda_j must be positive".into()));
        }
        let dev = Float::with_val(self.prec(), self.omega.abs() - 1u32).abs();
        if dev.to_f64() > 1e-20 {
            return Err(Error::InvalidInput("|omega| must be 1".into()));
        }
        Ok(())
    }

    pub fn with_prec(&self, prec: Prec) -> Self {
        GammaFactorData {
            big_q: Float::with_val(prec, &self.big_q),
            factors: self
                .factors
                .iter()
                .map(|f| GammaFactor { lambda: Float::with_val(prec, &f.lambda), mu: f.mu.with_prec(prec) })
                .collect(),
            omega: self.omega.with_prec(prec),
        }
    }

    /// `gamma(s)` evaluated directly from the factor list.
    pub fn gamma_factor(&self, s: &Cx) -> Cx {
        let ln_q = Float::with_val(s.prec(), self.big_q.ln_ref());
        let mut out = s.scale(&ln_q).exp();
        for f in &self.factors {
            out = &out * &crate::special::gamma(&(&s.scale(&f.lambda) + &f.mu));
        }
        out
    }
}

/// Computes `d_F, q_F, omega_F, xi_F, eta_F, theta_F, omega*_F, tau_F`.
pub fn invariants(g: &GammaFactorData) -> Result<Invariants> {
    g.validate()?;
    let p = g.prec();
    let wp = p + 32;
    let g = g.with_prec(wp);

    let mut degree = Float::new(wp);
    for f in &g.factors {
        degree += &f.lambda;
    }
    degree *= 2u32;

    // q = (2 pi)^d Q^2 prod lambda^{2 lambda}
    let mut ln_q = Float::with_val(wp, two_pi(wp).ln_ref()) * &degree;
    ln_q += Float::with_val(wp, g.big_q.ln_ref()) * 2u32;
    for f in &g.factors {
        ln_q += Float::with_val(wp, f.lambda.ln_ref()) * &f.lambda * 2u32;
    }
    let conductor = Float::with_val(wp, ln_q.exp_ref());

    // omega_F = omega prod lambda^{-2 i Im mu}
    let mut phase = Float::new(wp);
    for f in &g.factors {
        phase -= Float::with_val(wp, f.lambda.ln_ref()) * &f.mu.im * 2u32;
    }
    let omega_f = &g.omega * &Cx::cis(&phase);

    let mut xi = Cx::zero(wp);
    for f in &g.factors {
        xi += &f.mu;
        xi.re -= 0.5f64;
    }
    xi = xi.scale_i64(2);
    let eta = xi.re.clone();
    let theta = Float::with_val(wp, &xi.im / &degree);

    // omega* = omega_F e^{-i pi (eta + 1)/2} (q / (2 pi)^2)^{i theta}
    let mut ang = Float::with_val(wp, &eta + 1u32) * crate::mp::pi(wp);
    ang /= -2i32;
    let ln_ratio = Float::with_val(wp, &ln_q - Float::with_val(wp, two_pi(wp).ln_ref()) * 2u32);
    ang += ln_ratio * &theta;
    let omega_star = &omega_f * &Cx::cis(&ang);

    let mut tau = Float::new(wp);
    for f in &g.factors {
        let r = Float::with_val(wp, &f.mu.im / &f.lambda).abs();
        if r > tau {
            tau = r;
        }
    }

    Ok(Invariants {
        degree: Float::with_val(p, degree),
        conductor: Float::with_val(p, conductor),
        omega_f: omega_f.with_prec(p),
        xi: xi.with_prec(p),
        eta: Float::with_val(p, eta),
        theta: Float::with_val(p, theta),
        omega_star: omega_star.with_prec(p),
        tau: Float::with_val(p, tau),
    })
}

/// `H_F(n) = 2 sum_j B_n(mu_j) / lambda_j^{n-1}`.
pub fn h_invariant(g: &GammaFactorData, n: usize) -> Cx {
    let p = g.prec();
    let b = bernoulli_poly(n);
    let mut acc = Cx::zero(p);
    for f in &g.factors {
        let v = b.eval_cx(&f.mu);
        let lam_pow = Float::with_val(p, rug::ops::Pow::pow(&f.lambda, 1 - n as i32));
        acc += v.scale(&lam_pow);
    }
    acc.scale_i64(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::ratio;

    const P: Prec = 256;

    fn zeta2() -> GammaFactorData {
        let q = Float::with_val(P, 1u32) / crate::mp::pi(P);
        let f = GammaFactor { lambda: ratio(P, 1, 2), mu: Cx::zero(P) };
        GammaFactorData::new(Float::with_val(P, q), vec![f.clone(), f], Cx::one(P)).unwrap()
    }

    #[test]
    fn zeta_squared_invariants() {
        let inv = invariants(&zeta2()).unwrap();
        assert!((inv.degree.to_f64() - 2.0).abs() < 1e-70);
        assert!(Float::with_val(P, &inv.conductor - 1u32).abs() < 1e-70);
        assert!((inv.eta.to_f64() + 2.0).abs() < 1e-70);
        assert!(inv.theta.is_zero());
        assert!(inv.omega_star.dist(&Cx::i(P)) < 1e-70);
    }

    #[test]
    fn h_values() {
        let g = zeta2();
        // 2 * 2 * B_2(0) / (1/2) = 4/3
        let h2 = h_invariant(&g, 2);
        assert!(h2.dist(&Cx::from_f64(P, 4.0 / 3.0, 0.0)) < 1e-15);
        assert!(h2.dist(&Cx::from_rational(P, &rug::Rational::from((4, 3)))) < 1e-70);
        let h1 = h_invariant(&g, 1);
        assert!(h1.dist(&Cx::from_int(P, -2)) < 1e-70);
    }

    #[test]
    fn rejects_degree_zero() {
        let r = GammaFactorData::new(Float::with_val(P, 1), vec![], Cx::one(P));
        assert!(r.is_err());
    }
}
