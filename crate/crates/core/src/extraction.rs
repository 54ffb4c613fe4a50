//! Recovery of the local coefficients `c(p^m)` of `F_p(s)^{-1}` by averaging
//! the shifted twist sums `G(s + i tau)` over a torus of phases.
//!
//! For square-free `q` and `p^{-i tau} = eps_p` exactly,
//! `G(s + i tau) = sum_{d|q} d mu(q/d) prod_{p|d} (1 - sum_m c(p^m) p^{-ms} eps_p^m)`,
//! whose `eps_{p_j}^m` Fourier mode is `-mu(q/p_j) c(p_j^m) p_j^{1-ms}`.

use rug::Float;

use crate::arith::{is_squarefree, mobius, prime_divisors};
use crate::catalog::{euler_inverse_coeffs, LSeries};
use crate::error::{Error, Result};
use crate::kronecker::{tau_search, TauSearchSpec};
use crate::mp::{Cx, Prec};
use crate::twists::{gk_value, Method};

#[derive(Clone, Debug)]
pub struct ExtractionSpec {
    /// Target prime `p_j`.
    pub p: u64,
    /// Power `m >= 1`.
    pub m: usize,
    pub s: Cx,
    /// Points per circle.
    pub grid: usize,
    /// tau quality: `|p^{-i tau} - eps_p| < 1/k`.
    pub k: u64,
    /// Modulus `q`; the conductor when `None`.
    pub q: Option<u64>,
    pub method: Method,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub q: u64,
    /// Torus average `J(s)`.
    pub average: Cx,
    pub estimate: Cx,
    pub truth: Cx,
    pub error: f64,
    pub grid_points: usize,
    pub max_tau: f64,
    pub worst_quality: f64,
}

/// `-mu(q/p) p^{1-ms}`.
pub fn extraction_normalizer(q: u64, p: u64, m: usize, s: &Cx) -> Cx {
    let prec = s.prec();
    let ln_p = Float::with_val(prec, Float::ln_u(p as u32));
    let e = Cx::one(prec) - s.scale_i64(m as i64);
    e.exp_with_log(&ln_p).scale_i64(-mobius(q / p))
}

pub fn extract_euler(f: &LSeries, spec: &ExtractionSpec, prec: Prec) -> Result<ExtractionResult> {
    let q = match spec.q {
        Some(q) => q,
        None => f.conductor()?,
    };
    if q < 2 || !is_squarefree(q) {
        return Err(Error::InvalidInput(format!("modulus {q} must be square-free and > 1")));
    }
    if q % spec.p != 0 {
        return Err(Error::InvalidInput(format!("p = {} does not divide q = {q}", spec.p)));
    }
    if spec.m == 0 || spec.grid == 0 {
        return Err(Error::InvalidInput("m and the grid size must be positive".into()));
    }
    if spec.s.re <= 1 {
        return Err(Error::InvalidInput("extraction needs sigma > 1".into()));
    }
    let primes = prime_divisors(q);
    let r = primes.len();
    let j = primes.iter().position(|&p| p == spec.p).expect("p | q");
    let g = spec.grid;
    let n_points = g.checked_pow(r as u32).ok_or_else(|| Error::Overflow("torus grid size".into()))?;

    let mut acc = Cx::zero(prec);
    let mut max_tau = 0f64;
    let mut worst = 0f64;
    let mut idx = vec![0usize; r];
    for _ in 0..n_points {
        let eps: Vec<Cx> = idx.iter().map(|&i| Cx::e_frac(prec, i as i64, g as i64)).collect();
        let tspec = TauSearchSpec::new(q, eps, spec.k)?;
        let w = tau_search(&tspec, prec)?;
        max_tau = max_tau.max(w.tau.to_f64());
        worst = worst.max(w.quality);
        let mut st = spec.s.with_prec(prec);
        st.im += &w.tau;
        let (val, _, _) = gk_value(f, q, &st, spec.method)?;
        // weight eps_j^{-m}
        let back = Cx::e_frac(prec, -((idx[j] * spec.m) as i64), g as i64);
        acc += &val * &back;
        for d in idx.iter_mut() {
            *d += 1;
            if *d < g {
                break;
            }
            *d = 0;
        }
    }
    let average = acc.scale(&Float::with_val(prec, Float::with_val(prec, 1) / n_points as u64));
    let estimate = &average / &extraction_normalizer(q, spec.p, spec.m, &spec.s.with_prec(prec));
    let truth = euler_inverse_coeffs(f, spec.p, spec.m, prec)?.pop().expect("m >= 1");
    let error = estimate.dist(&truth).to_f64();
    Ok(ExtractionResult { q, average, estimate, truth, error, grid_points: n_points, max_tau, worst_quality: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    const P: Prec = 128;

    fn spec(p: u64, m: usize, grid: usize, k: u64, q: Option<u64>) -> ExtractionSpec {
        ExtractionSpec { p, m, s: Cx::from_f64(P, 2.0, 0.0), grid, k, q, method: Method::Auto }
    }

    #[test]
    fn single_prime_recovers_coefficients() {
        let f = catalog("zeta_chi3", P).unwrap();
        let r = extract_euler(&f, &spec(3, 1, 8, 50, None), P).unwrap();
        assert!(r.error < 1e-20, "{r:?}");
        assert!(r.truth.dist(&Cx::from_int(P, -1)) < 1e-30);
        // the raw average is -mu(1) c(3) 3^{1-2} = 1/3
        assert!(r.average.dist(&Cx::from_real(crate::mp::ratio(P, 1, 3))) < 1e-20);
        let r = extract_euler(&f, &spec(3, 2, 8, 50, None), P).unwrap();
        assert!(r.estimate.abs() < 1e-20);
    }

    #[test]
    fn two_prime_torus() {
        // any square-free modulus works for zeta^2; c(2) = -2
        let f = catalog("zeta2", P).unwrap();
        let r = extract_euler(&f, &spec(2, 1, 4, 10, Some(6)), P).unwrap();
        assert!(r.error < 0.5, "{r:?}");
        assert!(r.worst_quality < 0.1);
    }

    #[test]
    fn rejects_bad_input() {
        let f = catalog("zeta_chi3", P).unwrap();
        assert!(extract_euler(&f, &spec(5, 1, 4, 10, None), P).is_err());
        let mut sp = spec(3, 1, 4, 10, None);
        sp.s = Cx::from_f64(P, 0.5, 0.0);
        assert!(extract_euler(&f, &sp, P).is_err());
    }
}
