//! Heights `tau` at which the phases `p^{-i tau}` approximate prescribed
//! points of the unit circle for every `p | q` simultaneously.

use rug::Float;

use crate::arith::{is_squarefree, prime_divisors};
use crate::error::{Error, Result};
use crate::mp::{two_pi, Cx, Prec};

/// Default upper bound on `tau`.
pub const DEFAULT_TAU_BOUND: f64 = 1e9;

#[derive(Clone, Debug)]
pub struct TauSearchSpec {
    pub q: u64,
    /// `(p, eps_p)` for every prime `p | q`, in increasing order of `p`.
    pub targets: Vec<(u64, Cx)>,
    pub k: u64,
    pub bound: f64,
}

impl TauSearchSpec {
    /// `eps` lists the targets for the prime divisors of `q` in increasing order.
    pub fn new(q: u64, eps: Vec<Cx>, k: u64) -> Result<Self> {
        if q < 2 || !is_squarefree(q) {
            return Err(Error::InvalidInput(format!("q = {q} must be square-free and > 1")));
        }
        if k == 0 {
            return Err(Error::InvalidInput("k must be positive".into()));
        }
        let primes = prime_divisors(q);
        if primes.len() != eps.len() {
            return Err(Error::InvalidInput(format!(
                "q = {q} has {} prime divisors but {} targets were given",
                primes.len(),
                eps.len()
            )));
        }
        for e in &eps {
            let dev = Float::with_val(e.prec(), e.abs() - 1u32).abs();
            if dev > 1e-20 {
                return Err(Error::InvalidInput("targets must lie on the unit circle".into()));
            }
        }
        Ok(TauSearchSpec { q, targets: primes.into_iter().zip(eps).collect(), k, bound: DEFAULT_TAU_BOUND })
    }
}

#[derive(Clone, Debug)]
pub struct TauWitness {
    pub tau: Float,
    /// `max_p |p^{-i tau} - eps_p|`.
    pub quality: f64,
}

/// `max_p |p^{-i tau} - eps_p|` at the precision of `tau`.
pub fn tau_quality(targets: &[(u64, Cx)], tau: &Float) -> Float {
    let prec = tau.prec();
    let mut worst = Float::new(prec);
    for (p, e) in targets {
        let mut ang = Float::with_val(prec, Float::ln_u(*p as u32));
        ang *= tau;
        let d = Cx::cis(&(-ang)).dist(&e.with_prec(prec));
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// Half-width `delta` of the admissible phase window: `|e(x) - 1| < 1/k`
/// iff `||x|| < delta`.
fn phase_window(k: u64) -> f64 {
    (1.0 / (2.0 * k as f64)).asin() / std::f64::consts::PI
}

/// `frac(-arg(eps) / 2 pi)`.
fn target_phase(e: &Cx, prec: Prec) -> Float {
    let mut c = e.with_prec(prec).arg();
    c /= two_pi(prec);
    c = -c;
    let fl = Float::with_val(prec, c.floor_ref());
    c - fl
}

fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Denominators of the continued-fraction convergents of `beta`.
fn convergent_denominators(beta: f64, limit: f64) -> Vec<u64> {
    let mut out = vec![1u64];
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut x = beta - beta.floor();
    while x > 1e-15 && (q as f64) < limit {
        let y = 1.0 / x;
        let a = y.floor() as u64;
        x = y - y.floor();
        let next = match a.checked_mul(q).and_then(|v| v.checked_add(q_prev)) {
            Some(v) => v,
            None => break,
        };
        q_prev = q;
        q = next;
        out.push(q);
    }
    out
}

/// Finds `tau > 0` with `max_{p | q} |p^{-i tau} - eps_p| < 1/k`.
///
/// One prime: exact solution of the phase equation. Two primes: the first
/// phase is matched exactly and the second is scanned over a window whose
/// length comes from the continued fraction of `log p_2 / log p_1`, which
/// guarantees a hit. More primes: linear scan. Every candidate is rechecked
/// at `prec` bits before it is returned.
pub fn tau_search(spec: &TauSearchSpec, prec: Prec) -> Result<TauWitness> {
    let needed = 1.0 / spec.k as f64;
    let wp = prec + 32 + spec.bound.max(1.0).log2().ceil() as u32;
    let tp = two_pi(wp);
    let logs: Vec<Float> = spec.targets.iter().map(|(p, _)| Float::with_val(wp, Float::ln_u(*p as u32))).collect();
    // tau x_p = tau log p / (2 pi) must be close to c_p mod 1
    let xs: Vec<Float> = logs.iter().map(|l| Float::with_val(wp, l / &tp)).collect();
    let cs: Vec<Float> = spec.targets.iter().map(|(_, e)| target_phase(e, wp)).collect();
    let delta = phase_window(spec.k);

    let tau_of = |m: u64| -> Float {
        let num = Float::with_val(wp, &cs[0] + m);
        Float::with_val(wp, num / &xs[0])
    };
    let mut best = (f64::NAN, f64::INFINITY);
    let mut accept = |tau: Float| -> Option<TauWitness> {
        if tau <= 0 {
            return None;
        }
        let q = tau_quality(&spec.targets, &tau).to_f64();
        if q < best.1 {
            best = (tau.to_f64(), q);
        }
        (q < needed).then(|| TauWitness { tau: Float::with_val(prec, &tau), quality: q })
    };

    let m_max = (spec.bound * xs[0].to_f64() - cs[0].to_f64()).floor();
    if m_max < 0.0 {
        return Err(Error::SearchExhausted { best_tau: f64::NAN, best_quality: f64::INFINITY, needed });
    }
    let m_max = m_max as u64;
    let m_start = u64::from(cs[0] == 0);

    if spec.targets.len() == 1 {
        for m in m_start..=m_max.min(m_start + 1) {
            if let Some(w) = accept(tau_of(m)) {
                return Ok(w);
            }
        }
    } else {
        // beta_j = x_j / x_1, gamma_j = c_j - c_1 beta_j: need ||m beta_j + c_1 beta_j - c_j|| < delta
        let x0 = xs[0].to_f64();
        let c0 = cs[0].to_f64();
        let betas: Vec<f64> = xs[1..].iter().map(|x| x.to_f64() / x0).collect();
        let gammas: Vec<f64> = cs[1..].iter().zip(&betas).map(|(c, b)| c.to_f64() - c0 * b).collect();
        let hit = |m: u64| -> bool {
            betas
                .iter()
                .zip(&gammas)
                .all(|(b, g)| dist_to_int((m as f64) * b - g) < delta * (1.0 - 1e-9))
        };
        let window = if betas.len() == 1 {
            // gaps of {m beta} for m < q_j + q_{j-1} are at most ||q_{j-1} beta|| + ||q_j beta||
            let dens = convergent_denominators(betas[0], m_max as f64 + 2.0);
            let mut w = None;
            for pair in dens.windows(2) {
                let gap = dist_to_int(pair[0] as f64 * betas[0]) + dist_to_int(pair[1] as f64 * betas[0]);
                if gap < 2.0 * delta {
                    w = Some(pair[0] + pair[1]);
                    break;
                }
            }
            w
        } else {
            None
        };
        let mut lo = m_start;
        loop {
            let hi = match window {
                Some(w) => (lo + w).min(m_max + 1),
                None => m_max + 1,
            };
            for m in lo..hi {
                if hit(m) {
                    if let Some(w) = accept(tau_of(m)) {
                        return Ok(w);
                    }
                }
            }
            if hi > m_max {
                break;
            }
            lo = hi;
        }
    }
    Err(Error::SearchExhausted { best_tau: best.0, best_quality: best.1, needed })
}
