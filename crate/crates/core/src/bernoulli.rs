//! Exact Bernoulli numbers and polynomials.

use std::sync::Mutex;

use rug::{Integer, Rational};

use crate::mp::{Cx, Prec};

static TABLE: Mutex<Vec<Rational>> = Mutex::new(Vec::new());

/// `B_0, ..., B_n` with the convention `B_1 = -1/2`.
pub fn bernoulli_numbers(n: usize) -> Vec<Rational> {
    let mut table = TABLE.lock().unwrap_or_else(|e| e.into_inner());
    if table.len() <= n {
        extend_table(&mut table, n);
    }
    table[..=n].to_vec()
}

pub fn bernoulli_number(n: usize) -> Rational {
    let table = TABLE.lock().unwrap_or_else(|e| e.into_inner());
    if n < table.len() {
        return table[n].clone();
    }
    drop(table);
    bernoulli_numbers(n).pop().unwrap()
}

// Recurrence sum_{k<=m} C(m+1, k) B_k = 0.
fn extend_table(table: &mut Vec<Rational>, n: usize) {
    if table.is_empty() {
        table.push(Rational::from(1));
    }
    while table.len() <= n {
        let m = table.len();
        if m > 1 && m % 2 == 1 {
            table.push(Rational::new());
            continue;
        }
        let mut acc = Rational::new();
        let mut binom = Integer::from(1);
        for (k, bk) in table.iter().enumerate() {
            if *bk != 0 {
                acc += Rational::from(bk * &binom);
            }
            binom *= (m + 1 - k) as u32;
            binom /= (k + 1) as u32;
        }
        acc /= (m + 1) as u32;
        table.push(-acc);
    }
}

/// Dense polynomial with exact rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalPoly {
    pub coeffs: Vec<Rational>,
}

impl RationalPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().map_or(false, |c| *c == 0) {
            coeffs.pop();
        }
        RationalPoly { coeffs }
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_cx(&self, x: &Cx) -> Cx {
        let prec: Prec = x.prec();
        let mut acc = Cx::zero(prec);
        for c in self.coeffs.iter().rev() {
            acc = &acc * x;
            acc.re += c;
        }
        acc
    }

    pub fn add(&self, other: &RationalPoly) -> RationalPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n)
            .map(|i| {
                let mut a = self.coeffs.get(i).cloned().unwrap_or_default();
                if let Some(b) = other.coeffs.get(i) {
                    a += b;
                }
                a
            })
            .collect();
        RationalPoly::new(c)
    }

    pub fn scale(&self, k: &Rational) -> RationalPoly {
        RationalPoly::new(self.coeffs.iter().map(|c| Rational::from(c * k)).collect())
    }

    /// `p(x + h)`.
    pub fn shift(&self, h: &Rational) -> RationalPoly {
        let mut out: Vec<Rational> = vec![Rational::new(); self.coeffs.len()];
        for (k, c) in self.coeffs.iter().enumerate() {
            // c (x + h)^k
            let mut binom = Integer::from(1);
            let mut hp = Rational::from(1);
            for j in (0..=k).rev() {
                out[j] += Rational::from(c * &binom) * &hp;
                binom *= j as u32;
                binom /= (k - j + 1) as u32;
                hp *= h;
            }
        }
        RationalPoly::new(out)
    }
}

/// `B_n(x) = sum_k C(n, k) B_k x^{n-k}`.
pub fn bernoulli_poly(n: usize) -> RationalPoly {
    let b = bernoulli_numbers(n);
    let mut coeffs = vec![Rational::new(); n + 1];
    let mut binom = Integer::from(1);
    for (k, bk) in b.iter().enumerate() {
        coeffs[n - k] = Rational::from(bk * &binom);
        binom *= (n - k) as u32;
        binom /= (k + 1) as u32;
    }
    RationalPoly::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn known_numbers() {
        let b = bernoulli_numbers(12);
        assert_eq!(b[0], q(1, 1));
        assert_eq!(b[1], q(-1, 2));
        assert_eq!(b[2], q(1, 6));
        assert_eq!(b[4], q(-1, 30));
        assert_eq!(b[6], q(1, 42));
        assert_eq!(b[8], q(-1, 30));
        assert_eq!(b[10], q(5, 66));
        assert_eq!(b[12], q(-691, 2730));
        assert!(b[3] == 0 && b[11] == 0);
    }

    #[test]
    fn polynomial_difference_identity() {
        // B_n(x + 1) - B_n(x) = n x^{n-1}
        for n in 1..=15usize {
            let p = bernoulli_poly(n);
            let diff = p.shift(&q(1, 1)).add(&p.scale(&q(-1, 1)));
            let mut expect = vec![Rational::new(); n];
            expect[n - 1] = Rational::from(n as i64);
            assert_eq!(diff, RationalPoly::new(expect), "n={n}");
        }
    }

    #[test]
    fn reflection_and_midpoint() {
        // B_n(1 - x) = (-1)^n B_n(x); B_n(1/2) = (2^{1-n} - 1) B_n.
        for n in 0..=12usize {
            let p = bernoulli_poly(n);
            let x = q(3, 7);
            let lhs = p.eval(&(Rational::from(1) - x.clone()));
            let mut rhs = p.eval(&x);
            if n % 2 == 1 {
                rhs = -rhs;
            }
            assert_eq!(lhs, rhs);
            let half = p.eval(&q(1, 2));
            let factor = Rational::from((Integer::from(2), Integer::from(1) << n as u32)) - 1u32;
            assert_eq!(half, factor * bernoulli_number(n));
        }
    }

    #[test]
    fn large_index_von_staudt() {
        // denominator of B_{2k} is the product of primes p with (p - 1) | 2k
        let b = bernoulli_number(60);
        let mut d = Integer::from(1);
        for p in crate::arith::primes_up_to(61) {
            if 60 % (p - 1) == 0 {
                d *= p as u32;
            }
        }
        assert_eq!(*b.denom(), d);
    }
}
