//! Dirichlet characters, Gauss sums and the character expansion of additive
//! characters modulo a prime.

use crate::arith::{euler_phi, factorize, gcd, least_primitive_root, lcm};
use crate::mp::{Cx, Prec};

/// A Dirichlet character modulo `modulus`, stored as exact angles:
/// `chi(n) = e(angle[n mod q] / denom)`, with `None` off the unit group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletCharacter {
    pub modulus: u64,
    /// Position in the enumeration of [`character_group`]; 0 is principal.
    pub index: usize,
    pub denom: u64,
    angles: Vec<Option<u64>>,
}

impl DirichletCharacter {
    pub fn principal(q: u64) -> Self {
        let angles = (0..q).map(|n| if gcd(n, q) == 1 { Some(0) } else { None }).collect();
        DirichletCharacter { modulus: q, index: 0, denom: 1, angles }
    }

    /// `chi(n)` as a reduced fraction of a turn, or `None` if `gcd(n, q) > 1`.
    pub fn angle(&self, n: i64) -> Option<(u64, u64)> {
        let r = n.rem_euclid(self.modulus as i64) as usize;
        self.angles[r].map(|a| {
            let g = gcd(a, self.denom);
            (a / g, self.denom / g)
        })
    }

    pub fn value(&self, n: i64, prec: Prec) -> Cx {
        match self.angle(n) {
            None => Cx::zero(prec),
            Some((a, d)) => Cx::e_frac(prec, a as i64, d as i64),
        }
    }

    pub fn is_principal(&self) -> bool {
        self.angles.iter().all(|a| matches!(a, None | Some(0)))
    }

    pub fn order(&self) -> u64 {
        self.angles.iter().flatten().fold(1, |acc, &a| {
            let g = gcd(a, self.denom);
            lcm(acc, self.denom / g)
        })
    }

    /// `chi(-1) = (-1)^parity`.
    pub fn parity(&self) -> u32 {
        match self.angle(-1) {
            Some((0, _)) => 0,
            _ => 1,
        }
    }

    pub fn conj(&self) -> Self {
        let angles = self.angles.iter().map(|a| a.map(|v| (self.denom - v) % self.denom)).collect();
        DirichletCharacter { modulus: self.modulus, index: self.index, denom: self.denom, angles }
    }

    /// Smallest `d | q` such that `chi` is trivial on units `= 1 mod d`.
    pub fn conductor(&self) -> u64 {
        let q = self.modulus;
        let mut ds: Vec<u64> = (1..=q).filter(|d| q % d == 0).collect();
        ds.sort_unstable();
        for d in ds {
            let trivial = (1..q)
                .filter(|&a| gcd(a, q) == 1 && (a % d == 1 % d))
                .all(|a| self.angles[a as usize] == Some(0));
            if trivial {
                return d;
            }
        }
        q
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor() == self.modulus
    }

    /// Pointwise product of two characters of the same modulus.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.modulus, other.modulus);
        let denom = lcm(self.denom, other.denom);
        let (fa, fb) = (denom / self.denom, denom / other.denom);
        let angles = self
            .angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| match (a, b) {
                (Some(x), Some(y)) => Some((x * fa + y * fb) % denom),
                _ => None,
            })
            .collect();
        DirichletCharacter { modulus: self.modulus, index: usize::MAX, denom, angles }
    }
}

/// Generators of `(Z/p^e)^*` with their orders.
fn local_generators(p: u64, e: u32) -> Vec<(u64, u64)> {
    let pe = p.pow(e);
    if p == 2 {
        match e {
            1 => vec![],
            2 => vec![(3, 2)],
            _ => vec![(pe - 1, 2), (5, pe / 4)],
        }
    } else {
        let g = least_primitive_root(pe).expect("odd prime powers have primitive roots");
        vec![(g, euler_phi(pe))]
    }
}

/// CRT lift of `g mod m` to a unit modulo `q` that is `1` modulo `q/m`.
fn crt_lift(g: u64, m: u64, q: u64) -> u64 {
    let other = q / m;
    (0..q).find(|&x| x % m == g % m && x % other == 1 % other).expect("coprime moduli")
}

/// Generators of `(Z/q)^*` (least primitive roots for odd prime powers,
/// `-1` and `5` for `2^k` with `k >= 3`) with their orders.
pub fn unit_group_generators(q: u64) -> Vec<(u64, u64)> {
    let mut gens = Vec::new();
    for (p, e) in factorize(q) {
        let pe = p.pow(e);
        for (g, ord) in local_generators(p, e) {
            gens.push((crt_lift(g, pe, q), ord));
        }
    }
    gens
}

/// All `phi(q)` characters modulo `q`, principal first.
pub fn character_group(q: u64) -> Vec<DirichletCharacter> {
    assert!(q >= 1, "modulus must be positive");
    let gens = unit_group_generators(q);
    // discrete logarithm table: unit -> exponent vector
    let mut logs: Vec<Option<Vec<u64>>> = vec![None; q as usize];
    logs[(1 % q) as usize] = Some(vec![0; gens.len()]);
    let mut frontier = vec![(1 % q, vec![0u64; gens.len()])];
    for (i, &(g, ord)) in gens.iter().enumerate() {
        let mut next = Vec::new();
        for (x, ev) in &frontier {
            let mut y = *x;
            for k in 0..ord {
                let mut e = ev.clone();
                e[i] = k;
                logs[y as usize] = Some(e.clone());
                next.push((y, e));
                y = y * g % q;
            }
        }
        frontier = next;
    }
    let denom = gens.iter().fold(1, |acc, &(_, o)| lcm(acc, o));
    let orders: Vec<u64> = gens.iter().map(|&(_, o)| o).collect();
    let count: u64 = orders.iter().product();
    let mut out = Vec::with_capacity(count as usize);
    for idx in 0..count {
        let mut ks = Vec::with_capacity(orders.len());
        let mut r = idx;
        for &o in &orders {
            ks.push(r % o);
            r /= o;
        }
        let angles = (0..q)
            .map(|n| {
                if gcd(n, q) != 1 {
                    return None;
                }
                let ev = logs[n as usize].as_ref().expect("every unit is reached");
                let mut a = 0u64;
                for ((k, e), o) in ks.iter().zip(ev).zip(&orders) {
                    a = (a + k * e % o * (denom / o)) % denom;
                }
                Some(a)
            })
            .collect();
        out.push(DirichletCharacter { modulus: q, index: idx as usize, denom, angles });
    }
    out
}

/// `tau(chi) = sum_{a mod q} chi(a) e(a/q)`.
pub fn gauss_sum(chi: &DirichletCharacter, prec: Prec) -> Cx {
    let q = chi.modulus as i64;
    let mut acc = Cx::zero(prec);
    for a in 0..q {
        if let Some((num, den)) = chi.angle(a) {
            // e(num/den + a/q)
            let d = lcm(den, q as u64) as i64;
            let n = num as i64 * (d / den as i64) + a * (d / q);
            acc += Cx::e_frac(prec, n, d);
        }
    }
    acc
}

/// `c(chi, p) = (1/(p-1)) sum_{(a,p)=1} conj(chi)(a) e(-a/p)`, the coefficient
/// of `chi(n)` in `e(-n/p)` for `(n, p) = 1`.
pub fn reconstruction_coefficient(chi: &DirichletCharacter, prec: Prec) -> Cx {
    let p = chi.modulus as i64;
    let cj = chi.conj();
    let mut acc = Cx::zero(prec);
    for a in 1..p {
        if let Some((num, den)) = cj.angle(a) {
            let d = lcm(den, p as u64) as i64;
            let n = num as i64 * (d / den as i64) - a * (d / p);
            acc += Cx::e_frac(prec, n, d);
        }
    }
    acc.scale(&rug::Float::with_val(prec, rug::Float::with_val(prec, 1) / (p - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: Prec = 192;

    #[test]
    fn group_sizes_and_orthogonality() {
        for q in [1u64, 2, 3, 4, 5, 7, 8, 9, 12, 16, 15, 20, 27, 32] {
            let g = character_group(q);
            assert_eq!(g.len() as u64, euler_phi(q), "q={q}");
            assert!(g[0].is_principal());
            // distinct characters
            for i in 0..g.len() {
                for j in 0..i {
                    assert_ne!(g[i], g[j], "q={q}");
                }
            }
            // sum over group of chi(n) = phi(q) [n = 1]
            for n in 0..q as i64 {
                let mut acc = Cx::zero(P);
                for chi in &g {
                    acc += chi.value(n, P);
                }
                let expect = if n as u64 % q == 1 % q { euler_phi(q) as i64 } else { 0 };
                assert!(acc.dist(&Cx::from_int(P, expect)) < 1e-50, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn multiplicativity() {
        for q in [7u64, 8, 12, 25] {
            for chi in character_group(q) {
                for a in 1..q as i64 {
                    for b in 1..q as i64 {
                        let lhs = chi.value(a * b, P);
                        let rhs = &chi.value(a, P) * &chi.value(b, P);
                        assert!(lhs.dist(&rhs) < 1e-50);
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_sum_modulus() {
        // |tau(chi)| = sqrt(q) for primitive chi
        for q in [3u64, 4, 5, 7, 8, 9, 11, 16] {
            for chi in character_group(q) {
                if chi.is_primitive() {
                    let t = gauss_sum(&chi, P).abs().to_f64();
                    assert!((t - (q as f64).sqrt()).abs() < 1e-12, "q={q}");
                }
            }
        }
    }

    #[test]
    fn counts_of_primitive_characters() {
        // multiplicative count of primitive characters
        for (q, n) in [(3u64, 1usize), (4, 1), (8, 2), (9, 4), (16, 4), (12, 1), (2, 0)] {
            let c = character_group(q).iter().filter(|c| c.is_primitive()).count();
            assert_eq!(c, n, "q={q}");
        }
    }

    #[test]
    fn reconstruction_of_additive_character() {
        // e(-n/p) = sum_chi c(chi, p) chi(n) for (n, p) = 1
        for p in [2u64, 3, 5, 7, 11] {
            let g = character_group(p);
            let c0 = reconstruction_coefficient(&g[0], P);
            assert!(c0.dist(&Cx::from_f64(P, -1.0 / (p as f64 - 1.0), 0.0)) < 1e-15);
            for n in 1..p as i64 {
                let mut acc = Cx::zero(P);
                for chi in &g {
                    acc += &reconstruction_coefficient(chi, P) * &chi.value(n, P);
                }
                assert!(acc.dist(&Cx::e_frac(P, -n, p as i64)) < 1e-50);
            }
        }
    }
}
