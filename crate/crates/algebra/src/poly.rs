use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Var;

/// A power product `prod x_v^{e_v}` stored as sorted `(var, exponent)` pairs
/// with positive exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(Var, u32)>) -> Self {
        pairs.retain(|&(_, e)| e > 0);
        pairs.sort_unstable();
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn pairs(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` if every exponent of `other` is covered.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &(v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == v {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((v, e - f)),
                }
            } else {
                out.push((v, e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for &(v, e) in &self.0 {
            let f = other.exponent(v);
            if f > 0 {
                out.push((v, e.min(f)));
            }
        }
        Monomial(out)
    }

    /// Derivative with respect to `v`: the multiplicity and the reduced monomial.
    pub fn derivative(&self, v: Var) -> Option<(u32, Monomial)> {
        let idx = self.0.binary_search_by_key(&v, |&(w, _)| w).ok()?;
        let e = self.0[idx].1;
        let mut out = self.0.clone();
        if e == 1 {
            out.remove(idx);
        } else {
            out[idx].1 -= 1;
        }
        Some((e, Monomial(out)))
    }

    pub fn eval_f64(&self, values: &dyn Fn(Var) -> f64) -> f64 {
        self.0
            .iter()
            .map(|&(v, e)| values(v).powi(e as i32))
            .product()
    }
}

/// Graded lexicographic order: total degree first, then the exponent of the
/// smallest variable index, and so on.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va != vb {
                        // The monomial carrying the smaller variable is larger.
                        return if va < vb {
                            Ordering::Greater
                        } else {
                            Ordering::Less
                        };
                    }
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial with exact rational coefficients; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn from_int(c: i64) -> Self {
        Polynomial::constant(BigRational::from_integer(BigInt::from(c)))
    }

    pub fn var(v: Var) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::var(v), BigRational::one());
        p
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(m, c);
        p
    }

    /// `sum_{v in vars} x_v`.
    pub fn sum_of_vars(vars: impl IntoIterator<Item = Var>) -> Self {
        let mut p = Polynomial::zero();
        for v in vars {
            p.add_term(Monomial::var(v), BigRational::one());
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                accumulate(existing, &c);
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.is_constant() {
            return self.terms.get(&Monomial::one()).cloned();
        }
        None
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    /// Leading term under the graded lexicographic order.
    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.pairs().iter().map(|&(v, _)| v))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), coeff_mul(a, c)))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(k, a)| (k.mul(m), a.clone()))
                .collect(),
        }
    }

    pub fn div_monomial(&self, m: &Monomial) -> Option<Polynomial> {
        let mut terms = BTreeMap::new();
        for (k, a) in &self.terms {
            terms.insert(k.div(m)?, a.clone());
        }
        Some(Polynomial { terms })
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Polynomial) -> Option<Polynomial> {
        let (lm, lc) = d.leading()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((rm, rc)) = rem.leading() {
            let m = rm.div(&lm)?;
            let c = rc / &lc;
            for (dm, dc) in &d.terms {
                rem.add_term(dm.mul(&m), -(dc * &c));
            }
            quot.add_term(m, c);
        }
        Some(quot)
    }

    /// `true` when `self` is provably not a multiple of `d`; `false` proves
    /// nothing. Only divisors of the form `c·x_v + h` with `h` free of `x_v` are
    /// tried.
    ///
    /// Scaled to a primitive integer polynomial, `d` divides `self` over the
    /// rationals only if it divides the cleared numerator over the integers, so
    /// a zero of `d` modulo a prime where `self` does not vanish is a witness.
    pub fn provably_not_multiple_of(&self, d: &Polynomial) -> bool {
        let Some(v) = d.vars().into_iter().find(|&v| {
            d.terms
                .keys()
                .filter(|m| m.exponent(v) > 0)
                .all(|m| *m == Monomial::var(v))
        }) else {
            return false;
        };
        let Some(d_mod) = d.primitive_mod_p() else {
            return false;
        };
        let Some(self_mod) = self.terms_mod_p() else {
            return false;
        };
        let c = d_mod
            .iter()
            .find(|(m, _)| **m == Monomial::var(v))
            .map_or(0, |(_, c)| *c);
        if c == 0 {
            return false;
        }
        let c_inv = pow_mod(c, MOD_P - 2);
        (1..=2u64).any(|seed| {
            let value = |w: Var| (u64::from(w) + 1).wrapping_mul(seed * 2 + 1) % MOD_P;
            let h = eval_mod(&d_mod, &|w| if w == v { 0 } else { value(w) });
            let root = mul_mod(MOD_P - h, c_inv);
            eval_mod(&self_mod, &|w| if w == v { root } else { value(w) }) != 0
        })
    }

    /// Coefficients reduced modulo [`MOD_P`]; `None` if a denominator is a
    /// multiple of the prime.
    fn terms_mod_p(&self) -> Option<Vec<(&Monomial, u64)>> {
        self.terms
            .iter()
            .map(|(m, c)| {
                let den = reduce_mod(c.denom());
                (den != 0).then(|| (m, mul_mod(reduce_mod(c.numer()), pow_mod(den, MOD_P - 2))))
            })
            .collect()
    }

    /// Coefficients of the primitive integer multiple of `self`, modulo [`MOD_P`].
    fn primitive_mod_p(&self) -> Option<Vec<(&Monomial, u64)>> {
        let lcm = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let scaled: Vec<BigInt> = self
            .terms
            .values()
            .map(|c| (c * &lcm).to_integer())
            .collect();
        let content = scaled.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if content.is_zero() {
            return None;
        }
        Some(
            self.terms
                .keys()
                .zip(&scaled)
                .map(|(m, c)| (m, reduce_mod(&(c / &content))))
                .collect(),
        )
    }

    /// Scale so that the leading coefficient is 1; returns the scaled polynomial
    /// and the factor that was divided out.
    pub fn monic(&self) -> (Polynomial, BigRational) {
        match self.leading() {
            Some((_, lc)) => {
                let lc = lc.clone();
                (self.scale(&lc.recip()), lc)
            }
            None => (Polynomial::zero(), BigRational::one()),
        }
    }

    pub fn derivative(&self, v: Var) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            if let Some((e, rest)) = m.derivative(v) {
                out.add_term(rest, c * BigRational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    pub fn eval_f64(&self, values: &dyn Fn(Var) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.eval_f64(values))
            .sum()
    }

    pub fn eval_exact(&self, values: &dyn Fn(Var) -> BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in m.pairs() {
                t *= num_traits::pow(values(v), e as usize);
            }
            acc += t;
        }
        acc
    }

    /// Replace `x_v` by `bindings[v]` for every bound variable, polynomially.
    pub fn substitute_poly(&self, bindings: &BTreeMap<Var, Polynomial>) -> Polynomial {
        let mut cache: BTreeMap<(Var, u32), Polynomial> = BTreeMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(c.clone());
            let mut rest = Vec::new();
            for &(v, e) in m.pairs() {
                match bindings.get(&v) {
                    Some(b) => {
                        let pw = cache.entry((v, e)).or_insert_with(|| b.pow(e)).clone();
                        term = &term * &pw;
                    }
                    None => rest.push((v, e)),
                }
            }
            if !rest.is_empty() {
                term = term.mul_monomial(&Monomial::from_pairs(rest));
            }
            out = &out + &term;
        }
        out
    }

    /// Max-norm of the coefficients, as f64.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// Coefficient product; integers skip the gcd normalization.
fn coeff_mul(a: &BigRational, b: &BigRational) -> BigRational {
    if a.is_integer() && b.is_integer() {
        BigRational::from_integer(a.numer() * b.numer())
    } else {
        a * b
    }
}

fn accumulate(acc: &mut BigRational, c: &BigRational) {
    if acc.is_integer() && c.is_integer() {
        *acc = BigRational::from_integer(acc.numer() + c.numer());
    } else {
        *acc += c;
    }
}

/// Prime modulus for divisibility witnesses, `2^61 - 1`.
const MOD_P: u64 = (1 << 61) - 1;

fn reduce_mod(x: &BigInt) -> u64 {
    x.mod_floor(&BigInt::from(MOD_P))
        .to_u64()
        .expect("residue fits in u64")
}

fn mul_mod(a: u64, b: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(MOD_P)) as u64
}

fn pow_mod(mut base: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        e >>= 1;
    }
    acc
}

fn eval_mod(terms: &[(&Monomial, u64)], value: &dyn Fn(Var) -> u64) -> u64 {
    terms.iter().fold(0, |acc, (m, c)| {
        let t = m
            .pairs()
            .iter()
            .fold(*c, |t, &(w, e)| mul_mod(t, pow_mod(value(w), u64::from(e))));
        (acc + t) % MOD_P
    })
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut acc: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let c = coeff_mul(ca, cb);
                match acc.entry(ma.mul(mb)) {
                    Entry::Occupied(mut x) => accumulate(x.get_mut(), &c),
                    Entry::Vacant(x) => {
                        x.insert(c);
                    }
                }
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Polynomial { terms: acc }
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn x(v: Var) -> Polynomial {
        Polynomial::var(v)
    }

    #[test]
    fn graded_order_puts_higher_degree_last() {
        let a = Monomial::from_pairs(vec![(1, 2)]);
        let b = Monomial::from_pairs(vec![(1, 1), (2, 1)]);
        let c = Monomial::from_pairs(vec![(3, 1)]);
        assert!(a > b);
        assert!(b > c);
        assert!(Monomial::var(1) > Monomial::var(2));
    }

    #[test]
    fn exact_division() {
        let s = &x(1) + &x(2);
        let prod = &(&s * &s) * &x(3);
        assert_eq!(prod.div_exact(&s).unwrap(), &s * &x(3));
        assert!(x(1).div_exact(&s).is_none());
    }

    #[test]
    fn monomial_division_and_gcd() {
        let a = Monomial::from_pairs(vec![(1, 2), (2, 1)]);
        let b = Monomial::from_pairs(vec![(1, 1)]);
        assert_eq!(a.div(&b), Some(Monomial::from_pairs(vec![(1, 1), (2, 1)])));
        assert_eq!(b.div(&a), None);
        assert_eq!(
            a.gcd(&Monomial::from_pairs(vec![(1, 3), (3, 1)])),
            Monomial::from_pairs(vec![(1, 2)])
        );
    }

    #[test]
    fn substitution_of_polynomials() {
        let f = &x(1) + &x(2);
        let bindings: BTreeMap<Var, Polynomial> = [
            (1, &x(1) * &(&Polynomial::one() - &x(2))),
            (2, &x(1) * &x(2)),
        ]
        .into_iter()
        .collect();
        assert_eq!(f.substitute_poly(&bindings), x(1));
    }

    #[test]
    fn divisibility_witness() {
        let g = &(&x(1) + &x(2)) + &x(3).scale(&BigRational::new(BigInt::from(3), BigInt::from(2)));
        let mut q = &(&x(1) * &x(2))
            - &x(3)
                .pow(2)
                .scale(&BigRational::from_integer(BigInt::from(3)));
        q.add_term(
            Monomial::var(1099),
            BigRational::new(BigInt::from(1), BigInt::from(7)),
        );
        let multiple = &g * &q;
        assert!(!multiple.provably_not_multiple_of(&g));
        assert_eq!(multiple.div_exact(&g), Some(q.clone()));
        assert!(q.provably_not_multiple_of(&g));
        assert!(q.div_exact(&g).is_none());
        // Quadratic divisors are not handled.
        assert!(!q.provably_not_multiple_of(&x(1).pow(2)));
    }
}
