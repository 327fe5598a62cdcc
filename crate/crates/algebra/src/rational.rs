use std::collections::BTreeMap;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::poly::{Monomial, Polynomial};
use crate::{AlgebraError, Result, Var, EPS_DEN};

/// A quotient of polynomials with the denominator kept as a product of monic
/// factors.
///
/// Factors that are monomials are split into single variables, so common
/// powers cancel against the numerator without any gcd computation. The
/// overall constant always lives in the numerator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Polynomial,
    den: Vec<(Polynomial, u32)>,
}

/// Multiply `den` by `f^e`; returns the constant that was divided out of `f^e`.
fn push_factor(den: &mut Vec<(Polynomial, u32)>, f: &Polynomial, e: u32) -> BigRational {
    if e == 0 {
        return BigRational::one();
    }
    let content = f.monomial_content();
    for &(v, k) in content.pairs() {
        insert_factor(den, Polynomial::var(v), k * e);
    }
    let rest = f
        .div_monomial(&content)
        .expect("content divides every term");
    if let Some(c) = rest.constant_value() {
        return num_traits::pow(c, e as usize);
    }
    let (g, lc) = rest.monic();
    insert_factor(den, g, e);
    num_traits::pow(lc, e as usize)
}

fn insert_factor(den: &mut Vec<(Polynomial, u32)>, g: Polynomial, e: u32) {
    match den.iter_mut().find(|(h, _)| *h == g) {
        Some(slot) => slot.1 += e,
        None => den.push((g, e)),
    }
}

fn expand(den: &[(Polynomial, u32)]) -> Polynomial {
    den.iter()
        .fold(Polynomial::one(), |acc, (g, e)| &acc * &g.pow(*e))
}

impl RationalFunction {
    pub fn zero() -> Self {
        RationalFunction::from_poly(Polynomial::zero())
    }

    pub fn one() -> Self {
        RationalFunction::from_poly(Polynomial::one())
    }

    pub fn from_poly(num: Polynomial) -> Self {
        RationalFunction {
            num,
            den: Vec::new(),
        }
    }

    pub fn constant(c: BigRational) -> Self {
        RationalFunction::from_poly(Polynomial::constant(c))
    }

    pub fn from_int(c: i64) -> Self {
        RationalFunction::from_poly(Polynomial::from_int(c))
    }

    pub fn var(v: Var) -> Self {
        RationalFunction::from_poly(Polynomial::var(v))
    }

    /// `num / den`, reduced.
    pub fn new(num: Polynomial, den: &Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        let mut factors = Vec::new();
        let c = push_factor(&mut factors, den, 1);
        let out = RationalFunction {
            num: num.scale(&c.recip()),
            den: factors,
        };
        Ok(out.reduced())
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator_factors(&self) -> &[(Polynomial, u32)] {
        &self.den
    }

    pub fn denominator(&self) -> Polynomial {
        expand(&self.den)
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        self.den.is_empty().then_some(&self.num)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Exact equality as functions, certified by subtraction.
    pub fn equals(&self, other: &RationalFunction) -> bool {
        (self - other).is_identically_zero()
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        if self.den.is_empty() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vs = self.num.vars();
        for (g, _) in &self.den {
            vs.extend(g.vars());
        }
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    fn reduced(mut self) -> Self {
        if self.num.is_zero() {
            self.den.clear();
            return self;
        }
        for (g, e) in self.den.iter_mut() {
            while *e > 0 {
                let q = if g.is_monomial() {
                    let (m, _) = g.leading().expect("nonzero factor");
                    self.num.div_monomial(m)
                } else if self.num.provably_not_multiple_of(g) {
                    None
                } else {
                    self.num.div_exact(g)
                };
                match q {
                    Some(q) => {
                        self.num = q;
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        self.den.retain(|(_, e)| *e > 0);
        self.den.sort_by(|a, b| {
            a.0.leading()
                .map(|l| l.0)
                .cmp(&b.0.leading().map(|l| l.0))
                .then(a.1.cmp(&b.1))
        });
        self
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        RationalFunction {
            num: self.num.scale(c),
            den: if c.is_zero() {
                Vec::new()
            } else {
                self.den.clone()
            },
        }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        let mut den = Vec::new();
        let c = push_factor(&mut den, &self.num, 1);
        Ok(RationalFunction {
            num: expand(&self.den).scale(&c.recip()),
            den,
        }
        .reduced())
    }

    pub fn pow(&self, e: u32) -> Self {
        RationalFunction {
            num: self.num.pow(e),
            den: self.den.iter().map(|(g, k)| (g.clone(), k * e)).collect(),
        }
    }

    /// Exact partial derivative by the quotient rule.
    pub fn derivative(&self, v: Var) -> Self {
        let dnum = self.num.derivative(v);
        let moving: Vec<usize> = (0..self.den.len())
            .filter(|&k| self.den[k].0.degree_in(v) > 0)
            .collect();
        if moving.is_empty() {
            return RationalFunction {
                num: dnum,
                den: self.den.clone(),
            }
            .reduced();
        }
        let prod_except = |skip: Option<usize>| -> Polynomial {
            moving
                .iter()
                .filter(|&&k| Some(k) != skip)
                .fold(Polynomial::one(), |acc, &k| &acc * &self.den[k].0)
        };
        let mut num = &dnum * &prod_except(None);
        for &k in &moving {
            let (g, e) = &self.den[k];
            let coeff = BigRational::from_integer(BigInt::from(*e));
            let term = &(&self.num * &g.derivative(v)) * &prod_except(Some(k));
            num = &num - &term.scale(&coeff);
        }
        let mut den = self.den.clone();
        for &k in &moving {
            den[k].1 += 1;
        }
        RationalFunction { num, den }.reduced()
    }

    /// Simultaneous replacement of variables by rational functions; unbound
    /// variables pass through.
    pub fn substitute(&self, bindings: &BTreeMap<Var, RationalFunction>) -> Result<Self> {
        let num = substitute_poly(&self.num, bindings);
        let mut den = RationalFunction::one();
        for (g, e) in &self.den {
            let gs = substitute_poly(g, bindings);
            if gs.is_identically_zero() {
                return Err(AlgebraError::ZeroDenominator);
            }
            den = &den * &gs.pow(*e);
        }
        Ok(&num / &den)
    }

    /// binary64 value at the point described by `values`; fails near a pole.
    pub fn eval_with(&self, values: &dyn Fn(Var) -> f64) -> Result<f64> {
        let num = self.num.eval_f64(values);
        let den = self
            .den
            .iter()
            .map(|(g, e)| g.eval_f64(values).powi(*e as i32))
            .product::<f64>();
        if den.abs() < EPS_DEN {
            return Err(AlgebraError::Pole {
                denominator: den,
                location: String::new(),
            });
        }
        Ok(num / den)
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, values: &dyn Fn(Var) -> BigRational) -> Result<BigRational> {
        let num = self.num.eval_exact(values);
        let mut den = BigRational::one();
        for (g, e) in &self.den {
            den *= num_traits::pow(g.eval_exact(values), *e as usize);
        }
        if den.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        Ok(num / den)
    }

    /// Number of terms in numerator and expanded denominator factors.
    pub fn size(&self) -> usize {
        self.num.num_terms() + self.den.iter().map(|(g, _)| g.num_terms()).sum::<usize>()
    }
}

fn substitute_poly(p: &Polynomial, bindings: &BTreeMap<Var, RationalFunction>) -> RationalFunction {
    let relevant: Vec<Var> = p
        .vars()
        .into_iter()
        .filter(|v| bindings.contains_key(v))
        .collect();
    if relevant.is_empty() {
        return RationalFunction::from_poly(p.clone());
    }
    if relevant.iter().all(|v| bindings[v].is_polynomial()) {
        let polys: BTreeMap<Var, Polynomial> = relevant
            .iter()
            .map(|&v| (v, bindings[&v].num.clone()))
            .collect();
        return RationalFunction::from_poly(p.substitute_poly(&polys));
    }
    // Common denominator prod den_v^{E_v}, with E_v the degree of p in v.
    let degs: BTreeMap<Var, u32> = relevant.iter().map(|&v| (v, p.degree_in(v))).collect();
    let dens: BTreeMap<Var, Polynomial> = relevant
        .iter()
        .map(|&v| (v, bindings[&v].denominator()))
        .collect();
    let mut pow_cache: BTreeMap<(Var, bool, u32), Polynomial> = BTreeMap::new();
    let mut power = |v: Var, of_num: bool, k: u32| -> Polynomial {
        pow_cache
            .entry((v, of_num, k))
            .or_insert_with(|| {
                if of_num {
                    bindings[&v].num.pow(k)
                } else {
                    dens[&v].pow(k)
                }
            })
            .clone()
    };
    let mut num = Polynomial::zero();
    for (m, c) in p.terms() {
        let mut term = Polynomial::constant(c.clone());
        let mut rest = Vec::new();
        let mut seen = Vec::new();
        for &(v, e) in m.pairs() {
            if let Some(&dv) = degs.get(&v) {
                term = &term * &power(v, true, e);
                term = &term * &power(v, false, dv - e);
                seen.push(v);
            } else {
                rest.push((v, e));
            }
        }
        for (&v, &dv) in &degs {
            if !seen.contains(&v) {
                term = &term * &power(v, false, dv);
            }
        }
        if !rest.is_empty() {
            term = term.mul_monomial(&Monomial::from_pairs(rest));
        }
        num = &num + &term;
    }
    let mut den = Vec::new();
    for (&v, &dv) in &degs {
        for (g, e) in &bindings[&v].den {
            insert_factor(&mut den, g.clone(), e * dv);
        }
    }
    RationalFunction { num, den }.reduced()
}

impl Add for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        if rhs.num.is_zero() {
            return self.clone();
        }
        if self.num.is_zero() {
            return rhs.clone();
        }
        if self.den == rhs.den {
            return RationalFunction {
                num: &self.num + &rhs.num,
                den: self.den.clone(),
            }
            .reduced();
        }
        let mut den: Vec<(Polynomial, u32)> = self.den.clone();
        for (g, e) in &rhs.den {
            match den.iter_mut().find(|(h, _)| h == g) {
                Some(slot) => slot.1 = slot.1.max(*e),
                None => den.push((g.clone(), *e)),
            }
        }
        let lift = |x: &RationalFunction| -> Polynomial {
            let mut out = x.num.clone();
            for (g, e) in &den {
                let have = x.den.iter().find(|(h, _)| h == g).map_or(0, |(_, k)| *k);
                if *e > have {
                    out = &out * &g.pow(e - have);
                }
            }
            out
        };
        let num = &lift(self) + &lift(rhs);
        RationalFunction { num, den }.reduced()
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        if self.num.is_zero() || rhs.num.is_zero() {
            return RationalFunction::zero();
        }
        let mut den = self.den.clone();
        for (g, e) in &rhs.den {
            insert_factor(&mut den, g.clone(), *e);
        }
        RationalFunction {
            num: &self.num * &rhs.num,
            den,
        }
        .reduced()
    }
}

impl Div for &RationalFunction {
    type Output = RationalFunction;
    /// Panics on division by the zero function; use [`RationalFunction::recip`]
    /// to handle that case.
    fn div(self, rhs: &RationalFunction) -> RationalFunction {
        self * &rhs.recip().expect("division by the zero rational function")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for RationalFunction {
            type Output = RationalFunction;
            fn $method(self, rhs: RationalFunction) -> RationalFunction {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl From<Polynomial> for RationalFunction {
    fn from(p: Polynomial) -> Self {
        RationalFunction::from_poly(p)
    }
}
