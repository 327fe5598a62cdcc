use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::poly::{Monomial, Polynomial};
use crate::rational::RationalFunction;
use crate::{is_param, AlgebraError, Result, Var, PARAM_BASE};

/// Textual name of a variable: `p3` for coordinates, the letter for parameters.
pub fn format_var(v: Var) -> String {
    if is_param(v) {
        char::from_u32(v - PARAM_BASE).map_or_else(|| format!("q{v}"), |c| c.to_string())
    } else {
        format!("p{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(BigRational),
    Var(Var),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token::Num(parse_decimal(&s)?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token::Var(parse_name(&word)?));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(AlgebraError::Parse(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || AlgebraError::Parse(format!("bad number {s:?}"));
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if (int.is_empty() && frac.is_empty()) || frac.contains('.') {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let mantissa: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(mantissa, scale))
}

fn parse_name(word: &str) -> Result<Var> {
    if let Some(idx) = word.strip_prefix('p') {
        if !idx.is_empty() && idx.chars().all(|c| c.is_ascii_digit()) {
            let v: Var = idx
                .parse()
                .map_err(|_| AlgebraError::Parse(format!("bad coordinate {word:?}")))?;
            if v >= PARAM_BASE {
                return Err(AlgebraError::Parse(format!(
                    "coordinate index too large in {word:?}"
                )));
            }
            return Ok(v);
        }
    }
    let mut it = word.chars();
    match (it.next(), it.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() && c != 'p' => Ok(crate::param(c)),
        _ => Err(AlgebraError::Parse(format!("unknown name {word:?}"))),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RationalFunction> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RationalFunction> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else if self.eat('/') {
                let d = self.unary()?;
                acc = &acc
                    * &d.recip()
                        .map_err(|_| AlgebraError::Parse("division by zero".into()))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RationalFunction> {
        if self.eat('-') {
            return Ok(-&self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFunction> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        let e = match self.peek() {
            Some(Token::Num(x)) if x.is_integer() && !x.is_negative() => {
                let e: u32 = x
                    .to_integer()
                    .try_into()
                    .map_err(|_| AlgebraError::Parse("exponent too large".into()))?;
                self.pos += 1;
                e
            }
            _ => return Err(AlgebraError::Parse("exponent must be an integer".into())),
        };
        let out = base.pow(e);
        if negative {
            out.recip()
                .map_err(|_| AlgebraError::Parse("division by zero".into()))
        } else {
            Ok(out)
        }
    }

    fn atom(&mut self) -> Result<RationalFunction> {
        match self.peek().cloned() {
            Some(Token::Num(x)) => {
                self.pos += 1;
                Ok(RationalFunction::constant(x))
            }
            Some(Token::Var(v)) => {
                self.pos += 1;
                Ok(RationalFunction::var(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(AlgebraError::Parse("missing ')'".into()));
                }
                Ok(inner)
            }
            Some(t) => Err(AlgebraError::Parse(format!("unexpected token {t:?}"))),
            None => Err(AlgebraError::Parse("unexpected end of input".into())),
        }
    }
}

/// Parses an expression such as `(-1/2)*p1^2*p2 + p3` or `c*p0/(p1+p2)`.
pub fn parse_expr(text: &str) -> Result<RationalFunction> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(AlgebraError::Parse("empty expression".into()));
    }
    let mut parser = Parser { tokens, pos: 0 };
    let out = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(AlgebraError::Parse(format!(
            "trailing input at token {}",
            parser.pos
        )));
    }
    Ok(out)
}

/// Parses in simplex coordinates of dimension `n`, expanding `p0` as
/// `1 - p1 - .. - pn`.
pub fn parse_expr_on(text: &str, n: usize) -> Result<RationalFunction> {
    let f = parse_expr(text)?;
    if let Some(&v) = f
        .vars()
        .iter()
        .find(|&&v| !crate::is_param(v) && v as usize > n)
    {
        return Err(AlgebraError::Domain(format!(
            "{} exceeds n = {n}",
            format_var(v)
        )));
    }
    let p0 =
        RationalFunction::from_poly(&Polynomial::one() - &Polynomial::sum_of_vars(1..=n as Var));
    f.substitute(&[(0, p0)].into_iter().collect())
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: &Monomial) -> fmt::Result {
    for (i, &(v, e)) in m.pairs().iter().enumerate() {
        if i > 0 {
            f.write_str("*")?;
        }
        f.write_str(&format_var(v))?;
        if e > 1 {
            write!(f, "^{e}")?;
        }
    }
    Ok(())
}

fn write_coeff(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    if c.is_integer() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "({}/{})", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    /// Terms in descending order; later negative terms print as ` - `.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms().rev().enumerate() {
            let shown = if i == 0 {
                c.clone()
            } else if c.is_negative() {
                f.write_str(" - ")?;
                -c.clone()
            } else {
                f.write_str(" + ")?;
                c.clone()
            };
            if m.is_one() {
                write_coeff(f, &shown)?;
            } else if shown.is_one() {
                write_monomial(f, m)?;
            } else if (-shown.clone()).is_one() {
                f.write_str("-")?;
                write_monomial(f, m)?;
            } else {
                write_coeff(f, &shown)?;
                f.write_str("*")?;
                write_monomial(f, m)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let den = self.denominator_factors();
        if den.is_empty() {
            return write!(f, "{}", self.numerator());
        }
        write!(f, "({})/(", self.numerator())?;
        for (i, (g, e)) in den.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if g.is_monomial() && g.num_terms() == 1 && g.leading().is_some_and(|(_, c)| c.is_one())
            {
                write!(f, "{g}")?;
            } else {
                write!(f, "({g})")?;
            }
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        f.write_str(")")
    }
}

impl std::str::FromStr for RationalFunction {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}
