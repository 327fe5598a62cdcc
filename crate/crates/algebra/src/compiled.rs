use num_traits::ToPrimitive;

use crate::poly::Polynomial;
use crate::rational::RationalFunction;
use crate::{AlgebraError, Result, EPS_DEN};

#[derive(Debug, Clone)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &Polynomial) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let powers = m
                    .pairs()
                    .iter()
                    .map(|&(v, e)| (v as usize, e as i32))
                    .collect();
                (c.to_f64().unwrap_or(f64::NAN), powers)
            })
            .collect();
        CompiledPoly { terms }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, powers) in &self.terms {
            let mut t = *c;
            for &(v, e) in powers {
                t *= if e == 1 { x[v] } else { x[v].powi(e) };
            }
            acc += t;
        }
        acc
    }
}

/// A rational function lowered to binary64 coefficients for repeated
/// evaluation. Values are read from a slice indexed by variable id.
#[derive(Debug, Clone)]
pub struct CompiledRational {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, i32)>,
    max_var: usize,
}

impl CompiledRational {
    pub fn new(f: &RationalFunction) -> Self {
        CompiledRational {
            num: CompiledPoly::new(f.numerator()),
            den: f
                .denominator_factors()
                .iter()
                .map(|(g, e)| (CompiledPoly::new(g), *e as i32))
                .collect(),
            max_var: f.vars().last().map_or(0, |&v| v as usize),
        }
    }

    /// Smallest slice length accepted by [`CompiledRational::eval`].
    pub fn arity(&self) -> usize {
        self.max_var + 1
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.arity() {
            return Err(AlgebraError::Domain(format!(
                "{} values supplied, {} needed",
                x.len(),
                self.arity()
            )));
        }
        let den: f64 = self.den.iter().map(|(g, e)| g.eval(x).powi(*e)).product();
        if den.abs() < EPS_DEN {
            return Err(AlgebraError::Pole {
                denominator: den,
                location: format!("{x:?}"),
            });
        }
        Ok(self.num.eval(x) / den)
    }
}
