use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use wfblow_geometry::{classify_point, DomainKind, Point, Stratum};

use crate::parse::parse_expr;
use crate::rational::RationalFunction;
use crate::{evaluate_with_params, AlgebraError, Result, Var};

/// A family of rational pieces indexed by open strata, with an optional
/// separable time factor: the value at `(p, t)` is `e^{λ t} · piece(p)`.
///
/// Pieces on simplex faces are written in the face's local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedFunction {
    pieces: BTreeMap<Stratum, RationalFunction>,
    time_factor: BigRational,
}

impl Default for StratifiedFunction {
    fn default() -> Self {
        StratifiedFunction::new(BigRational::zero())
    }
}

impl StratifiedFunction {
    pub fn new(time_factor: BigRational) -> Self {
        StratifiedFunction {
            pieces: BTreeMap::new(),
            time_factor,
        }
    }

    pub fn time_factor(&self) -> &BigRational {
        &self.time_factor
    }

    pub fn insert(&mut self, stratum: Stratum, piece: RationalFunction) {
        self.pieces.insert(stratum, piece);
    }

    /// Adds `piece` to whatever already lives on `stratum`.
    pub fn accumulate(&mut self, stratum: Stratum, piece: RationalFunction) {
        match self.pieces.get_mut(&stratum) {
            Some(existing) => *existing = &*existing + &piece,
            None => {
                self.pieces.insert(stratum, piece);
            }
        }
    }

    pub fn get(&self, stratum: &Stratum) -> Option<&RationalFunction> {
        self.pieces.get(stratum)
    }

    pub fn pieces(&self) -> &BTreeMap<Stratum, RationalFunction> {
        &self.pieces
    }

    pub fn strata(&self) -> impl Iterator<Item = &Stratum> {
        self.pieces.keys()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Value at `p` and time `t`, using the piece of the open stratum that
    /// contains `p`.
    pub fn evaluate(&self, p: &Point, t: f64, kind: DomainKind) -> Result<f64> {
        self.evaluate_with_params(p, t, kind, &[])
    }

    pub fn evaluate_with_params(
        &self,
        p: &Point,
        t: f64,
        kind: DomainKind,
        params: &[(Var, f64)],
    ) -> Result<f64> {
        let stratum =
            classify_point(p, p.n(), kind).map_err(|e| AlgebraError::Domain(e.to_string()))?;
        let piece = self
            .pieces
            .get(&stratum)
            .ok_or_else(|| AlgebraError::Domain(format!("no piece on stratum {stratum}")))?;
        let value = evaluate_with_params(piece, p, params)?;
        Ok(value * self.time_weight(t))
    }

    /// The factor `e^{λ t}`.
    pub fn time_weight(&self, t: f64) -> f64 {
        if self.time_factor.is_zero() {
            1.0
        } else {
            (self.time_factor.to_f64().unwrap_or(f64::NAN) * t).exp()
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = StratifiedJson {
            time_factor: self.time_factor.to_string(),
            pieces: self
                .pieces
                .iter()
                .map(|(s, f)| PieceJson {
                    stratum: s.clone(),
                    expr: f.to_string(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: StratifiedJson = serde_json::from_value(value.clone())
            .map_err(|e| AlgebraError::Parse(e.to_string()))?;
        let time_factor = parse_expr(&doc.time_factor)?
            .constant_value()
            .ok_or_else(|| {
                AlgebraError::Parse(format!(
                    "time factor {:?} is not a constant",
                    doc.time_factor
                ))
            })?;
        let mut out = StratifiedFunction::new(time_factor);
        for piece in doc.pieces {
            out.insert(piece.stratum, parse_expr(&piece.expr)?);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    stratum: Stratum,
    expr: String,
}

#[derive(Serialize, Deserialize)]
struct StratifiedJson {
    time_factor: String,
    pieces: Vec<PieceJson>,
}
