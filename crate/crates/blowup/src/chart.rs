use std::collections::BTreeMap;

use serde_json::{json, Value};
use wfblow_algebra::{format_var, AlgebraError, CompiledRational, RationalFunction, Var};
use wfblow_geometry::Point;

use crate::{BlowupError, Result};

pub(crate) fn var(v: usize) -> RationalFunction {
    RationalFunction::var(v as Var)
}

pub(crate) fn one_minus(f: &RationalFunction) -> RationalFunction {
    &RationalFunction::one() - f
}

/// Binding maps lowered for repeated evaluation; coordinates without an
/// entry are passed through.
#[derive(Debug, Clone)]
pub(crate) struct CompiledMap {
    entries: Vec<(usize, CompiledRational)>,
}

impl CompiledMap {
    pub(crate) fn new(map: &BTreeMap<Var, RationalFunction>) -> Self {
        CompiledMap {
            entries: map
                .iter()
                .map(|(&v, f)| (v as usize, CompiledRational::new(f)))
                .collect(),
        }
    }

    pub(crate) fn apply(&self, p: &Point) -> Result<Point> {
        let mut x = Vec::with_capacity(p.n() + 1);
        x.push(p.p0());
        x.extend_from_slice(p.coords());
        let mut out = p.clone();
        for (v, f) in &self.entries {
            if *v == 0 || *v > p.n() {
                return Err(BlowupError::Domain(format!(
                    "coordinate {v} outside 1..={}",
                    p.n()
                )));
            }
            let value = f.eval(&x).map_err(|e| match e {
                AlgebraError::Pole { .. } => BlowupError::BlownUpLocus(format!("{:?}", p.coords())),
                other => other.into(),
            })?;
            out.set(*v, value);
        }
        Ok(out)
    }
}

pub(crate) fn map_to_json(map: &BTreeMap<Var, RationalFunction>) -> Value {
    let entries: serde_json::Map<String, Value> = map
        .iter()
        .map(|(&v, f)| (format_var(v), Value::String(f.to_string())))
        .collect();
    Value::Object(entries)
}

/// One blow-up step in the pair `(σ, ρ)`. The forward map is written in the
/// simplex coordinates `p`, the inverse in the blown-up coordinates; both
/// leave every other coordinate alone.
///
/// When `flipped` the new coordinate is `p^σ / (p^σ + p^ρ)`, the orientation
/// reversed copy of the unflipped one.
#[derive(Debug, Clone)]
pub struct BlowupChart {
    sigma: usize,
    rho: usize,
    flipped: bool,
    forward: BTreeMap<Var, RationalFunction>,
    inverse: BTreeMap<Var, RationalFunction>,
    compiled_forward: CompiledMap,
    compiled_inverse: CompiledMap,
}

pub fn make_chart(sigma: usize, rho: usize, flipped: bool) -> Result<BlowupChart> {
    if sigma == rho || sigma == 0 || rho == 0 {
        return Err(BlowupError::Domain(format!(
            "chart needs two distinct nonzero indices, got ({sigma}, {rho})"
        )));
    }
    let (s, r) = (var(sigma), var(rho));
    let sum = &s + &r;
    let ratio = &(if flipped { s.clone() } else { r.clone() }) / &sum;
    let forward = BTreeMap::from([(sigma as Var, sum), (rho as Var, ratio)]);
    let kept = if flipped { one_minus(&r) } else { r.clone() };
    let inverse = BTreeMap::from([
        (sigma as Var, &s * &one_minus(&kept)),
        (rho as Var, &s * &kept),
    ]);
    Ok(BlowupChart {
        sigma,
        rho,
        flipped,
        compiled_forward: CompiledMap::new(&forward),
        compiled_inverse: CompiledMap::new(&inverse),
        forward,
        inverse,
    })
}

impl BlowupChart {
    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn flipped(&self) -> bool {
        self.flipped
    }

    pub fn forward(&self) -> &BTreeMap<Var, RationalFunction> {
        &self.forward
    }

    pub fn inverse(&self) -> &BTreeMap<Var, RationalFunction> {
        &self.inverse
    }

    /// Image of a simplex point; points with `p^σ + p^ρ = 0` are rejected.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        self.compiled_forward.apply(p)
    }

    pub fn apply_inverse(&self, q: &Point) -> Result<Point> {
        self.compiled_inverse.apply(q)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "sigma": self.sigma,
            "rho": self.rho,
            "flipped": self.flipped,
            "forward": map_to_json(&self.forward),
            "inverse": map_to_json(&self.inverse),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn hand_evaluated_chart() {
        let chart = make_chart(1, 2, false).unwrap();
        let q = chart.apply(&pt(&[0.2, 0.3])).unwrap();
        assert!((q.get(1) - 0.5).abs() < 1e-15 && (q.get(2) - 0.6).abs() < 1e-15);
        let p = chart.apply_inverse(&pt(&[0.5, 0.6])).unwrap();
        assert!((p.get(1) - 0.2).abs() < 1e-15 && (p.get(2) - 0.3).abs() < 1e-15);
        let flipped = make_chart(1, 2, true).unwrap();
        let q = flipped.apply(&pt(&[0.2, 0.3])).unwrap();
        assert!((q.get(2) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn invalid_pairs() {
        assert!(make_chart(1, 1, false).is_err());
        assert!(make_chart(0, 2, false).is_err());
        assert!(make_chart(2, 0, true).is_err());
    }

    #[test]
    fn blown_up_locus_is_rejected() {
        let chart = make_chart(1, 2, false).unwrap();
        assert!(matches!(
            chart.apply(&pt(&[0.0, 0.0])),
            Err(BlowupError::BlownUpLocus(_))
        ));
    }

    #[test]
    fn inverse_undoes_forward_exactly() {
        for flipped in [false, true] {
            let chart = make_chart(2, 3, flipped).unwrap();
            for (v, g) in chart.inverse() {
                let back = g.substitute(chart.forward()).unwrap();
                assert!(back.equals(&var(*v as usize)), "{v}: {back}");
            }
        }
    }
}
