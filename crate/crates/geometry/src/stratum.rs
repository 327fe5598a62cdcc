use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{GeometryError, Point, Result, EPS_GEOM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumKind {
    SimplexFace,
    CubeFace,
    Product,
    AdditionalFace,
}

impl StratumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StratumKind::SimplexFace => "simplex-face",
            StratumKind::CubeFace => "cube-face",
            StratumKind::Product => "product",
            StratumKind::AdditionalFace => "additional-face",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "simplex-face" => Ok(StratumKind::SimplexFace),
            "cube-face" => Ok(StratumKind::CubeFace),
            "product" => Ok(StratumKind::Product),
            "additional-face" => Ok(StratumKind::AdditionalFace),
            other => Err(GeometryError::Domain(format!(
                "unknown stratum kind {other:?}"
            ))),
        }
    }
}

/// An open stratum: a simplex face, a cube face, or a product of the two.
///
/// `simplex` is the vertex set of the simplex factor (it may contain 0), `cube`
/// the free cube coordinates, `fixed` the coordinates pinned to 0 or 1, and
/// `boxtimes` a block of cube coordinates constrained only to not all vanish.
/// All lists are sorted, so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Stratum {
    kind: StratumKind,
    simplex: Vec<usize>,
    cube: Vec<usize>,
    fixed: BTreeMap<usize, u8>,
    boxtimes: Option<Vec<usize>>,
}

fn sorted_unique(mut v: Vec<usize>, what: &str) -> Result<Vec<usize>> {
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(GeometryError::Domain(format!(
            "repeated index in {what} {v:?}"
        )));
    }
    Ok(v)
}

impl Stratum {
    /// The open face of `Δ_n` spanned by `vertices`.
    pub fn simplex_face(n: usize, vertices: &[usize]) -> Result<Self> {
        let simplex = sorted_unique(vertices.to_vec(), "vertex set")?;
        if simplex.is_empty() {
            return Err(GeometryError::Domain("empty vertex set".into()));
        }
        if simplex.iter().any(|&v| v > n) {
            return Err(GeometryError::Domain(format!(
                "vertex set {simplex:?} exceeds n = {n}"
            )));
        }
        let fixed = (1..=n)
            .filter(|v| !simplex.contains(v))
            .map(|v| (v, 0u8))
            .collect();
        Ok(Stratum {
            kind: StratumKind::SimplexFace,
            simplex,
            cube: Vec::new(),
            fixed,
            boxtimes: None,
        })
    }

    /// The open face of `□_n` with the given free and fixed coordinates.
    pub fn cube_face(n: usize, free: &[usize], fixed: BTreeMap<usize, u8>) -> Result<Self> {
        let cube = sorted_unique(free.to_vec(), "free set")?;
        let mut covered: Vec<usize> = cube.iter().chain(fixed.keys()).copied().collect();
        covered.sort_unstable();
        if covered != (1..=n).collect::<Vec<_>>() {
            return Err(GeometryError::Domain(format!(
                "free {cube:?} and fixed {:?} do not partition 1..={n}",
                fixed.keys().collect::<Vec<_>>()
            )));
        }
        if fixed.values().any(|&b| b > 1) {
            return Err(GeometryError::Domain("fixed values must be 0 or 1".into()));
        }
        Ok(Stratum {
            kind: StratumKind::CubeFace,
            simplex: Vec::new(),
            cube,
            fixed,
            boxtimes: None,
        })
    }

    /// A product of an open simplex face and an open cube face.
    pub fn product(simplex: Vec<usize>, cube: Vec<usize>, fixed: BTreeMap<usize, u8>) -> Self {
        let mut simplex = simplex;
        let mut cube = cube;
        simplex.sort_unstable();
        cube.sort_unstable();
        Stratum {
            kind: StratumKind::Product,
            simplex,
            cube,
            fixed,
            boxtimes: None,
        }
    }

    /// A boundary piece created by blow-up, with a nonempty `boxtimes` block.
    pub fn additional(
        simplex: Vec<usize>,
        cube: Vec<usize>,
        fixed: BTreeMap<usize, u8>,
        boxtimes: Vec<usize>,
    ) -> Self {
        assert!(
            !boxtimes.is_empty(),
            "additional faces carry a nonempty boxtimes block"
        );
        let mut simplex = simplex;
        let mut cube = cube;
        let mut boxtimes = boxtimes;
        simplex.sort_unstable();
        cube.sort_unstable();
        boxtimes.sort_unstable();
        Stratum {
            kind: StratumKind::AdditionalFace,
            simplex,
            cube,
            fixed,
            boxtimes: Some(boxtimes),
        }
    }

    pub fn kind(&self) -> StratumKind {
        self.kind
    }

    pub fn simplex(&self) -> &[usize] {
        &self.simplex
    }

    pub fn cube(&self) -> &[usize] {
        &self.cube
    }

    pub fn fixed(&self) -> &BTreeMap<usize, u8> {
        &self.fixed
    }

    pub fn boxtimes(&self) -> Option<&[usize]> {
        self.boxtimes.as_deref()
    }

    /// The simplex vertex whose barycentric coordinate is eliminated locally.
    pub fn reference_vertex(&self) -> Option<usize> {
        self.simplex.first().copied()
    }

    /// Local coordinates: simplex vertices except the reference one, then the
    /// free cube coordinates, sorted.
    pub fn free_coords(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.simplex.iter().skip(1).copied().collect();
        out.extend_from_slice(&self.cube);
        out.sort_unstable();
        out
    }

    pub fn simplex_coords(&self) -> &[usize] {
        if self.simplex.is_empty() {
            &self.simplex
        } else {
            &self.simplex[1..]
        }
    }

    pub fn dim(&self) -> usize {
        let bt = self.boxtimes.as_ref().map_or(0, |b| b.len());
        self.simplex.len().saturating_sub(1) + self.cube.len() + bt
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.simplex_coords().contains(&i) || self.cube.contains(&i)
    }

    /// Whether `self` lies in the closure of `other`.
    pub fn in_closure_of(&self, other: &Stratum) -> bool {
        let simplex_ok = self.simplex.iter().all(|v| other.simplex.contains(v));
        let fixed_ok = other
            .fixed
            .iter()
            .all(|(i, b)| self.fixed.get(i) == Some(b));
        let cube_ok = self.cube.iter().all(|i| {
            other.cube.contains(i) || other.boxtimes.as_ref().is_some_and(|b| b.contains(i))
        });
        simplex_ok && fixed_ok && cube_ok
    }

    /// Membership test with boundary tolerance [`EPS_GEOM`].
    pub fn contains(&self, p: &Point) -> bool {
        let n = p.n();
        let coord = |i: usize| {
            if i >= 1 && i <= n {
                Some(p.get(i))
            } else {
                None
            }
        };
        for (&i, &b) in &self.fixed {
            match coord(i) {
                Some(x) if (x - b as f64).abs() <= EPS_GEOM => {}
                _ => return false,
            }
        }
        for &i in &self.cube {
            match coord(i) {
                Some(x) if x > EPS_GEOM && x < 1.0 - EPS_GEOM => {}
                _ => return false,
            }
        }
        if let Some(block) = &self.boxtimes {
            let mut any_positive = false;
            for &i in block {
                match coord(i) {
                    Some(x) if (-EPS_GEOM..=1.0 + EPS_GEOM).contains(&x) => {
                        any_positive |= x > EPS_GEOM
                    }
                    _ => return false,
                }
            }
            if !any_positive {
                return false;
            }
        }
        if !self.simplex.is_empty() {
            let mut rest = 1.0;
            for &v in &self.simplex {
                if v == 0 {
                    continue;
                }
                match coord(v) {
                    Some(x) if x > EPS_GEOM => rest -= x,
                    _ => return false,
                }
            }
            let has_zero = self.simplex[0] == 0;
            if has_zero && rest <= EPS_GEOM {
                return false;
            }
            if !has_zero && rest.abs() > EPS_GEOM * n.max(1) as f64 {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.simplex.is_empty() {
            let vs: Vec<String> = self.simplex.iter().map(|v| v.to_string()).collect();
            parts.push(format!("simplex({})", vs.join(",")));
        }
        let mut coords: Vec<(usize, String)> = Vec::new();
        for &i in &self.cube {
            coords.push((i, format!("p{i}=*")));
        }
        for (&i, &b) in &self.fixed {
            if self.kind == StratumKind::SimplexFace {
                continue;
            }
            coords.push((i, format!("p{i}={b}")));
        }
        coords.sort();
        if !coords.is_empty() {
            let cs: Vec<String> = coords.into_iter().map(|(_, s)| s).collect();
            parts.push(format!("cube({})", cs.join(",")));
        }
        if let Some(block) = &self.boxtimes {
            let bs: Vec<String> = block.iter().map(|i| format!("p{i}")).collect();
            parts.push(format!("boxtimes({})", bs.join(",")));
        }
        if parts.is_empty() {
            parts.push("point".into());
        }
        write!(f, "{}", parts.join(" x "))
    }
}

#[derive(Serialize, Deserialize)]
struct StratumJson {
    kind: String,
    free: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    simplex: Vec<usize>,
    fixed: BTreeMap<usize, u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxtimes: Option<Vec<usize>>,
}

impl Serialize for Stratum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (free, simplex) = match self.kind {
            StratumKind::SimplexFace => (self.simplex.clone(), Vec::new()),
            _ => (self.cube.clone(), self.simplex.clone()),
        };
        StratumJson {
            kind: self.kind.as_str().to_string(),
            free,
            simplex,
            fixed: self.fixed.clone(),
            boxtimes: self.boxtimes.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Stratum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = StratumJson::deserialize(deserializer)?;
        let kind = StratumKind::parse(&raw.kind).map_err(serde::de::Error::custom)?;
        let (simplex, cube) = match kind {
            StratumKind::SimplexFace => (raw.free, Vec::new()),
            _ => (raw.simplex, raw.free),
        };
        let mut s = Stratum {
            kind,
            simplex,
            cube,
            fixed: raw.fixed,
            boxtimes: raw.boxtimes,
        };
        s.simplex.sort_unstable();
        s.cube.sort_unstable();
        if let Some(b) = s.boxtimes.as_mut() {
            b.sort_unstable();
        }
        Ok(s)
    }
}
