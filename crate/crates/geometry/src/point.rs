use crate::{GeometryError, Result};

/// A point given by its coordinates `p^1..p^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(GeometryError::Domain(format!("non-finite coordinate {x}")));
        }
        Ok(Point { coords })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let coords = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| GeometryError::Domain(format!("bad coordinate {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Point::new(coords)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate `p^i` for `i` in `1..=n`.
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i - 1]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.coords[i - 1] = value;
    }

    /// Barycentric coordinate; index 0 is the derived `1 - sum p^i`.
    pub fn barycentric(&self, i: usize) -> f64 {
        if i == 0 {
            self.p0()
        } else {
            self.get(i)
        }
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.coords.iter().sum::<f64>()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Values indexed by coordinate, slot 0 holding the derived `p^0`.
    pub fn with_p0(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.coords.len() + 1);
        v.push(self.p0());
        v.extend_from_slice(&self.coords);
        v
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|x| format!("{x}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}
