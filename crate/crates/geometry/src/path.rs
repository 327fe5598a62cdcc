use serde::{Deserialize, Serialize};

use crate::{GeometryError, Result};

/// A sorted set of distinct allele indices.
///
/// A primed set lives on the cube side and never contains index 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    members: Vec<usize>,
    primed: bool,
}

impl IndexSet {
    pub fn new(mut members: Vec<usize>, n: usize, primed: bool) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(GeometryError::Domain(format!(
                "repeated index in {members:?}"
            )));
        }
        if let Some(&m) = members.last() {
            if m > n {
                return Err(GeometryError::Domain(format!("index {m} exceeds n = {n}")));
            }
        }
        if primed && members.first() == Some(&0) {
            return Err(GeometryError::Domain("primed index set contains 0".into()));
        }
        Ok(IndexSet { members, primed })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_primed(&self) -> bool {
        self.primed
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// An ordering `(i_k, i_{k+1}, .., i_n)` of distinct indices in `0..=n`.
///
/// The base face is `I_k = {0..n}` minus the indices after `i_k`; positions are
/// addressed by their label `j` in `k..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderedPath {
    indices: Vec<usize>,
    n: usize,
}

impl OrderedPath {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() > n + 1 {
            return Err(GeometryError::Domain(format!(
                "path of length {} is invalid for n = {n}",
                indices.len()
            )));
        }
        let mut seen = vec![false; n + 1];
        for &i in &indices {
            if i > n {
                return Err(GeometryError::Domain(format!(
                    "path index {i} exceeds n = {n}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(GeometryError::Domain(format!("path index {i} repeated")));
            }
        }
        Ok(OrderedPath { indices, n })
    }

    /// Parses a comma separated list such as `0,1,2`. Without an explicit `n`
    /// the smallest dimension containing every index and the whole path is used.
    pub fn parse(text: &str, n: Option<usize>) -> Result<Self> {
        let indices = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| GeometryError::Domain(format!("bad path entry {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = n.unwrap_or_else(|| {
            let max = indices.iter().copied().max().unwrap_or(0);
            max.max(indices.len().saturating_sub(1))
        });
        OrderedPath::new(indices, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension `k` of the base face.
    pub fn base_dim(&self) -> usize {
        self.n + 1 - self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The index `i_j` for `j` in `k..=n`.
    pub fn at(&self, j: usize) -> usize {
        self.indices[j - self.base_dim()]
    }

    pub fn head(&self) -> usize {
        self.indices[0]
    }

    /// Vertex set `I_d` of the path face of dimension `d`, sorted.
    pub fn face_vertices(&self, d: usize) -> Vec<usize> {
        assert!(
            d >= self.base_dim() && d <= self.n,
            "face dimension {d} off the path"
        );
        let dropped = &self.indices[(d + 1 - self.base_dim())..];
        (0..=self.n).filter(|v| !dropped.contains(v)).collect()
    }

    /// The primed index set `I'_d = I_d \ {0}`.
    pub fn primed_face(&self, d: usize) -> IndexSet {
        let members = self
            .face_vertices(d)
            .into_iter()
            .filter(|&v| v != 0)
            .collect();
        IndexSet::new(members, self.n, true).expect("face vertices are valid")
    }

    /// Position label `j` of index `v` on the path, if present.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.indices
            .iter()
            .position(|&i| i == v)
            .map(|p| p + self.base_dim())
    }

    /// The path with its base face shifted to dimension `d` (suffix from `i_d`).
    pub fn suffix(&self, d: usize) -> OrderedPath {
        OrderedPath {
            indices: self.indices[(d - self.base_dim())..].to_vec(),
            n: self.n,
        }
    }
}

impl std::fmt::Display for OrderedPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_set_invariants() {
        assert!(IndexSet::new(vec![2, 0, 1], 2, false).is_ok());
        assert!(IndexSet::new(vec![1, 1], 2, false).is_err());
        assert!(IndexSet::new(vec![3], 2, false).is_err());
        assert!(IndexSet::new(vec![0, 1], 2, true).is_err());
        assert_eq!(
            IndexSet::new(vec![2, 0], 2, false).unwrap().members(),
            &[0, 2]
        );
    }

    #[test]
    fn path_faces() {
        let p = OrderedPath::new(vec![0, 2, 1], 2).unwrap();
        assert_eq!(p.base_dim(), 0);
        assert_eq!(p.face_vertices(0), vec![0]);
        assert_eq!(p.face_vertices(1), vec![0, 2]);
        assert_eq!(p.face_vertices(2), vec![0, 1, 2]);
        assert_eq!(p.at(1), 2);
        assert_eq!(p.position(1), Some(2));
    }

    #[test]
    fn path_with_positive_base_dim() {
        let p = OrderedPath::new(vec![1, 2], 2).unwrap();
        assert_eq!(p.base_dim(), 1);
        assert_eq!(p.face_vertices(1), vec![0, 1]);
        assert_eq!(p.at(2), 2);
    }

    #[test]
    fn path_parse() {
        let p = OrderedPath::parse("0, 1,2", None).unwrap();
        assert_eq!(p.n(), 2);
        let p = OrderedPath::parse("1,2", Some(2)).unwrap();
        assert_eq!(p.base_dim(), 1);
        assert!(OrderedPath::parse("0,0", None).is_err());
        assert!(OrderedPath::parse("0,x", None).is_err());
        assert!(OrderedPath::new(vec![0, 1, 2], 1).is_err());
    }
}
