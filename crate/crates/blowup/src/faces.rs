use std::collections::BTreeMap;

use wfblow_geometry::{Stratum, StratumKind};

use crate::{BlowupChain, BlowupChart, BlowupError, Result};

/// Correspondence between open faces of the simplex and open faces of the
/// blown-up domain. Points where a blown-up ratio is `0/0` take the value 0.
pub trait FaceDictionary {
    /// Image of an open simplex face.
    fn map_face(&self, face: &Stratum) -> Result<Stratum>;

    /// The simplex face whose image is `image`; faces inside the additional
    /// boundary pieces have none and yield [`BlowupError::NoSmoothImage`].
    fn map_face_inverse(&self, image: &Stratum) -> Result<Stratum>;
}

pub fn map_face(dictionary: &impl FaceDictionary, face: &Stratum) -> Result<Stratum> {
    dictionary.map_face(face)
}

pub fn map_face_inverse(dictionary: &impl FaceDictionary, image: &Stratum) -> Result<Stratum> {
    dictionary.map_face_inverse(image)
}

/// Every facet of the simplex paired with its image under `chain`.
pub fn standard_facets(chain: &BlowupChain) -> Result<Vec<(Stratum, Stratum)>> {
    let n = chain.n();
    (0..=n)
        .map(|v| {
            let vertices: Vec<usize> = (0..=n).filter(|&w| w != v).collect();
            let facet = Stratum::simplex_face(n, &vertices)?;
            let image = chain.map_face(&facet)?;
            Ok((facet, image))
        })
        .collect()
}

fn require_simplex_face(face: &Stratum) -> Result<()> {
    if face.kind() != StratumKind::SimplexFace {
        return Err(BlowupError::Domain(format!("{face} is not a simplex face")));
    }
    Ok(())
}

/// Dimension of the simplex a stratum belongs to, read off the coordinates
/// it mentions.
fn ambient_dim(s: &Stratum) -> usize {
    s.simplex()
        .iter()
        .chain(s.cube())
        .chain(s.fixed().keys())
        .copied()
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Zero,
    One,
    Free,
}

impl Slot {
    fn flip(self, flipped: bool) -> Slot {
        match (self, flipped) {
            (Slot::Zero, true) => Slot::One,
            (Slot::One, true) => Slot::Zero,
            (s, _) => s,
        }
    }
}

fn slot_of(s: &Stratum, v: usize) -> Result<Slot> {
    if s.cube().contains(&v) {
        return Ok(Slot::Free);
    }
    match s.fixed().get(&v) {
        Some(0) => Ok(Slot::Zero),
        Some(_) => Ok(Slot::One),
        None => Err(BlowupError::Domain(format!(
            "{s} does not determine blown-up coordinate {v}"
        ))),
    }
}

fn write_slot(v: usize, slot: Slot, free: &mut Vec<usize>, fixed: &mut BTreeMap<usize, u8>) {
    match slot {
        Slot::Free => free.push(v),
        Slot::Zero => {
            fixed.insert(v, 0);
        }
        Slot::One => {
            fixed.insert(v, 1);
        }
    }
}

impl FaceDictionary for BlowupChart {
    fn map_face(&self, face: &Stratum) -> Result<Stratum> {
        require_simplex_face(face)?;
        let n = ambient_dim(face);
        let (sigma, rho) = (self.sigma(), self.rho());
        if sigma > n || rho > n {
            return Err(BlowupError::Domain(format!(
                "chart ({sigma}, {rho}) does not act in dimension {n}"
            )));
        }
        let j = face.simplex();
        let (has_s, has_r) = (j.contains(&sigma), j.contains(&rho));
        let mut simplex: Vec<usize> = j.iter().copied().filter(|&v| v != rho).collect();
        if has_r && !has_s {
            simplex.push(sigma);
        }
        let slot = match (has_s, has_r) {
            (true, true) => Slot::Free,
            (false, true) => Slot::One,
            _ => Slot::Zero,
        }
        .flip(self.flipped());
        let mut fixed: BTreeMap<usize, u8> = (1..=n)
            .filter(|&v| v != rho && !simplex.contains(&v))
            .map(|v| (v, 0))
            .collect();
        let mut free = Vec::new();
        write_slot(rho, slot, &mut free, &mut fixed);
        Ok(Stratum::product(simplex, free, fixed))
    }

    fn map_face_inverse(&self, image: &Stratum) -> Result<Stratum> {
        let n = ambient_dim(image);
        let (sigma, rho) = (self.sigma(), self.rho());
        let v = image.simplex();
        if image.kind() != StratumKind::Product || v.contains(&rho) || v.is_empty() {
            return Err(BlowupError::Domain(format!(
                "{image} is not a face of the blown-up domain of chart ({sigma}, {rho})"
            )));
        }
        let slot = slot_of(image, rho)?.flip(self.flipped());
        let has_s = v.contains(&sigma);
        let mut j: Vec<usize> = v.to_vec();
        match slot {
            Slot::Zero => {}
            _ if !has_s => {
                return Err(BlowupError::NoSmoothImage(format!(
                    "{image} lies over p^{sigma} + p^{rho} = 0"
                )))
            }
            Slot::Free => j.push(rho),
            Slot::One => {
                j.retain(|&w| w != sigma);
                j.push(rho);
            }
        }
        Ok(Stratum::simplex_face(n, &j)?)
    }
}

impl FaceDictionary for BlowupChain {
    fn map_face(&self, face: &Stratum) -> Result<Stratum> {
        require_simplex_face(face)?;
        let path = self.path();
        let n = self.n();
        let k = self.base_dim();
        if ambient_dim(face) > n {
            return Err(BlowupError::Domain(format!(
                "{face} is not a face in dimension {n}"
            )));
        }
        let j = face.simplex();
        let top = ((k + 1)..=n).rev().find(|&l| j.contains(&path.at(l)));
        let first = if k == 0 { 1 } else { k + 2 };
        let mut free = Vec::new();
        let mut fixed = BTreeMap::new();
        for pos in first..=n {
            let slot = match top {
                Some(m) if pos <= m => {
                    if j.contains(&path.at(pos - 1)) {
                        Slot::Free
                    } else {
                        Slot::One
                    }
                }
                _ => Slot::Zero,
            };
            write_slot(
                path.at(pos),
                slot.flip(self.flipped_at(pos)),
                &mut free,
                &mut fixed,
            );
        }
        if k == 0 {
            return Ok(Stratum::cube_face(n, &free, fixed)?);
        }
        let base = path.face_vertices(k);
        let mut simplex: Vec<usize> = j.iter().copied().filter(|v| base.contains(v)).collect();
        if top.is_some() {
            simplex.push(path.at(k + 1));
        }
        Ok(Stratum::product(simplex, free, fixed))
    }

    fn map_face_inverse(&self, image: &Stratum) -> Result<Stratum> {
        let path = self.path();
        let n = self.n();
        let k = self.base_dim();
        let expected = if k == 0 {
            StratumKind::CubeFace
        } else {
            StratumKind::Product
        };
        if image.kind() != expected {
            return Err(BlowupError::Domain(format!(
                "{image} is not a face of the blown-up domain of {path}"
            )));
        }
        let first = if k == 0 { 1 } else { k + 2 };
        let slots = (first..=n)
            .map(|pos| Ok(slot_of(image, path.at(pos))?.flip(self.flipped_at(pos))))
            .collect::<Result<Vec<Slot>>>()?;
        let slot = |pos: usize| slots[pos - first];
        // Zeros must form a suffix; an earlier zero puts the face inside an
        // additional boundary piece.
        let suffix = (first..=n)
            .rev()
            .take_while(|&pos| slot(pos) == Slot::Zero)
            .last()
            .unwrap_or(n + 1);
        if let Some(pos) = (first..suffix).find(|&pos| slot(pos) == Slot::Zero) {
            return Err(BlowupError::NoSmoothImage(format!(
                "{image} lies in the additional face at position {pos} of {path}"
            )));
        }
        let mut j: Vec<usize> = Vec::new();
        let top = if k == 0 {
            if suffix == first {
                None
            } else {
                Some(suffix - 1)
            }
        } else {
            let simplex = image.simplex();
            let block = path.face_vertices(k + 1);
            if simplex.is_empty() || simplex.iter().any(|v| !block.contains(v)) {
                return Err(BlowupError::Domain(format!(
                    "{image} has a simplex factor outside {block:?}"
                )));
            }
            let head = path.at(k + 1);
            j.extend(simplex.iter().copied().filter(|&v| v != head));
            if simplex.contains(&head) {
                Some(suffix - 1)
            } else if suffix == first {
                None
            } else {
                return Err(BlowupError::NoSmoothImage(format!(
                    "{image} lies over the vanishing of the whole tail of {path}"
                )));
            }
        };
        match top {
            None if k == 0 => j.push(path.at(0)),
            None => {}
            Some(m) => {
                j.push(path.at(m));
                j.extend(
                    (first..=m)
                        .filter(|&pos| slot(pos) == Slot::Free)
                        .map(|pos| path.at(pos - 1)),
                );
            }
        }
        j.sort_unstable();
        j.dedup();
        Ok(Stratum::simplex_face(n, &j)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{make_chain, make_chart};
    use wfblow_geometry::OrderedPath;

    #[test]
    fn chart_images_of_edges() {
        let chart = make_chart(1, 2, false).unwrap();
        let edge = Stratum::simplex_face(2, &[0, 1]).unwrap();
        let image = chart.map_face(&edge).unwrap();
        assert_eq!(
            image,
            Stratum::product(vec![0, 1], vec![], BTreeMap::from([(2, 0)]))
        );
        assert_eq!(chart.map_face_inverse(&image).unwrap(), edge);
        let edge = Stratum::simplex_face(2, &[0, 2]).unwrap();
        let image = chart.map_face(&edge).unwrap();
        assert_eq!(
            image,
            Stratum::product(vec![0, 1], vec![], BTreeMap::from([(2, 1)]))
        );
        assert_eq!(chart.map_face_inverse(&image).unwrap(), edge);
    }

    #[test]
    fn chain_face_with_coordinate_one() {
        let chain = make_chain(&OrderedPath::parse("0,1,2,3", None).unwrap(), 3, &[]).unwrap();
        let image = Stratum::cube_face(3, &[1, 3], BTreeMap::from([(2, 1)])).unwrap();
        let face = chain.map_face_inverse(&image).unwrap();
        assert_eq!(face, Stratum::simplex_face(3, &[0, 2, 3]).unwrap());
        assert_eq!(chain.map_face(&face).unwrap(), image);
    }

    #[test]
    fn additional_faces_have_no_preimage() {
        let chain = make_chain(&OrderedPath::parse("0,1,2", None).unwrap(), 2, &[]).unwrap();
        let n1 = Stratum::cube_face(2, &[2], BTreeMap::from([(1, 0)])).unwrap();
        assert!(matches!(
            chain.map_face_inverse(&n1),
            Err(BlowupError::NoSmoothImage(_))
        ));
    }
}
