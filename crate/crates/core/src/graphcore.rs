//! Graph model and distance-based spatial adjacency.

use crate::error::{Result, StemoError};
use crate::numdiff::Tensor;

/// Sensor graph with a symmetric pairwise distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub node_ids: Vec<String>,
    pub coords: Option<Vec<(f64, f64)>>,
    pub dist: Tensor,
}

impl Graph {
    pub fn from_distances(node_ids: Vec<String>, dist: Tensor) -> Result<Self> {
        let g = Self {
            node_ids,
            coords: None,
            dist,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_coords(node_ids: Vec<String>, coords: Vec<(f64, f64)>) -> Result<Self> {
        let maybe: Vec<Option<(f64, f64)>> = coords.iter().copied().map(Some).collect();
        let dist = coords_to_distances(&node_ids, &maybe)?;
        let g = Self {
            node_ids,
            coords: Some(coords),
            dist,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(StemoError::Graph(format!("need at least 2 nodes, got {n}")));
        }
        if self.dist.shape() != [n, n] {
            return Err(StemoError::Graph(format!(
                "distance matrix shape {:?} for {n} nodes",
                self.dist.shape()
            )));
        }
        for i in 0..n {
            if self.dist.at(i, i) != 0.0 {
                return Err(StemoError::Graph(format!("nonzero self distance at {}", self.node_ids[i])));
            }
            for j in 0..n {
                let d = self.dist.at(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(StemoError::Graph(format!(
                        "invalid distance {d} between {} and {}",
                        self.node_ids[i], self.node_ids[j]
                    )));
                }
                let dt = self.dist.at(j, i);
                if (d - dt).abs() > 1e-9 * d.abs().max(1.0) {
                    return Err(StemoError::Graph(format!(
                        "asymmetric distance between {} and {}: {d} vs {dt}",
                        self.node_ids[i], self.node_ids[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bandwidth default: standard deviation of the off-diagonal distances.
    pub fn default_eta(&self) -> f64 {
        let n = self.n();
        let off: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.dist.at(i, j))
            .collect();
        let mean = off.iter().sum::<f64>() / off.len() as f64;
        let var = off.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / off.len() as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            sd
        } else if mean > 0.0 {
            mean
        } else {
            1.0
        }
    }
}

/// Gaussian-kernel adjacency and its self-loop, symmetric-degree normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAdjacency {
    pub a_s: Tensor,
    pub a_s_norm: Tensor,
    pub eta: f64,
}

impl SpatialAdjacency {
    pub fn n(&self) -> usize {
        self.a_s.rows()
    }
}

/// `A_ij = exp(-d_ij² / η²)` off the diagonal, then `D^-1/2 (A + I) D^-1/2`.
pub fn build_spatial_adjacency(g: &Graph, eta: f64) -> Result<SpatialAdjacency> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(StemoError::Graph(format!("eta must be positive, got {eta}")));
    }
    g.validate()?;
    let n = g.n();
    let mut a_s = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = g.dist.at(i, j);
                a_s.set(i, j, (-(d * d) / (eta * eta)).exp());
            }
        }
    }
    let a_s_norm = normalize_with_self_loops(&a_s);
    Ok(SpatialAdjacency { a_s, a_s_norm, eta })
}

pub(crate) fn normalize_with_self_loops(a: &Tensor) -> Tensor {
    let n = a.rows();
    let mut tilde = a.clone();
    for i in 0..n {
        tilde.set(i, i, a.at(i, i) + 1.0);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / tilde.row(i).iter().sum::<f64>().sqrt())
        .collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, inv_sqrt[i] * tilde.at(i, j) * inv_sqrt[j]);
        }
    }
    out
}

/// Euclidean distance matrix; every node must have a coordinate.
pub fn coords_to_distances(node_ids: &[String], coords: &[Option<(f64, f64)>]) -> Result<Tensor> {
    if node_ids.len() != coords.len() {
        return Err(StemoError::Graph(format!(
            "{} node ids but {} coordinates",
            node_ids.len(),
            coords.len()
        )));
    }
    let pts = coords
        .iter()
        .zip(node_ids)
        .map(|(c, id)| c.ok_or_else(|| StemoError::Graph(format!("missing coordinate for node {id}"))))
        .collect::<Result<Vec<_>>>()?;
    let n = pts.len();
    let mut d = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    fn two_node(d: f64) -> Graph {
        Graph::from_distances(ids(2), Tensor::matrix(2, 2, vec![0.0, d, d, 0.0]).unwrap()).unwrap()
    }

    #[test]
    fn colocated_nodes_get_full_weight() {
        let adj = build_spatial_adjacency(&two_node(0.0), 1.0).unwrap();
        assert_eq!(adj.a_s.at(0, 1), 1.0);
        assert_eq!(adj.a_s.at(0, 0), 0.0);
    }

    #[test]
    fn distance_equal_to_bandwidth() {
        let adj = build_spatial_adjacency(&two_node(3.0), 3.0).unwrap();
        assert!((adj.a_s.at(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_node_normalization_by_hand() {
        let e = (-1.0f64).exp();
        let adj = build_spatial_adjacency(&two_node(2.0), 2.0).unwrap();
        let deg = 1.0 + e;
        // D^-1/2 Ã D^-1/2 with equal degrees is Ã / deg
        assert!((adj.a_s_norm.at(0, 0) - 1.0 / deg).abs() < 1e-14);
        assert!((adj.a_s_norm.at(0, 1) - e / deg).abs() < 1e-14);
        assert!((adj.a_s_norm.at(1, 0) - e / deg).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let asym = Tensor::matrix(2, 2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        assert!(Graph::from_distances(ids(2), asym).is_err());
        let neg = Tensor::matrix(2, 2, vec![0.0, -1.0, -1.0, 0.0]).unwrap();
        assert!(Graph::from_distances(ids(2), neg).is_err());
        assert!(build_spatial_adjacency(&two_node(1.0), 0.0).is_err());
    }

    #[test]
    fn coords_pythagoras() {
        let d = coords_to_distances(&ids(3), &[Some((0.0, 0.0)), Some((3.0, 4.0)), Some((0.0, 0.0))]).unwrap();
        assert_eq!(d.at(0, 1), 5.0);
        assert_eq!(d.at(0, 2), 0.0);
    }

    #[test]
    fn missing_coordinate_names_node() {
        let err = coords_to_distances(&ids(2), &[Some((0.0, 0.0)), None]).unwrap_err();
        assert!(err.to_string().contains("n1"));
    }
}
