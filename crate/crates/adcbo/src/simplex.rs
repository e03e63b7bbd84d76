//! Euclidean projection onto the probability simplex.

use serde::Serialize;

use crate::error::{Error, Result};

/// A weight vector on the probability simplex: entries nonnegative and
/// summing to one exactly after cleanup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// Uniform point `(1/d, ..., 1/d)`.
    pub fn uniform(dim: usize) -> Self {
        SimplexPoint {
            weights: vec![1.0 / dim as f64; dim],
        }
    }

    /// Vertex `e_i`.
    pub fn vertex(dim: usize, i: usize) -> Self {
        let mut w = vec![0.0; dim];
        w[i] = 1.0;
        SimplexPoint { weights: w }
    }
}

/// Exact Euclidean projection of `y` onto the simplex by the classical
/// sort-and-threshold algorithm: sort descending, find the largest `k`
/// with `u_k - (sum_{j<=k} u_j - 1)/k > 0`, set the threshold
/// `theta = (sum_{j<=k} u_j - 1)/k`, output `max(y - theta, 0)`.
///
/// Negatives are then clamped to 0 and the vector renormalized by its
/// sum, so downstream wealth products see exact feasibility.
pub fn project_simplex(y: &[f64]) -> Result<SimplexPoint> {
    if y.is_empty() {
        return Err(Error::Input("cannot project an empty vector".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("cannot project a non-finite vector".into()));
    }
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut weights: Vec<f64> = y.iter().map(|&v| (v - theta).max(0.0)).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(SimplexPoint { weights })
}

/// Projection as a plain `Vec` map, for plugging into the dynamic loop.
pub fn project_simplex_vec(y: &[f64]) -> Vec<f64> {
    project_simplex(y)
        .map(SimplexPoint::into_weights)
        .expect("finite input")
}
