//! Two-component principal projection.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{EvalError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Sample variance along each component.
    pub variances: [f64; 2],
    pub degenerate: bool,
}

/// Projects centred vectors onto the two leading eigenvectors of their
/// covariance. Each component is signed so its largest entry is positive.
pub fn project(vectors: &[Vec<f64>]) -> Result<Projection> {
    let n = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    if n < 3 || dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(EvalError::TooFewVectors { count: n });
    }
    let x = DMatrix::from_fn(n, dim, |i, j| vectors[i][j]);
    let mean = x.row_mean();
    let mut centred = x.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.transpose() * &centred / (n - 1) as f64;
    let scale = 1.0 + mean.norm_squared();
    if cov.trace() <= 1e-18 * scale {
        log::warn!("projection input has (near) zero variance; returning the origin");
        return Ok(Projection {
            coords: vec![[0.0, 0.0]; n],
            variances: [0.0, 0.0],
            degenerate: true,
        });
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::with_capacity(2);
    for &k in order.iter().take(2) {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let lead = (0..dim).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap_or(0);
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        axes.push(v);
    }
    while axes.len() < 2 {
        axes.push(nalgebra::DVector::zeros(dim));
    }
    let coords: Vec<[f64; 2]> = centred
        .row_iter()
        .map(|r| [r.dot(&axes[0].transpose()), r.dot(&axes[1].transpose())])
        .collect();
    let var = |c: usize| coords.iter().map(|p| p[c] * p[c]).sum::<f64>() / (n - 1) as f64;
    Ok(Projection {
        variances: [var(0), var(1)],
        coords,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_collapse() {
        let p = project(&vec![vec![0.1, 0.2, 0.3]; 5]).unwrap();
        assert!(p.degenerate);
        assert!(p.coords.iter().all(|c| *c == [0.0, 0.0]));
    }

    #[test]
    fn line_lies_on_first_component() {
        let vs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, 5.0]).collect();
        let p = project(&vs).unwrap();
        assert!(!p.degenerate);
        assert!(p.coords.iter().all(|c| c[1].abs() < 1e-9));
        // spacing along the line is sqrt(5)
        assert!((p.coords[1][0] - p.coords[0][0] - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn too_few_or_ragged() {
        assert!(project(&[vec![1.0], vec![2.0]]).is_err());
        assert!(project(&[vec![1.0], vec![2.0], vec![1.0, 2.0]]).is_err());
    }
}
