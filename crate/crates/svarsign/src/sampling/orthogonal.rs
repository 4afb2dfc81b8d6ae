//! Cholesky factors and Haar-uniform orthogonal matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor L with L * L' = sigma and a strictly
/// positive diagonal.
pub fn cholesky_lower(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Haar-uniform draw from the orthogonal group O(n): QR of an iid standard
/// normal matrix, with the columns of Q flipped so the triangular factor has
/// a positive diagonal. The sign normalization is required for exact
/// uniformity.
pub fn sample_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let z: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        let qr = z.qr();
        let r = qr.r();
        // re-draw on (probability-zero) numerical rank deficiency
        if (0..n).any(|i| r[(i, i)] == 0.0) {
            continue;
        }
        let mut q = qr.q();
        for i in 0..n {
            if r[(i, i)] < 0.0 {
                for k in 0..n {
                    q[(k, i)] = -q[(k, i)];
                }
            }
        }
        return q;
    }
}
