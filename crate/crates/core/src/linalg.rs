//! Small complex linear-algebra helpers shared by the optimizers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// `Σ_l a_l · b_l` without conjugation (the `ψᵀh` product).
pub fn dot_t(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real inner product `Re{aᴴ b}` treating `Cᴸ` as `R²ᴸ`.
pub fn real_inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// One draw of a circular complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len)
        .map(|_| C64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
        .collect()
}

/// Hermitian part `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues in ascending order.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rank-one Hermitian matrix `s · v vᴴ`.
pub fn outer_hermitian(v: &[C64], scale: f64) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |r, c| v[r] * v[c].conj() * scale)
}

/// Quadratic form `vᴴ A v` (real part) for Hermitian `A`.
pub fn quad_form(a: &CMatrix, v: &[C64]) -> f64 {
    let n = v.len();
    let mut acc = C64::new(0.0, 0.0);
    for c in 0..n {
        let mut col = C64::new(0.0, 0.0);
        for r in 0..n {
            col += v[r].conj() * a[(r, c)];
        }
        acc += col * v[c];
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_reconstructs_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = CMatrix::from_fn(5, 5, |_, _| complex_normal(&mut rng));
        let a = &b * b.adjoint();
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&CVector::from_iterator(5, vals.iter().map(|&x| C64::new(x, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - a).norm() < 1e-10);
    }

    #[test]
    fn quad_form_matches_outer() {
        let v = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)];
        let a = outer_hermitian(&v, 2.0);
        let expected = 2.0 * norm_sqr(&v).powi(2);
        assert!((quad_form(&a, &v) - expected).abs() < 1e-12);
    }
}
