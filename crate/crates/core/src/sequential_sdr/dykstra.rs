//! Euclidean projection onto `{Φ ⪰ 0, Φ_ll ≤ 1}`.

use crate::linalg::{hermitian_eigen, hermitian_part, CMatrix, C64};

/// Projection onto the PSD cone: clip negative eigenvalues.
pub fn project_psd(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let n = values.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam > 0.0 {
            let u = vectors.column(k);
            out += u * u.adjoint() * C64::new(lam, 0.0);
        }
    }
    hermitian_part(&out)
}

/// Projection onto `{Φ Hermitian, Re Φ_ll ≤ 1}`: clip the diagonal.
pub fn project_diag_box(a: &CMatrix) -> CMatrix {
    let mut out = hermitian_part(a);
    for l in 0..out.nrows() {
        out[(l, l)] = C64::new(out[(l, l)].re.min(1.0), 0.0);
    }
    out
}

/// Dykstra's alternating projections followed by a congruence rescale that
/// makes the result exactly feasible.
pub fn dykstra_project(a: &CMatrix, tol: f64, max_iters: usize) -> CMatrix {
    let n = a.nrows();
    let mut x = hermitian_part(a);
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    for _ in 0..max_iters {
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let next = project_diag_box(&(&y + &q));
        q = &y + &q - &next;
        let change = (&next - &x).norm();
        x = next;
        if change <= tol * x.norm().max(1.0) {
            break;
        }
    }
    restore_feasibility(&project_psd(&x))
}

/// `D^{-1/2} Φ D^{-1/2}` on rows whose diagonal exceeds one; keeps `Φ ⪰ 0`.
pub fn restore_feasibility(phi: &CMatrix) -> CMatrix {
    let n = phi.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|l| {
            let d = phi[(l, l)].re;
            if d > 1.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut out = CMatrix::from_fn(n, n, |r, c| phi[(r, c)] * (scale[r] * scale[c]));
    for l in 0..n {
        out[(l, l)] = C64::new(out[(l, l)].re.min(1.0), 0.0);
    }
    out
}
