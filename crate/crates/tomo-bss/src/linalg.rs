//! Small complex linear-algebra helpers shared across the crate.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Forces exact Hermitian symmetry: (A + A^H) / 2.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    let half = C64::new(0.5, 0.0);
    (a + a.adjoint()) * half
}

/// Relative Hermitian asymmetry ‖A − A^H‖_F / ‖A‖_F (0 for exactly Hermitian).
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let num = (a - a.adjoint()).norm();
    let den = a.norm();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Each eigenvector's global phase is fixed by rotating its
/// largest-modulus entry onto the positive real axis, which makes the output
/// deterministic across eigensolver backends.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector k in column k.
pub fn eigh_desc(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let sym = hermitian_part(a);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut v = eig.eigenvectors.column(src).into_owned();
        fix_global_phase(&mut v);
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

/// Rotates v by a unit scalar so its largest-modulus entry is real positive.
pub fn fix_global_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mod = -1.0f64;
    for (i, x) in v.iter().enumerate() {
        let m = x.norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod <= 0.0 {
        return;
    }
    let phase = v[best] / C64::new(best_mod, 0.0);
    let rot = phase.conj();
    for x in v.iter_mut() {
        *x *= rot;
    }
}

/// Drops amplitudes: every entry is replaced by its phase factor scaled to
/// modulus 1/√N, so the result is a unit-norm constant-modulus vector.
/// Entries with zero magnitude map to 1/√N (zero phase).
pub fn phase_only(v: &CVector) -> CVector {
    let n = v.len();
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_iterator(
        n,
        v.iter().map(|x| {
            let m = x.norm();
            if m > 0.0 {
                *x / C64::new(m / scale, 0.0)
            } else {
                C64::new(scale, 0.0)
            }
        }),
    )
}

/// Rank-one Hermitian update A − w·v v^H (v used as given, not normalized).
pub fn subtract_outer(a: &CMatrix, v: &CVector, w: f64) -> CMatrix {
    let mut out = a.clone();
    let n = v.len();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] -= C64::new(w, 0.0) * v[i] * v[j].conj();
        }
    }
    out
}

/// Real part of the quadratic form v^H A v.
pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    let av = a * v;
    v.dotc(&av).re
}
