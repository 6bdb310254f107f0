//! Continuous Lyapunov equations `A X + X Aᵀ + Q = 0`.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Max-abs entry of `A X + X Aᵀ + Q`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a * x + x * a.transpose() + q).amax()
}

/// Dense solve of the vectorised system `(I ⊗ A + A ⊗ I) vec X = −vec Q`.
/// Cost grows as `n⁶`; meant for small systems and cross-checks.
pub fn lyapunov_kronecker(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let vec_x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Kronecker Lyapunov system".into()))?;
    Ok(DMatrix::from_column_slice(n, n, vec_x.as_slice()))
}

/// Diagonal blocks `(start, size)` of a real quasi-triangular Schur factor.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)] != 0.0 {
            blocks.push((k, 2));
            k += 2;
        } else {
            blocks.push((k, 1));
            k += 1;
        }
    }
    blocks
}

const SCHUR_ITERATIONS: usize = 10_000;
const SIGN_ITERATIONS: usize = 200;

/// Solve `A X + X Aᵀ + Q = 0`.
///
/// Uses Bartels–Stewart on the real Schur form; if the Schur iteration
/// stalls (clusters of repeated eigenvalues) and `A` is stable, falls back
/// to the Newton iteration for the matrix sign function.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::ShapeMismatch(
            "Lyapunov operands must be square and equal".into(),
        ));
    }
    match Schur::try_new(a.clone(), f64::EPSILON, SCHUR_ITERATIONS) {
        Some(schur) => bartels_stewart(schur, q),
        None => lyapunov_sign(a, q),
    }
}

/// Newton iteration `A ← (A + A⁻¹)/2`, `E ← (E + A⁻¹ E A⁻ᵀ)/2` from
/// `(A, Q)`; for stable `A` it reaches `A → −I` and `E → 2X`.
pub fn lyapunov_sign(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut ek = q.clone();
    for _ in 0..SIGN_ITERATIONS {
        let inv = ak
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem("sign iteration hit a singular iterate".into()))?;
        ek = (&ek + &inv * &ek * inv.transpose()) * 0.5;
        ak = (&ak + inv) * 0.5;
        if (&ak + &eye).amax() < 1e-14 {
            let x = ek * 0.5;
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
            return Ok(x);
        }
    }
    Err(Error::SingularSystem(
        "sign iteration did not converge; the drift is not stable".into(),
    ))
}

fn bartels_stewart(schur: Schur<f64, nalgebra::Dyn>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let (u, t) = schur.unpack();
    let f = -(u.transpose() * q * &u);
    let blocks = schur_blocks(&t);
    let mut y = DMatrix::<f64>::zeros(n, n);
    for bi in (0..blocks.len()).rev() {
        let (i0, p) = blocks[bi];
        for bj in (0..blocks.len()).rev() {
            let (j0, r) = blocks[bj];
            let mut c = f.view((i0, j0), (p, r)).clone_owned();
            if i0 + p < n {
                let t_row = t.view((i0, i0 + p), (p, n - i0 - p));
                let y_col = y.view((i0 + p, j0), (n - i0 - p, r));
                c -= t_row * y_col;
            }
            if j0 + r < n {
                let y_row = y.view((i0, j0 + r), (p, n - j0 - r));
                let t_row = t.view((j0, j0 + r), (r, n - j0 - r));
                c -= y_row * t_row.transpose();
            }
            // (I_r ⊗ T_ii + T_jj ⊗ I_p) vec Y_ij = vec C
            let t_ii = t.view((i0, i0), (p, p)).clone_owned();
            let t_jj = t.view((j0, j0), (r, r)).clone_owned();
            let small = DMatrix::<f64>::identity(r, r).kronecker(&t_ii)
                + t_jj.kronecker(&DMatrix::<f64>::identity(p, p));
            let rhs = DVector::from_column_slice(c.as_slice());
            let sol = small
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::SingularSystem("eigenvalues of A sum to zero".into()))?;
            y.view_mut((i0, j0), (p, r))
                .copy_from(&DMatrix::from_column_slice(p, r, sol.as_slice()));
        }
    }
    let x = &u * y * u.transpose();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite Lyapunov solution".into()));
    }
    Ok(x)
}
