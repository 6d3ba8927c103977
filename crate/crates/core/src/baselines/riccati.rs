//! Continuous-time algebraic Riccati equation
//! `AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0` for a single input.
//!
//! The stabilising solution is first located through the matrix sign
//! function of the Hamiltonian, then polished with Newton–Kleinman
//! iterations (each one a Lyapunov solve in Kronecker form), which converge
//! quadratically from any stabilising starting point.

use nalgebra::{DMatrix, Matrix4, Vector4};

use crate::Error;

const SIGN_MAX_ITER: usize = 100;
const SIGN_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 50;
const RESIDUAL_TOL: f64 = 1e-10;

/// Frobenius norm of the Riccati residual.
pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> f64 {
    let pb = p * b;
    let res = a.transpose() * p + p * a - &pb * pb.transpose() / r + q;
    res.norm()
}

fn lyapunov(ak: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    // Akᵀ X + X Ak = rhs, column-major vec: (I ⊗ Akᵀ + Akᵀ ⊗ I) vec(X)
    let n = ak.nrows();
    let akt = ak.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&akt) + akt.kronecker(&eye);
    let vec_rhs = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
    let x = op.lu().solve(&vec_rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

fn sign_function_guess(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-(b * b.transpose()) / r));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut z = ham;
    for _ in 0..SIGN_MAX_ITER {
        let inv = z.clone().try_inverse()?;
        // determinant scaling speeds up the early iterations
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            libm::exp(libm::log(det) / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z / c + inv * c) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if delta <= SIGN_TOL * scale {
            break;
        }
    }

    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some((&p + p.transpose()) * 0.5)
}

/// Stabilising solution for arbitrary state dimension `n`; `b` is `n × 1`.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: f64) -> Result<DMatrix<f64>, Error> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::LengthMismatch {
            what: "riccati matrices",
            expected: n,
            got: a.ncols(),
        });
    }
    if b.shape() != (n, 1) {
        return Err(Error::LengthMismatch {
            what: "b",
            expected: n,
            got: b.nrows(),
        });
    }
    if !(r > 0.0) {
        return Err(Error::invalid("r", "must be positive"));
    }
    let not_converged = |iterations, residual| Error::RiccatiNotConverged { iterations, residual };

    let mut p = sign_function_guess(a, b, q, r).ok_or_else(|| not_converged(0, f64::INFINITY))?;
    let mut residual = care_residual(a, b, q, r, &p);
    let tol = RESIDUAL_TOL * q.norm().max(1.0);
    let mut iterations = 0;
    while residual > tol || iterations == 0 {
        if iterations == NEWTON_MAX_ITER {
            return Err(not_converged(iterations, residual));
        }
        iterations += 1;
        let k = b.transpose() * &p / r;
        let ak = a - b * &k;
        let rhs = -(q + k.transpose() * &k * r);
        let next = lyapunov(&ak, &rhs).ok_or_else(|| not_converged(iterations, residual))?;
        let next_residual = care_residual(a, b, q, r, &next);
        if !next_residual.is_finite() {
            return Err(not_converged(iterations, next_residual));
        }
        // stop once rounding dominates
        if next_residual >= residual && residual <= tol {
            break;
        }
        p = next;
        residual = next_residual;
    }
    Ok(p)
}

/// Four-state, single-input wrapper around [`solve_care`].
pub fn solve_riccati(a: &Matrix4<f64>, b: &Vector4<f64>, q: &Matrix4<f64>, r: f64) -> Result<Matrix4<f64>, Error> {
    let p = solve_care(
        &DMatrix::from_column_slice(4, 4, a.as_slice()),
        &DMatrix::from_column_slice(4, 1, b.as_slice()),
        &DMatrix::from_column_slice(4, 4, q.as_slice()),
        r,
    )?;
    Ok(Matrix4::from_column_slice(p.as_slice()))
}
