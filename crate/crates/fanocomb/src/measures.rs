//! Gaussian entanglement and nonclassicality measures, plus the input-output
//! map from intracavity fluctuations to the cavity output modes.
//!
//! All covariance matrices follow the `vacuum = 1/2 identity` convention in
//! the quadrature ordering `(q_1, p_1, q_2, p_2, ...)`. Logarithmic
//! negativity is returned in nats (natural logarithm); conversion to bits is
//! a presentation concern handled by the caller via
//! [`crate::params::LogBase`].

use crate::fluctuations::{stability, CovarianceMatrix, FluctuationError};
use crate::params::SystemParams;
use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Tolerance on the uncertainty-principle check `V + (i/2) Omega >= 0`.
pub const PHYSICALITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("covariance matrix violates the uncertainty principle (min eig(V + i/2 Omega) = {min_eig:.3e})")]
    UnphysicalCovariance { min_eig: f64 },
    #[error("expected a {expected}x{expected} covariance matrix, got {rows}x{cols}")]
    WrongDimension { expected: usize, rows: usize, cols: usize },
    #[error("mode pair ({i}, {j}) invalid for {modes} modes")]
    BadModePair { i: usize, j: usize, modes: usize },
    #[error("covariance inconsistent with the drift and diffusion (Lyapunov residual {residual:.3e})")]
    InconsistentCovariance { residual: f64 },
    #[error(transparent)]
    Fluctuation(#[from] FluctuationError),
}

/// Symplectic form for `n_modes` modes: block diagonal `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Smallest eigenvalue of the Hermitian matrix `V + (i/2) Omega`.
///
/// Non-negative (up to [`PHYSICALITY_TOL`]) exactly when `V` is a physical
/// covariance matrix. Evaluated through the real symmetric embedding
/// `[[V, -Omega/2], [Omega/2, V]]`, whose spectrum duplicates the Hermitian
/// one.
pub fn physicality_margin(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    let omega = symplectic_form(n / 2);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(v);
    h.view_mut((n, n), (n, n)).copy_from(v);
    h.view_mut((0, n), (n, n)).copy_from(&omega.scale(-0.5));
    h.view_mut((n, 0), (n, n)).copy_from(&omega.scale(0.5));
    let eig = SymmetricEigen::new(h);
    eig.eigenvalues.min()
}

fn ensure_physical(v: &DMatrix<f64>) -> Result<(), MeasureError> {
    let min_eig = physicality_margin(v);
    if min_eig < -PHYSICALITY_TOL {
        return Err(MeasureError::UnphysicalCovariance { min_eig });
    }
    Ok(())
}

/// Symplectic spectrum of a raw covariance matrix: the moduli of the
/// eigenvalues of `Omega V`, coalesced to one value per mode, ascending.
pub fn symplectic_spectrum(v: &DMatrix<f64>) -> Vec<f64> {
    let n_modes = v.nrows() / 2;
    let omega = symplectic_form(n_modes);
    let w = &omega * v;
    let mut moduli: Vec<f64> = w.complex_eigenvalues().iter().map(|e| e.norm()).collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Eigenvalues come in +/- i nu pairs; average each adjacent pair.
    (0..n_modes).map(|k| 0.5 * (moduli[2 * k] + moduli[2 * k + 1])).collect()
}

/// Symplectic eigenvalues of a covariance matrix, ascending.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> Vec<f64> {
    symplectic_spectrum(&v.v)
}

/// Logarithmic negativity (nats) between modes `i` and `j` of `v`.
///
/// Uses the closed form for two-mode Gaussian states: with the reduced
/// blocks `[[A, C], [C^T, B]]`, the partially transposed smaller symplectic
/// eigenvalue is `nu = sqrt((S - sqrt(S^2 - 4 det V4)) / 2)` where
/// `S = det A + det B - 2 det C`, and `E_N = max(0, -ln(2 nu))`.
///
/// An input violating the uncertainty principle is a hard error; silently
/// clamping would fabricate entanglement.
pub fn logneg(v: &CovarianceMatrix, pair: (usize, usize)) -> Result<f64, MeasureError> {
    let modes = v.modes();
    let (i, j) = pair;
    if i == j || i >= modes || j >= modes {
        return Err(MeasureError::BadModePair { i, j, modes });
    }
    let block = v.two_mode_block(i, j);
    ensure_physical(&block)?;

    let det2 = |r0: usize, c0: usize| -> f64 {
        block[(r0, c0)] * block[(r0 + 1, c0 + 1)] - block[(r0, c0 + 1)] * block[(r0 + 1, c0)]
    };
    let det_a = det2(0, 0);
    let det_b = det2(2, 2);
    let det_c = det2(0, 2);
    let det_v = block.determinant();
    let s = det_a + det_b - 2.0 * det_c;
    let mut disc = s * s - 4.0 * det_v;
    // The discriminant is non-negative for every valid covariance matrix;
    // tiny negatives are rounding artifacts of the determinant cancellation.
    if disc < 0.0 {
        if disc > -1e-12 * (s * s).max(1.0) {
            disc = 0.0;
        } else {
            return Err(MeasureError::UnphysicalCovariance { min_eig: disc });
        }
    }
    let nu_sq = 0.5 * (s - disc.sqrt());
    if nu_sq <= 0.0 {
        return Err(MeasureError::UnphysicalCovariance { min_eig: nu_sq });
    }
    let e = -(2.0 * nu_sq.sqrt()).ln();
    Ok(if e > 0.0 { e } else { 0.0 })
}

/// Entanglement potential (nats) of a single-mode state: the logarithmic
/// negativity created by mixing the mode with vacuum on a balanced beam
/// splitter.
///
/// For the 50:50 symplectic `S`, the two-mode state is
/// `S (V1 (+) I/2) S^T`, assembled here in closed block form.
pub fn entanglement_potential(v1: &DMatrix<f64>) -> Result<f64, MeasureError> {
    if v1.nrows() != 2 || v1.ncols() != 2 {
        return Err(MeasureError::WrongDimension {
            expected: 2,
            rows: v1.nrows(),
            cols: v1.ncols(),
        });
    }
    ensure_physical(v1)?;
    let w = DMatrix::<f64>::identity(2, 2).scale(0.5);
    let sum = (v1 + &w).scale(0.5);
    let dif = (&w - v1).scale(0.5);
    let mut v2 = DMatrix::zeros(4, 4);
    v2.view_mut((0, 0), (2, 2)).copy_from(&sum);
    v2.view_mut((2, 2), (2, 2)).copy_from(&sum);
    v2.view_mut((0, 2), (2, 2)).copy_from(&dif);
    v2.view_mut((2, 0), (2, 2)).copy_from(&dif.transpose());
    let cov = CovarianceMatrix::new(v2, vec!["split1".into(), "split2".into()]);
    logneg(&cov, (0, 1))
}

/// Zero-frequency output covariance of the three cavity output modes.
///
/// The stationary input-output transfer at zero detection frequency is
/// `T = R (-A)^{-1} B + sigma [I 0]` restricted to the cavity quadrature
/// rows, with `R = diag(r_i)` on those rows, `B` the input matrix implied by
/// the diffusion (`B = sqrt(2 D)`), and `sigma` the configured input sign.
/// Vacuum inputs then give `V_out = T T^T / 2`, normalized so a decoupled
/// cavity reflects vacuum as exactly vacuum when `r_i = sqrt(2 kappa_i)` and
/// `sigma = -1` (the shipped defaults; flipping both signs is an equivalent
/// convention).
///
/// `v` must be the stationary solution for `(a, d)`; it is cross-checked and
/// rejected if inconsistent.
pub fn output_covariance(
    v: &CovarianceMatrix,
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    p: &SystemParams,
) -> Result<CovarianceMatrix, MeasureError> {
    let n = a.nrows();
    if v.v.nrows() != n || d.nrows() != n || n != crate::fluctuations::DIM {
        return Err(MeasureError::WrongDimension {
            expected: crate::fluctuations::DIM,
            rows: v.v.nrows(),
            cols: a.nrows(),
        });
    }
    let report = stability(a);
    if !report.hurwitz {
        let lead = report.leading();
        return Err(
            FluctuationError::UnstableOperatingPoint { re: lead.re, im: lead.im }.into()
        );
    }
    let residual = crate::fluctuations::lyapunov_residual(a, d, &v.v);
    if !(residual <= 1e-8) {
        return Err(MeasureError::InconsistentCovariance { residual });
    }

    let b = DMatrix::from_fn(n, n, |r, c| if r == c { (2.0 * d[(r, r)]).sqrt() } else { 0.0 });
    let neg_a = -a;
    let lu = neg_a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or(FluctuationError::SingularLyapunov)
        .map_err(MeasureError::Fluctuation)?;
    // Iterative refinement keeps the slow cavity eigenvalues from eroding
    // the transfer matrix.
    for _ in 0..2 {
        let r = &b - &neg_a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }

    let r_out = [p.r_out[0], p.r_out[0], p.r_out[1], p.r_out[1], p.r_out[2], p.r_out[2]];
    let mut t = DMatrix::zeros(6, n);
    for row in 0..6 {
        for col in 0..n {
            t[(row, col)] = r_out[row] * x[(row, col)];
        }
        t[(row, row)] += p.io_sign;
    }
    let v_out = (&t * t.transpose()).scale(0.5);
    let v_out = (&v_out + v_out.transpose()).scale(0.5);
    Ok(CovarianceMatrix::new(
        v_out,
        vec!["out1".into(), "out2".into(), "out3".into()],
    ))
}
