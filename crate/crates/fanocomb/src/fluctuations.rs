//! Linearized quantum fluctuations about a classical steady state.
//!
//! The six bosonic modes (three cavity, three plasmon) are linearized as
//! `o = alpha + delta_o`; dropping terms beyond first order in the
//! fluctuations gives a linear Langevin system `dx/dt = A x + B xi` in the
//! real quadrature basis `q = (delta_o + delta_o^dag)/sqrt(2)`,
//! `p = (delta_o - delta_o^dag)/(i sqrt(2))`, with vacuum white-noise inputs
//! on every damped mode.
//!
//! Two distinct plasmon rates appear in the model: the large classical decay
//! `gamma` that fixes the steady state, and the much smaller noise-memory
//! rate `gamma_noise` that governs the fluctuation dynamics. The drift
//! matrix is therefore not the exact Jacobian at the classical rates; it is
//! the Jacobian of the reduced six-mode dynamics with the noise rates
//! substituted and the emitter degrees of freedom frozen at their
//! steady-state values.
//!
//! The stationary covariance `V = <x x^T>_sym` solves the Lyapunov equation
//! `A V + V A^T + D = 0`, with `D = B B^T / 2` for vacuum inputs under the
//! `vacuum = 1/2 identity` convention.

use crate::params::{detunings, SystemParams};
use crate::steady::{add_mn_block, SteadyState};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Residual tolerance enforced on every Lyapunov solve.
pub const LYAPUNOV_TOL: f64 = 1e-10;

/// Quadrature dimension of the intracavity fluctuation system.
pub const DIM: usize = 12;

/// Drift and diffusion of the linearized system, with a stability flag.
#[derive(Debug, Clone)]
pub struct DriftDiffusion {
    /// 12x12 drift matrix in the quadrature basis
    /// (q_c1, p_c1, q_c2, p_c2, q_c3, p_c3, q_a1, p_a1, q_a2, p_a2, q_a3, p_a3).
    pub a: DMatrix<f64>,
    /// 12x12 diagonal diffusion matrix.
    pub d: DMatrix<f64>,
    /// True iff every eigenvalue of `a` has negative real part.
    pub hurwitz: bool,
}

/// Eigenvalues of a drift matrix together with the Hurwitz verdict.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// All eigenvalues, sorted by real part then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub hurwitz: bool,
}

impl StabilityReport {
    /// Eigenvalue with the largest real part (the slowest or unstable one).
    pub fn leading(&self) -> Complex64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Real symmetric covariance matrix plus mode bookkeeping.
///
/// The convention tag records that vacuum corresponds to `1/2 * identity`;
/// every routine in this crate assumes that normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub v: DMatrix<f64>,
    /// One label per mode, e.g. `["c1", ..., "a3"]` or `["out1", ...]`.
    pub labels: Vec<String>,
    /// Variance of each vacuum quadrature in this convention (1/2).
    pub vacuum_variance: f64,
}

impl CovarianceMatrix {
    pub fn new(v: DMatrix<f64>, labels: Vec<String>) -> Self {
        assert_eq!(v.nrows(), v.ncols(), "covariance matrix must be square");
        assert_eq!(v.nrows(), 2 * labels.len(), "two quadratures per mode label");
        CovarianceMatrix { v, labels, vacuum_variance: 0.5 }
    }

    pub fn modes(&self) -> usize {
        self.labels.len()
    }

    /// 2x2 single-mode block of mode `i`.
    pub fn mode_block(&self, i: usize) -> DMatrix<f64> {
        self.v.view((2 * i, 2 * i), (2, 2)).into_owned()
    }

    /// 4x4 two-mode block of modes `(i, j)` in that order.
    pub fn two_mode_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(4, 4);
        let idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1];
        for (r, &vr) in idx.iter().enumerate() {
            for (c, &vc) in idx.iter().enumerate() {
                out[(r, c)] = self.v[(vr, vc)];
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum FluctuationError {
    #[error("unstable operating point: drift eigenvalue {re:.6e} {im:+.6e}i has non-negative real part")]
    UnstableOperatingPoint { re: f64, im: f64 },
    #[error("Lyapunov residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    LyapunovResidual { residual: f64, tol: f64 },
    #[error("singular Lyapunov system (eigenvalue pair of the drift sums to zero)")]
    SingularLyapunov,
}

fn mode_labels() -> Vec<String> {
    ["c1", "c2", "c3", "a1", "a2", "a3"].map(str::to_string).into()
}

/// Drift matrix of the linearized fluctuation dynamics about `steady`.
///
/// In complex form, writing `delta_a` for the plasmon and `delta_c` for the
/// cavity fluctuations, the rows are
///
/// ```text
/// d(delta_c_i) = -(kappa_i + i Dc_i) delta_c_i - i conj(g_i) delta_a_i
/// d(delta_a_1) = -(G_1 + i Da_1) delta_a_1 - i g_1 delta_c_1
///               - 2 i chi (conj(a1) a3 delta_a_2 + conj(a1) a2 delta_a_3 + a2 a3 delta_a_1^dag)
/// d(delta_a_2) = -(G_2 + i Da_2) delta_a_2 - i g_2 delta_c_2
///               - i chi (2 conj(a3) a1 delta_a_1 + a1^2 delta_a_3^dag)
/// d(delta_a_3) = -(G_3 + i Da_3) delta_a_3 - i g_3 delta_c_3
///               - i chi (2 conj(a2) a1 delta_a_1 + a1^2 delta_a_2^dag)
/// ```
///
/// with `G_i` the noise-memory rates and `a_i` the steady plasmon
/// amplitudes. The emitter enters only through those amplitudes.
pub fn build_drift(p: &SystemParams, steady: &SteadyState) -> DMatrix<f64> {
    let d = detunings(p);
    let chi = p.chi_fwm;
    let [a1, a2, a3] = steady.alpha_a;

    // Complex mode order: c1, c2, c3, a1, a2, a3.
    let mut m = [[Complex64::ZERO; 6]; 6];
    let mut n = [[Complex64::ZERO; 6]; 6];
    for i in 0..3 {
        m[i][i] = -Complex64::new(p.kappa[i], d.delta_c[i]);
        m[i][3 + i] = -I * p.g[i].conj();
        m[3 + i][i] = -I * p.g[i];
        m[3 + i][3 + i] = -Complex64::new(p.gamma_noise[i], d.delta_a[i]);
    }
    m[3][4] = -2.0 * I * chi * a1.conj() * a3;
    m[3][5] = -2.0 * I * chi * a1.conj() * a2;
    n[3][3] = -2.0 * I * chi * a2 * a3;
    m[4][3] = -2.0 * I * chi * a3.conj() * a1;
    n[4][5] = -I * chi * a1 * a1;
    m[5][3] = -2.0 * I * chi * a2.conj() * a1;
    n[5][4] = -I * chi * a1 * a1;

    let mut a = DMatrix::zeros(DIM, DIM);
    for row in 0..6 {
        for col in 0..6 {
            if m[row][col] != Complex64::ZERO || n[row][col] != Complex64::ZERO {
                add_mn_block(&mut a, row, col, m[row][col], n[row][col]);
            }
        }
    }
    a
}

/// Diagonal diffusion matrix for vacuum inputs on every damped mode.
///
/// Cavity quadratures carry `kappa_i`, plasmon quadratures `gamma_noise_i`;
/// this is `B B^T / 2` for the input matrix of [`input_matrix`].
pub fn build_diffusion(p: &SystemParams) -> DMatrix<f64> {
    let mut rates = Vec::with_capacity(DIM);
    for k in p.kappa {
        rates.push(k);
        rates.push(k);
    }
    for g in p.gamma_noise {
        rates.push(g);
        rates.push(g);
    }
    DMatrix::from_diagonal(&DVector::from_vec(rates))
}

/// Input noise matrix `B = diag(sqrt(2 rate))`, the fluctuation-dissipation
/// closure that returns exactly vacuum for an uncoupled damped mode.
pub fn input_matrix(p: &SystemParams) -> DMatrix<f64> {
    let d = build_diffusion(p);
    DMatrix::from_fn(DIM, DIM, |r, c| if r == c { (2.0 * d[(r, c)]).sqrt() } else { 0.0 })
}

/// Eigenvalues and Hurwitz flag of a drift matrix.
pub fn stability(a: &DMatrix<f64>) -> StabilityReport {
    let mut eigenvalues: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| {
        x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap())
    });
    let hurwitz = eigenvalues.iter().all(|e| e.re < 0.0);
    StabilityReport { eigenvalues, hurwitz }
}

/// Assemble drift, diffusion, and stability for one operating point.
pub fn drift_diffusion(p: &SystemParams, steady: &SteadyState) -> DriftDiffusion {
    let a = build_drift(p, steady);
    let d = build_diffusion(p);
    let hurwitz = stability(&a).hurwitz;
    DriftDiffusion { a, d, hurwitz }
}

/// Max-norm of the Lyapunov residual `A V + V A^T + D`.
pub fn lyapunov_residual(a: &DMatrix<f64>, d: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    (a * v + v * a.transpose() + d).amax()
}

/// Solve the stationary Lyapunov equation `A V + V A^T + D = 0`.
///
/// Works on the vectorized upper triangle (78 unknowns for the 12x12 case),
/// exploiting the symmetry of `V`, with one LU factorization plus iterative
/// refinement. The residual is verified against [`LYAPUNOV_TOL`] before the
/// result is returned.
pub fn solve_lyapunov(
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<CovarianceMatrix, FluctuationError> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "drift must be square");
    assert_eq!((d.nrows(), d.ncols()), (n, n), "diffusion must match the drift");
    assert_eq!(n % 2, 0, "quadrature dimension must be even");

    let report = stability(a);
    if !report.hurwitz {
        let lead = report.leading();
        return Err(FluctuationError::UnstableOperatingPoint { re: lead.re, im: lead.im });
    }

    // Index map for the packed upper triangle (i <= j).
    let m = n * (n + 1) / 2;
    let mut idx = vec![vec![0usize; n]; n];
    let mut pairs = Vec::with_capacity(m);
    for i in 0..n {
        for j in i..n {
            idx[i][j] = pairs.len();
            idx[j][i] = pairs.len();
            pairs.push((i, j));
        }
    }

    let mut sys = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for k in 0..n {
            sys[(row, idx[k][j])] += a[(i, k)];
            sys[(row, idx[i][k])] += a[(j, k)];
        }
        rhs[row] = -d[(i, j)];
    }

    let lu = sys.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(FluctuationError::SingularLyapunov)?;
    // Iterative refinement: the slowest drift eigenvalues can make the
    // packed system ill-conditioned, but the refinement loop restores the
    // residual to rounding level.
    for _ in 0..3 {
        let r = &rhs - &sys * &x;
        if r.amax() <= f64::EPSILON * rhs.amax() {
            break;
        }
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }

    let mut v = DMatrix::zeros(n, n);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        v[(i, j)] = x[row];
        v[(j, i)] = x[row];
    }

    let residual = lyapunov_residual(a, d, &v);
    if !(residual <= LYAPUNOV_TOL) {
        return Err(FluctuationError::LyapunovResidual { residual, tol: LYAPUNOV_TOL });
    }

    let labels = if n == DIM {
        mode_labels()
    } else {
        (0..n / 2).map(|k| format!("m{}", k + 1)).collect()
    };
    Ok(CovarianceMatrix::new(v, labels))
}
