//! Semiclassical steady state of the coupled cavity-plasmon-emitter system.
//!
//! Each of the three fields (pump at `omega1`, signal at `omega2`, idler at
//! `omega3 = 2*omega1 - omega2`) dresses one cavity mode and one plasmon
//! mode; the idler plasmon additionally couples to a two-level emitter. In
//! the multi-frequency rotating frame the four-wave-mixing terms are time
//! independent because the frequencies are energy matched, so the classical
//! expectation values have a genuine fixed point.
//!
//! The fixed point is found by damped Newton iteration on the 15 real
//! unknowns (seven complex amplitudes plus the real excited-state
//! population), warm-started from the closed-form solution of the linear
//! problem and, if necessary, continued in the nonlinear couplings.

use crate::params::{detunings, SystemParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Convergence tolerance on the residual max-norm.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Newton iteration cap for a single stage.
pub const DEFAULT_MAX_ITER: usize = 100;
/// Amplitude magnitude treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e9;
/// Smallest bare mode-3 intensity accepted as an enhancement-factor
/// reference; below this the bare four-wave mixing is effectively absent.
pub(crate) const EF_UNDERFLOW_FLOOR: f64 = 1e-280;

/// Classical fixed point of the rotating-frame equations of motion.
///
/// `alpha_c[i]` and `alpha_a[i]` are the cavity and plasmon amplitudes of
/// mode `i` in the frame of its field; `rho_ge` is the emitter coherence in
/// the frame of `omega3` and `rho_ee` the excited-state population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub alpha_c: [Complex64; 3],
    pub alpha_a: [Complex64; 3],
    pub rho_ge: Complex64,
    pub rho_ee: f64,
    /// Max-norm of [`residual`] at this point, filled in by the solver.
    pub residual_norm: f64,
}

impl SteadyState {
    /// The dark state: every amplitude zero, emitter in the ground state.
    pub fn dark() -> Self {
        SteadyState {
            alpha_c: [Complex64::ZERO; 3],
            alpha_a: [Complex64::ZERO; 3],
            rho_ge: Complex64::ZERO,
            rho_ee: 0.0,
            residual_norm: 0.0,
        }
    }

    /// Population inversion `y = rho_ee - rho_gg = 2*rho_ee - 1`.
    pub fn y(&self) -> f64 {
        2.0 * self.rho_ee - 1.0
    }
}

#[derive(Debug, Error)]
pub enum SteadyStateError {
    #[error("Newton did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("iteration diverged (amplitude reached {magnitude:.3e}); no stable fixed point found")]
    Divergence { magnitude: f64 },
    #[error("singular Jacobian in Newton step")]
    SingularJacobian,
    #[error("continuation stalled at coupling fraction {fraction:.4} of the {stage} ramp")]
    ContinuationStalled { stage: &'static str, fraction: f64 },
    #[error("response denominator vanished (|denominator| = {magnitude:.3e}); parameters are singular")]
    SingularDenominator { magnitude: f64 },
    #[error("bare four-wave-mixing amplitude below underflow floor (|alpha_a3|^2 = {intensity:.3e}); enhancement factor undefined")]
    BareResponseUnderflow { intensity: f64 },
}

/// Rotating-frame right-hand sides with all time derivatives set to zero.
///
/// Returns the eight equation residuals in the order: three cavity modes,
/// three plasmon modes, emitter coherence, emitter population. The last
/// component is real by construction (zero imaginary part).
///
/// The coherence equation uses the relaxation form `+ i f alpha_a3 y`; this
/// sign is fixed by requiring consistency with the closed-form mode-3
/// response (see [`analytic_alpha_a3`]) and with the saturation bound
/// `0 <= rho_ee <= 1/2`.
pub fn residual(s: &SteadyState, p: &SystemParams) -> [Complex64; 8] {
    let d = detunings(p);
    let chi = p.chi_fwm;
    let f = p.f;
    let [ac1, ac2, ac3] = s.alpha_c;
    let [a1, a2, a3] = s.alpha_a;
    let y = s.y();

    let r1 = -Complex64::new(p.kappa[0], d.delta_c[0]) * ac1 - I * p.g[0].conj() * a1
        + p.eps_l[0];
    let r2 = -Complex64::new(p.kappa[1], d.delta_c[1]) * ac2 - I * p.g[1].conj() * a2
        + p.eps_l[1];
    let r3 = -Complex64::new(p.kappa[2], d.delta_c[2]) * ac3 - I * p.g[2].conj() * a3;

    let r4 = -Complex64::new(p.gamma[0], d.delta_a[0]) * a1
        - I * p.g[0] * ac1
        - 2.0 * I * chi * a1.conj() * a2 * a3;
    let r5 = -Complex64::new(p.gamma[1], d.delta_a[1]) * a2
        - I * p.g[1] * ac2
        - I * chi * a3.conj() * a1 * a1;
    let r6 = -Complex64::new(p.gamma[2], d.delta_a[2]) * a3
        - I * p.g[2] * ac3
        - I * f * s.rho_ge
        - I * chi * a2.conj() * a1 * a1;

    let r7 = -Complex64::new(p.gamma_eg, d.delta_qe) * s.rho_ge + I * f * a3 * y;
    let r8 = Complex64::new(-p.gamma_ee * s.rho_ee - 2.0 * f * (a3.conj() * s.rho_ge).im, 0.0);

    [r1, r2, r3, r4, r5, r6, r7, r8]
}

/// Max-norm of the residual over all real components.
pub fn residual_norm(s: &SteadyState, p: &SystemParams) -> f64 {
    residual(s, p)
        .iter()
        .map(|r| r.re.abs().max(r.im.abs()))
        .fold(0.0, f64::max)
}

/// Exact fixed point for `chi_fwm = 0` and `f = 0`.
///
/// The pumped mode pairs (cavity, plasmon) 1 and 2 decouple into 2x2 complex
/// linear systems solved in closed form; the unpumped mode 3 and the emitter
/// stay dark.
pub fn closed_form_linear(p: &SystemParams) -> SteadyState {
    let d = detunings(p);
    let mut out = SteadyState::dark();
    for i in 0..2 {
        let dc = Complex64::new(p.kappa[i], d.delta_c[i]);
        let da = Complex64::new(p.gamma[i], d.delta_a[i]);
        let ac = p.eps_l[i] / (dc + p.g[i].norm_sqr() / da);
        out.alpha_c[i] = ac;
        out.alpha_a[i] = -I * p.g[i] * ac / da;
    }
    out
}

// -------------------------------------------------------------------------
// Real-coordinate packing and the analytic Jacobian.
//
// Unknown vector: (Re, Im) of alpha_c1..3, alpha_a1..3, rho_ge, then rho_ee;
// residual vector: (Re, Im) of r1..r7, then the real r8.
// -------------------------------------------------------------------------

const NREAL: usize = 15;

fn pack(s: &SteadyState) -> DVector<f64> {
    let mut v = DVector::zeros(NREAL);
    for i in 0..3 {
        v[2 * i] = s.alpha_c[i].re;
        v[2 * i + 1] = s.alpha_c[i].im;
        v[6 + 2 * i] = s.alpha_a[i].re;
        v[6 + 2 * i + 1] = s.alpha_a[i].im;
    }
    v[12] = s.rho_ge.re;
    v[13] = s.rho_ge.im;
    v[14] = s.rho_ee;
    v
}

fn unpack(v: &DVector<f64>) -> SteadyState {
    SteadyState {
        alpha_c: [
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
        ],
        alpha_a: [
            Complex64::new(v[6], v[7]),
            Complex64::new(v[8], v[9]),
            Complex64::new(v[10], v[11]),
        ],
        rho_ge: Complex64::new(v[12], v[13]),
        rho_ee: v[14],
        residual_norm: 0.0,
    }
}

fn residual_real(s: &SteadyState, p: &SystemParams) -> DVector<f64> {
    let r = residual(s, p);
    let mut v = DVector::zeros(NREAL);
    for k in 0..7 {
        v[2 * k] = r[k].re;
        v[2 * k + 1] = r[k].im;
    }
    v[14] = r[7].re;
    v
}

/// Write the 2x2 real-quadrature block of a complex-linear map at block
/// position (row, col). `m` is the coefficient of the variable itself and
/// `n` the coefficient of its conjugate; the resulting real block acting on
/// (Re z, Im z) is [[Re(m+n), -Im(m-n)], [Im(m+n), Re(m-n)]].
pub(crate) fn add_mn_block(j: &mut DMatrix<f64>, row: usize, col: usize, m: Complex64, n: Complex64) {
    let s = m + n;
    let d = m - n;
    j[(2 * row, 2 * col)] += s.re;
    j[(2 * row, 2 * col + 1)] += -d.im;
    j[(2 * row + 1, 2 * col)] += s.im;
    j[(2 * row + 1, 2 * col + 1)] += d.re;
}

/// Analytic Jacobian of [`residual_real`] with respect to the packed
/// unknowns.
fn jacobian(s: &SteadyState, p: &SystemParams) -> DMatrix<f64> {
    let d = detunings(p);
    let chi = p.chi_fwm;
    let f = p.f;
    let [a1, a2, a3] = s.alpha_a;
    let y = s.y();

    // Complex variables 0..6: alpha_c1..3, alpha_a1..3, rho_ge.
    let mut m = [[Complex64::ZERO; 7]; 7];
    let mut n = [[Complex64::ZERO; 7]; 7];

    for i in 0..3 {
        m[i][i] = -Complex64::new(p.kappa[i], d.delta_c[i]);
        m[i][3 + i] = -I * p.g[i].conj();
        m[3 + i][i] = -I * p.g[i];
        m[3 + i][3 + i] = -Complex64::new(p.gamma[i], d.delta_a[i]);
    }
    // Four-wave-mixing terms.
    m[3][4] = -2.0 * I * chi * a1.conj() * a3;
    m[3][5] = -2.0 * I * chi * a1.conj() * a2;
    n[3][3] = -2.0 * I * chi * a2 * a3;
    m[4][3] = -2.0 * I * chi * a3.conj() * a1;
    n[4][5] = -I * chi * a1 * a1;
    m[5][3] = -2.0 * I * chi * a2.conj() * a1;
    n[5][4] = -I * chi * a1 * a1;
    // Emitter coupling.
    m[5][6] = -I * f;
    m[6][6] = -Complex64::new(p.gamma_eg, d.delta_qe);
    m[6][5] = I * f * y;

    let mut j = DMatrix::zeros(NREAL, NREAL);
    for row in 0..7 {
        for col in 0..7 {
            if m[row][col] != Complex64::ZERO || n[row][col] != Complex64::ZERO {
                add_mn_block(&mut j, row, col, m[row][col], n[row][col]);
            }
        }
    }
    // d r7 / d rho_ee = 2 i f alpha_a3.
    let p7 = 2.0 * I * f * a3;
    j[(12, 14)] = p7.re;
    j[(13, 14)] = p7.im;
    // Population equation row, expanded in real coordinates:
    // r8 = -gamma_ee rho_ee - 2 f Im(conj(alpha_a3) rho_ge).
    let (x3, y3) = (a3.re, a3.im);
    let (u, v) = (s.rho_ge.re, s.rho_ge.im);
    j[(14, 10)] = -2.0 * f * v;
    j[(14, 11)] = 2.0 * f * u;
    j[(14, 12)] = 2.0 * f * y3;
    j[(14, 13)] = -2.0 * f * x3;
    j[(14, 14)] = -p.gamma_ee;
    j
}

/// Solver diagnostics accompanying a converged steady state.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub state: SteadyState,
    /// Total Newton iterations summed over all continuation stages.
    pub newton_iterations: usize,
    /// Continuation stages actually solved (1 when the direct solve works).
    pub continuation_steps: usize,
}

fn newton(
    p: &SystemParams,
    start: &SteadyState,
    tol: f64,
    max_iter: usize,
) -> Result<(SteadyState, usize), SteadyStateError> {
    let mut x = pack(start);
    let mut norm = residual_real(&unpack(&x), p).amax();
    for it in 0..max_iter {
        if !norm.is_finite() || x.amax() > DIVERGENCE_LIMIT {
            return Err(SteadyStateError::Divergence { magnitude: x.amax() });
        }
        if norm <= tol {
            let mut s = unpack(&x);
            s.residual_norm = norm;
            return Ok((s, it));
        }
        let s = unpack(&x);
        let j = jacobian(&s, p);
        let lu = j.lu();
        let rhs = -residual_real(&s, p);
        let delta = lu.solve(&rhs).ok_or(SteadyStateError::SingularJacobian)?;

        // Backtracking line search: accept the first step fraction that
        // strictly reduces the residual max-norm.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let xn = &x + lambda * &delta;
            let rn = residual_real(&unpack(&xn), p).amax();
            if rn.is_finite() && rn < norm {
                x = xn;
                norm = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SteadyStateError::NonConvergence { iterations: it, residual: norm });
        }
    }
    if norm <= tol {
        let mut s = unpack(&x);
        s.residual_norm = norm;
        return Ok((s, max_iter));
    }
    Err(SteadyStateError::NonConvergence { iterations: max_iter, residual: norm })
}

/// Solve for the steady state connected to the linear (weak-coupling)
/// solution, with full diagnostics.
///
/// Strategy: Newton directly from the supplied guess (or from the
/// closed-form linear solution); on failure, homotopy continuation ramping
/// the four-wave-mixing strength and then the emitter coupling from zero,
/// with adaptive step bisection.
pub fn solve_steady_state_report(
    p: &SystemParams,
    guess: Option<&SteadyState>,
) -> Result<SolveReport, SteadyStateError> {
    let start = match guess {
        Some(g) => *g,
        None => closed_form_linear(p),
    };
    if let Ok((state, iters)) = newton(p, &start, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        return Ok(SolveReport { state, newton_iterations: iters, continuation_steps: 1 });
    }
    // Fall back to continuation from the linear solution.
    let mut current = closed_form_linear(p);
    let mut total_iters = 0usize;
    let mut stages = 0usize;
    for (stage, target) in [("four-wave-mixing", p.chi_fwm), ("emitter-coupling", p.f)] {
        if target == 0.0 {
            continue;
        }
        let mut t = 0.0f64;
        let mut dt = 1.0f64;
        while t < 1.0 {
            let t_next = (t + dt).min(1.0);
            let mut q = p.clone();
            match stage {
                "four-wave-mixing" => {
                    q.chi_fwm = t_next * p.chi_fwm;
                    q.f = 0.0;
                }
                _ => {
                    q.f = t_next * p.f;
                }
            }
            match newton(&q, &current, DEFAULT_TOL, DEFAULT_MAX_ITER) {
                Ok((state, iters)) => {
                    current = state;
                    total_iters += iters;
                    stages += 1;
                    t = t_next;
                    dt = (dt * 2.0).min(1.0 - t).max(f64::MIN_POSITIVE);
                    if t >= 1.0 {
                        break;
                    }
                }
                Err(_) => {
                    dt *= 0.5;
                    if dt < 1.0 / 1024.0 {
                        return Err(SteadyStateError::ContinuationStalled { stage, fraction: t });
                    }
                }
            }
        }
    }
    // Polish at the exact target parameters.
    let (state, iters) = newton(p, &current, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(SolveReport {
        state,
        newton_iterations: total_iters + iters,
        continuation_steps: stages.max(1),
    })
}

/// Solve for the steady state connected to the linear solution.
pub fn solve_steady_state(
    p: &SystemParams,
    guess: Option<&SteadyState>,
) -> Result<SteadyState, SteadyStateError> {
    solve_steady_state_report(p, guess).map(|r| r.state)
}

/// Re-solve from a deterministically perturbed guess and report whether a
/// distinct fixed point was found.
///
/// The model assumes a unique steady state on the branch connected to the
/// linear solution; this probe offers a cheap consistency check. A failed
/// perturbed solve counts as "no second branch found".
pub fn probe_multistability(p: &SystemParams, reference: &SteadyState) -> bool {
    let mut guess = *reference;
    for i in 0..3 {
        guess.alpha_c[i] = guess.alpha_c[i] * 1.7 + Complex64::new(0.1, -0.05);
        guess.alpha_a[i] = guess.alpha_a[i] * 1.7 + Complex64::new(-0.08, 0.06);
    }
    guess.rho_ge = guess.rho_ge * 1.3 + Complex64::new(0.02, 0.02);
    guess.rho_ee = (guess.rho_ee * 1.5 + 0.05).min(0.49);
    let Ok(alt) = solve_steady_state(p, Some(&guess)) else {
        return false;
    };
    let scale = reference
        .alpha_a
        .iter()
        .chain(reference.alpha_c.iter())
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    let mut dist = (alt.rho_ee - reference.rho_ee).abs();
    dist = dist.max((alt.rho_ge - reference.rho_ge).norm());
    for i in 0..3 {
        dist = dist.max((alt.alpha_c[i] - reference.alpha_c[i]).norm());
        dist = dist.max((alt.alpha_a[i] - reference.alpha_a[i]).norm());
    }
    dist / scale > 1e-6
}

/// Closed-form mode-3 plasmon amplitude with the cavity feedback neglected.
///
/// Implements the interference formula
/// `alpha_a3 = i chi conj(alpha_a2) alpha_a1^2 / (f^2 y / (i delta_qe + gamma_eg) - (i Delta_a3 + gamma3))`
/// exactly as written; the full numeric solution additionally carries the
/// `g3 alpha_c3` feedback, so the two agree only for small `g3`.
pub fn analytic_alpha_a3(
    p: &SystemParams,
    alpha_a1: Complex64,
    alpha_a2: Complex64,
    y: f64,
) -> Result<Complex64, SteadyStateError> {
    let d = detunings(p);
    let emitter = Complex64::new(p.gamma_eg, d.delta_qe);
    let denom = (p.f * p.f * y) / emitter - Complex64::new(p.gamma[2], d.delta_a[2]);
    let floor = 1e-300;
    if denom.norm() < floor {
        return Err(SteadyStateError::SingularDenominator { magnitude: denom.norm() });
    }
    Ok(I * p.chi_fwm * alpha_a2.conj() * alpha_a1 * alpha_a1 / denom)
}

/// Ratio of mode-3 plasmon intensity with the emitter coupled versus
/// decoupled, both from full numeric steady states.
pub fn enhancement_factor(p: &SystemParams) -> Result<f64, SteadyStateError> {
    let coupled = solve_steady_state(p, None)?;
    let mut bare_params = p.clone();
    bare_params.f = 0.0;
    let bare = solve_steady_state(&bare_params, None)?;
    let reference = bare.alpha_a[2].norm_sqr();
    if reference < EF_UNDERFLOW_FLOOR {
        return Err(SteadyStateError::BareResponseUnderflow { intensity: reference });
    }
    Ok(coupled.alpha_a[2].norm_sqr() / reference)
}
