//! Nonrelativistic-limit perturbation machinery.
//!
//! The rescaled eigenproblem at a small-ε wave reads
//! A_Λ η = (λ/ε² − Λ)K₁η + λK₂η + Wη with K₁ = diag[1,0,1,0],
//! K₂ = diag[0,1,0,1] and W a zero-order operator of size O(ε²).
//! A_Λ is the 4-block limit operator built from the NLS ground state V̂; its
//! kernel vector Φ_Λ = (Φ₁, −∂_RΦ₁/2m, Φ₃, −∂_RΦ₃/2m) encodes the NLS
//! eigenpair (l₊Φ₁ = −ΛΦ₃, l₋Φ₃ = ΛΦ₁). A Rayleigh–Schrödinger fixed point
//! (μ, ζ) ↦ (M, Z) then corrects λ = ε²(Λ + μ) for ε > 0, which is the
//! quantitative form of the instability-eigenvalue bifurcation.

use std::sync::Arc;

use ndarray::Array2;

use crate::eig::{dense_eigenvalues, smallest_singular_pair, RealLu, DEFAULT_EIG_CAP};
use crate::error::{NldError, Result};
use crate::grid::{Parity, RadialGrid};
use crate::nls::{assemble_nls_linearization, NlsGroundState};
use crate::ops::{block_matrix, d_dr, d_dr_plus_drift, interp, row_scaled, DenseOperator};
use crate::waves::SolitaryWave;

/// Smallest singular value below which A_Λ is considered to have a kernel.
pub const KERNEL_SIGMA_THRESHOLD: f64 = 1e-6;
/// Fixed-point stopping tolerance in the ‖·‖_Γ metric.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Fixed-point iteration budget.
pub const FIXED_POINT_MAX_ITERS: usize = 200;

/// Concatenated quadrature weights for a 4-block bundle
/// (even, odd, even, odd).
fn bundle_weights(grid: &RadialGrid) -> Vec<f64> {
    let mut w = Vec::with_capacity(4 * grid.npts);
    for parity in [Parity::Even, Parity::Odd, Parity::Even, Parity::Odd] {
        w.extend_from_slice(grid.weights(parity));
    }
    w
}

/// Weighted inner product of two 4-block bundles.
fn dot_w(weights: &[f64], x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(weights)
        .map(|((a, b), w)| a * b * w)
        .sum()
}

fn norm_w(weights: &[f64], x: &[f64]) -> f64 {
    dot_w(weights, x, x).max(0.0).sqrt()
}

/// Apply the block swap F = [[0, I₂],[I₂, 0]]: (x₁,x₂,x₃,x₄) ↦ (x₃,x₄,x₁,x₂).
fn block_swap(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 4;
    let mut out = Vec::with_capacity(x.len());
    out.extend_from_slice(&x[2 * n..]);
    out.extend_from_slice(&x[..2 * n]);
    out
}

/// Zero every component except blocks 1 and 3 (the K₁ = diag[1,0,1,0] mask).
fn apply_k1(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 4;
    let mut out = vec![0.0; x.len()];
    out[..n].copy_from_slice(&x[..n]);
    out[2 * n..3 * n].copy_from_slice(&x[2 * n..3 * n]);
    out
}

/// Zero every component except blocks 2 and 4 (the K₂ = diag[0,1,0,1] mask).
fn apply_k2(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 4;
    let mut out = vec![0.0; x.len()];
    out[n..2 * n].copy_from_slice(&x[n..2 * n]);
    out[3 * n..].copy_from_slice(&x[3 * n..]);
    out
}

/// The limit operator A_Λ (4N×4N) on bundles (φ₁, Φ₂, θ₁, Θ₂) with parities
/// (even, odd, even, odd):
///
///   row 1: −Λφ₁ + (1/2m − V̂^{2k})θ₁ + (∂_R + (n−1)/R)Θ₂
///   row 2: −∂_R θ₁ − 2mΘ₂
///   row 3: (−1/2m + (2k+1)V̂^{2k})φ₁ − (∂_R + (n−1)/R)Φ₂ − Λθ₁
///   row 4: ∂_R φ₁ + 2mΦ₂
///
/// Eliminating Φ₂, Θ₂ through rows 2 and 4 reproduces the NLS one-field
/// operators exactly at the matrix level, because the discrete Laplacian is
/// the literal product of the two first-order factors.
pub fn assemble_a_lambda(state: &NlsGroundState, lambda: f64) -> DenseOperator {
    let grid = &state.grid;
    let n = grid.npts;
    let m = state.mass;
    let two_m = 2.0 * m;
    let d_ou = d_dr_plus_drift(grid, Parity::Odd);
    let d_eo = d_dr(grid, Parity::Even);

    let v2k: Vec<f64> = state
        .v_hat
        .values
        .iter()
        .map(|v| v.powi(2 * state.k as i32))
        .collect();

    let mut c_minus = Array2::<f64>::zeros((n, n));
    let mut c_plus = Array2::<f64>::zeros((n, n));
    let mut neg_lambda_eye = Array2::<f64>::zeros((n, n));
    let mut two_m_eye = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        c_minus[[i, i]] = 1.0 / two_m - v2k[i];
        c_plus[[i, i]] = -1.0 / two_m + (2.0 * state.k as f64 + 1.0) * v2k[i];
        neg_lambda_eye[[i, i]] = -lambda;
        two_m_eye[[i, i]] = two_m;
    }
    let neg_d_eo = -&d_eo.mat;
    let neg_d_ou = -&d_ou.mat;
    let neg_two_m = -&two_m_eye;

    let mat = block_matrix(&[
        vec![Some(&neg_lambda_eye), None, Some(&c_minus), Some(&d_ou.mat)],
        vec![None, None, Some(&neg_d_eo), Some(&neg_two_m)],
        vec![Some(&c_plus), Some(&neg_d_ou), Some(&neg_lambda_eye), None],
        vec![Some(&d_eo.mat), Some(&two_m_eye), None, None],
    ]);
    DenseOperator::new(mat, "A_Lambda").unwrap()
}

/// Kernel vector of a near-singular A_Λ: the right singular vector of the
/// smallest singular value, normalized to unit weighted norm and
/// sign-canonicalized so the pairing 2⟨Φ₃, Φ₁⟩ is positive. Errors when no
/// kernel is present, or when a second singular value sits in the same
/// cluster (kernel dimension ≠ 1).
pub fn kernel_vector(a: &DenseOperator, grid: &Arc<RadialGrid>) -> Result<Vec<f64>> {
    let n = grid.npts;
    if a.size() != 4 * n {
        return Err(NldError::InvalidInput(format!(
            "operator size {} does not match a 4-block bundle on {} nodes",
            a.size(),
            n
        )));
    }
    let (sigma1, mut phi) = smallest_singular_pair(&a.mat, 60)?;
    if sigma1 > KERNEL_SIGMA_THRESHOLD {
        return Err(NldError::NotFound(format!(
            "no kernel: smallest singular value {sigma1:.3e} above threshold"
        )));
    }
    let sigma2 = second_singular_value(&a.mat, &phi)?;
    if sigma2 < 100.0 * sigma1.max(1e-12) {
        return Err(NldError::InvalidInput(format!(
            "near-kernel cluster: σ₁ = {sigma1:.3e}, σ₂ = {sigma2:.3e} — kernel dimension ≠ 1"
        )));
    }

    let weights = bundle_weights(grid);
    let nw = norm_w(&weights, &phi);
    if nw == 0.0 {
        return Err(NldError::NonFinite("degenerate kernel vector".into()));
    }
    for x in phi.iter_mut() {
        *x /= nw;
    }
    // Canonical sign: pairing 2⟨Φ₃, Φ₁⟩ > 0.
    let we = grid.weights(Parity::Even);
    let pairing: f64 = (0..n)
        .map(|i| 2.0 * phi[2 * n + i] * phi[i] * we[i])
        .sum();
    if pairing < 0.0 {
        for x in phi.iter_mut() {
            *x = -*x;
        }
    }
    Ok(phi)
}

/// Smallest singular value of `a` restricted orthogonally to `excluded`
/// (deflated inverse iteration on AᵀA).
fn second_singular_value(a: &Array2<f64>, excluded: &[f64]) -> Result<f64> {
    let n = a.nrows();
    let lu = RealLu::new(a.clone())?;
    let nrm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit_excl: Vec<f64> = {
        let s = nrm(excluded);
        excluded.iter().map(|x| x / s).collect()
    };
    let deflate = |v: &mut Vec<f64>| {
        let c: f64 = v.iter().zip(&unit_excl).map(|(a, b)| a * b).sum();
        for (x, e) in v.iter_mut().zip(&unit_excl) {
            *x -= c * e;
        }
    };
    let mut x: Vec<f64> = (0..n)
        .map(|i| (0.7 * i as f64).sin() + 0.3 * (0.31 * i as f64).cos())
        .collect();
    deflate(&mut x);
    let s = nrm(&x);
    for xi in x.iter_mut() {
        *xi /= s;
    }
    let mut gain = 1.0;
    for _ in 0..12 {
        let w = lu.solve_t(&x)?;
        let mut y = lu.solve(&w)?;
        deflate(&mut y);
        gain = nrm(&y);
        if gain == 0.0 {
            return Err(NldError::NonFinite("deflated inverse iteration collapsed".into()));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / gain;
        }
    }
    // gain ≈ 1/σ² on the deflated subspace.
    Ok((1.0 / gain).sqrt())
}

/// Kernel data of the limit operator at one NLS eigenvalue Λ.
#[derive(Debug, Clone)]
pub struct LimitKernelData {
    /// The NLS eigenvalue Λ this kernel belongs to.
    pub lambda_nls: f64,
    /// The limit operator (4N×4N).
    pub a_lambda: DenseOperator,
    /// Kernel bundle Φ = (Φ₁, Φ₂, Φ₃, Φ₄), unit weighted norm,
    /// sign-canonicalized.
    pub phi: Vec<f64>,
    /// Adjoint kernel Φ* = FΦ = (Φ₃, Φ₄, Φ₁, Φ₂).
    pub phi_star: Vec<f64>,
    /// Non-degeneracy pairing ⟨Φ*, K₁Φ⟩ = 2⟨Φ₃, Φ₁⟩ (weighted).
    pub pairing: f64,
    /// Grid the bundles live on (the rescaled grid of the ground state).
    pub grid: Arc<RadialGrid>,
    /// Mass parameter, carried for the reduction identities.
    pub mass: f64,
}

/// Grid-consistent NLS eigenvalue: the largest real eigenvalue of the
/// discrete 2N operator JL assembled on the state's own grid. Using this
/// value (rather than a continuum tabulation) makes the kernel of A_Λ exact
/// to rounding, because the Schur reduction of A_Λ reproduces the same
/// discrete operator.
pub fn grid_consistent_lambda(state: &NlsGroundState) -> Result<f64> {
    let lin = assemble_nls_linearization(state);
    let best = dense_eigenvalues(&lin.jl, DEFAULT_EIG_CAP)?
        .iter()
        .filter(|z| z.im.abs() < 1e-8 * (1.0 + z.re.abs()))
        .fold(0.0_f64, |a, z| a.max(z.re));
    if best <= 0.0 {
        return Err(NldError::NotFound(
            "no positive real eigenvalue of the discrete NLS linearization".into(),
        ));
    }
    Ok(best)
}

/// Assemble A_Λ, extract its kernel, and package the pairing data.
pub fn limit_kernel_data(state: &NlsGroundState, lambda: f64) -> Result<LimitKernelData> {
    let a_lambda = assemble_a_lambda(state, lambda);
    let phi = kernel_vector(&a_lambda, &state.grid)?;
    let phi_star = block_swap(&phi);
    let weights = bundle_weights(&state.grid);
    let pairing = dot_w(&weights, &phi_star, &apply_k1(&phi));
    if pairing <= 0.0 {
        return Err(NldError::InvalidInput(format!(
            "non-degeneracy pairing {pairing:.3e} is not positive"
        )));
    }
    Ok(LimitKernelData {
        lambda_nls: lambda,
        a_lambda,
        phi,
        phi_star,
        pairing,
        grid: state.grid.clone(),
        mass: state.mass,
    })
}

/// The zero-order remainder W of the rescaled eigenproblem, assembled as the
/// exact difference between the limit operator (plus ΛK₁) and the rescaled
/// wave operator; all derivative entries cancel, leaving multiplication
/// blocks whose coefficients vanish like ε². Returns the operator and the
/// sup over nodes of all coefficient magnitudes.
pub fn assemble_w(w: &SolitaryWave, state: &NlsGroundState) -> Result<(DenseOperator, f64)> {
    let grid = &state.grid;
    let n = grid.npts;
    if w.grid.npts != n
        || (w.epsilon * w.grid.r_max - grid.r_max).abs() > 1e-9 * grid.r_max
        || w.n_dim != grid.n_dim
    {
        return Err(NldError::InvalidInput(
            "wave grid is not the physical image of the limit-state grid".into(),
        ));
    }
    let (m, om, eps) = (w.mass, w.omega, w.epsilon);
    let eps_sq = eps * eps;
    let ki = w.k as i32;
    let kk = w.k as f64;

    // Physical-wave nonlinearity profiles; node i of the physical grid is
    // node i of the rescaled grid.
    let i_oe = interp(&w.grid, Parity::Odd);
    let i_eo = interp(&w.grid, Parity::Even);
    let u_e = i_oe.apply(&w.u.values);
    let v_o = i_eo.apply(&w.v.values);

    let v2k: Vec<f64> = state
        .v_hat
        .values
        .iter()
        .map(|v| v.powi(2 * state.k as i32))
        .collect();

    let mut w13 = vec![0.0; n];
    let mut w31 = vec![0.0; n];
    let mut s32 = vec![0.0; n];
    for i in 0..n {
        let v = w.v.values[i];
        let s = v * v - u_e[i] * u_e[i];
        let f = s.powi(ki);
        let fp = kk * s.powi(ki - 1);
        w13[i] = (1.0 / (2.0 * m) - v2k[i]) - (m - om - f) / eps_sq;
        w31[i] = (-1.0 / (2.0 * m) + (2.0 * kk + 1.0) * v2k[i])
            - (om - m + f + 2.0 * fp * v * v) / eps_sq;
        s32[i] = 2.0 * fp * v * u_e[i] / eps;
    }
    let mut s41 = vec![0.0; n];
    let mut w42 = vec![0.0; n];
    let mut w24 = vec![0.0; n];
    for j in 0..n {
        let u = w.u.values[j];
        let s = v_o[j] * v_o[j] - u * u;
        let f = s.powi(ki);
        let fp = kk * s.powi(ki - 1);
        s41[j] = 2.0 * fp * v_o[j] * u / eps;
        w42[j] = (m - om) + f - 2.0 * fp * u * u;
        w24[j] = (om - m) - f;
    }

    let diag = |vals: &[f64]| Array2::from_diag(&ndarray::Array1::from(vals.to_vec()));
    let d13 = diag(&w13);
    let d31 = diag(&w31);
    let d42 = diag(&w42);
    let d24 = diag(&w24);
    let b32 = row_scaled(&i_oe.mat, &s32);
    let b41 = row_scaled(&i_eo.mat, &s41);

    let mat = block_matrix(&[
        vec![None, None, Some(&d13), None],
        vec![None, None, None, Some(&d24)],
        vec![Some(&d31), Some(&b32), None, None],
        vec![Some(&b41), Some(&d42), None, None],
    ]);

    let sup = w13
        .iter()
        .chain(&w31)
        .chain(&s32)
        .chain(&s41)
        .chain(&w42)
        .chain(&w24)
        .fold(0.0_f64, |a, &x| a.max(x.abs()));
    Ok((DenseOperator::new(mat, "W remainder")?, sup))
}

/// One iteration record of the fixed point, exportable for convergence plots.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointTraceRow {
    pub iteration: usize,
    pub mu: f64,
    pub zeta_norm: f64,
    pub step: f64,
}

/// Converged Rayleigh–Schrödinger correction.
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    /// Fixed-point value of μ, so λ = ε²(Λ + μ₀).
    pub mu0: f64,
    /// Fixed-point bundle ζ₀ (orthogonal to Φ).
    pub zeta0: Vec<f64>,
    pub iterations: usize,
    /// Largest observed step-contraction ratio (must be < 1).
    pub contraction_factor: f64,
    /// The weight Γ of the ‖(μ,ζ)‖_Γ = Γ|μ| + ‖ζ‖ metric.
    pub gamma_metric: f64,
    /// ε²(Λ + μ₀), the predicted instability eigenvalue.
    pub predicted_lambda: f64,
    /// Per-iteration convergence trace.
    pub trace: Vec<FixedPointTraceRow>,
}

/// Solve the bordered system [[A, Φ*], [⟨Φ,·⟩_w, 0]] to apply the
/// pseudo-inverse of A restricted to range(1−P) → Φ^⊥.
struct BorderedInverse {
    lu: RealLu,
    size: usize,
}

impl BorderedInverse {
    fn new(kd: &LimitKernelData, weights: &[f64]) -> Result<Self> {
        let size = kd.a_lambda.size();
        let mut b = Array2::<f64>::zeros((size + 1, size + 1));
        b.slice_mut(ndarray::s![..size, ..size])
            .assign(&kd.a_lambda.mat);
        for i in 0..size {
            b[[i, size]] = kd.phi_star[i];
            b[[size, i]] = kd.phi[i] * weights[i];
        }
        Ok(BorderedInverse { lu: RealLu::new(b)?, size })
    }

    fn apply(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut full = rhs.to_vec();
        full.push(0.0);
        let mut sol = self.lu.solve(&full)?;
        sol.truncate(self.size);
        Ok(sol)
    }
}

/// Rayleigh–Schrödinger fixed point: iterate (μ, ζ) ↦ (M(μ,ζ), Z(μ,ζ))
/// from (0, 0), with λ = ε²(Λ + μ) kept self-consistent. Stops when the
/// ‖·‖_Γ step drops below 1e−12; errors on non-contraction (step ratio ≥ 1
/// five times in a row) or when the iterate leaves the ball ‖(μ,ζ)‖_Γ ≤ ε.
pub fn fixed_point_mz(
    kd: &LimitKernelData,
    w_op: &DenseOperator,
    epsilon: f64,
) -> Result<FixedPointResult> {
    if kd.pairing == 0.0 {
        return Err(NldError::InvalidInput("degenerate pairing".into()));
    }
    if !(epsilon >= 0.0) || epsilon >= 1.0 {
        return Err(NldError::InvalidInput(format!(
            "ε = {epsilon} outside [0, 1)"
        )));
    }
    let weights = bundle_weights(&kd.grid);
    let project_out = |g: &mut Vec<f64>| {
        let c = dot_w(&weights, &kd.phi_star, g) / dot_w(&weights, &kd.phi_star, &kd.phi_star);
        for (x, p) in g.iter_mut().zip(&kd.phi_star) {
            *x -= c * p;
        }
    };
    let bordered = BorderedInverse::new(kd, &weights)?;

    // Γ per the a-priori bound, with a factor-2 safety margin on top of the
    // defining inequality Γ ≥ 2‖A⁻¹(1−P)K₁Φ‖.
    let mut k1_phi = apply_k1(&kd.phi);
    project_out(&mut k1_phi);
    let gamma_metric = (4.0 * norm_w(&weights, &bordered.apply(&k1_phi)?)).max(1.0);

    let lambda = kd.lambda_nls;
    let eps_sq = epsilon * epsilon;
    let n4 = kd.phi.len();

    let mut mu = 0.0_f64;
    let mut zeta = vec![0.0_f64; n4];
    let mut trace = Vec::new();
    let mut prev_step = f64::INFINITY;
    let mut contraction_factor = 0.0_f64;
    let mut non_contracting_streak = 0usize;
    let mut iterations = 0usize;

    for iter in 1..=FIXED_POINT_MAX_ITERS {
        iterations = iter;
        let total: Vec<f64> = kd.phi.iter().zip(&zeta).map(|(p, z)| p + z).collect();
        let k1_total = apply_k1(&total);
        let k2_total = apply_k2(&total);
        let w_total = w_op.apply(&total);

        // M step.
        let k1_zeta = apply_k1(&zeta);
        let mu_next = -(mu * dot_w(&weights, &kd.phi_star, &k1_zeta)
            + eps_sq * (lambda + mu) * dot_w(&weights, &kd.phi_star, &k2_total)
            + dot_w(&weights, &kd.phi_star, &w_total))
            / kd.pairing;

        // Z step.
        let mut rhs: Vec<f64> = (0..n4)
            .map(|i| mu * k1_total[i] + eps_sq * (lambda + mu) * k2_total[i] + w_total[i])
            .collect();
        project_out(&mut rhs);
        let zeta_next = bordered.apply(&rhs)?;

        let dz: Vec<f64> = zeta_next.iter().zip(&zeta).map(|(a, b)| a - b).collect();
        let step = gamma_metric * (mu_next - mu).abs() + norm_w(&weights, &dz);
        let zeta_norm = norm_w(&weights, &zeta_next);
        trace.push(FixedPointTraceRow { iteration: iter, mu: mu_next, zeta_norm, step });

        mu = mu_next;
        zeta = zeta_next;

        let ball_norm = gamma_metric * mu.abs() + zeta_norm;
        if ball_norm > epsilon && epsilon > 0.0 {
            return Err(NldError::BallExit { radius: epsilon, norm: ball_norm });
        }

        if prev_step.is_finite() && prev_step > 0.0 {
            let ratio = step / prev_step;
            // Record ratios only while steps are safely above the rounding
            // floor of the linear solves.
            if prev_step > 1e-9 && step > 1e-11 {
                contraction_factor = contraction_factor.max(ratio);
            }
            if ratio >= 1.0 && step > FIXED_POINT_TOL {
                non_contracting_streak += 1;
                if non_contracting_streak >= 5 {
                    return Err(NldError::NoContraction(format!(
                        "step ratio ≥ 1 for 5 consecutive iterations (last step {step:.3e})"
                    )));
                }
            } else {
                non_contracting_streak = 0;
            }
        }
        prev_step = step;
        if step < FIXED_POINT_TOL {
            break;
        }
    }
    if prev_step >= FIXED_POINT_TOL {
        return Err(NldError::NewtonFailed {
            iters: iterations,
            residual: prev_step,
            context: "fixed point did not reach tolerance".into(),
        });
    }

    Ok(FixedPointResult {
        mu0: mu,
        zeta0: zeta,
        iterations,
        contraction_factor,
        gamma_metric,
        predicted_lambda: eps_sq * (lambda + mu),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridScheme};
    use crate::lin::{assemble_linearization, point_spectrum};
    use crate::nls::{assemble_nls_linearization, solve_ground_state};
    use crate::ops::diag_operator;
    use crate::waves::solve_continuation;

    fn uniform_grid(n_dim: usize, npts: usize, r_max: f64) -> Arc<RadialGrid> {
        build_grid(n_dim, npts, r_max, GridScheme::UniformCentered).unwrap()
    }

    fn grid_lambda(state: &NlsGroundState) -> f64 {
        grid_consistent_lambda(state).unwrap()
    }

    #[test]
    fn a_lambda_is_jl0_minus_lambda_k1() {
        let grid = uniform_grid(1, 120, 18.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let lambda = 1.3_f64;
        let a = assemble_a_lambda(&state, lambda);

        // Independent route: JL₀ from the two self-adjoint 2-blocks, minus
        // ΛK₁ on the diagonal.
        let n = grid.npts;
        let d_ou = d_dr_plus_drift(&grid, Parity::Odd);
        let d_eo = d_dr(&grid, Parity::Even);
        let v2k: Vec<f64> = state.v_hat.values.iter().map(|v| v.powi(6)).collect();
        let cm: Vec<f64> = v2k.iter().map(|s| 0.5 - s).collect();
        let cp: Vec<f64> = v2k.iter().map(|s| -(0.5 - 7.0 * s)).collect();
        let cm = diag_operator(&cm, "").mat;
        let cp = diag_operator(&cp, "").mat;
        let neg_deo = -&d_eo.mat;
        let neg_dou = -&d_ou.mat;
        let minus_2m = Array2::from_diag(&ndarray::Array1::from(vec![-2.0; n]));
        let plus_2m = Array2::from_diag(&ndarray::Array1::from(vec![2.0; n]));
        // JL₀ = [[0, L₀₋],[−L₀₊, 0]] in 2×2 superblocks.
        let mut expected = block_matrix(&[
            vec![None, None, Some(&cm), Some(&d_ou.mat)],
            vec![None, None, Some(&neg_deo), Some(&minus_2m)],
            vec![Some(&cp), Some(&neg_dou), None, None],
            vec![Some(&d_eo.mat), Some(&plus_2m), None, None],
        ]);
        for i in 0..n {
            expected[[i, i]] -= lambda;
            expected[[2 * n + i, 2 * n + i]] -= lambda;
        }
        let diff = (&a.mat - &expected)
            .iter()
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        assert!(diff < 1e-14, "decomposition defect {diff:.3e}");
    }

    #[test]
    fn free_operator_has_no_kernel() {
        let grid = uniform_grid(1, 150, 20.0);
        let mut state = solve_ground_state(1, 1, 1.0, &grid).unwrap();
        for x in state.v_hat.values.iter_mut() {
            *x = 0.0;
        }
        let a = assemble_a_lambda(&state, 0.0);
        let (sigma, _) = smallest_singular_pair(&a.mat, 60).unwrap();
        assert!(sigma > 1e-3, "free operator near-singular: σ = {sigma:.3e}");
        assert!(kernel_vector(&a, &grid).is_err());
    }

    #[test]
    fn kernel_appears_exactly_at_the_nls_eigenvalue() {
        let grid = uniform_grid(1, 300, 25.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let lambda = grid_lambda(&state);
        assert!(lambda > 1.0, "unexpected discrete eigenvalue {lambda}");

        // At the grid-consistent Λ the Schur reduction is exact, so the
        // kernel defect is at rounding level.
        let a = assemble_a_lambda(&state, lambda);
        let (sigma, _) = smallest_singular_pair(&a.mat, 60).unwrap();
        assert!(sigma < 1e-8, "kernel defect σ = {sigma:.3e}");

        // Away from the eigenvalue the operator is boundedly invertible.
        let a_off = assemble_a_lambda(&state, 1.3 * lambda);
        let (sigma_off, _) = smallest_singular_pair(&a_off.mat, 60).unwrap();
        assert!(sigma_off > 1e-4, "σ at 1.3Λ = {sigma_off:.3e}");
    }

    #[test]
    fn frozen_constant_marks_near_singularity() {
        // At the tabulated eigenvalue 1.4525 the operator is nearly singular
        // (up to the tabulation precision and grid error); a 30% detuning
        // restores a solid inverse.
        let grid = uniform_grid(1, 400, 25.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let a_near = assemble_a_lambda(&state, 1.4525);
        let (sigma_near, _) = smallest_singular_pair(&a_near.mat, 60).unwrap();
        let a_far = assemble_a_lambda(&state, 1.3 * 1.4525);
        let (sigma_far, _) = smallest_singular_pair(&a_far.mat, 60).unwrap();
        assert!(sigma_near < 5e-3, "σ near the eigenvalue: {sigma_near:.3e}");
        assert!(
            sigma_near < 1e-2 * sigma_far,
            "no singularity contrast: near {sigma_near:.3e}, far {sigma_far:.3e}"
        );
    }

    #[test]
    fn kernel_bundle_satisfies_reduction_identities() {
        let grid = uniform_grid(1, 300, 25.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let lambda = grid_lambda(&state);
        let kd = limit_kernel_data(&state, lambda).unwrap();
        let n = grid.npts;

        // Unit weighted norm and positive pairing.
        let weights = bundle_weights(&grid);
        assert!((norm_w(&weights, &kd.phi) - 1.0).abs() < 1e-12);
        assert!(kd.pairing > 0.0);

        // Φ* is the block swap of Φ.
        assert_eq!(kd.phi_star[..n], kd.phi[2 * n..3 * n]);
        assert_eq!(kd.phi_star[2 * n..3 * n], kd.phi[..n]);

        // Φ₂ = −∂_RΦ₁/(2m), Φ₄ = −∂_RΦ₃/(2m): exact rows of A_Λ, so these
        // hold at the kernel-defect level.
        let d_eo = d_dr(&grid, Parity::Even);
        let d1 = d_eo.apply(&kd.phi[..n]);
        let d3 = d_eo.apply(&kd.phi[2 * n..3 * n]);
        let mut worst = 0.0_f64;
        for j in 0..n {
            worst = worst.max((kd.phi[n + j] + d1[j] / 2.0).abs());
            worst = worst.max((kd.phi[3 * n + j] + d3[j] / 2.0).abs());
        }
        assert!(worst < 1e-9, "component reduction defect {worst:.3e}");

        // l₊Φ₁ = −ΛΦ₃ and l₋Φ₃ = ΛΦ₁.
        let nls_lin = assemble_nls_linearization(&state);
        let lp1 = nls_lin.l_plus.apply(&kd.phi[..n]);
        let lm3 = nls_lin.l_minus.apply(&kd.phi[2 * n..3 * n]);
        let mut worst = 0.0_f64;
        for i in 0..n {
            worst = worst.max((lp1[i] + lambda * kd.phi[2 * n + i]).abs());
            worst = worst.max((lm3[i] - lambda * kd.phi[i]).abs());
        }
        assert!(worst < 1e-5, "eigen-relation defect {worst:.3e}");

        // A_ΛΦ ≈ 0.
        let resid = kd.a_lambda.apply(&kd.phi);
        let rn = resid.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        assert!(rn < 1e-6, "kernel residual {rn:.3e}");
    }

    /// Weighted-adjoint structure A* = FAF, tested in bilinear form against
    /// smooth parity-respecting bundles so the defect is pure discretization
    /// error; it must shrink under grid refinement. The two-dimensional case
    /// exercises the drift term and the radial weights.
    #[test]
    fn adjoint_structure_under_block_swap() {
        let mut defects = Vec::new();
        for npts in [150_usize, 300] {
            let grid = uniform_grid(2, npts, 20.0);
            let state = solve_ground_state(2, 2, 1.0, &grid).unwrap();
            let a = assemble_a_lambda(&state, 0.7);
            let weights = bundle_weights(&grid);
            let n = grid.npts;

            // Even blocks get even functions of r, odd blocks odd ones, as
            // the derivative stencils assume.
            let mk_bundle = |c: f64| -> Vec<f64> {
                let mut out = Vec::with_capacity(4 * n);
                for (block, parity) in
                    [Parity::Even, Parity::Odd, Parity::Even, Parity::Odd]
                        .iter()
                        .enumerate()
                {
                    for &r in grid.nodes(*parity) {
                        let base = (-0.5 * c * r * r).exp();
                        let shape = match block {
                            0 => base,
                            1 => r * base,
                            2 => (1.0 + 0.3 * r * r) * base,
                            _ => 0.7 * r * (1.0 + 0.1 * r * r) * base,
                        };
                        out.push(shape);
                    }
                }
                out
            };
            let x = mk_bundle(0.9);
            let y = mk_bundle(1.3);
            let swap_x = block_swap(&x);
            let a_y = a.apply(&y);
            let a_swap_x = a.apply(&swap_x);
            // ⟨x, Ay⟩_w vs ⟨FAFx, y⟩_w.
            let lhs = dot_w(&weights, &x, &a_y);
            let rhs = dot_w(&weights, &block_swap(&a_swap_x), &y);
            defects.push((lhs - rhs).abs());
        }
        assert!(defects[0] < 1e-3, "adjoint defect {:.3e}", defects[0]);
        assert!(
            defects[1] < 0.3 * defects[0],
            "adjoint defect did not shrink: {defects:?}"
        );
    }

    #[test]
    fn projection_is_idempotent() {
        let grid = uniform_grid(1, 200, 20.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let kd = limit_kernel_data(&state, grid_lambda(&state)).unwrap();
        let weights = bundle_weights(&grid);

        let denom = dot_w(&weights, &kd.phi_star, &kd.phi_star);
        let project = |x: &[f64]| -> Vec<f64> {
            let c = dot_w(&weights, &kd.phi_star, x) / denom;
            kd.phi_star.iter().map(|p| c * p).collect()
        };
        let x: Vec<f64> = (0..4 * grid.npts).map(|i| ((i as f64) * 0.1).sin()).collect();
        let px = project(&x);
        let ppx = project(&px);
        let worst = px
            .iter()
            .zip(&ppx)
            .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(worst < 1e-13, "P² − P defect {worst:.3e}");

        let residual: Vec<f64> = kd
            .phi_star
            .iter()
            .zip(project(&kd.phi_star))
            .map(|(a, b)| a - b)
            .collect();
        let rn = residual.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        assert!(rn < 1e-13, "(1−P)Φ* = {rn:.3e}");
    }

    #[test]
    fn w_remainder_scales_quadratically() {
        let grid = uniform_grid(1, 400, 25.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let mut sups = Vec::new();
        for eps in [0.2_f64, 0.1, 0.05] {
            let omega = (1.0 - eps * eps).sqrt();
            let wave = solve_continuation(omega, &state).unwrap();
            let (_, sup) = assemble_w(&wave, &state).unwrap();
            sups.push(sup);
        }
        for pair in sups.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(
                (1.7..=2.3).contains(&order),
                "W sup-norm order {order:.3} (sups {sups:?})"
            );
        }
    }

    #[test]
    fn fixed_point_trivial_at_zero_perturbation() {
        let grid = uniform_grid(1, 200, 20.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let kd = limit_kernel_data(&state, grid_lambda(&state)).unwrap();
        let zero_w = DenseOperator::new(
            Array2::zeros((4 * grid.npts, 4 * grid.npts)),
            "zero remainder",
        )
        .unwrap();
        let fp = fixed_point_mz(&kd, &zero_w, 0.0).unwrap();
        assert_eq!(fp.mu0, 0.0);
        assert_eq!(fp.predicted_lambda, 0.0);
        assert!(fp.iterations <= 2);
        assert!(fp.zeta0.iter().all(|&z| z == 0.0));
    }

    /// The headline consistency check: the fixed-point prediction ε²(Λ+μ₀)
    /// reproduces the directly computed eigenvalue λ_ω. Because the
    /// four-block system is an exact row/column rescaling of the assembled
    /// linearization on the matching grid, the agreement is limited only by
    /// solver tolerances, far inside the asymptotic O(ε⁴) window.
    #[test]
    fn prediction_matches_direct_eigenvalue() {
        let grid = uniform_grid(1, 350, 25.0);
        let state = solve_ground_state(1, 3, 1.0, &grid).unwrap();
        let kd = limit_kernel_data(&state, grid_lambda(&state)).unwrap();

        for eps in [0.1_f64, 0.05] {
            let omega = (1.0 - eps * eps).sqrt();
            let wave = solve_continuation(omega, &state).unwrap();
            let (w_op, sup) = assemble_w(&wave, &state).unwrap();
            assert!(sup < 10.0 * eps * eps, "remainder too large: {sup:.3e}");
            let fp = fixed_point_mz(&kd, &w_op, eps).unwrap();
            assert!(
                fp.contraction_factor < 1.0,
                "ε={eps}: contraction factor {}",
                fp.contraction_factor
            );
            assert!(fp.gamma_metric >= 1.0);
            assert!(fp.gamma_metric * fp.mu0.abs() <= eps);
            assert!(fp.predicted_lambda > 0.0);
            assert!(!fp.trace.is_empty());

            let lin = assemble_linearization(&wave);
            let spec = point_spectrum(&lin, None).unwrap();
            assert!(!spec.real_pairs.is_empty(), "ε={eps}: no direct real pair");
            let direct = spec.real_pairs[0];
            let rel = (fp.predicted_lambda / direct - 1.0).abs();
            assert!(
                rel < 1e-4,
                "ε={eps}: prediction {:.8e} vs direct {direct:.8e} (rel {rel:.2e})",
                fp.predicted_lambda
            );
        }
    }
}
