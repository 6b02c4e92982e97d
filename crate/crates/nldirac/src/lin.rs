//! Linearization of the Soler-type Dirac flow at a solitary wave.
//!
//! Perturbing ψ = e^{−iωt}(Φ + ρ) and splitting ρ into real and imaginary
//! parts yields ∂_t(Re ρ, Im ρ) = JL(ω)(Re ρ, Im ρ) with
//! JL = [[0, L₋], [−L₊, 0]]: L₋ is the one-particle operator D_m − ω − f
//! that annihilates the wave itself, and L₊ = L₋ − 2f′·[[v², −vu],[−vu, u²]]
//! carries the extra coupling that only the real part of ρ feels. Real
//! eigenvalue pairs ±λ of JL are the instability signal; the essential
//! spectrum fills the imaginary axis outside the gap (−(m−|ω|), m−|ω|).

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::eig::{dense_eigenvalues, sort_canonical, DEFAULT_EIG_CAP};
use crate::error::{NldError, Result};
use crate::grid::{build_grid, GridFunction, Parity, RadialGrid};
use crate::nls::solve_ground_state;
use crate::ops::{block_matrix, d_dr, d_dr_plus_drift, diag_operator, interp, row_scaled, DenseOperator};
use crate::sweep::map_sweep;
use crate::waves::{solve_continuation, SolitaryWave};

/// Eigenvalues with |Re λ| above this are treated as off the imaginary axis.
pub const DEFAULT_TOL_REAL: f64 = 1e-6;
/// Relative imaginary-part tolerance for calling an eigenvalue real.
pub const DEFAULT_TOL_IMAG: f64 = 1e-6;
/// Gap eigenvalues must clear the band edge by this fraction of (m−|ω|).
pub const DEFAULT_BAND_MARGIN_FRAC: f64 = 0.02;
/// A point eigenvalue is refinement-stable if it moves less than this
/// (relative) under both grid refinements.
pub const DEFAULT_REFINE_MATCH_FRAC: f64 = 0.01;
/// Rescaled radius used by the ε-sweep grid policy (physical r_max = 30/ε).
pub const SWEEP_RESCALED_R_MAX: f64 = 30.0;

/// The three operators of the linearized flow at one wave.
#[derive(Debug, Clone)]
pub struct DiracLinearization {
    /// The wave the linearization was assembled at.
    pub wave: SolitaryWave,
    /// Grid shared with the wave.
    pub grid: Arc<RadialGrid>,
    /// f = (v²−u²)^k sampled on the even lattice (u interpolated).
    pub f_even: GridFunction,
    /// f sampled on the odd lattice (v interpolated).
    pub f_odd: GridFunction,
    /// f′ = k(v²−u²)^{k−1} on the even lattice.
    pub fprime_even: GridFunction,
    /// f′ on the odd lattice.
    pub fprime_odd: GridFunction,
    /// One-particle block (2N×2N) annihilating (v, u).
    pub l_minus: DenseOperator,
    /// L₋ minus the 2f′ rank-structure coupling (2N×2N).
    pub l_plus: DenseOperator,
    /// Full real flow generator (4N×4N), blocks [[0, L₋], [−L₊, 0]] in the
    /// component order (Re ρ₁, Re ρ₂, Im ρ₁, Im ρ₂).
    pub jl: DenseOperator,
}

/// How one computed eigenvalue relates to the expected spectral picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenvalueClass {
    /// Off-axis real pair member: the instability signal.
    PointReal,
    /// On the imaginary axis strictly inside the spectral gap (includes the
    /// near-zero gauge cluster).
    PointImaginaryGap,
    /// On the imaginary axis at or beyond the band edge: a discretized
    /// slice of the essential spectrum, not a true point eigenvalue.
    EssentialBandArtifact,
    /// Fits none of the above (e.g. genuinely complex quartet); flagged,
    /// never dropped.
    Unresolved,
}

/// One eigenvalue with its classification.
#[derive(Debug, Clone, Copy)]
pub struct ClassifiedEigenvalue {
    pub lambda: Complex64,
    pub class: EigenvalueClass,
    /// Set for point-class eigenvalues when refinement was requested.
    pub refinement_stable: Option<bool>,
}

/// Classified spectrum of one JL operator.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Every computed eigenvalue, canonically sorted.
    pub eigenvalues: Vec<ClassifiedEigenvalue>,
    /// Gap edge m−|ω|: essential spectrum lives at |Im λ| ≥ this.
    pub band_edge: f64,
    /// Embedded threshold m+|ω|.
    pub embedded_threshold: f64,
    /// Positive representatives of real eigenvalue pairs that survived the
    /// mirror check (and refinement, when requested), sorted descending.
    pub real_pairs: Vec<f64>,
}

/// Builds the wave on an arbitrary grid, so the spectrum can be re-solved
/// on refined grids.
pub type WaveBuilderFn<'a> = dyn Fn(&Arc<RadialGrid>) -> Result<SolitaryWave> + Sync + 'a;

/// Essential-spectrum markers of the linearized flow: the gap edge m−|ω|
/// and the embedded threshold m+|ω| (both as |Im λ| magnitudes).
pub fn essential_band(omega: f64, mass: f64) -> Result<(f64, f64)> {
    if !omega.is_finite() || !mass.is_finite() || omega.abs() >= mass {
        return Err(NldError::InvalidInput(format!(
            "essential band needs |ω| < m (got ω = {omega}, m = {mass})"
        )));
    }
    Ok((mass - omega.abs(), mass + omega.abs()))
}

/// Assemble L₋, L₊ and JL at a wave. The 2N blocks act on pairs
/// (ρ₁ on the even lattice, ρ₂ on the odd lattice); the nonlinearity is
/// evaluated pointwise per lattice with the other component interpolated,
/// exactly matching the wave-equation discretization, so L₋(v, u) equals
/// the wave residual.
pub fn assemble_linearization(wave: &SolitaryWave) -> DiracLinearization {
    let grid = &wave.grid;
    let n = grid.npts;
    let ki = wave.k as i32;
    let kk = wave.k as f64;
    let (m, om) = (wave.mass, wave.omega);

    let d_ou = d_dr_plus_drift(grid, Parity::Odd);
    let d_eo = d_dr(grid, Parity::Even);
    let i_oe = interp(grid, Parity::Odd);
    let i_eo = interp(grid, Parity::Even);

    let u_e = i_oe.apply(&wave.u.values);
    let v_o = i_eo.apply(&wave.v.values);

    let mut f_even = vec![0.0; n];
    let mut fprime_even = vec![0.0; n];
    for i in 0..n {
        let s = wave.v.values[i].powi(2) - u_e[i].powi(2);
        f_even[i] = s.powi(ki);
        fprime_even[i] = kk * s.powi(ki - 1);
    }
    let mut f_odd = vec![0.0; n];
    let mut fprime_odd = vec![0.0; n];
    for j in 0..n {
        let s = v_o[j].powi(2) - wave.u.values[j].powi(2);
        f_odd[j] = s.powi(ki);
        fprime_odd[j] = kk * s.powi(ki - 1);
    }

    let a11: Vec<f64> = f_even.iter().map(|f| m - om - f).collect();
    let a22: Vec<f64> = f_odd.iter().map(|f| -m - om + f).collect();
    let a11 = diag_operator(&a11, "m - omega - f").mat;
    let a22 = diag_operator(&a22, "-m - omega + f").mat;
    let a21 = -&d_eo.mat;
    let l_minus_mat = block_matrix(&[
        vec![Some(&a11), Some(&d_ou.mat)],
        vec![Some(&a21), Some(&a22)],
    ]);

    // L₊ = L₋ − 2f′·[[v², −vu], [−vu, u²]], with the mixed vu entries
    // carried through the cross-lattice interpolants.
    let c11: Vec<f64> = (0..n)
        .map(|i| 2.0 * fprime_even[i] * wave.v.values[i].powi(2))
        .collect();
    let c22: Vec<f64> = (0..n)
        .map(|j| 2.0 * fprime_odd[j] * wave.u.values[j].powi(2))
        .collect();
    let s12: Vec<f64> = (0..n)
        .map(|i| 2.0 * fprime_even[i] * wave.v.values[i] * u_e[i])
        .collect();
    let s21: Vec<f64> = (0..n)
        .map(|j| 2.0 * fprime_odd[j] * v_o[j] * wave.u.values[j])
        .collect();
    let b11 = &a11 - &Array2::from_diag(&ndarray::Array1::from(c11));
    let b22 = &a22 - &Array2::from_diag(&ndarray::Array1::from(c22));
    let b12 = &d_ou.mat + &row_scaled(&i_oe.mat, &s12);
    let b21 = &a21 + &row_scaled(&i_eo.mat, &s21);
    let l_plus_mat = block_matrix(&[
        vec![Some(&b11), Some(&b12)],
        vec![Some(&b21), Some(&b22)],
    ]);

    let neg_l_plus = -&l_plus_mat;
    let jl_mat = block_matrix(&[
        vec![None, Some(&l_minus_mat)],
        vec![Some(&neg_l_plus), None],
    ]);

    let mk = |vals: Vec<f64>, parity| GridFunction::new(grid.clone(), vals, parity).unwrap();
    DiracLinearization {
        wave: wave.clone(),
        grid: grid.clone(),
        f_even: mk(f_even, Parity::Even),
        f_odd: mk(f_odd, Parity::Odd),
        fprime_even: mk(fprime_even, Parity::Even),
        fprime_odd: mk(fprime_odd, Parity::Odd),
        l_minus: DenseOperator::new(l_minus_mat, "L-").unwrap(),
        l_plus: DenseOperator::new(l_plus_mat, "L+").unwrap(),
        jl: DenseOperator::new(jl_mat, "JL").unwrap(),
    }
}

fn classify_one(
    lambda: Complex64,
    band_edge: f64,
    tol_real: f64,
    tol_imag: f64,
    margin: f64,
) -> EigenvalueClass {
    let off_axis = lambda.re.abs() > tol_real;
    let near_real_axis = lambda.im.abs() <= tol_imag * (1.0 + lambda.re.abs());
    if off_axis && near_real_axis {
        EigenvalueClass::PointReal
    } else if !off_axis && lambda.im.abs() < band_edge - margin {
        EigenvalueClass::PointImaginaryGap
    } else if !off_axis {
        EigenvalueClass::EssentialBandArtifact
    } else {
        EigenvalueClass::Unresolved
    }
}

fn nearest_distance(pool: &[Complex64], target: Complex64) -> f64 {
    pool.iter()
        .map(|z| (z - target).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Classification tolerances for `point_spectrum_with_params`; the default
/// values are the module constants.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyParams {
    /// |Re λ| above this counts as off the imaginary axis.
    pub tol_real: f64,
    /// Relative imaginary-part tolerance for the real-axis test.
    pub tol_imag: f64,
    /// Gap margin as a fraction of the band edge m−|ω|.
    pub band_margin_frac: f64,
    /// Relative movement allowed under grid refinement.
    pub refine_match_frac: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            tol_real: DEFAULT_TOL_REAL,
            tol_imag: DEFAULT_TOL_IMAG,
            band_margin_frac: DEFAULT_BAND_MARGIN_FRAC,
            refine_match_frac: DEFAULT_REFINE_MATCH_FRAC,
        }
    }
}

/// Compute and classify the spectrum of JL with the default tolerances.
pub fn point_spectrum(
    lin: &DiracLinearization,
    refine: Option<&WaveBuilderFn<'_>>,
) -> Result<SpectrumResult> {
    point_spectrum_with_params(lin, refine, &ClassifyParams::default())
}

/// Compute and classify the spectrum of JL. With a wave builder supplied,
/// the spectrum is re-solved at double resolution and at 1.5× the domain
/// radius, and every point-class eigenvalue is marked refinement-stable only
/// if it moves less than `refine_match_frac` (relative) under both
/// refinements. Real pairs must also have their mirror −λ present, else they
/// are flagged unresolved.
pub fn point_spectrum_with_params(
    lin: &DiracLinearization,
    refine: Option<&WaveBuilderFn<'_>>,
    params: &ClassifyParams,
) -> Result<SpectrumResult> {
    if !(params.tol_real > 0.0
        && params.tol_imag > 0.0
        && params.band_margin_frac > 0.0
        && params.refine_match_frac > 0.0)
    {
        return Err(NldError::InvalidInput(
            "classification tolerances must be positive".into(),
        ));
    }
    let (band_edge, embedded_threshold) = essential_band(lin.wave.omega, lin.wave.mass)?;
    let margin = params.band_margin_frac * band_edge;

    let mut base = dense_eigenvalues(&lin.jl, DEFAULT_EIG_CAP)?;
    sort_canonical(&mut base);

    let refined: Option<(Vec<Complex64>, Vec<Complex64>)> = match refine {
        None => None,
        Some(builder) => {
            let g = &lin.grid;
            let g2 = build_grid(g.n_dim, 2 * g.npts, g.r_max, g.scheme)?;
            let g3 = build_grid(g.n_dim, g.npts, 1.5 * g.r_max, g.scheme)?;
            let spectrum_on = |gg: &Arc<RadialGrid>| -> Result<Vec<Complex64>> {
                let w = builder(gg)?;
                dense_eigenvalues(&assemble_linearization(&w).jl, DEFAULT_EIG_CAP)
            };
            Some((spectrum_on(&g2)?, spectrum_on(&g3)?))
        }
    };

    let mut eigenvalues: Vec<ClassifiedEigenvalue> = base
        .iter()
        .map(|&lambda| {
            let class = classify_one(
                lambda,
                band_edge,
                params.tol_real,
                params.tol_imag,
                margin,
            );
            let refinement_stable = match (&refined, class) {
                (Some((e2, e3)), EigenvalueClass::PointReal)
                | (Some((e2, e3)), EigenvalueClass::PointImaginaryGap) => {
                    let allow = (params.refine_match_frac * lambda.norm()).max(1e-8);
                    Some(
                        nearest_distance(e2, lambda) < allow
                            && nearest_distance(e3, lambda) < allow,
                    )
                }
                _ => None,
            };
            ClassifiedEigenvalue { lambda, class, refinement_stable }
        })
        .collect();

    // Mirror check and real-pair extraction.
    let mut real_pairs = Vec::new();
    for idx in 0..eigenvalues.len() {
        let ev = eigenvalues[idx];
        if ev.class != EigenvalueClass::PointReal || ev.lambda.re <= 0.0 {
            continue;
        }
        let mirror_tol = 1e-8 * (1.0 + ev.lambda.norm());
        let has_mirror = base
            .iter()
            .any(|z| (z + ev.lambda).norm() < mirror_tol);
        if !has_mirror {
            eigenvalues[idx].class = EigenvalueClass::Unresolved;
            continue;
        }
        if ev.refinement_stable != Some(false) {
            real_pairs.push(ev.lambda.re);
        }
    }
    real_pairs.sort_by(|a, b| b.total_cmp(a));

    Ok(SpectrumResult { eigenvalues, band_edge, embedded_threshold, real_pairs })
}

/// One row of the ε-sweep table.
#[derive(Debug, Clone)]
pub struct EpsilonSweepRow {
    pub epsilon: f64,
    pub omega: f64,
    /// The refinement-stable real eigenvalue, when exactly one pair exists.
    pub lambda: Option<f64>,
    /// λ_ω/ε², the quantity that converges to the NLS constant Λ.
    pub ratio: Option<f64>,
    /// Per-row failure description; rows never abort the sweep.
    pub error: Option<String>,
}

/// Sweep the instability eigenvalue across ε values at fixed (n, k, m).
///
/// Grid policy: rescaled radius R_max = 30 (physical r_max = 30/ε) with a
/// fixed node count, so resolution per wave width is ε-independent. Waves
/// come from continuation off a shared NLS ground state; each row assembles
/// JL, extracts the refinement-stable real pair, and reports λ_ω and λ_ω/ε².
/// Rows run concurrently; failures are recorded per row.
pub fn lambda_of_epsilon_sweep(
    n_dim: usize,
    k: u32,
    mass: f64,
    epsilons: &[f64],
    npts: usize,
) -> Result<Vec<EpsilonSweepRow>> {
    let scheme = crate::grid::GridScheme::UniformCentered;
    let base_grid = build_grid(n_dim, npts, SWEEP_RESCALED_R_MAX, scheme)?;
    let dbl_grid = build_grid(n_dim, 2 * npts, SWEEP_RESCALED_R_MAX, scheme)?;
    let wide_grid = build_grid(n_dim, npts, 1.5 * SWEEP_RESCALED_R_MAX, scheme)?;
    let base = solve_ground_state(n_dim, k, mass, &base_grid)?;
    let dbl = solve_ground_state(n_dim, k, mass, &dbl_grid)?;
    let wide = solve_ground_state(n_dim, k, mass, &wide_grid)?;

    let rows = map_sweep(epsilons.to_vec(), |epsilon| {
        let fail = |omega: f64, msg: String| EpsilonSweepRow {
            epsilon,
            omega,
            lambda: None,
            ratio: None,
            error: Some(msg),
        };
        if !(epsilon > 0.0 && epsilon < 0.5 * mass) {
            return fail(f64::NAN, format!("ε = {epsilon} outside (0, m/2): no wave"));
        }
        let omega = (mass * mass - epsilon * epsilon).sqrt();
        let wave = match solve_continuation(omega, &base) {
            Ok(w) => w,
            Err(e) => return fail(omega, format!("continuation failed: {e}")),
        };
        let lin = assemble_linearization(&wave);
        let builder = |g: &Arc<RadialGrid>| -> Result<SolitaryWave> {
            let state = if g.npts == dbl.grid.npts {
                &dbl
            } else if epsilon * g.r_max > 1.2 * SWEEP_RESCALED_R_MAX {
                &wide
            } else {
                &base
            };
            solve_continuation(omega, state)
        };
        let spectrum = match point_spectrum(&lin, Some(&builder)) {
            Ok(s) => s,
            Err(e) => return fail(omega, format!("eigensolve failed: {e}")),
        };
        match spectrum.real_pairs.len() {
            0 => EpsilonSweepRow { epsilon, omega, lambda: None, ratio: None, error: None },
            1 => {
                let lambda = spectrum.real_pairs[0];
                EpsilonSweepRow {
                    epsilon,
                    omega,
                    lambda: Some(lambda),
                    ratio: Some(lambda / (epsilon * epsilon)),
                    error: None,
                }
            }
            more => fail(
                omega,
                format!("{more} refinement-stable real pairs where at most one was expected"),
            ),
        }
    });
    Ok(rows)
}
