//! Charge curves Q(ω) along solitary-wave families and the
//! Vakhitov–Kolokolov sign data they carry.
//!
//! The charge Q(ω) = ∫|φ_ω|² (radial measure, so ∫(v²+u²) r^{n−1} dr)
//! scales like ε^{2/k − n} toward the nonrelativistic limit: it grows —
//! dQ/dω > 0 near m — exactly when k > 2/n, the same condition that produces
//! the unstable real eigenvalue pair. A sweep over ω therefore records both
//! the charge and its centered finite-difference derivative; for the
//! three-dimensional cubic case the curve has a local minimum near
//! ω ≈ 0.936 m, located by parabolic refinement.

use std::sync::Arc;

use crate::error::{NldError, Result};
use crate::grid::{build_grid, quadrature, GridFunction, GridScheme, RadialGrid};
use crate::nls::solve_ground_state;
use crate::sweep::map_sweep;
use crate::waves::{solve_continuation_seeded, wave_residual, SolitaryWave};

/// Rescaled half-width of the sweep domain: the shared physical grid uses
/// r_max = SWEEP_RESCALED_SPAN / ε_max, so the widest wave of the sweep keeps
/// its full rescaled extent resolved.
pub const SWEEP_RESCALED_SPAN: f64 = 60.0;
/// ε/m cap for sweep continuation solves; the three-dimensional cubic
/// minimum search reaches ε/m ≈ 0.527 at ω = 0.85 m.
pub const SWEEP_EPS_FRAC_CAP: f64 = 0.6;

/// Construction record for one successful sweep point.
#[derive(Debug, Clone)]
pub struct ChargePointNote {
    pub omega: f64,
    pub epsilon: f64,
    /// Nodes per lattice of the shared grid policy.
    pub npts: usize,
    /// Physical domain half-width.
    pub r_max: f64,
    /// Rescaled domain half-width ε·r_max of this point's solve.
    pub rescaled_r_max: f64,
    /// Max-norm residual of the discretized wave system.
    pub residual_norm: f64,
}

/// A sweep point that could not be solved; the curve is still returned.
#[derive(Debug, Clone)]
pub struct ChargeFailure {
    pub omega: f64,
    pub reason: String,
}

/// Charge data along one (n, k, m) solitary-wave family.
#[derive(Debug, Clone)]
pub struct ChargeCurve {
    pub n_dim: usize,
    pub k: u32,
    pub mass: f64,
    /// Frequencies of the successfully solved points, increasing.
    pub omegas: Vec<f64>,
    /// Q(ω) at those frequencies (positive).
    pub q_values: Vec<f64>,
    /// Centered-difference dQ/dω on the sweep mesh (one-sided at the ends);
    /// empty when fewer than two points were solved.
    pub dq_domega: Vec<f64>,
    /// Per-point construction notes, parallel to `omegas`.
    pub notes: Vec<ChargePointNote>,
    /// Points that failed to solve, with reasons.
    pub failures: Vec<ChargeFailure>,
}

/// Charge of one solitary wave: quadrature of v² + u² with the radial
/// measure r^{n−1} dr (matching the convention of `nls_charge`).
pub fn dirac_charge(w: &SolitaryWave) -> f64 {
    let v_sq = GridFunction::new(
        w.grid.clone(),
        w.v.values.iter().map(|x| x * x).collect(),
        w.v.parity,
    )
    .expect("charge profile on the wave's own grid");
    let u_sq = GridFunction::new(
        w.grid.clone(),
        w.u.values.iter().map(|x| x * x).collect(),
        w.u.parity,
    )
    .expect("charge profile on the wave's own grid");
    quadrature(&v_sq) + quadrature(&u_sq)
}

/// Finite-difference derivative on the (possibly non-uniform) sweep mesh:
/// centered two-neighbor slopes inside, one-sided slopes at the ends.
/// Returns an empty list for fewer than two points.
pub fn charge_derivative(omegas: &[f64], q_values: &[f64]) -> Vec<f64> {
    assert_eq!(omegas.len(), q_values.len());
    let n = omegas.len();
    if n < 2 {
        return Vec::new();
    }
    let mut dq = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        dq.push((q_values[hi] - q_values[lo]) / (omegas[hi] - omegas[lo]));
    }
    dq
}

/// Sweep the charge over `count` equally spaced frequencies in
/// [omega_lo, omega_hi] on a shared grid policy: `npts` nodes per lattice
/// and physical half-width r_max = SWEEP_RESCALED_SPAN / ε_max. Ground
/// states are solved concurrently; the wave solves run as a sequential
/// continuation pre-pass from the NLS end (high ω) downward, each seeded
/// with its neighbor's rescaled profile; charges and residuals are then
/// evaluated concurrently. Per-point failures are recorded on the curve
/// instead of aborting the sweep.
pub fn charge_sweep(
    n_dim: usize,
    k: u32,
    mass: f64,
    omega_lo: f64,
    omega_hi: f64,
    count: usize,
    npts: usize,
) -> Result<ChargeCurve> {
    charge_sweep_with_span(
        n_dim,
        k,
        mass,
        omega_lo,
        omega_hi,
        count,
        npts,
        SWEEP_RESCALED_SPAN,
    )
}

/// `charge_sweep` with an explicit rescaled span: the shared physical
/// half-width is `rescaled_span / ε_max` where ε_max corresponds to
/// `omega_lo`.
#[allow(clippy::too_many_arguments)]
pub fn charge_sweep_with_span(
    n_dim: usize,
    k: u32,
    mass: f64,
    omega_lo: f64,
    omega_hi: f64,
    count: usize,
    npts: usize,
    rescaled_span: f64,
) -> Result<ChargeCurve> {
    if !(rescaled_span.is_finite() && rescaled_span > 0.0) {
        return Err(NldError::InvalidInput(format!(
            "rescaled span must be positive (got {rescaled_span})"
        )));
    }
    if !(omega_lo.is_finite() && omega_hi.is_finite())
        || omega_lo <= 0.0
        || omega_lo > omega_hi
        || omega_hi >= mass
    {
        return Err(NldError::InvalidInput(format!(
            "frequency range must satisfy 0 < lo ≤ hi < m (got [{omega_lo}, {omega_hi}], m = {mass})"
        )));
    }
    if count == 0 {
        return Err(NldError::InvalidInput("sweep needs at least one point".into()));
    }
    if count > 1 && omega_lo == omega_hi {
        return Err(NldError::InvalidInput(
            "multi-point sweep needs a nondegenerate frequency range".into(),
        ));
    }

    let omegas_all: Vec<f64> = if count == 1 {
        vec![omega_lo]
    } else {
        (0..count)
            .map(|i| {
                omega_lo + (omega_hi - omega_lo) * (i as f64) / ((count - 1) as f64)
            })
            .collect()
    };
    let eps_of = |omega: f64| (mass * mass - omega * omega).sqrt();
    let eps_max = eps_of(omega_lo);
    let r_max = rescaled_span / eps_max;

    // Phase 0: one NLS ground state per point, concurrently. Each point gets
    // its own rescaled domain ε·r_max so its wave lands on the shared
    // physical grid.
    let states = map_sweep(omegas_all.clone(), |omega| {
        let eps = eps_of(omega);
        build_grid(n_dim, npts, eps * r_max, GridScheme::UniformCentered)
            .and_then(|grid| solve_ground_state(n_dim, k, mass, &grid))
            .map_err(|e| format!("ground state failed: {e}"))
    });

    // Phase 1: sequential continuation pre-pass from the NLS end downward,
    // passing each solved rescaled profile to the next point as a seed.
    let mut waves: Vec<std::result::Result<SolitaryWave, String>> =
        Vec::with_capacity(count);
    let mut seed: Option<(Vec<f64>, Vec<f64>)> = None;
    for (omega, state) in omegas_all.iter().rev().zip(states.iter().rev()) {
        let solved = match state {
            Err(e) => Err(e.clone()),
            Ok(state) => {
                solve_continuation_seeded(*omega, state, seed.clone(), SWEEP_EPS_FRAC_CAP)
                    .map_err(|e| format!("wave solve failed: {e}"))
            }
        };
        if let Ok(w) = &solved {
            let sv = w.epsilon.powf(-1.0 / k as f64);
            let su = w.epsilon.powf(-1.0 - 1.0 / k as f64);
            seed = Some((
                w.v.values.iter().map(|x| sv * x).collect(),
                w.u.values.iter().map(|x| su * x).collect(),
            ));
        }
        waves.push(solved);
    }
    waves.reverse();

    // Phase 2: charges, residuals, and notes, concurrently.
    let evaluated = map_sweep(
        waves.into_iter().zip(omegas_all).collect::<Vec<_>>(),
        |(wave, omega)| match wave {
            Err(reason) => Err(ChargeFailure { omega, reason }),
            Ok(w) => {
                let q = dirac_charge(&w);
                if !(q > 0.0) {
                    return Err(ChargeFailure {
                        omega,
                        reason: format!("nonpositive charge {q:.3e}"),
                    });
                }
                Ok((
                    omega,
                    q,
                    ChargePointNote {
                        omega,
                        epsilon: w.epsilon,
                        npts,
                        r_max: w.grid.r_max,
                        rescaled_r_max: w.epsilon * w.grid.r_max,
                        residual_norm: wave_residual(&w),
                    },
                ))
            }
        },
    );

    let mut omegas = Vec::new();
    let mut q_values = Vec::new();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for item in evaluated {
        match item {
            Ok((omega, q, note)) => {
                omegas.push(omega);
                q_values.push(q);
                notes.push(note);
            }
            Err(f) => failures.push(f),
        }
    }
    let dq_domega = charge_derivative(&omegas, &q_values);

    Ok(ChargeCurve { n_dim, k, mass, omegas, q_values, dq_domega, notes, failures })
}

/// Locate a local minimum of Q on the curve by parabolic refinement around
/// the discrete minimum. Returns `None` when the curve has fewer than five
/// points or when Q is monotone on the range (the discrete minimum sits at
/// an endpoint or is not a strict interior local minimum).
pub fn find_charge_minimum(curve: &ChargeCurve) -> Option<f64> {
    let n = curve.omegas.len();
    if n < 5 {
        return None;
    }
    let q = &curve.q_values;
    let mut i_min = 0;
    for i in 1..n {
        if q[i] < q[i_min] {
            i_min = i;
        }
    }
    if i_min == 0 || i_min == n - 1 {
        return None;
    }
    if !(q[i_min - 1] > q[i_min] && q[i_min + 1] > q[i_min]) {
        return None;
    }
    let (x0, x1, x2) = (
        curve.omegas[i_min - 1],
        curve.omegas[i_min],
        curve.omegas[i_min + 1],
    );
    let (y0, y1, y2) = (q[i_min - 1], q[i_min], q[i_min + 1]);
    let num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return Some(x1);
    }
    let vertex = x1 - 0.5 * num / den;
    Some(vertex.clamp(x0, x2))
}

/// Shared-grid helper for tests and the command-line layer: the rescaled
/// grid matching one sweep point of `charge_sweep`'s policy.
pub fn sweep_point_grid(
    n_dim: usize,
    npts: usize,
    omega: f64,
    omega_lo: f64,
    mass: f64,
) -> Result<Arc<RadialGrid>> {
    let eps = (mass * mass - omega * omega).sqrt();
    let eps_max = (mass * mass - omega_lo * omega_lo).sqrt();
    build_grid(
        n_dim,
        npts,
        eps * (SWEEP_RESCALED_SPAN / eps_max),
        GridScheme::UniformCentered,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Parity;
    use crate::lin::lambda_of_epsilon_sweep;
    use crate::nls::fit_loglog_slope;
    use crate::waves::{solve_1d_closed, solve_continuation, WaveConstruction};

    fn handmade_wave(
        n_dim: usize,
        grid: Arc<RadialGrid>,
        v: impl Fn(f64) -> f64,
        u: impl Fn(f64) -> f64,
    ) -> SolitaryWave {
        SolitaryWave {
            n_dim,
            k: 1,
            mass: 1.0,
            omega: 0.9,
            epsilon: (1.0_f64 - 0.81).sqrt(),
            grid: grid.clone(),
            v: GridFunction::from_fn(grid.clone(), Parity::Even, v),
            u: GridFunction::from_fn(grid, Parity::Odd, u),
            construction: WaveConstruction::ClosedForm1d,
            residual_norm: 0.0,
        }
    }

    #[test]
    fn zero_wave_has_zero_charge() {
        let grid = build_grid(1, 200, 15.0, GridScheme::UniformCentered).unwrap();
        let w = handmade_wave(1, grid, |_| 0.0, |_| 0.0);
        assert_eq!(dirac_charge(&w), 0.0);
    }

    #[test]
    fn charge_matches_analytic_gaussian() {
        // v = e^{−r²}, u = r e^{−r²} in one dimension (whole-line measure):
        // Q = ∫_ℝ e^{−2r²}(1 + r²) dr = 2(√(2π)/4 + √(2π)/16) = (5/8)√(2π).
        let grid = build_grid(1, 800, 12.0, GridScheme::UniformCentered).unwrap();
        let w = handmade_wave(
            1,
            grid,
            |r| (-r * r).exp(),
            |r| r * (-r * r).exp(),
        );
        let expected = 5.0 / 8.0 * (2.0 * std::f64::consts::PI).sqrt();
        let q = dirac_charge(&w);
        assert!(
            (q - expected).abs() < 1e-12,
            "Q = {q:.15e}, expected {expected:.15e}"
        );
    }

    #[test]
    fn closed_form_and_continuation_agree_on_charge() {
        let omega = 0.9;
        let eps = (1.0_f64 - omega * omega).sqrt();
        let npts = 900;
        let r_max = 25.0;

        let phys = build_grid(1, npts, r_max, GridScheme::UniformCentered).unwrap();
        let (closed, _) = solve_1d_closed(omega, 2, 1.0, &phys).unwrap();
        let q_closed = dirac_charge(&closed);

        let rescaled =
            build_grid(1, npts, eps * r_max, GridScheme::UniformCentered).unwrap();
        let state = solve_ground_state(1, 2, 1.0, &rescaled).unwrap();
        let cont = solve_continuation(omega, &state).unwrap();
        let q_cont = dirac_charge(&cont);

        let rel = (q_closed / q_cont - 1.0).abs();
        assert!(
            rel < 1e-5,
            "charges disagree: closed {q_closed:.10e}, continuation {q_cont:.10e}"
        );
    }

    #[test]
    fn charge_power_law_toward_limit() {
        // Q ~ ε^{2/k − n}: slope −1/3 for (n, k) = (1, 3), slope +1 for
        // (n, k) = (1, 1).
        for (k, expected) in [(3_u32, -1.0 / 3.0), (1, 1.0)] {
            let mut pairs = Vec::new();
            for eps in [0.2_f64, 0.1, 0.05] {
                let omega = (1.0 - eps * eps).sqrt();
                let grid =
                    build_grid(1, 400, 25.0, GridScheme::UniformCentered).unwrap();
                let state = solve_ground_state(1, k, 1.0, &grid).unwrap();
                let wave = solve_continuation(omega, &state).unwrap();
                pairs.push((eps, dirac_charge(&wave)));
            }
            let slope = fit_loglog_slope(&pairs);
            assert!(
                (slope - expected).abs() < 0.15 * expected.abs(),
                "k={k}: charge slope {slope:.4} vs ε^{expected:.4}"
            );
        }
    }

    #[test]
    fn sweep_signs_split_by_criticality() {
        // Supercritical k = 3 in one dimension: charge increasing toward m.
        let curve = charge_sweep(1, 3, 1.0, 0.95, 0.999, 7, 300).unwrap();
        assert!(curve.failures.is_empty(), "failures: {:?}", curve.failures);
        assert_eq!(curve.omegas.len(), 7);
        assert_eq!(curve.dq_domega.len(), 7);
        assert!(
            curve.dq_domega.iter().all(|&d| d > 0.0),
            "expected dQ/dω > 0 throughout: {:?}",
            curve.dq_domega
        );
        for w in curve.omegas.windows(2) {
            assert!(w[0] < w[1]);
        }
        for note in &curve.notes {
            assert!(note.residual_norm < 1e-6, "sloppy wave: {note:?}");
        }

        // Subcritical k = 1: charge decreasing toward m.
        let curve = charge_sweep(1, 1, 1.0, 0.97, 0.999, 7, 300).unwrap();
        assert!(curve.failures.is_empty(), "failures: {:?}", curve.failures);
        assert!(
            curve.dq_domega.iter().all(|&d| d < 0.0),
            "expected dQ/dω < 0 throughout: {:?}",
            curve.dq_domega
        );
    }

    #[test]
    fn single_point_sweep_has_no_derivatives() {
        let curve = charge_sweep(1, 1, 1.0, 0.95, 0.95, 1, 200).unwrap();
        assert_eq!(curve.omegas.len(), 1);
        assert!(curve.dq_domega.is_empty());
        assert!(curve.q_values[0] > 0.0);
    }

    #[test]
    fn derivative_recomputation_is_exact() {
        let curve = charge_sweep(1, 3, 1.0, 0.96, 0.99, 5, 200).unwrap();
        assert_eq!(curve.omegas.len(), curve.q_values.len());
        assert_eq!(curve.omegas.len(), curve.notes.len());
        let recomputed = charge_derivative(&curve.omegas, &curve.q_values);
        assert_eq!(recomputed, curve.dq_domega);
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        assert!(charge_sweep(1, 1, 1.0, 0.99, 0.95, 5, 200).is_err());
        assert!(charge_sweep(1, 1, 1.0, 0.95, 1.0, 5, 200).is_err());
        assert!(charge_sweep(1, 1, 1.0, 0.95, 0.99, 0, 200).is_err());
        assert!(charge_sweep(1, 1, 1.0, 0.95, 0.95, 3, 200).is_err());
    }

    #[test]
    fn minimum_of_synthetic_parabola() {
        let omegas: Vec<f64> = (0..11).map(|i| 0.85 + 0.01 * i as f64).collect();
        let q_values: Vec<f64> =
            omegas.iter().map(|w| (w - 0.9) * (w - 0.9) + 1.0).collect();
        let dq = charge_derivative(&omegas, &q_values);
        let curve = ChargeCurve {
            n_dim: 3,
            k: 1,
            mass: 1.0,
            omegas,
            q_values,
            dq_domega: dq,
            notes: Vec::new(),
            failures: Vec::new(),
        };
        let w1 = find_charge_minimum(&curve).unwrap();
        assert!((w1 - 0.9).abs() < 1e-3, "vertex {w1}");
    }

    #[test]
    fn monotone_and_short_curves_have_no_minimum() {
        let omegas: Vec<f64> = (0..11).map(|i| 0.85 + 0.01 * i as f64).collect();
        let q_values: Vec<f64> = omegas.iter().map(|w| 2.0 - w).collect();
        let dq = charge_derivative(&omegas, &q_values);
        let monotone = ChargeCurve {
            n_dim: 3,
            k: 1,
            mass: 1.0,
            omegas: omegas.clone(),
            q_values,
            dq_domega: dq,
            notes: Vec::new(),
            failures: Vec::new(),
        };
        assert!(find_charge_minimum(&monotone).is_none());

        let short = ChargeCurve {
            n_dim: 3,
            k: 1,
            mass: 1.0,
            omegas: omegas[..4].to_vec(),
            q_values: vec![2.0, 1.0, 1.5, 2.5],
            dq_domega: Vec::new(),
            notes: Vec::new(),
            failures: Vec::new(),
        };
        assert!(find_charge_minimum(&short).is_none());
    }

    /// The three-dimensional cubic family has a charge minimum near
    /// ω ≈ 0.936 m; a narrow sweep brackets it.
    #[test]
    fn three_d_cubic_charge_minimum() {
        let curve = charge_sweep(3, 1, 1.0, 0.90, 0.97, 9, 350).unwrap();
        assert!(curve.failures.is_empty(), "failures: {:?}", curve.failures);
        let w1 = find_charge_minimum(&curve).expect("interior minimum");
        assert!(
            (0.926..=0.946).contains(&w1),
            "minimum at {w1:.4}, curve {:?}",
            curve.q_values
        );
    }

    /// Concordance of the two instability witnesses: where dQ/dω > 0 holds
    /// across an interval for a supercritical family, the real eigenvalue
    /// pair present at one end persists across it.
    #[test]
    fn real_pair_persists_where_charge_increases() {
        let curve = charge_sweep(1, 3, 1.0, 0.97, 0.99, 5, 250).unwrap();
        assert!(curve.failures.is_empty());
        assert!(curve.dq_domega.iter().all(|&d| d > 0.0));

        let eps_ends: Vec<f64> = [0.97_f64, 0.99]
            .iter()
            .map(|w| (1.0 - w * w).sqrt())
            .collect();
        let rows = lambda_of_epsilon_sweep(1, 3, 1.0, &eps_ends, 250).unwrap();
        for row in &rows {
            assert!(
                row.error.is_none() && row.lambda.is_some(),
                "missing real pair at ω = {:.4}: {:?}",
                row.omega,
                row.error
            );
        }
    }
}
