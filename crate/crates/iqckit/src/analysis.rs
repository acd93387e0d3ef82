//! Norms and passivity quantities on the stability boundary.
//!
//! The CT H-infinity norm is certified by bisection on a Hamiltonian
//! imaginary-axis eigenvalue test seeded by a grid sweep; DT uses the grid
//! sweep with golden-section refinement. Passivity indices are infima of
//! Hermitian-part eigenvalue curves over the grid, refined locally.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{grid_maximum, grid_minimum, FrequencyGrid};
use crate::lti::{
    complexify, hermitian_eigenvalues, hermitian_part, lambda_min, sigma_max, Domain,
    StateSpaceSystem,
};

/// Default relative tolerance of the CT H-infinity certification.
pub const HINF_TOL_CT: f64 = 1e-6;
/// Documented accuracy of the DT grid-based H-infinity estimate.
pub const HINF_TOL_DT: f64 = 1e-4;
/// Margins within this band of zero are classified non-strict.
pub const STRICT_TOL: f64 = 1e-8;
/// Rank floor used when restricting forms to the range of a response.
pub const RANK_TOL: f64 = 1e-10;

const HAMILTONIAN_AXIS_TOL: f64 = 1e-8;

/// H-infinity norm together with the frequency attaining it.
#[derive(Debug, Clone, Copy)]
pub struct HinfNorm {
    pub gamma: f64,
    /// Boundary parameter; `f64::INFINITY` denotes the CT sentinel.
    pub peak_frequency: f64,
}

/// Passivity classification ordered by strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassivityClass {
    NotPassive,
    Passive,
    OutputStrict,
    InputStrict,
}

impl PassivityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PassivityClass::NotPassive => "NotPassive",
            PassivityClass::Passive => "Passive",
            PassivityClass::OutputStrict => "OutputStrict",
            PassivityClass::InputStrict => "InputStrict",
        }
    }
}

/// Input/output passivity indices with their worst frequencies.
#[derive(Debug, Clone, Copy)]
pub struct PassivityReport {
    /// Largest `nu` with `He(G) >= 2 nu I` on the boundary.
    pub nu: f64,
    /// Largest `rho` with `He(G) >= 2 rho G^* G`; `+inf` for the zero system,
    /// `-inf` when no value is feasible at some frequency.
    pub rho: f64,
    pub classification: PassivityClass,
    pub worst_frequency_nu: f64,
    pub worst_frequency_rho: f64,
}

/// An index value together with the frequency attaining it.
#[derive(Debug, Clone, Copy)]
pub struct IndexValue {
    pub value: f64,
    pub worst_frequency: f64,
}

/// H-infinity norm of a stable system.
pub fn hinf_norm(sys: &StateSpaceSystem, grid: &FrequencyGrid, rel_tol: f64) -> Result<HinfNorm> {
    sys.require_stable()?;
    if sys.domain() != grid.domain() {
        return Err(Error::DimensionMismatch(
            "system and grid domains differ".into(),
        ));
    }
    if sys.order() == 0 {
        return Ok(HinfNorm {
            gamma: sigma_max(&complexify(sys.d())),
            peak_frequency: grid.points()[0],
        });
    }
    // Grid sweep seeds a certified lower bound and the peak location.
    let sweep = grid_maximum(grid, |w| {
        sys.evaluate_boundary(w).map(|m| sigma_max(&m)).unwrap_or(0.0)
    });
    match sys.domain() {
        Domain::Ct => hinf_ct_bisect(sys, sweep.value, sweep.omega, rel_tol),
        Domain::Dt => Ok(HinfNorm {
            gamma: sweep.value,
            peak_frequency: sweep.omega,
        }),
    }
}

fn hinf_ct_bisect(
    sys: &StateSpaceSystem,
    seed_gamma: f64,
    seed_omega: f64,
    rel_tol: f64,
) -> Result<HinfNorm> {
    let mut lo = seed_gamma.max(sigma_max(&complexify(sys.d())));
    let mut peak = seed_omega;
    if lo < 1e-300 {
        // The sweep saw only zeros; treat as the zero response.
        return Ok(HinfNorm {
            gamma: 0.0,
            peak_frequency: seed_omega,
        });
    }
    // Expand to an upper bound certified by the Hamiltonian test, harvesting
    // crossing frequencies to tighten the lower bound and the peak location.
    let mut hi = lo * (1.0 + rel_tol.max(1e-12));
    let mut certified = false;
    for _ in 0..200 {
        match hamiltonian_crossings(sys, hi)? {
            None => {
                certified = true;
                break;
            }
            Some(omegas) => {
                harvest(sys, &omegas, &mut lo, &mut peak)?;
                hi = (hi * 2.0).max(lo * (1.0 + rel_tol));
            }
        }
    }
    if !certified {
        return Err(Error::NumericalFailure(
            "H-infinity upper bound search did not terminate".into(),
        ));
    }
    while hi - lo > rel_tol * lo {
        let mid = 0.5 * (hi + lo);
        match hamiltonian_crossings(sys, mid)? {
            None => hi = mid,
            Some(omegas) => {
                let before = lo;
                harvest(sys, &omegas, &mut lo, &mut peak)?;
                if lo <= before {
                    lo = mid;
                }
            }
        }
    }
    Ok(HinfNorm {
        gamma: 0.5 * (hi + lo),
        peak_frequency: peak,
    })
}

fn harvest(
    sys: &StateSpaceSystem,
    omegas: &[f64],
    lo: &mut f64,
    peak: &mut f64,
) -> Result<()> {
    let mut candidates: Vec<f64> = omegas.to_vec();
    for w in omegas.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    for w in candidates {
        let s = sigma_max(&sys.evaluate_boundary(w)?);
        if s > *lo {
            *lo = s;
            *peak = w;
        }
    }
    Ok(())
}

/// Imaginary-axis eigenvalue frequencies of the H-infinity Hamiltonian at
/// level `gamma`, or `None` when there are none (certifying `||G|| < gamma`).
fn hamiltonian_crossings(sys: &StateSpaceSystem, gamma: f64) -> Result<Option<Vec<f64>>> {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let n = sys.order();
    let nu = sys.ninputs();
    let r = DMatrix::identity(nu, nu) * (gamma * gamma) - d.transpose() * d;
    let r_lu = r.clone().lu();
    let r_inv = r_lu
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("gamma^2 I - D'D singular in bisection".into()))?;
    let a_hat = a + b * &r_inv * d.transpose() * c;
    let ny = sys.noutputs();
    let s = DMatrix::identity(ny, ny) + d * &r_inv * d.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_hat);
    h.view_mut((0, n), (n, n)).copy_from(&(b * &r_inv * b.transpose()));
    h.view_mut((n, 0), (n, n)).copy_from(&(-(c.transpose() * s * c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_hat.transpose()));
    let eigs = h.complex_eigenvalues();
    let mut crossings: Vec<f64> = eigs
        .iter()
        .filter(|l| l.re.abs() <= HAMILTONIAN_AXIS_TOL * (1.0 + l.norm()))
        .map(|l| l.im.abs())
        .collect();
    if crossings.is_empty() {
        return Ok(None);
    }
    crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    crossings.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    Ok(Some(crossings))
}

/// Input passivity index: half the infimum of `lambda_min(He G)`.
pub fn input_passivity_index(
    sys: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<IndexValue> {
    require_square_stable(sys)?;
    let m = grid_minimum(grid, |w| {
        sys.evaluate_boundary(w)
            .map(|g| lambda_min(&hermitian_part(&g)))
            .unwrap_or(f64::INFINITY)
    });
    Ok(IndexValue {
        value: 0.5 * m.value,
        worst_frequency: m.omega,
    })
}

/// Output passivity index: infimum over the boundary of the largest feasible
/// `rho` with `He(G) >= 2 rho G^* G` restricted to `range(G)`.
pub fn output_passivity_index(
    sys: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<IndexValue> {
    require_square_stable(sys)?;
    let m = grid_minimum(grid, |w| {
        sys.evaluate_boundary(w)
            .map(|g| output_index_at(&g))
            .unwrap_or(f64::INFINITY)
    });
    Ok(IndexValue {
        value: m.value,
        worst_frequency: m.omega,
    })
}

/// Largest `rho` with `He(G) - 2 rho G^*G >= 0` on the range of `G` at one
/// frequency. Returns `+inf` when the response vanishes (no constraint) and
/// `-inf` when no `rho` is feasible.
fn output_index_at(g: &DMatrix<Complex64>) -> f64 {
    let m = g.nrows();
    let svd = g.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u requested");
    let smax = svd.singular_values.max();
    let rank_floor = RANK_TOL * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > rank_floor).count();
    if rank == 0 {
        return f64::INFINITY;
    }
    let ur = u.columns(0, rank).clone_owned();
    let he = hermitian_part(g);
    let gram = g.adjoint() * g * Complex64::new(2.0, 0.0);
    let a_r = ur.adjoint() * &he * &ur;
    let b_r = ur.adjoint() * &gram * &ur;
    // he and gram restricted to range(G); feasibility of A - rho B >= 0.
    let eig_b = nalgebra::SymmetricEigen::new((&b_r + b_r.adjoint()).scale(0.5));
    let mu_max = eig_b.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let b_floor = 1e-12 * mu_max.max(1.0);
    let mut pos_cols = Vec::new();
    let mut null_cols = Vec::new();
    for (i, mu) in eig_b.eigenvalues.iter().enumerate() {
        if *mu > b_floor {
            pos_cols.push((i, *mu));
        } else {
            null_cols.push(i);
        }
    }
    if !null_cols.is_empty() {
        // Directions where the gram term vanishes must already satisfy the
        // Hermitian-part inequality or no rho works at all.
        let w0 = select_columns(&eig_b.eigenvectors, &null_cols);
        let proj = w0.adjoint() * &a_r * &w0;
        if lambda_min(&proj) < -1e-10 * (1.0 + sigma_max(&a_r)) {
            return f64::NEG_INFINITY;
        }
    }
    if pos_cols.is_empty() {
        return f64::INFINITY;
    }
    let mut p = DMatrix::<Complex64>::zeros(rank, pos_cols.len());
    for (k, (i, mu)) in pos_cols.iter().enumerate() {
        let col = eig_b.eigenvectors.column(*i) / Complex64::new(mu.sqrt(), 0.0);
        p.set_column(k, &col);
    }
    let _ = m;
    lambda_min(&(p.adjoint() * &a_r * &p))
}

fn select_columns(m: &DMatrix<Complex64>, cols: &[usize]) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, &m.column(*c));
    }
    out
}

/// Assembles indices and a classification consistent with the inclusion
/// chain: input strict implies output strict implies passive.
pub fn classify_passivity(
    sys: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<PassivityReport> {
    let nu = input_passivity_index(sys, grid)?;
    let rho = output_passivity_index(sys, grid)?;
    let classification = if nu.value > STRICT_TOL {
        PassivityClass::InputStrict
    } else if nu.value >= -STRICT_TOL && rho.value > STRICT_TOL {
        PassivityClass::OutputStrict
    } else if nu.value >= -STRICT_TOL {
        PassivityClass::Passive
    } else {
        PassivityClass::NotPassive
    };
    Ok(PassivityReport {
        nu: nu.value,
        rho: rho.value,
        classification,
        worst_frequency_nu: nu.worst_frequency,
        worst_frequency_rho: rho.worst_frequency,
    })
}

fn require_square_stable(sys: &StateSpaceSystem) -> Result<()> {
    if !sys.is_square() {
        return Err(Error::NotSquare {
            ny: sys.noutputs(),
            nu: sys.ninputs(),
        });
    }
    sys.require_stable()
}

/// Largest Hermitian-part eigenvalue curve over the grid (diagnostic).
pub fn hermitian_eigenvalue_curve(
    sys: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::with_capacity(grid.len());
    for w in grid.points() {
        let he = hermitian_part(&sys.evaluate_boundary(*w)?);
        let ev = hermitian_eigenvalues(&he);
        out.push((*w, ev[0], ev[ev.len() - 1]));
    }
    Ok(out)
}
