//! Feedback interconnection of two systems.
//!
//! The loop equations are `u1 = y2 + d1`, `u2 = y1 + d2` with `y1 = G1 u1`,
//! `y2 = G2 u2` (positive convention). The negative convention replaces `G2`
//! by `-G2` throughout. Well-posedness is invertibility of `I - D2 D1`; the
//! assembled closed loop realizes the block map
//! `(d1, d2) -> (y1, y2) = [G1 S, G1 S G2; S - I, S G2]` with
//! `S = (I - G2 G1)^-1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{grid_minimum, FrequencyGrid};
use crate::lti::{
    complexify, sigma_max, sigma_min, StabilityReport, StateSpaceSystem, INVERTIBILITY_TOL,
    STABILITY_TOL,
};

/// Feedback sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "+" => Ok(Sign::Positive),
            "negative" | "neg" | "-" => Ok(Sign::Negative),
            other => Err(Error::InvalidParameter(format!("unknown sign {other}"))),
        }
    }
}

/// An interconnected pair with its closed-loop realizations.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub g1: StateSpaceSystem,
    pub g2: StateSpaceSystem,
    pub sign: Sign,
    pub well_posed: bool,
    /// Smallest singular value of `I - D2 D1` (the well-posedness pivot).
    pub posedness_margin: f64,
    /// Block map `(d1, d2) -> (y1, y2)`; absent when not well-posed.
    pub cl: Option<StateSpaceSystem>,
    /// Variant map `(d1, d2) -> (u1, u2)` used by uniform-gain diagnostics.
    pub cl_inputs: Option<StateSpaceSystem>,
}

/// Assembles the feedback interconnection of `g1` and `g2`.
pub fn interconnect(
    g1: &StateSpaceSystem,
    g2: &StateSpaceSystem,
    sign: Sign,
) -> Result<ClosedLoop> {
    if g1.domain() != g2.domain() {
        return Err(Error::DimensionMismatch(
            "systems live in different time domains".into(),
        ));
    }
    if g1.ninputs() != g2.noutputs() || g1.noutputs() != g2.ninputs() {
        return Err(Error::DimensionMismatch(format!(
            "loop needs G1 {:?} against G2 {:?} transposed",
            g1.shape(),
            g2.shape()
        )));
    }
    let g2_eff = match sign {
        Sign::Positive => g2.clone(),
        Sign::Negative => g2.negate(),
    };
    let d1 = g1.d();
    let d2 = g2_eff.d();
    let m = g1.ninputs();
    let pivot = DMatrix::<f64>::identity(m, m) - d2 * d1;
    let smin = sigma_min(&complexify(&pivot));
    let scale = 1.0 + sigma_max(&complexify(&pivot));
    let well_posed = smin >= INVERTIBILITY_TOL * scale;
    if !well_posed {
        return Ok(ClosedLoop {
            g1: g1.clone(),
            g2: g2.clone(),
            sign,
            well_posed: false,
            posedness_margin: smin,
            cl: None,
            cl_inputs: None,
        });
    }
    let (cl, cl_inputs) = assemble(g1, &g2_eff, &pivot)?;
    Ok(ClosedLoop {
        g1: g1.clone(),
        g2: g2.clone(),
        sign,
        well_posed: true,
        posedness_margin: smin,
        cl: Some(cl),
        cl_inputs: Some(cl_inputs),
    })
}

/// Direct state-space assembly of the loop; shared dynamics for the output
/// map and the input map.
fn assemble(
    g1: &StateSpaceSystem,
    g2: &StateSpaceSystem,
    pivot: &DMatrix<f64>,
) -> Result<(StateSpaceSystem, StateSpaceSystem)> {
    let (n1, n2) = (g1.order(), g2.order());
    let (ny1, nu1) = g1.shape(); // ny1 = n, nu1 = m
    let e = pivot
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NotWellPosed(sigma_min(&complexify(pivot))))?;
    // u1 = E (D2 C1 x1 + C2 x2 + d1 + D2 d2), u2 = C1 x1 + D1 u1 + d2
    let u1_x1 = &e * g2.d() * g1.c();
    let u1_x2 = &e * g2.c();
    let u1_d1 = e.clone();
    let u1_d2 = &e * g2.d();
    let u2_x1 = g1.c() + g1.d() * &u1_x1;
    let u2_x2 = g1.d() * &u1_x2;
    let u2_d1 = g1.d() * &u1_d1;
    let u2_d2 = DMatrix::<f64>::identity(ny1, ny1) + g1.d() * &u1_d2;

    let nx = n1 + n2;
    let mut a = DMatrix::<f64>::zeros(nx, nx);
    a.view_mut((0, 0), (n1, n1))
        .copy_from(&(g1.a() + g1.b() * &u1_x1));
    a.view_mut((0, n1), (n1, n2)).copy_from(&(g1.b() * &u1_x2));
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(g2.b() * &u2_x1));
    a.view_mut((n1, n1), (n2, n2))
        .copy_from(&(g2.a() + g2.b() * &u2_x2));
    let mut b = DMatrix::<f64>::zeros(nx, nu1 + ny1);
    b.view_mut((0, 0), (n1, nu1)).copy_from(&(g1.b() * &u1_d1));
    b.view_mut((0, nu1), (n1, ny1)).copy_from(&(g1.b() * &u1_d2));
    b.view_mut((n1, 0), (n2, nu1)).copy_from(&(g2.b() * &u2_d1));
    b.view_mut((n1, nu1), (n2, ny1))
        .copy_from(&(g2.b() * &u2_d2));

    // y1 = C1 x1 + D1 u1, y2 = C2 x2 + D2 u2
    let mut c_out = DMatrix::<f64>::zeros(ny1 + nu1, nx);
    c_out
        .view_mut((0, 0), (ny1, n1))
        .copy_from(&(g1.c() + g1.d() * &u1_x1));
    c_out
        .view_mut((0, n1), (ny1, n2))
        .copy_from(&(g1.d() * &u1_x2));
    c_out
        .view_mut((ny1, 0), (nu1, n1))
        .copy_from(&(g2.d() * &u2_x1));
    c_out
        .view_mut((ny1, n1), (nu1, n2))
        .copy_from(&(g2.c() + g2.d() * &u2_x2));
    let mut d_out = DMatrix::<f64>::zeros(ny1 + nu1, nu1 + ny1);
    d_out
        .view_mut((0, 0), (ny1, nu1))
        .copy_from(&(g1.d() * &u1_d1));
    d_out
        .view_mut((0, nu1), (ny1, ny1))
        .copy_from(&(g1.d() * &u1_d2));
    d_out
        .view_mut((ny1, 0), (nu1, nu1))
        .copy_from(&(g2.d() * &u2_d1));
    d_out
        .view_mut((ny1, nu1), (nu1, ny1))
        .copy_from(&(g2.d() * &u2_d2));
    let cl = StateSpaceSystem::new(g1.domain(), a.clone(), b.clone(), c_out, d_out)?;

    let mut c_in = DMatrix::<f64>::zeros(nu1 + ny1, nx);
    c_in.view_mut((0, 0), (nu1, n1)).copy_from(&u1_x1);
    c_in.view_mut((0, n1), (nu1, n2)).copy_from(&u1_x2);
    c_in.view_mut((nu1, 0), (ny1, n1)).copy_from(&u2_x1);
    c_in.view_mut((nu1, n1), (ny1, n2)).copy_from(&u2_x2);
    let mut d_in = DMatrix::<f64>::zeros(nu1 + ny1, nu1 + ny1);
    d_in.view_mut((0, 0), (nu1, nu1)).copy_from(&u1_d1);
    d_in.view_mut((0, nu1), (nu1, ny1)).copy_from(&u1_d2);
    d_in.view_mut((nu1, 0), (ny1, nu1)).copy_from(&u2_d1);
    d_in.view_mut((nu1, nu1), (ny1, ny1)).copy_from(&u2_d2);
    let cl_inputs = StateSpaceSystem::new(g1.domain(), a, b, c_in, d_in)?;
    Ok((cl, cl_inputs))
}

/// Closed-loop stability verdict.
#[derive(Debug, Clone, Copy)]
pub struct LoopStability {
    pub stable: bool,
    pub margin: f64,
    /// Set when the decisive eigenvalue sits within tolerance of the boundary;
    /// constructed destabilizers land exactly here.
    pub marginal: bool,
    /// Corroboration: minimum of `|det(I - G2_eff G1)|` over the grid.
    pub min_grid_det: f64,
}

/// Eigenvalue stability test of the closed-loop `A`, corroborated by the
/// boundary determinant sweep.
pub fn closed_loop_stable(loop_: &ClosedLoop, grid: &FrequencyGrid) -> Result<LoopStability> {
    let cl = loop_
        .cl
        .as_ref()
        .ok_or(Error::NotWellPosed(loop_.posedness_margin))?;
    let rep: StabilityReport = cl.is_stable();
    let marginal = rep.margin.abs() <= STABILITY_TOL;
    let g2_eff = match loop_.sign {
        Sign::Positive => loop_.g2.clone(),
        Sign::Negative => loop_.g2.negate(),
    };
    let det_min = grid_minimum(grid, |w| {
        let v1 = loop_.g1.evaluate_boundary(w);
        let v2 = g2_eff.evaluate_boundary(w);
        match (v1, v2) {
            (Ok(m1), Ok(m2)) => {
                let m = m1.nrows().min(m2.ncols());
                let prod = DMatrix::identity(m, m) - m2 * m1;
                prod.determinant().norm()
            }
            _ => f64::INFINITY,
        }
    });
    Ok(LoopStability {
        stable: rep.stable && !marginal,
        margin: rep.margin,
        marginal,
        min_grid_det: det_min.value,
    })
}

/// H-infinity gain of the stable closed-loop block map.
pub fn closed_loop_gain(loop_: &ClosedLoop, grid: &FrequencyGrid, rel_tol: f64) -> Result<f64> {
    let cl = loop_
        .cl
        .as_ref()
        .ok_or(Error::NotWellPosed(loop_.posedness_margin))?;
    let st = closed_loop_stable(loop_, grid)?;
    if !st.stable {
        return Err(Error::UnstableClosedLoop);
    }
    Ok(crate::analysis::hinf_norm(cl, grid, rel_tol)?.gamma)
}
