//! Real-rational LTI systems in state-space form.
//!
//! A [`StateSpaceSystem`] carries real `(A, B, C, D)` data together with a
//! [`Domain`] tag selecting the stability region: open left half-plane for
//! continuous time, open unit disk for discrete time. Transfer values are
//! `C (lambda I - A)^-1 B + D`. Systems with zero state dimension are pure
//! gains and evaluate to `D` everywhere.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalue margin below which a pole counts as unstable.
pub const STABILITY_TOL: f64 = 1e-9;

/// Relative floor on `sigma_min(D)` for feedthrough inversion.
pub const INVERTIBILITY_TOL: f64 = 1e-9;

/// Time domain of a system: continuous (`Ct`) or discrete (`Dt`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Ct,
    Dt,
}

impl Domain {
    /// Point of the stability boundary addressed by the parameter `omega`.
    ///
    /// Continuous time maps `omega` to `j*omega` (with `f64::INFINITY` as the
    /// point at infinity), discrete time to `e^{j*omega}`.
    pub fn boundary_lambda(self, omega: f64) -> BoundaryPoint {
        match self {
            Domain::Ct => {
                if omega.is_infinite() {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Complex(Complex64::new(0.0, omega))
                }
            }
            Domain::Dt => BoundaryPoint::Complex(Complex64::from_polar(1.0, omega)),
        }
    }

    /// True when real-rational responses are real-valued at this boundary
    /// parameter (omega = 0 or the infinity sentinel in CT; 0 or pi in DT).
    pub fn is_real_axis_point(self, omega: f64) -> bool {
        match self {
            Domain::Ct => omega == 0.0 || omega.is_infinite(),
            Domain::Dt => omega == 0.0 || (omega - std::f64::consts::PI).abs() < 1e-12,
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Ct => write!(f, "ct"),
            Domain::Dt => write!(f, "dt"),
        }
    }
}

/// A point where a transfer matrix can be evaluated.
///
/// `Infinity` stands for the point at infinity, where the response of any
/// proper system equals its feedthrough `D`. For CT systems that point closes
/// the stability boundary; for DT systems it lies in the instability region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPoint {
    Complex(Complex64),
    Infinity,
}

/// Result of a stability query: verdict plus eigenvalue margin.
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    pub stable: bool,
    /// CT: `-max Re(eig A)`; DT: `1 - max |eig A|`; `+inf` for pure gains.
    pub margin: f64,
}

/// Real-rational LTI system `C (lambda I - A)^-1 B + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: Domain,
}

impl StateSpaceSystem {
    /// Builds a system after checking dimension consistency and finiteness.
    pub fn new(
        domain: Domain,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let nx = a.nrows();
        let (ny, nu) = (d.nrows(), d.ncols());
        if b.nrows() != nx || b.ncols() != nu {
            return Err(Error::DimensionMismatch(format!(
                "B must be {}x{}, got {}x{}",
                nx,
                nu,
                b.nrows(),
                b.ncols()
            )));
        }
        if c.nrows() != ny || c.ncols() != nx {
            return Err(Error::DimensionMismatch(format!(
                "C must be {}x{}, got {}x{}",
                ny,
                nx,
                c.nrows(),
                c.ncols()
            )));
        }
        for m in [&a, &b, &c, &d] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteData);
            }
        }
        Ok(Self { a, b, c, d, domain })
    }

    /// Pure gain system (`n_x = 0`) with feedthrough `d`.
    pub fn gain(domain: Domain, d: DMatrix<f64>) -> Self {
        let (ny, nu) = (d.nrows(), d.ncols());
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, nu),
            c: DMatrix::zeros(ny, 0),
            d,
            domain,
        }
    }

    /// Scalar pure gain.
    pub fn scalar_gain(domain: Domain, g: f64) -> Self {
        Self::gain(domain, DMatrix::from_element(1, 1, g))
    }

    /// Identity map of size `k`.
    pub fn identity(domain: Domain, k: usize) -> Self {
        Self::gain(domain, DMatrix::identity(k, k))
    }

    /// Zero map with `ny` outputs and `nu` inputs.
    pub fn zero(domain: Domain, ny: usize, nu: usize) -> Self {
        Self::gain(domain, DMatrix::zeros(ny, nu))
    }

    /// First-order SISO system `c/(lambda - a) + d`.
    pub fn first_order(domain: Domain, a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
            c: DMatrix::from_element(1, 1, c),
            d: DMatrix::from_element(1, 1, d),
            domain,
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// State dimension.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn noutputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn ninputs(&self) -> usize {
        self.d.ncols()
    }

    /// `(outputs, inputs)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.noutputs(), self.ninputs())
    }

    pub fn is_square(&self) -> bool {
        self.noutputs() == self.ninputs()
    }

    /// Transfer matrix at a finite complex point.
    pub fn evaluate(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        if self.order() == 0 {
            return Ok(complexify(&self.d));
        }
        let nx = self.order();
        let mut m = complexify(&self.a);
        m.neg_mut();
        for i in 0..nx {
            m[(i, i)] += lambda;
        }
        let lu = m.lu();
        // Pivot-ratio check stands in for a condition estimate.
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for i in 0..nx {
            let p = lu.u()[(i, i)].norm();
            dmin = dmin.min(p);
            dmax = dmax.max(p);
        }
        if dmin <= 1e-14 * dmax.max(1.0) {
            return Err(Error::SingularResolvent(lambda));
        }
        let x = lu
            .solve(&complexify(&self.b))
            .ok_or(Error::SingularResolvent(lambda))?;
        Ok(complexify(&self.c) * x + complexify(&self.d))
    }

    /// Transfer matrix at a [`BoundaryPoint`], handling the point at infinity.
    pub fn evaluate_point(&self, point: &BoundaryPoint) -> Result<DMatrix<Complex64>> {
        match point {
            BoundaryPoint::Complex(l) => self.evaluate(*l),
            BoundaryPoint::Infinity => Ok(complexify(&self.d)),
        }
    }

    /// Transfer matrix at the boundary parameter `omega`.
    pub fn evaluate_boundary(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        self.evaluate_point(&self.domain.boundary_lambda(omega))
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().as_slice().to_vec()
    }

    /// Stability verdict with eigenvalue margin.
    pub fn is_stable(&self) -> StabilityReport {
        if self.order() == 0 {
            return StabilityReport {
                stable: true,
                margin: f64::INFINITY,
            };
        }
        let margin = match self.domain {
            Domain::Ct => -self
                .poles()
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max),
            Domain::Dt => {
                1.0 - self
                    .poles()
                    .iter()
                    .map(|l| l.norm())
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        };
        StabilityReport {
            stable: margin > STABILITY_TOL,
            margin,
        }
    }

    /// Errors with [`Error::UnstableSystem`] unless the system is stable.
    pub fn require_stable(&self) -> Result<()> {
        let s = self.is_stable();
        if s.stable {
            Ok(())
        } else {
            Err(Error::UnstableSystem { margin: s.margin })
        }
    }

    /// Adjoint system `G~` with `G~(lambda) = G(lambda)^*` on the boundary.
    ///
    /// CT: `(A,B,C,D) -> (-A^T, -C^T, B^T, D^T)`. DT requires `A` invertible;
    /// a singular DT `A` has no adjoint realization and is rejected.
    pub fn adjoint(&self) -> Result<StateSpaceSystem> {
        match self.domain {
            Domain::Ct => Ok(StateSpaceSystem {
                a: -self.a.transpose(),
                b: -self.c.transpose(),
                c: self.b.transpose(),
                d: self.d.transpose(),
                domain: self.domain,
            }),
            Domain::Dt => {
                if self.order() == 0 {
                    return Ok(StateSpaceSystem::gain(self.domain, self.d.transpose()));
                }
                let at = self.a.transpose();
                let lu = at.clone().lu();
                let at_inv = lu.try_inverse().ok_or(Error::AdjointUnrepresentable)?;
                if at_inv.iter().any(|x| !x.is_finite()) {
                    return Err(Error::AdjointUnrepresentable);
                }
                // G~(z) = D^T + z B^T (I - z A^T)^-1 C^T realized through A^-T.
                let b_new = -&at_inv * self.c.transpose();
                let c_new = self.b.transpose() * &at_inv;
                let d_new = self.d.transpose() - self.b.transpose() * &at_inv * self.c.transpose();
                Ok(StateSpaceSystem {
                    a: at_inv,
                    b: b_new,
                    c: c_new,
                    d: d_new,
                    domain: self.domain,
                })
            }
        }
    }

    /// Series composition realizing `self_hat * other_hat`.
    pub fn series(&self, other: &StateSpaceSystem) -> Result<StateSpaceSystem> {
        self.check_domain(other)?;
        if self.ninputs() != other.noutputs() {
            return Err(Error::DimensionMismatch(format!(
                "series: left has {} inputs, right has {} outputs",
                self.ninputs(),
                other.noutputs()
            )));
        }
        let (n1, n2) = (other.order(), self.order());
        let nu = other.ninputs();
        let ny = self.noutputs();
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&other.a);
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&self.b * &other.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&self.a);
        let mut b = DMatrix::zeros(n1 + n2, nu);
        b.view_mut((0, 0), (n1, nu)).copy_from(&other.b);
        b.view_mut((n1, 0), (n2, nu))
            .copy_from(&(&self.b * &other.d));
        let mut c = DMatrix::zeros(ny, n1 + n2);
        c.view_mut((0, 0), (ny, n1))
            .copy_from(&(&self.d * &other.c));
        c.view_mut((0, n1), (ny, n2)).copy_from(&self.c);
        let d = &self.d * &other.d;
        StateSpaceSystem::new(self.domain, a, b, c, d)
    }

    /// Parallel sum realizing `self_hat + other_hat`.
    pub fn add(&self, other: &StateSpaceSystem) -> Result<StateSpaceSystem> {
        self.check_domain(other)?;
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "sum: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        let (n1, n2) = (self.order(), other.order());
        let (ny, nu) = self.shape();
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, nu);
        b.view_mut((0, 0), (n1, nu)).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, nu)).copy_from(&other.b);
        let mut c = DMatrix::zeros(ny, n1 + n2);
        c.view_mut((0, 0), (ny, n1)).copy_from(&self.c);
        c.view_mut((0, n1), (ny, n2)).copy_from(&other.c);
        let d = &self.d + &other.d;
        StateSpaceSystem::new(self.domain, a, b, c, d)
    }

    /// Difference `self_hat - other_hat`.
    pub fn sub(&self, other: &StateSpaceSystem) -> Result<StateSpaceSystem> {
        self.add(&other.negate())
    }

    /// Output negation.
    pub fn negate(&self) -> StateSpaceSystem {
        StateSpaceSystem {
            a: self.a.clone(),
            b: self.b.clone(),
            c: -&self.c,
            d: -&self.d,
            domain: self.domain,
        }
    }

    /// Output scaling by a real factor.
    pub fn scale(&self, factor: f64) -> StateSpaceSystem {
        StateSpaceSystem {
            a: self.a.clone(),
            b: self.b.clone(),
            c: factor * &self.c,
            d: factor * &self.d,
            domain: self.domain,
        }
    }

    /// Inverse system; requires square shape and invertible feedthrough.
    pub fn inverse(&self) -> Result<StateSpaceSystem> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                ny: self.noutputs(),
                nu: self.ninputs(),
            });
        }
        let smin = sigma_min(&complexify(&self.d));
        let scale = sigma_max(&complexify(&self.d));
        if smin < INVERTIBILITY_TOL * (1.0 + scale) {
            return Err(Error::NotInvertible(smin));
        }
        let d_inv = self
            .d
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::NotInvertible(smin))?;
        let a = &self.a - &self.b * &d_inv * &self.c;
        let b = &self.b * &d_inv;
        let c = -&d_inv * &self.c;
        StateSpaceSystem::new(self.domain, a, b, c, d_inv)
    }

    /// Horizontal concatenation `[G1 G2 ...]`: inputs stacked, outputs shared.
    pub fn hcat(parts: &[StateSpaceSystem]) -> Result<StateSpaceSystem> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("hcat of empty list".into()))?;
        let ny = first.noutputs();
        let domain = first.domain;
        let mut nx = 0;
        let mut nu = 0;
        for p in parts {
            if p.noutputs() != ny {
                return Err(Error::DimensionMismatch("hcat: output counts differ".into()));
            }
            if p.domain != domain {
                return Err(Error::DimensionMismatch("hcat: domains differ".into()));
            }
            nx += p.order();
            nu += p.ninputs();
        }
        let mut a = DMatrix::zeros(nx, nx);
        let mut b = DMatrix::zeros(nx, nu);
        let mut c = DMatrix::zeros(ny, nx);
        let mut d = DMatrix::zeros(ny, nu);
        let (mut ox, mut ou) = (0, 0);
        for p in parts {
            a.view_mut((ox, ox), (p.order(), p.order())).copy_from(&p.a);
            b.view_mut((ox, ou), (p.order(), p.ninputs()))
                .copy_from(&p.b);
            c.view_mut((0, ox), (ny, p.order())).copy_from(&p.c);
            d.view_mut((0, ou), (ny, p.ninputs())).copy_from(&p.d);
            ox += p.order();
            ou += p.ninputs();
        }
        StateSpaceSystem::new(domain, a, b, c, d)
    }

    /// Vertical concatenation `[G1; G2; ...]`: outputs stacked, inputs shared.
    pub fn vcat(parts: &[StateSpaceSystem]) -> Result<StateSpaceSystem> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("vcat of empty list".into()))?;
        let nu = first.ninputs();
        let domain = first.domain;
        let mut nx = 0;
        let mut ny = 0;
        for p in parts {
            if p.ninputs() != nu {
                return Err(Error::DimensionMismatch("vcat: input counts differ".into()));
            }
            if p.domain != domain {
                return Err(Error::DimensionMismatch("vcat: domains differ".into()));
            }
            nx += p.order();
            ny += p.noutputs();
        }
        let mut a = DMatrix::zeros(nx, nx);
        let mut b = DMatrix::zeros(nx, nu);
        let mut c = DMatrix::zeros(ny, nx);
        let mut d = DMatrix::zeros(ny, nu);
        let (mut ox, mut oy) = (0, 0);
        for p in parts {
            a.view_mut((ox, ox), (p.order(), p.order())).copy_from(&p.a);
            b.view_mut((ox, 0), (p.order(), nu)).copy_from(&p.b);
            c.view_mut((oy, ox), (p.noutputs(), p.order()))
                .copy_from(&p.c);
            d.view_mut((oy, 0), (p.noutputs(), nu)).copy_from(&p.d);
            ox += p.order();
            oy += p.noutputs();
        }
        StateSpaceSystem::new(domain, a, b, c, d)
    }

    /// `k` copies of a scalar system along the diagonal, realizing `g * I_k`.
    pub fn diag_replicate(&self, k: usize) -> Result<StateSpaceSystem> {
        if self.shape() != (1, 1) {
            return Err(Error::NotSquare {
                ny: self.noutputs(),
                nu: self.ninputs(),
            });
        }
        let nx = self.order();
        let mut a = DMatrix::zeros(nx * k, nx * k);
        let mut b = DMatrix::zeros(nx * k, k);
        let mut c = DMatrix::zeros(k, nx * k);
        let mut d = DMatrix::zeros(k, k);
        for i in 0..k {
            a.view_mut((i * nx, i * nx), (nx, nx)).copy_from(&self.a);
            b.view_mut((i * nx, i), (nx, 1)).copy_from(&self.b);
            c.view_mut((i, i * nx), (1, nx)).copy_from(&self.c);
            d[(i, i)] = self.d[(0, 0)];
        }
        StateSpaceSystem::new(self.domain, a, b, c, d)
    }

    fn check_domain(&self, other: &StateSpaceSystem) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DimensionMismatch(
                "systems live in different time domains".into(),
            ));
        }
        Ok(())
    }
}

/// Lifts a real matrix into complex entries.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

/// Largest singular value (zero for empty matrices).
pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value (zero for empty matrices).
pub fn sigma_min(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().min()
}

/// Hermitian part `M + M^*` (the factor-2 convention).
pub fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m + m.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// The input is symmetrized first so callers may pass matrices that are
/// Hermitian only up to rounding.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    let n = m.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut ev = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    ev.as_mut_slice()
        .sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    ev
}

pub fn lambda_min(m: &DMatrix<Complex64>) -> f64 {
    let ev = hermitian_eigenvalues(m);
    if ev.is_empty() {
        f64::INFINITY
    } else {
        ev[0]
    }
}

pub fn lambda_max(m: &DMatrix<Complex64>) -> f64 {
    let ev = hermitian_eigenvalues(m);
    if ev.is_empty() {
        f64::NEG_INFINITY
    } else {
        ev[ev.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lag() -> StateSpaceSystem {
        // 1/(s+1)
        StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 1.0, 0.0)
    }

    #[test]
    fn evaluate_pure_gain_is_d_everywhere() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let sys = StateSpaceSystem::gain(Domain::Ct, d.clone());
        for lambda in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 3.7),
            Complex64::new(-2.0, 1.0),
        ] {
            let v = sys.evaluate(lambda).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(v[(i, j)].re, d[(i, j)]);
                    assert_abs_diff_eq!(v[(i, j)].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn evaluate_first_order() {
        let sys = lag();
        let at_zero = sys.evaluate(Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(at_zero[(0, 0)].re, 1.0, epsilon = 1e-14);
        let at_j = sys.evaluate(Complex64::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(at_j[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(at_j[(0, 0)].im, -0.5, epsilon = 1e-14);
        // infinity sentinel returns D
        let at_inf = sys.evaluate_boundary(f64::INFINITY).unwrap();
        assert_abs_diff_eq!(at_inf[(0, 0)].re, 0.0);
    }

    #[test]
    fn evaluate_rejects_eigenvalue_of_a() {
        let sys = lag();
        let err = sys.evaluate(Complex64::new(-1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularResolvent(_)));
    }

    #[test]
    fn stability_margins() {
        let s = StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 1.0, 0.0).is_stable();
        assert!(s.stable);
        assert_abs_diff_eq!(s.margin, 1.0, epsilon = 1e-12);

        let u = StateSpaceSystem::first_order(Domain::Ct, 1.0, 1.0, 1.0, 0.0).is_stable();
        assert!(!u.stable);
        assert_abs_diff_eq!(u.margin, -1.0, epsilon = 1e-12);

        let d = StateSpaceSystem::first_order(Domain::Dt, 0.5, 1.0, 1.0, 0.0).is_stable();
        assert!(d.stable);
        assert_abs_diff_eq!(d.margin, 0.5, epsilon = 1e-12);

        let g = StateSpaceSystem::scalar_gain(Domain::Ct, 3.0).is_stable();
        assert!(g.stable && g.margin.is_infinite());
    }

    #[test]
    fn poles_of_companion_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let sys = StateSpaceSystem::new(
            Domain::Ct,
            a,
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let mut re: Vec<f64> = sys.poles().iter().map(|p| p.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(re[0], -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(re[1], -1.0, epsilon = 1e-10);
        assert!(StateSpaceSystem::scalar_gain(Domain::Ct, 1.0).poles().is_empty());
    }

    #[test]
    fn ct_adjoint_matches_conjugate_on_boundary() {
        // s/(s+1) at omega = 1: conj(j/(1+j)) = 0.5 - 0.5j
        let sys = StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, -1.0, 1.0);
        let adj = sys.adjoint().unwrap();
        let v = adj.evaluate_boundary(1.0).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(0, 0)].im, -0.5, epsilon = 1e-12);

        for omega in [0.0, 0.3, 2.0, 17.0] {
            let g = sys.evaluate_boundary(omega).unwrap();
            let ga = adj.evaluate_boundary(omega).unwrap();
            assert_abs_diff_eq!(ga[(0, 0)].re, g[(0, 0)].re, epsilon = 1e-11);
            assert_abs_diff_eq!(ga[(0, 0)].im, -g[(0, 0)].im, epsilon = 1e-11);
        }
    }

    #[test]
    fn dt_adjoint_matches_conjugate_on_circle() {
        let sys = StateSpaceSystem::first_order(Domain::Dt, 0.5, 1.0, 2.0, 0.3);
        let adj = sys.adjoint().unwrap();
        for omega in [0.0, 0.4, 1.1, 2.8, std::f64::consts::PI] {
            let g = sys.evaluate_boundary(omega).unwrap();
            let ga = adj.evaluate_boundary(omega).unwrap();
            assert_abs_diff_eq!(ga[(0, 0)].re, g[(0, 0)].re, epsilon = 1e-11);
            assert_abs_diff_eq!(ga[(0, 0)].im, -g[(0, 0)].im, epsilon = 1e-11);
        }
    }

    #[test]
    fn dt_adjoint_singular_a_rejected() {
        let sys = StateSpaceSystem::first_order(Domain::Dt, 0.0, 1.0, 1.0, 0.0);
        assert!(matches!(
            sys.adjoint().unwrap_err(),
            Error::AdjointUnrepresentable
        ));
    }

    #[test]
    fn gain_adjoint_is_transpose() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let adj = StateSpaceSystem::gain(Domain::Ct, d.clone()).adjoint().unwrap();
        assert_eq!(adj.d(), &d.transpose());
    }

    #[test]
    fn series_and_sum_match_pointwise_products() {
        let g = lag();
        let h = StateSpaceSystem::scalar_gain(Domain::Ct, 2.0);
        let gh = g.series(&h).unwrap();
        let v = gh.evaluate(Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 2.0, epsilon = 1e-13);

        let sum = g.add(&h).unwrap();
        let vs = sum.evaluate_boundary(0.0).unwrap();
        assert_abs_diff_eq!(vs[(0, 0)].re, 3.0, epsilon = 1e-13);

        let neg = StateSpaceSystem::scalar_gain(Domain::Ct, 2.0).negate();
        assert_abs_diff_eq!(neg.d()[(0, 0)], -2.0);
    }

    #[test]
    fn inverse_of_gain_and_roundtrip() {
        let g = StateSpaceSystem::gain(
            Domain::Ct,
            DMatrix::from_diagonal(&DVector::from_vec(vec![
                -std::f64::consts::FRAC_1_SQRT_2,
                -std::f64::consts::FRAC_1_SQRT_2,
            ])),
        );
        let inv = g.inverse().unwrap();
        assert_abs_diff_eq!(inv.d()[(0, 0)], -2.0_f64.sqrt(), epsilon = 1e-14);

        // inverse(inverse(G)) matches G on the boundary
        let sys = StateSpaceSystem::first_order(Domain::Ct, -2.0, 1.0, 1.0, 1.5);
        let back = sys.inverse().unwrap().inverse().unwrap();
        for omega in [0.0, 0.7, 3.0] {
            let a = sys.evaluate_boundary(omega).unwrap();
            let b = back.evaluate_boundary(omega).unwrap();
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-8);
        }

        // inverse(G) * G = I pointwise
        let inv = sys.inverse().unwrap();
        let prod = inv.series(&sys).unwrap();
        let v = prod.evaluate_boundary(0.9).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_feedthrough_not_invertible() {
        let sys = lag();
        assert!(matches!(
            sys.inverse().unwrap_err(),
            Error::NotInvertible(_)
        ));
    }

    #[test]
    fn stacking_matches_entries() {
        let g1 = lag();
        let g2 = StateSpaceSystem::scalar_gain(Domain::Ct, 3.0);
        let row = StateSpaceSystem::hcat(&[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(row.shape(), (1, 2));
        let col = StateSpaceSystem::vcat(&[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(col.shape(), (2, 1));
        let vr = row.evaluate_boundary(0.0).unwrap();
        assert_abs_diff_eq!(vr[(0, 0)].re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(vr[(0, 1)].re, 3.0, epsilon = 1e-13);
        let vc = col.evaluate_boundary(0.0).unwrap();
        assert_abs_diff_eq!(vc[(0, 0)].re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(vc[(1, 0)].re, 3.0, epsilon = 1e-13);
    }

    #[test]
    fn diag_replicate_scalar() {
        let g = lag();
        let gi = g.diag_replicate(3).unwrap();
        assert_eq!(gi.shape(), (3, 3));
        let v = gi.evaluate_boundary(1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_abs_diff_eq!(v[(i, j)].re, 0.5, epsilon = 1e-13);
                    assert_abs_diff_eq!(v[(i, j)].im, -0.5, epsilon = 1e-13);
                } else {
                    assert_abs_diff_eq!(v[(i, j)].norm(), 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn real_rationality_conjugate_symmetry() {
        let sys = StateSpaceSystem::first_order(Domain::Ct, -1.5, 2.0, 0.7, -0.2);
        for omega in [0.2, 1.0, 5.0] {
            let up = sys.evaluate(Complex64::new(0.1, omega)).unwrap();
            let dn = sys.evaluate(Complex64::new(0.1, -omega)).unwrap();
            assert_abs_diff_eq!(up[(0, 0)].re, dn[(0, 0)].re, epsilon = 1e-12);
            assert_abs_diff_eq!(up[(0, 0)].im, -dn[(0, 0)].im, epsilon = 1e-12);
        }
    }
}
