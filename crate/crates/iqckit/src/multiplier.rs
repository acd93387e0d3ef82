//! Multipliers, quadratic forms, IQC set membership, and J-spectral factors.
//!
//! A multiplier is a Hermitian-valued weight `Pi(lambda)` on the stability
//! boundary, partitioned into blocks `Pi11 (n x n)`, `Pi12 (n x m)` and
//! `Pi22 (m x m)`. It is carried either as a constant Hermitian matrix or
//! through structured stable factors with `Pi = Psi^* J Psi`,
//! `J = diag(I_n, -I_m)`. The plant-side form
//! `q(G) = [G; I]^* Pi [G; I]` and the uncertainty-side form
//! `qc(H) = [I; H]^* Pi [I; H]` define four membership sets (strict and
//! non-strict on each side).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis::STRICT_TOL;
use crate::error::{Error, Result};
use crate::grid::{grid_maximum, grid_minimum, FrequencyGrid, FrequencyResponse};
use crate::lti::{
    complexify, lambda_max, lambda_min, sigma_max, sigma_min, Domain, StateSpaceSystem,
};

/// Structured stable factors of a multiplier: `Pi = Psi^* J Psi` with
/// `Psi = [psi1 psi2; psi3 psi4]` and `J = diag(I_n, -I_m)`.
#[derive(Debug, Clone)]
pub struct JSpectralFactors {
    pub psi1: StateSpaceSystem,
    pub psi2: StateSpaceSystem,
    pub psi3: StateSpaceSystem,
    pub psi4: StateSpaceSystem,
}

impl JSpectralFactors {
    pub fn new(
        psi1: StateSpaceSystem,
        psi2: StateSpaceSystem,
        psi3: StateSpaceSystem,
        psi4: StateSpaceSystem,
    ) -> Result<Self> {
        let n = psi1.noutputs();
        let m = psi4.noutputs();
        let domain = psi1.domain();
        let shapes_ok = psi1.shape() == (n, n)
            && psi2.shape() == (n, m)
            && psi3.shape() == (m, n)
            && psi4.shape() == (m, m);
        if !shapes_ok {
            return Err(Error::DimensionMismatch(
                "factor blocks must form [n x n, n x m; m x n, m x m]".into(),
            ));
        }
        for p in [&psi2, &psi3, &psi4] {
            if p.domain() != domain {
                return Err(Error::DimensionMismatch("factor domains differ".into()));
            }
        }
        Ok(Self {
            psi1,
            psi2,
            psi3,
            psi4,
        })
    }

    /// Signature `(n, m)` of `J = diag(I_n, -I_m)`.
    pub fn signature(&self) -> (usize, usize) {
        (self.psi1.noutputs(), self.psi4.noutputs())
    }

    pub fn domain(&self) -> Domain {
        self.psi1.domain()
    }

    /// `Psi(lambda)` stacked as one `(n+m) x (n+m)` matrix.
    pub fn psi_at(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let (n, m) = self.signature();
        let p1 = self.psi1.evaluate_boundary(omega)?;
        let p2 = self.psi2.evaluate_boundary(omega)?;
        let p3 = self.psi3.evaluate_boundary(omega)?;
        let p4 = self.psi4.evaluate_boundary(omega)?;
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&p1);
        out.view_mut((0, n), (n, m)).copy_from(&p2);
        out.view_mut((n, 0), (m, n)).copy_from(&p3);
        out.view_mut((n, n), (m, m)).copy_from(&p4);
        Ok(out)
    }

    /// `Psi(lambda)^* J Psi(lambda)`.
    pub fn pi_at(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let (n, m) = self.signature();
        let psi = self.psi_at(omega)?;
        let mut j = DMatrix::<Complex64>::identity(n + m, n + m);
        for i in n..n + m {
            j[(i, i)] = Complex64::new(-1.0, 0.0);
        }
        Ok(psi.adjoint() * j * psi)
    }
}

/// A multiplier: constant Hermitian matrix or factored rational carrier.
#[derive(Debug, Clone)]
pub struct Multiplier {
    form: MultiplierForm,
    n: usize,
    m: usize,
    domain: Domain,
}

#[derive(Debug, Clone)]
pub enum MultiplierForm {
    Constant(DMatrix<Complex64>),
    Factored(JSpectralFactors),
}

impl Multiplier {
    /// Constant Hermitian multiplier partitioned at `(n, m)`.
    pub fn constant(pi: DMatrix<Complex64>, n: usize, m: usize, domain: Domain) -> Result<Self> {
        if pi.nrows() != n + m || pi.ncols() != n + m {
            return Err(Error::DimensionMismatch(format!(
                "Pi must be {0}x{0}",
                n + m
            )));
        }
        let herm_defect = sigma_max(&(&pi - pi.adjoint()));
        if herm_defect > 1e-10 * (1.0 + sigma_max(&pi)) {
            return Err(Error::InvalidParameter(
                "Pi must be Hermitian within 1e-10".into(),
            ));
        }
        Ok(Self {
            form: MultiplierForm::Constant(pi),
            n,
            m,
            domain,
        })
    }

    /// Multiplier defined through its stable factors.
    pub fn from_factors(psi: JSpectralFactors) -> Self {
        let (n, m) = psi.signature();
        let domain = psi.domain();
        Self {
            form: MultiplierForm::Factored(psi),
            n,
            m,
            domain,
        }
    }

    pub fn form(&self) -> &MultiplierForm {
        &self.form
    }

    /// Block dimensions `(n, m)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `Pi(lambda)` at a boundary parameter.
    pub fn pi_at(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        match &self.form {
            MultiplierForm::Constant(pi) => Ok(pi.clone()),
            MultiplierForm::Factored(psi) => psi.pi_at(omega),
        }
    }

    /// Blocks `(Pi11, Pi12, Pi22)` at a boundary parameter.
    pub fn blocks_at(
        &self,
        omega: f64,
    ) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
        let pi = self.pi_at(omega)?;
        let (n, m) = self.dims();
        Ok((
            pi.view((0, 0), (n, n)).clone_owned(),
            pi.view((0, n), (n, m)).clone_owned(),
            pi.view((n, n), (m, m)).clone_owned(),
        ))
    }

    /// Maximum Hermitian defect of `Pi` over the grid.
    pub fn hermitian_defect(&self, grid: &FrequencyGrid) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for w in grid.points() {
            let pi = self.pi_at(*w)?;
            worst = worst.max(sigma_max(&(&pi - pi.adjoint())));
        }
        Ok(worst)
    }
}

/// Which of the four IQC sets a membership query addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetId {
    /// Plant side, strict: `q(G) < 0` on the boundary.
    G1Strict,
    /// Plant side, non-strict: `q(G) <= 0`.
    G1Nonstrict,
    /// Uncertainty side, strict: `qc(H) > 0`.
    G2Strict,
    /// Uncertainty side, non-strict: `qc(H) >= 0`.
    G2Nonstrict,
}

impl SetId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetId::G1Strict => "G1_strict",
            SetId::G1Nonstrict => "G1_nonstrict",
            SetId::G2Strict => "G2_strict",
            SetId::G2Nonstrict => "G2_nonstrict",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "g1_strict" => Ok(SetId::G1Strict),
            "g1_nonstrict" => Ok(SetId::G1Nonstrict),
            "g2_strict" => Ok(SetId::G2Strict),
            "g2_nonstrict" => Ok(SetId::G2Nonstrict),
            other => Err(Error::InvalidParameter(format!("unknown set id {other}"))),
        }
    }

    pub fn is_plant_side(&self) -> bool {
        matches!(self, SetId::G1Strict | SetId::G1Nonstrict)
    }

    pub fn is_strict(&self) -> bool {
        matches!(self, SetId::G1Strict | SetId::G2Strict)
    }
}

/// Signed margin of an IQC inequality over a grid.
#[derive(Debug, Clone)]
pub struct MembershipVerdict {
    pub set_id: SetId,
    pub holds: bool,
    /// Positive margins mean the inequality is satisfied with room.
    pub margin: f64,
    pub worst_frequency: f64,
    pub grid_points: usize,
}

/// Side selector for [`q_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QSide {
    Plant,
    Uncertainty,
}

/// Per-gridpoint Hermitian value of the quadratic form.
///
/// Plant side: `G^* Pi11 G + G^* Pi12 + Pi12^* G + Pi22` (m x m).
/// Uncertainty side: `Pi11 + H^* Pi12^* + Pi12 H + H^* Pi22 H` (n x n).
pub fn q_form(
    mult: &Multiplier,
    sys: &StateSpaceSystem,
    side: QSide,
    grid: &FrequencyGrid,
) -> Result<FrequencyResponse> {
    check_q_dims(mult, sys, side)?;
    let values = grid
        .points()
        .iter()
        .map(|w| q_form_at(mult, sys, side, *w))
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(grid.clone(), values)
}

fn check_q_dims(mult: &Multiplier, sys: &StateSpaceSystem, side: QSide) -> Result<()> {
    let (n, m) = mult.dims();
    let want = match side {
        QSide::Plant => (n, m),
        QSide::Uncertainty => (m, n),
    };
    if sys.shape() != want {
        return Err(Error::DimensionMismatch(format!(
            "system is {:?} but the {:?} side of this multiplier needs {:?}",
            sys.shape(),
            side,
            want
        )));
    }
    if sys.domain() != mult.domain() {
        return Err(Error::DimensionMismatch(
            "system and multiplier domains differ".into(),
        ));
    }
    Ok(())
}

fn q_form_at(
    mult: &Multiplier,
    sys: &StateSpaceSystem,
    side: QSide,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    let (p11, p12, p22) = mult.blocks_at(omega)?;
    let g = sys.evaluate_boundary(omega)?;
    let q = match side {
        QSide::Plant => g.adjoint() * &p11 * &g + g.adjoint() * &p12 + p12.adjoint() * &g + p22,
        QSide::Uncertainty => {
            &p11 + g.adjoint() * p12.adjoint() + &p12 * &g + g.adjoint() * &p22 * &g
        }
    };
    // Symmetrize away rounding before eigenvalue work downstream.
    Ok((&q + q.adjoint()).scale(0.5))
}

/// Membership verdict of a stable system in one of the four IQC sets.
pub fn membership(
    mult: &Multiplier,
    sys: &StateSpaceSystem,
    set_id: SetId,
    grid: &FrequencyGrid,
) -> Result<MembershipVerdict> {
    sys.require_stable()?;
    let side = if set_id.is_plant_side() {
        QSide::Plant
    } else {
        QSide::Uncertainty
    };
    check_q_dims(mult, sys, side)?;
    let ext = match side {
        // Plant sets need q(G) below zero: margin is -max lambda_max(q).
        QSide::Plant => {
            let m = grid_maximum(grid, |w| {
                q_form_at(mult, sys, side, w)
                    .map(|q| lambda_max(&q))
                    .unwrap_or(f64::NEG_INFINITY)
            });
            crate::grid::GridExtremum {
                omega: m.omega,
                value: -m.value,
            }
        }
        // Uncertainty sets need qc(H) above zero: margin is min lambda_min(qc).
        QSide::Uncertainty => grid_minimum(grid, |w| {
            q_form_at(mult, sys, side, w)
                .map(|q| lambda_min(&q))
                .unwrap_or(f64::INFINITY)
        }),
    };
    let holds = if set_id.is_strict() {
        ext.value > STRICT_TOL
    } else {
        ext.value >= -STRICT_TOL
    };
    Ok(MembershipVerdict {
        set_id,
        holds,
        margin: ext.value,
        worst_frequency: ext.omega,
        grid_points: grid.len(),
    })
}

/// Catalog of multiplier/factor pairs in closed form.
#[derive(Debug, Clone)]
pub enum CatalogKind {
    /// `Pi = [0 I; I 0]`: plant side encodes a passivity deficit test, the
    /// uncertainty side collects input strictly passive systems.
    Passivity,
    /// `Pi = [0 I; I -eps I]`: uncertainty side is output strict with level `eps`.
    Osp { epsilon: f64 },
    /// `Pi = [eps I I; I 0]`: plant side is output strict with level `eps`.
    Isp { epsilon: f64 },
    /// `Pi = [gamma^2 I 0; 0 -I]`: gain bound `gamma` on the plant side.
    SmallGain { gamma: f64 },
    /// `Pi = [w~w I 0; 0 -I]` for a stable scalar rational weight `w`.
    FwSmallGain { weight: StateSpaceSystem },
    /// `Pi = [0 e^{j theta} I; e^{-j theta} I 0]` for a constant angle.
    FwPassivity { theta: f64 },
}

/// A catalog entry: the multiplier and, when they are real-rational, its
/// explicit factors. The rotated-passivity entry with a nonzero angle has
/// complex constant factors, which have no real realization; those are
/// exposed through [`fw_passivity_factor_display`] instead.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub multiplier: Multiplier,
    pub factors: Option<JSpectralFactors>,
}

/// Builds a catalog multiplier sized `(n, m)`.
pub fn catalog(kind: &CatalogKind, n: usize, m: usize, domain: Domain) -> Result<CatalogEntry> {
    let gain = |v: f64, k: usize| StateSpaceSystem::gain(domain, DMatrix::identity(k, k) * v);
    match kind {
        CatalogKind::Passivity => {
            require_square(n, m)?;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let psi = JSpectralFactors::new(gain(h, n), gain(h, n), gain(h, n), gain(-h, n))?;
            let pi = two_block_constant(n, 0.0, 1.0, 0.0);
            Ok(CatalogEntry {
                multiplier: Multiplier::constant(pi, n, n, domain)?,
                factors: Some(psi),
            })
        }
        CatalogKind::Osp { epsilon } => {
            require_square(n, m)?;
            require_positive(*epsilon, "epsilon")?;
            let a = 1.0 / (epsilon.sqrt() - (2.0 * epsilon).sqrt());
            let psi = JSpectralFactors::new(
                gain(a, n),
                gain(epsilon.sqrt(), n),
                gain(a, n),
                gain((2.0 * epsilon).sqrt(), n),
            )?;
            let pi = two_block_constant(n, 0.0, 1.0, -epsilon);
            Ok(CatalogEntry {
                multiplier: Multiplier::constant(pi, n, n, domain)?,
                factors: Some(psi),
            })
        }
        CatalogKind::Isp { epsilon } => {
            require_square(n, m)?;
            require_positive(*epsilon, "epsilon")?;
            let b = 1.0 / ((2.0 * epsilon).sqrt() - epsilon.sqrt());
            let psi = JSpectralFactors::new(
                gain((2.0 * epsilon).sqrt(), n),
                gain(b, n),
                gain(epsilon.sqrt(), n),
                gain(b, n),
            )?;
            let pi = two_block_constant(n, *epsilon, 1.0, 0.0);
            Ok(CatalogEntry {
                multiplier: Multiplier::constant(pi, n, n, domain)?,
                factors: Some(psi),
            })
        }
        CatalogKind::SmallGain { gamma } => {
            require_positive(*gamma, "gamma")?;
            let psi = JSpectralFactors::new(
                gain(*gamma, n),
                StateSpaceSystem::zero(domain, n, m),
                StateSpaceSystem::zero(domain, m, n),
                gain(1.0, m),
            )?;
            let mut pi = DMatrix::<Complex64>::zeros(n + m, n + m);
            for i in 0..n {
                pi[(i, i)] = Complex64::new(gamma * gamma, 0.0);
            }
            for i in n..n + m {
                pi[(i, i)] = Complex64::new(-1.0, 0.0);
            }
            Ok(CatalogEntry {
                multiplier: Multiplier::constant(pi, n, m, domain)?,
                factors: Some(psi),
            })
        }
        CatalogKind::FwSmallGain { weight } => {
            if weight.shape() != (1, 1) {
                return Err(Error::InvalidParameter("weight must be scalar".into()));
            }
            if weight.domain() != domain {
                return Err(Error::DimensionMismatch("weight domain differs".into()));
            }
            weight.require_stable()?;
            let psi = JSpectralFactors::new(
                weight.diag_replicate(n)?,
                StateSpaceSystem::zero(domain, n, m),
                StateSpaceSystem::zero(domain, m, n),
                StateSpaceSystem::identity(domain, m),
            )?;
            Ok(CatalogEntry {
                multiplier: Multiplier::from_factors(psi.clone()),
                factors: Some(psi),
            })
        }
        CatalogKind::FwPassivity { theta } => {
            require_square(n, m)?;
            if theta.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::ThetaOutOfRange);
            }
            let rot = Complex64::from_polar(1.0, *theta);
            let mut pi = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
            for i in 0..n {
                pi[(i, n + i)] = rot;
                pi[(n + i, i)] = rot.conj();
            }
            let factors = if *theta == 0.0 {
                catalog(&CatalogKind::Passivity, n, n, domain)?.factors
            } else {
                None
            };
            Ok(CatalogEntry {
                multiplier: Multiplier::constant(pi, n, n, domain)?,
                factors,
            })
        }
    }
}

/// Complex constant factor blocks of the rotated-passivity multiplier,
/// `Psi = (1/sqrt 2) [e^{j theta1} I, e^{j theta2} I; e^{j theta1} I, -e^{j theta2} I]`
/// with `theta1 = 0`, `theta2 = theta`. Display only: no real realization.
pub fn fw_passivity_factor_display(theta: f64, n: usize) -> [DMatrix<Complex64>; 4] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let e2 = Complex64::from_polar(1.0, theta);
    let id = DMatrix::<Complex64>::identity(n, n);
    [
        id.clone() * h,
        id.clone() * (h * e2),
        id.clone() * h,
        id * (-h * e2),
    ]
}

fn two_block_constant(n: usize, p11: f64, p12: f64, p22: f64) -> DMatrix<Complex64> {
    let mut pi = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        pi[(i, i)] = Complex64::new(p11, 0.0);
        pi[(i, n + i)] = Complex64::new(p12, 0.0);
        pi[(n + i, i)] = Complex64::new(p12, 0.0);
        pi[(n + i, n + i)] = Complex64::new(p22, 0.0);
    }
    pi
}

fn require_square(n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::InvalidParameter(
            "this multiplier family needs square dimensions".into(),
        ));
    }
    Ok(())
}

fn require_positive(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive")));
    }
    Ok(())
}

/// J-spectral factorization of a constant real symmetric multiplier with
/// inertia exactly `(n, m)`: eigendecompose and split by sign.
pub fn factorize_constant(mult: &Multiplier) -> Result<JSpectralFactors> {
    let (n, m) = mult.dims();
    let pi = match mult.form() {
        MultiplierForm::Constant(pi) => pi.clone(),
        MultiplierForm::Factored(_) => {
            return Err(Error::InvalidParameter(
                "factorize applies to constant multipliers; rational ones come with factors".into(),
            ))
        }
    };
    let imag_defect = pi.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag_defect > 1e-12 * (1.0 + sigma_max(&pi)) {
        return Err(Error::InvalidParameter(
            "constant factorization needs a real symmetric multiplier".into(),
        ));
    }
    let size = n + m;
    let real = DMatrix::from_fn(size, size, |i, j| pi[(i, j)].re);
    let sym = (&real + real.transpose()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    let zero_tol = 1e-10 * scale.max(1.0);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut zero = 0;
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if *l > zero_tol {
            pos.push(i);
        } else if *l < -zero_tol {
            neg.push(i);
        } else {
            zero += 1;
        }
    }
    if pos.len() != n || neg.len() != m {
        return Err(Error::WrongInertia {
            expected_pos: n,
            expected_neg: m,
            found_pos: pos.len(),
            found_neg: neg.len(),
            found_zero: zero,
        });
    }
    // Psi rows: sqrt(L+) Q+^T on top, sqrt(-L-) Q-^T below.
    let mut psi = DMatrix::<f64>::zeros(size, size);
    for (row, &i) in pos.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for col in 0..size {
            psi[(row, col)] = s * eig.eigenvectors[(col, i)];
        }
    }
    for (row, &i) in neg.iter().enumerate() {
        let s = (-eig.eigenvalues[i]).sqrt();
        for col in 0..size {
            psi[(n + row, col)] = s * eig.eigenvectors[(col, i)];
        }
    }
    let domain = mult.domain();
    let block = |r0: usize, c0: usize, rows: usize, cols: usize| {
        StateSpaceSystem::gain(domain, psi.view((r0, c0), (rows, cols)).clone_owned())
    };
    let psi4 = psi.view((n, n), (m, m)).clone_owned();
    if m > 0 {
        let smin = sigma_min(&complexify(&psi4));
        if smin < 1e-12 * (1.0 + sigma_max(&complexify(&psi4))) {
            return Err(Error::SingularPsi4);
        }
    }
    JSpectralFactors::new(block(0, 0, n, n), block(0, n, n, m), block(n, 0, m, n), block(n, n, m, m))
}

/// Factor condition lists per theorem profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionProfile {
    T1,
    T2,
    T3,
    T4,
}

impl ConditionProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionProfile::T1 => "T1",
            ConditionProfile::T2 => "T2",
            ConditionProfile::T3 => "T3",
            ConditionProfile::T4 => "T4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(ConditionProfile::T1),
            "t2" => Ok(ConditionProfile::T2),
            "t3" => Ok(ConditionProfile::T3),
            "t4" => Ok(ConditionProfile::T4),
            other => Err(Error::InvalidParameter(format!("unknown profile {other}"))),
        }
    }
}

/// One factor condition with its margin.
#[derive(Debug, Clone)]
pub struct ConditionItem {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

/// Pass/fail per factor condition of a profile.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub profile: ConditionProfile,
    pub items: Vec<ConditionItem>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.name.as_str())
            .collect()
    }
}

/// Checks the factor conditions demanded by a profile.
///
/// Stability of each block and of `psi4^-1`, sign conditions on the induced
/// `Pi11` and `Pi22`, and (profile T1) a uniform lower bound on
/// `sigma_min(psi1 - psi2 psi4^-1 psi3)` standing in for injectivity.
pub fn check_conditions(
    psi: &JSpectralFactors,
    profile: ConditionProfile,
    grid: &FrequencyGrid,
) -> Result<ConditionReport> {
    let mut items = Vec::new();
    for (name, sys) in [
        ("psi1_stable", &psi.psi1),
        ("psi2_stable", &psi.psi2),
        ("psi3_stable", &psi.psi3),
        ("psi4_stable", &psi.psi4),
    ] {
        let s = sys.is_stable();
        items.push(ConditionItem {
            name: name.into(),
            passed: s.stable,
            margin: s.margin,
        });
    }
    let psi4_inv = psi.psi4.inverse();
    match &psi4_inv {
        Ok(inv) => {
            let s = inv.is_stable();
            items.push(ConditionItem {
                name: "psi4_inverse_stable".into(),
                passed: s.stable,
                margin: s.margin,
            });
        }
        Err(_) => items.push(ConditionItem {
            name: "psi4_inverse_stable".into(),
            passed: false,
            margin: f64::NEG_INFINITY,
        }),
    }
    if profile == ConditionProfile::T1 {
        let margin = match &psi4_inv {
            Ok(inv) => {
                let omega_sys = psi
                    .psi1
                    .sub(&psi.psi2.series(inv)?.series(&psi.psi3)?)?;
                grid_minimum(grid, |w| {
                    omega_sys
                        .evaluate_boundary(w)
                        .map(|v| sigma_min(&v))
                        .unwrap_or(f64::INFINITY)
                })
                .value
            }
            Err(_) => f64::NEG_INFINITY,
        };
        items.push(ConditionItem {
            name: "injectivity".into(),
            passed: margin > STRICT_TOL,
            margin,
        });
    }
    // Pi11 = psi1~ psi1 - psi3~ psi3 >= 0 on the boundary.
    let p11_min = grid_minimum(grid, |w| {
        let v1 = psi.psi1.evaluate_boundary(w);
        let v3 = psi.psi3.evaluate_boundary(w);
        match (v1, v3) {
            (Ok(p1), Ok(p3)) => lambda_min(&(p1.adjoint() * &p1 - p3.adjoint() * &p3)),
            _ => f64::INFINITY,
        }
    });
    items.push(ConditionItem {
        name: "pi11_psd".into(),
        passed: p11_min.value >= -STRICT_TOL,
        margin: p11_min.value,
    });
    // Pi22 = psi2~ psi2 - psi4~ psi4, nonpositive (T1/T3/T4) or negative (T2).
    let p22_max = grid_maximum(grid, |w| {
        let v2 = psi.psi2.evaluate_boundary(w);
        let v4 = psi.psi4.evaluate_boundary(w);
        match (v2, v4) {
            (Ok(p2), Ok(p4)) => lambda_max(&(p2.adjoint() * &p2 - p4.adjoint() * &p4)),
            _ => f64::NEG_INFINITY,
        }
    });
    let (name, passed) = match profile {
        ConditionProfile::T2 => ("pi22_nd", -p22_max.value > STRICT_TOL),
        _ => ("pi22_nsd", -p22_max.value >= -STRICT_TOL),
    };
    items.push(ConditionItem {
        name: name.into(),
        passed,
        margin: -p22_max.value,
    });
    if profile == ConditionProfile::T4 {
        // Rational factors are continuous on the boundary by construction.
        items.push(ConditionItem {
            name: "boundary_continuity".into(),
            passed: true,
            margin: f64::INFINITY,
        });
    }
    Ok(ConditionReport { profile, items })
}

/// Frequency-weighted small-gain test on the plant side:
/// `sigma_max(G1(lambda)) < 1 / |w(lambda)|^2` on the boundary.
pub fn fw_smallgain_check(
    g1: &StateSpaceSystem,
    weight: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<MembershipVerdict> {
    g1.require_stable()?;
    weight.require_stable()?;
    if weight.shape() != (1, 1) {
        return Err(Error::InvalidParameter("weight must be scalar".into()));
    }
    // A weight that dies at a finite boundary point makes the uncertainty
    // set collapse there; the compactification sentinel is exempt (a strictly
    // proper weight rolls off, leaving no constraint at infinity).
    for w in grid.points().iter().filter(|w| w.is_finite()) {
        let val = weight.evaluate_boundary(*w)?[(0, 0)].norm();
        if val < 1e-12 {
            return Err(Error::WeightVanishes(*w));
        }
    }
    let ext = grid_minimum(grid, |w| {
        let gv = g1.evaluate_boundary(w).map(|m| sigma_max(&m));
        let wv = weight.evaluate_boundary(w).map(|m| m[(0, 0)].norm());
        match (gv, wv) {
            (Ok(s), Ok(a)) if a > 1e-12 => 1.0 / (a * a) - s,
            _ => f64::INFINITY,
        }
    });
    Ok(MembershipVerdict {
        set_id: SetId::G1Strict,
        holds: ext.value > STRICT_TOL,
        margin: ext.value,
        worst_frequency: ext.omega,
        grid_points: grid.len(),
    })
}

/// Rotated-passivity test with a constant angle.
///
/// Uncertainty side: `e^{j theta} G + e^{-j theta} G^* >= 0` (non-strict).
/// Plant side: `-(e^{-j theta} G + e^{j theta} G^*) > 0` (strict).
pub fn fw_passivity_check(
    sys: &StateSpaceSystem,
    theta: f64,
    side: QSide,
    grid: &FrequencyGrid,
) -> Result<MembershipVerdict> {
    if theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::ThetaOutOfRange);
    }
    if !sys.is_square() {
        return Err(Error::NotSquare {
            ny: sys.noutputs(),
            nu: sys.ninputs(),
        });
    }
    sys.require_stable()?;
    let rot = Complex64::from_polar(1.0, theta);
    let ext = grid_minimum(grid, |w| {
        sys.evaluate_boundary(w)
            .map(|g| {
                let m = match side {
                    QSide::Uncertainty => &g * rot + g.adjoint() * rot.conj(),
                    QSide::Plant => -(&g * rot.conj() + g.adjoint() * rot),
                };
                lambda_min(&m)
            })
            .unwrap_or(f64::INFINITY)
    });
    let (set_id, holds) = match side {
        QSide::Uncertainty => (SetId::G2Nonstrict, ext.value >= -STRICT_TOL),
        QSide::Plant => (SetId::G1Strict, ext.value > STRICT_TOL),
    };
    Ok(MembershipVerdict {
        set_id,
        holds,
        margin: ext.value,
        worst_frequency: ext.omega,
        grid_points: grid.len(),
    })
}

/// Maximum reconstruction residual `||Psi^* J Psi - Pi||` over the grid,
/// relative to `1 + ||Pi||`.
pub fn reconstruction_residual(
    psi: &JSpectralFactors,
    mult: &Multiplier,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in grid.points() {
        let lhs = psi.pi_at(*w)?;
        let rhs = mult.pi_at(*w)?;
        let denom = 1.0 + sigma_max(&rhs);
        worst = worst.max(sigma_max(&(lhs - rhs)) / denom);
    }
    Ok(worst)
}
