//! Constructive synthesis of destabilizing complementary-IQC uncertainties.
//!
//! Given a stable plant rejected by the plant-side IQC of a factored
//! multiplier, the chain-scattering transform `M = (psi1 G1 + psi2) Xi^-1`
//! with `Xi = psi3 G1 + psi4` reduces the problem to small gain. Either `Xi`
//! fails to be boundedly invertible and `G2 = -psi4^-1 psi3` closes a singular
//! loop directly (case A), or `||M|| >= 1` and a rank-one all-pass
//! perturbation `Delta` is lifted back through
//! `G2 = -psi4^-1 (I - Delta psi2 psi4^-1)^-1 (psi3 - Delta psi1)` (case B).
//! When only `||M|| = 1` is available, the scaled family `Delta_rho = rho
//! Delta` yields uncertainties whose closed-loop gains grow without bound as
//! `rho -> 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis::{hinf_norm, HINF_TOL_CT, HINF_TOL_DT};
use crate::error::{Error, Result};
use crate::grid::{grid_maximum, grid_minimum, FrequencyGrid};
use crate::lti::{
    sigma_max, sigma_min, BoundaryPoint, Domain, StateSpaceSystem, STABILITY_TOL,
};
use crate::multiplier::{
    check_conditions, membership, ConditionProfile, JSpectralFactors, Multiplier, SetId,
};
use crate::smallgain::{peak_gain, rank_one_delta, PeakCertificate};

/// Dimensionless band around `beta = 1` inside which the strict branch is
/// numerically indistinguishable from the uniform-stability branch.
pub const BETA_EDGE: f64 = 1e-6;

/// Default scale ladder for the uniform-stability family.
pub const DEFAULT_RHO_LADDER: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

/// Residual budget of the certificate checks, relative to scale.
pub const VERIFY_TOL: f64 = 1e-6;

/// Synthesis profiles: strict uncertainty set with a non-strict plant test,
/// or the uniform-stability variant with both roles swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisProfile {
    T1,
    T3,
}

impl SynthesisProfile {
    pub fn condition_profile(&self) -> ConditionProfile {
        match self {
            SynthesisProfile::T1 => ConditionProfile::T1,
            SynthesisProfile::T3 => ConditionProfile::T3,
        }
    }

    /// Plant-side set whose membership must fail before synthesis starts.
    pub fn plant_set(&self) -> SetId {
        match self {
            SynthesisProfile::T1 => SetId::G1Nonstrict,
            SynthesisProfile::T3 => SetId::G1Strict,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SynthesisProfile::T1 => "T1",
            SynthesisProfile::T3 => "T3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(SynthesisProfile::T1),
            "t3" => Ok(SynthesisProfile::T3),
            other => Err(Error::InvalidParameter(format!(
                "synthesis profile must be t1 or t3, got {other}"
            ))),
        }
    }
}

/// Outcome of the chain-scattering transform.
#[derive(Debug, Clone)]
pub enum ChainScattering {
    /// `Xi` is boundedly invertible; `M = (psi1 G1 + psi2) Xi^-1` is stable.
    Invertible {
        xi: StateSpaceSystem,
        m: StateSpaceSystem,
    },
    /// `Xi` loses rank on the closed instability region (case A trigger).
    NotInvertible { xi: StateSpaceSystem },
}

/// Chain-scattering transform of a stable plant through the factors.
///
/// `Xi = psi3 G1 + psi4` is not boundedly invertible when its feedthrough is
/// singular, when the inverse realization carries an unstable pole, or when
/// `sigma_min(Xi)` collapses on the refined grid.
pub fn chain_scatter(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    grid: &FrequencyGrid,
) -> Result<ChainScattering> {
    g1.require_stable()?;
    let (n, m) = psi.signature();
    if g1.shape() != (n, m) {
        return Err(Error::DimensionMismatch(format!(
            "plant must be {n}x{m} for these factors, got {:?}",
            g1.shape()
        )));
    }
    let xi = psi.psi3.series(g1)?.add(&psi.psi4)?;
    let xi_inv = match xi.inverse() {
        Ok(inv) => inv,
        Err(Error::NotInvertible(_)) | Err(Error::NotSquare { .. }) => {
            return Ok(ChainScattering::NotInvertible { xi })
        }
        Err(e) => return Err(e),
    };
    if !xi_inv.is_stable().stable {
        return Ok(ChainScattering::NotInvertible { xi });
    }
    let floor = grid_minimum(grid, |w| {
        xi.evaluate_boundary(w).map(|v| sigma_min(&v)).unwrap_or(f64::INFINITY)
    });
    if floor.value < 1e-8 {
        return Ok(ChainScattering::NotInvertible { xi });
    }
    let m_sys = psi.psi1.series(g1)?.add(&psi.psi2)?.series(&xi_inv)?;
    Ok(ChainScattering::Invertible { xi, m: m_sys })
}

/// Location of a closed-loop singularity.
#[derive(Debug, Clone, Copy)]
pub struct SingularPoint {
    /// Boundary parameter when the point lies on the stability boundary.
    pub omega: Option<f64>,
    /// Evaluation point (finite complex value or the point at infinity).
    pub lambda: BoundaryPoint,
}

impl SingularPoint {
    pub fn on_boundary(domain: Domain, omega: f64) -> Self {
        SingularPoint {
            omega: Some(omega),
            lambda: domain.boundary_lambda(omega),
        }
    }

    pub fn exterior(lambda: Complex64) -> Self {
        SingularPoint {
            omega: None,
            lambda: BoundaryPoint::Complex(lambda),
        }
    }

    pub fn at_infinity() -> Self {
        SingularPoint {
            omega: None,
            lambda: BoundaryPoint::Infinity,
        }
    }
}

/// Which construction produced the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateBranch {
    CaseAPsi4Path,
    CaseBDeltaPath,
    CaseBRhoFamily,
}

impl CertificateBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateBranch::CaseAPsi4Path => "CaseA_Psi4Path",
            CertificateBranch::CaseBDeltaPath => "CaseB_DeltaPath",
            CertificateBranch::CaseBRhoFamily => "CaseB_RhoFamily",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "CaseA_Psi4Path" => Ok(CertificateBranch::CaseAPsi4Path),
            "CaseB_DeltaPath" => Ok(CertificateBranch::CaseBDeltaPath),
            "CaseB_RhoFamily" => Ok(CertificateBranch::CaseBRhoFamily),
            other => Err(Error::InvalidParameter(format!("unknown branch {other}"))),
        }
    }
}

/// One member of the uniform-stability family.
#[derive(Debug, Clone)]
pub struct RhoMember {
    pub rho: f64,
    pub g2: StateSpaceSystem,
    /// `||(I - G2 G1)^-1 G2||`.
    pub gain: f64,
    pub qc_margin: f64,
}

/// Residual diagnostics accompanying a certificate.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// `||M||` when the small-gain path applies.
    pub m_norm: Option<f64>,
    /// Worst-grid residual of `zeta2 = Delta zeta1`.
    pub zeta_identity_residual: f64,
    /// Complementary-set margin of the constructed uncertainty.
    pub qc_margin: f64,
    /// `sigma_min(I - G2 G1)` at the singular point (cases A/B); for the
    /// family, `sigma_min(I - Delta M)` there, the limit the gains chase.
    pub closedloop_singularity_residual: f64,
    /// `(rho, gain)` rows of the family sweep.
    pub gain_table: Option<Vec<(f64, f64)>>,
    /// Set when a strict-profile request fell back to the family branch
    /// because the measured peak sat on the `beta = 1` edge.
    pub downgraded: bool,
}

/// A constructed destabilizing (or gain-exploding) uncertainty with evidence.
#[derive(Debug, Clone)]
pub struct DestabilizationCertificate {
    pub branch: CertificateBranch,
    pub profile: SynthesisProfile,
    /// Complementary set the construction targets.
    pub complementary_set: SetId,
    pub lambda0: SingularPoint,
    pub beta: Option<f64>,
    pub g2: Option<StateSpaceSystem>,
    pub delta: Option<StateSpaceSystem>,
    pub family: Vec<RhoMember>,
    pub diagnostics: Diagnostics,
}

impl DestabilizationCertificate {
    /// The constructed uncertainty: the single `G2`, or the top-`rho` member.
    pub fn primary_g2(&self) -> Option<&StateSpaceSystem> {
        self.g2
            .as_ref()
            .or_else(|| self.family.last().map(|m| &m.g2))
    }
}

/// Builds a certified destabilizer for a plant rejected by the IQC.
pub fn destabilize(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    profile: SynthesisProfile,
    grid: &FrequencyGrid,
    rho_ladder: &[f64],
) -> Result<DestabilizationCertificate> {
    g1.require_stable()?;
    let cond = check_conditions(psi, profile.condition_profile(), grid)?;
    if !cond.all_passed() {
        return Err(Error::ConditionsFailed(cond.failing().join(", ")));
    }
    let verdict = membership(mult, g1, profile.plant_set(), grid)?;
    if verdict.holds {
        return Err(Error::PlantSatisfiesIqc(verdict.margin));
    }
    match chain_scatter(g1, psi, grid)? {
        ChainScattering::NotInvertible { xi } => case_a(g1, psi, mult, profile, grid, &xi),
        ChainScattering::Invertible { xi: _, m } => {
            let peak = peak_gain(&m, grid)?;
            if peak.beta < 1.0 - BETA_EDGE {
                return Err(Error::NumericalFailure(format!(
                    "plant rejected by the IQC but chain gain is only {:.6}",
                    peak.beta
                )));
            }
            match profile {
                SynthesisProfile::T1 if peak.beta > 1.0 + BETA_EDGE => {
                    case_b_single(g1, psi, mult, grid, &m, &peak)
                }
                SynthesisProfile::T1 => {
                    // Peak gain sits on the beta = 1 edge: the strict branch
                    // would need ||Delta|| < 1 exactly there, so fall back to
                    // the scaled family and report the downgrade.
                    case_b_family(g1, psi, mult, profile, grid, &m, &peak, rho_ladder, true)
                }
                SynthesisProfile::T3 => {
                    case_b_family(g1, psi, mult, profile, grid, &m, &peak, rho_ladder, false)
                }
            }
        }
    }
}

/// `G2 = -psi4^-1 (I - Delta psi2 psi4^-1)^-1 (psi3 - Delta psi1)`.
fn build_g2(psi: &JSpectralFactors, delta: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    let (_, m) = psi.signature();
    let inv4 = psi.psi4.inverse()?;
    let t = delta.series(&psi.psi2.series(&inv4)?)?;
    let s = StateSpaceSystem::identity(t.domain(), m).sub(&t)?;
    let s_inv = s.inverse()?;
    let rhs = psi.psi3.sub(&delta.series(&psi.psi1)?)?;
    Ok(inv4.series(&s_inv.series(&rhs)?)?.negate())
}

fn case_a(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    profile: SynthesisProfile,
    grid: &FrequencyGrid,
    xi: &StateSpaceSystem,
) -> Result<DestabilizationCertificate> {
    let inv4 = psi.psi4.inverse()?;
    let g2 = inv4.series(&psi.psi3)?.negate();
    require_constructed_stable(&g2)?;
    let lambda0 = locate_rank_loss(xi, grid)?;
    // The complementary margin comes from qc(G2) = Omega^* Omega with
    // Omega = psi1 - psi2 psi4^-1 psi3.
    let omega_sys = psi.psi1.sub(&psi.psi2.series(&inv4)?.series(&psi.psi3)?)?;
    let omega_floor = grid_minimum(grid, |w| {
        omega_sys
            .evaluate_boundary(w)
            .map(|v| sigma_min(&v))
            .unwrap_or(f64::INFINITY)
    });
    let qc_margin = omega_floor.value * omega_floor.value;
    let zeta2 = psi.psi3.add(&psi.psi4.series(&g2)?)?;
    let zeta_residual = grid_maximum(grid, |w| {
        zeta2.evaluate_boundary(w).map(|v| sigma_max(&v)).unwrap_or(0.0)
    })
    .value;
    let residual = loop_residual_at(g1, &g2, &lambda0)?;
    let complementary_set = match profile {
        SynthesisProfile::T1 => SetId::G2Strict,
        SynthesisProfile::T3 => SetId::G2Nonstrict,
    };
    let _ = mult;
    Ok(DestabilizationCertificate {
        branch: CertificateBranch::CaseAPsi4Path,
        profile,
        complementary_set,
        lambda0,
        beta: None,
        g2: Some(g2),
        delta: None,
        family: Vec::new(),
        diagnostics: Diagnostics {
            m_norm: None,
            zeta_identity_residual: zeta_residual,
            qc_margin,
            closedloop_singularity_residual: residual,
            gain_table: None,
            downgraded: false,
        },
    })
}

fn case_b_single(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    grid: &FrequencyGrid,
    m: &StateSpaceSystem,
    peak: &PeakCertificate,
) -> Result<DestabilizationCertificate> {
    let delta = rank_one_delta(m, peak)?;
    let g2 = build_g2(psi, &delta)?;
    require_constructed_stable(&g2)?;
    let lambda0 = SingularPoint::on_boundary(g1.domain(), peak.omega0);
    let qc = membership(mult, &g2, SetId::G2Strict, grid)?;
    let zeta_residual = zeta_identity_residual(psi, &g2, &delta, grid)?;
    let residual = loop_residual_at(g1, &g2, &lambda0)?;
    Ok(DestabilizationCertificate {
        branch: CertificateBranch::CaseBDeltaPath,
        profile: SynthesisProfile::T1,
        complementary_set: SetId::G2Strict,
        lambda0,
        beta: Some(peak.beta),
        g2: Some(g2),
        delta: Some(delta),
        family: Vec::new(),
        diagnostics: Diagnostics {
            m_norm: Some(peak.beta),
            zeta_identity_residual: zeta_residual,
            qc_margin: qc.margin,
            closedloop_singularity_residual: residual,
            gain_table: None,
            downgraded: false,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn case_b_family(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    profile: SynthesisProfile,
    grid: &FrequencyGrid,
    m: &StateSpaceSystem,
    peak: &PeakCertificate,
    rho_ladder: &[f64],
    downgraded: bool,
) -> Result<DestabilizationCertificate> {
    let delta = rank_one_delta(m, peak)?;
    let members = family_members(g1, psi, mult, grid, &delta, rho_ladder)?;
    let lambda0 = SingularPoint::on_boundary(g1.domain(), peak.omega0);
    let last = members
        .last()
        .ok_or_else(|| Error::InvalidParameter("rho ladder is empty".into()))?;
    let zeta_residual = zeta_identity_residual(psi, &last.g2, &delta.scale(last.rho), grid)?;
    let qc_margin = members
        .iter()
        .map(|r| r.qc_margin)
        .fold(f64::INFINITY, f64::min);
    // The family chases the singularity of I - Delta M at the peak.
    let dm = delta.series(m)?;
    let gap = identity_minus_at(&dm, &lambda0)?;
    let gain_table = members.iter().map(|r| (r.rho, r.gain)).collect();
    Ok(DestabilizationCertificate {
        branch: CertificateBranch::CaseBRhoFamily,
        profile,
        complementary_set: SetId::G2Nonstrict,
        lambda0,
        beta: Some(peak.beta),
        g2: None,
        delta: Some(delta),
        family: members,
        diagnostics: Diagnostics {
            m_norm: Some(peak.beta),
            zeta_identity_residual: zeta_residual,
            qc_margin,
            closedloop_singularity_residual: gap,
            gain_table: Some(gain_table),
            downgraded,
        },
    })
}

fn family_members(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    grid: &FrequencyGrid,
    delta: &StateSpaceSystem,
    rho_ladder: &[f64],
) -> Result<Vec<RhoMember>> {
    let mut members = Vec::with_capacity(rho_ladder.len());
    for rho in rho_ladder {
        if !(*rho > 0.0 && *rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho values must lie in (0, 1), got {rho}"
            )));
        }
        let g2 = build_g2(psi, &delta.scale(*rho))?;
        require_constructed_stable(&g2)?;
        let qc = membership(mult, &g2, SetId::G2Nonstrict, grid)?;
        if !qc.holds {
            return Err(Error::NumericalFailure(format!(
                "family member rho = {rho} left the complementary set (margin {:.3e})",
                qc.margin
            )));
        }
        let gain = family_gain(g1, &g2, grid)?;
        members.push(RhoMember {
            rho: *rho,
            g2,
            gain,
            qc_margin: qc.margin,
        });
    }
    Ok(members)
}

/// `||(I - G2 G1)^-1 G2||`, the loop-gain entry driven to infinity.
fn family_gain(
    g1: &StateSpaceSystem,
    g2: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let m = g2.noutputs();
    let inner = StateSpaceSystem::identity(g1.domain(), m).sub(&g2.series(g1)?)?;
    let sys = inner.inverse()?.series(g2)?;
    let tol = match g1.domain() {
        Domain::Ct => HINF_TOL_CT,
        Domain::Dt => HINF_TOL_DT,
    };
    Ok(hinf_norm(&sys, grid, tol)?.gamma)
}

/// Sweep of the family gains over a caller-supplied ladder.
pub fn divergence_sweep(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    rho_ladder: &[f64],
    grid: &FrequencyGrid,
) -> Result<Vec<RhoMember>> {
    let m = match chain_scatter(g1, psi, grid)? {
        ChainScattering::Invertible { m, .. } => m,
        ChainScattering::NotInvertible { .. } => {
            return Err(Error::InvalidParameter(
                "chain transform is not invertible; the scaled family needs the small-gain path"
                    .into(),
            ))
        }
    };
    let peak = peak_gain(&m, grid)?;
    if peak.beta < 1.0 - BETA_EDGE {
        return Err(Error::InvalidParameter(format!(
            "chain gain {:.6} is below one; nothing diverges",
            peak.beta
        )));
    }
    let delta = rank_one_delta(&m, &peak)?;
    family_members(g1, psi, mult, grid, &delta, rho_ladder)
}

/// One verification item: a named residual or margin with its budget.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Independent re-derivation of every certificate claim.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub items: Vec<CheckItem>,
}

impl VerificationReport {
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

/// Recomputes, from scratch, the five facts a certificate asserts: stability
/// of the uncertainty, its complementary-set membership, the `zeta2 = Delta
/// zeta1` identity, the chain identity
/// `(I - Delta M) Xi = (psi4 - Delta psi2)(I - G2 G1)`, and the closed-loop
/// singularity at the certified point.
pub fn verify_certificate(
    cert: &DestabilizationCertificate,
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    mult: &Multiplier,
    grid: &FrequencyGrid,
) -> Result<VerificationReport> {
    let mut items = Vec::new();
    let zero_delta = StateSpaceSystem::zero(
        g1.domain(),
        psi.signature().1,
        psi.signature().0,
    );
    let pairs: Vec<(f64, StateSpaceSystem, StateSpaceSystem)> = match cert.branch {
        CertificateBranch::CaseBRhoFamily => {
            let delta = cert
                .delta
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("family certificate lacks delta".into()))?;
            cert.family
                .iter()
                .map(|r| (r.rho, r.g2.clone(), delta.scale(r.rho)))
                .collect()
        }
        _ => {
            let g2 = cert
                .g2
                .clone()
                .ok_or_else(|| Error::InvalidParameter("certificate lacks g2".into()))?;
            let delta = cert.delta.clone().unwrap_or(zero_delta.clone());
            vec![(1.0, g2, delta)]
        }
    };

    // (i) stability of every constructed uncertainty
    let mut min_margin = f64::INFINITY;
    for (_, g2, _) in &pairs {
        min_margin = min_margin.min(g2.is_stable().margin);
    }
    items.push(CheckItem {
        name: "g2_stable".into(),
        value: min_margin,
        bound: STABILITY_TOL,
        passed: min_margin > STABILITY_TOL,
    });

    // (ii) complementary membership at the strictness the branch targets
    let mut worst_margin = f64::INFINITY;
    let mut holds = true;
    for (_, g2, _) in &pairs {
        let v = membership(mult, g2, cert.complementary_set, grid)?;
        worst_margin = worst_margin.min(v.margin);
        holds &= v.holds;
    }
    items.push(CheckItem {
        name: "complementary_membership".into(),
        value: worst_margin,
        bound: 0.0,
        passed: holds,
    });

    // (iii) zeta identity
    let mut worst_zeta: f64 = 0.0;
    for (_, g2, delta) in &pairs {
        worst_zeta = worst_zeta.max(zeta_identity_residual(psi, g2, delta, grid)?);
    }
    items.push(CheckItem {
        name: "zeta_identity".into(),
        value: worst_zeta,
        bound: VERIFY_TOL,
        passed: worst_zeta <= VERIFY_TOL,
    });

    // (iv) chain identity; needs M when a Delta is in play
    let m_sys = match chain_scatter(g1, psi, grid)? {
        ChainScattering::Invertible { m, .. } => Some(m),
        ChainScattering::NotInvertible { .. } => None,
    };
    let xi = psi.psi3.series(g1)?.add(&psi.psi4)?;
    let mut worst_chain: f64 = 0.0;
    let mut chain_ok = true;
    for (_, g2, delta) in &pairs {
        match chain_identity_residual(g1, psi, &xi, m_sys.as_ref(), g2, delta, grid) {
            Ok(r) => worst_chain = worst_chain.max(r),
            Err(_) => chain_ok = false,
        }
    }
    items.push(CheckItem {
        name: "chain_identity".into(),
        value: worst_chain,
        bound: VERIFY_TOL,
        passed: chain_ok && worst_chain <= VERIFY_TOL,
    });

    // (v) singularity at lambda0
    let residual = match cert.branch {
        CertificateBranch::CaseBRhoFamily => {
            let delta = cert.delta.as_ref().expect("family carries delta");
            match &m_sys {
                Some(m) => identity_minus_at(&delta.series(m)?, &cert.lambda0)?,
                None => f64::INFINITY,
            }
        }
        _ => {
            let g2 = cert.g2.as_ref().expect("single certificate carries g2");
            loop_residual_at(g1, g2, &cert.lambda0)?
        }
    };
    items.push(CheckItem {
        name: "closed_loop_singularity".into(),
        value: residual,
        bound: VERIFY_TOL,
        passed: residual <= VERIFY_TOL,
    });

    Ok(VerificationReport { items })
}

/// Max-grid residual of `zeta2 - Delta zeta1` relative to `1 + ||zeta1||`.
fn zeta_identity_residual(
    psi: &JSpectralFactors,
    g2: &StateSpaceSystem,
    delta: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let zeta1 = psi.psi1.add(&psi.psi2.series(g2)?)?;
    let zeta2 = psi.psi3.add(&psi.psi4.series(g2)?)?;
    let mut worst: f64 = 0.0;
    for w in grid.points() {
        let z1 = zeta1.evaluate_boundary(*w)?;
        let z2 = zeta2.evaluate_boundary(*w)?;
        let dv = delta.evaluate_boundary(*w)?;
        let scale = 1.0 + sigma_max(&z1);
        worst = worst.max(sigma_max(&(z2 - dv * z1)) / scale);
    }
    Ok(worst)
}

/// Max-grid residual of `(I - Delta M) Xi - (psi4 - Delta psi2)(I - G2 G1)`.
fn chain_identity_residual(
    g1: &StateSpaceSystem,
    psi: &JSpectralFactors,
    xi: &StateSpaceSystem,
    m_sys: Option<&StateSpaceSystem>,
    g2: &StateSpaceSystem,
    delta: &StateSpaceSystem,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let mm = g2.noutputs();
    let delta_is_zero = delta.order() == 0 && delta.d().iter().all(|x| *x == 0.0);
    let mut worst: f64 = 0.0;
    for w in grid.points() {
        let xiv = xi.evaluate_boundary(*w)?;
        let dv = delta.evaluate_boundary(*w)?;
        let lhs_factor = if delta_is_zero {
            DMatrix::identity(dv.nrows(), dv.nrows())
        } else {
            let m_sys = m_sys.ok_or_else(|| {
                Error::NumericalFailure("chain identity needs M for a nonzero delta".into())
            })?;
            let mv = m_sys.evaluate_boundary(*w)?;
            DMatrix::identity(dv.nrows(), dv.nrows()) - &dv * mv
        };
        let lhs = lhs_factor * &xiv;
        let p4 = psi.psi4.evaluate_boundary(*w)?;
        let p2 = psi.psi2.evaluate_boundary(*w)?;
        let g2v = g2.evaluate_boundary(*w)?;
        let g1v = g1.evaluate_boundary(*w)?;
        let rhs = (p4 - &dv * p2) * (DMatrix::identity(mm, mm) - g2v * g1v);
        let scale = 1.0 + sigma_max(&xiv);
        worst = worst.max(sigma_max(&(lhs - rhs)) / scale);
    }
    Ok(worst)
}

/// `sigma_min(I - G2 G1)` at a point, relative to `1 + ||G2 G1||`.
fn loop_residual_at(
    g1: &StateSpaceSystem,
    g2: &StateSpaceSystem,
    at: &SingularPoint,
) -> Result<f64> {
    let g1v = g1.evaluate_point(&at.lambda)?;
    let g2v = g2.evaluate_point(&at.lambda)?;
    let prod = g2v * g1v;
    let m = prod.nrows();
    let scale = 1.0 + sigma_max(&prod);
    Ok(sigma_min(&(DMatrix::identity(m, m) - prod)) / scale)
}

/// `sigma_min(I - X)` at a point for an already-composed map `X`.
fn identity_minus_at(x: &StateSpaceSystem, at: &SingularPoint) -> Result<f64> {
    let xv = x.evaluate_point(&at.lambda)?;
    let m = xv.nrows();
    let scale = 1.0 + sigma_max(&xv);
    Ok(sigma_min(&(DMatrix::identity(m, m) - xv)) / scale)
}

fn require_constructed_stable(g2: &StateSpaceSystem) -> Result<()> {
    let s = g2.is_stable();
    if !s.stable {
        return Err(Error::NumericalFailure(format!(
            "constructed uncertainty came out unstable (margin {:.3e})",
            s.margin
        )));
    }
    Ok(())
}

/// Hunts the point where `Xi` loses rank: the refined boundary minimum of
/// `sigma_min(Xi)`, exterior poles of the inverse realization, and the point
/// at infinity when the feedthrough is singular.
fn locate_rank_loss(xi: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<SingularPoint> {
    let mut best: Option<(f64, SingularPoint)> = None;
    let mut consider = |value: f64, point: SingularPoint| {
        if best.as_ref().map(|(v, _)| value < *v).unwrap_or(true) {
            best = Some((value, point));
        }
    };
    let boundary = grid_minimum(grid, |w| {
        xi.evaluate_boundary(w).map(|v| sigma_min(&v)).unwrap_or(f64::INFINITY)
    });
    consider(
        boundary.value,
        SingularPoint::on_boundary(xi.domain(), boundary.omega),
    );
    let d = crate::lti::complexify(xi.d());
    let d_floor = sigma_min(&d);
    if d_floor < 1e-9 * (1.0 + sigma_max(&d)) {
        let point = match xi.domain() {
            Domain::Ct => SingularPoint::on_boundary(Domain::Ct, f64::INFINITY),
            Domain::Dt => SingularPoint::at_infinity(),
        };
        consider(d_floor, point);
    } else if let Ok(inv) = xi.inverse() {
        for pole in inv.poles() {
            let exterior = match xi.domain() {
                Domain::Ct => pole.re >= -STABILITY_TOL,
                Domain::Dt => pole.norm() >= 1.0 - STABILITY_TOL,
            };
            if exterior {
                if let Ok(v) = xi.evaluate(pole) {
                    consider(sigma_min(&v), SingularPoint::exterior(pole));
                }
            }
        }
    }
    Ok(best.expect("at least the boundary candidate exists").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier::{catalog, CatalogKind};
    use approx::assert_abs_diff_eq;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::default_with_points(Domain::Ct, 200)
    }

    fn passivity(n: usize) -> (Multiplier, JSpectralFactors) {
        let e = catalog(&CatalogKind::Passivity, n, n, Domain::Ct).unwrap();
        (e.multiplier, e.factors.unwrap())
    }

    #[test]
    fn chain_scatter_scalar_traces() {
        let (_, psi) = passivity(1);
        let g = grid();
        // plant 0.5: Xi = -0.5/sqrt2, M = -3
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        match chain_scatter(&half, &psi, &g).unwrap() {
            ChainScattering::Invertible { m, .. } => {
                assert_abs_diff_eq!(m.d()[(0, 0)], -3.0, epsilon = 1e-12);
            }
            _ => panic!("expected invertible chain"),
        }
        // plant 1: Xi = 0, case A trigger
        let one = StateSpaceSystem::scalar_gain(Domain::Ct, 1.0);
        assert!(matches!(
            chain_scatter(&one, &psi, &g).unwrap(),
            ChainScattering::NotInvertible { .. }
        ));
        // plant 0: M = -1
        let zero = StateSpaceSystem::zero(Domain::Ct, 1, 1);
        match chain_scatter(&zero, &psi, &g).unwrap() {
            ChainScattering::Invertible { m, .. } => {
                assert_abs_diff_eq!(m.d()[(0, 0)], -1.0, epsilon = 1e-12);
            }
            _ => panic!("expected invertible chain"),
        }
    }

    #[test]
    fn worked_converse_passivity_example() {
        // plant gain 0.5 rejected by the non-strict plant set; beta = 3,
        // Delta = -1/3, G2 = 2, singular static loop, qc = 4
        let (mult, psi) = passivity(1);
        let g = grid();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let cert = destabilize(
            &half,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseBDeltaPath);
        assert_abs_diff_eq!(cert.beta.unwrap(), 3.0, epsilon = 1e-9);
        let delta = cert.delta.as_ref().unwrap();
        assert_abs_diff_eq!(delta.d()[(0, 0)], -1.0 / 3.0, epsilon = 1e-12);
        let g2 = cert.g2.as_ref().unwrap();
        let g2_val = g2.evaluate_boundary(0.0).unwrap()[(0, 0)].re;
        assert_abs_diff_eq!(g2_val, 2.0, epsilon = 1e-12);
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-12);
        assert_abs_diff_eq!(cert.diagnostics.qc_margin, 4.0, epsilon = 1e-9);
        assert!(cert.diagnostics.zeta_identity_residual <= 1e-12);

        let report = verify_certificate(&cert, &half, &psi, &mult, &g).unwrap();
        assert!(report.all_passed(), "failing: {:?}", report.failing());
    }

    #[test]
    fn case_a_unit_plant() {
        let (mult, psi) = passivity(1);
        let g = grid();
        let one = StateSpaceSystem::scalar_gain(Domain::Ct, 1.0);
        let cert = destabilize(
            &one,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseAPsi4Path);
        let g2 = cert.g2.as_ref().unwrap();
        assert_abs_diff_eq!(g2.d()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.diagnostics.qc_margin, 2.0, epsilon = 1e-9);
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-12);
        let report = verify_certificate(&cert, &one, &psi, &mult, &g).unwrap();
        assert!(report.all_passed(), "failing: {:?}", report.failing());
    }

    #[test]
    fn satisfied_plant_is_rejected() {
        let (mult, psi) = passivity(1);
        let g = grid();
        let neg = StateSpaceSystem::scalar_gain(Domain::Ct, -0.5);
        let err = destabilize(
            &neg,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PlantSatisfiesIqc(_)));
    }

    #[test]
    fn scalar_divergence_table() {
        // plant 0.5: G2(rho) = (3+rho)/(3-rho), gain = (3+rho)/(1.5 (1-rho))
        let (mult, psi) = passivity(1);
        let g = grid();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let rows = divergence_sweep(&half, &psi, &mult, &[0.5, 0.9, 0.99], &g).unwrap();
        let expect = |rho: f64| (3.0 + rho) / (1.5 * (1.0 - rho));
        assert_abs_diff_eq!(rows[0].gain, expect(0.5), epsilon = 1e-9);
        assert_abs_diff_eq!(rows[0].gain, 14.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rows[1].gain, expect(0.9), epsilon = 1e-9);
        assert_abs_diff_eq!(rows[2].gain, expect(0.99), epsilon = 2e-7);
        assert!(rows[2].gain > 10.0 * rows[0].gain);
        for r in &rows {
            let v = r.g2.evaluate_boundary(0.0).unwrap()[(0, 0)].re;
            assert_abs_diff_eq!(v, (3.0 + r.rho) / (3.0 - r.rho), epsilon = 1e-10);
            assert!(r.qc_margin >= 0.0);
        }
    }

    #[test]
    fn rho_zero_limit_matches_case_a_gain() {
        // As rho -> 0 the family member tends to -psi4^-1 psi3 = 1 and the
        // loop gain tends to 1/(1 - 0.5) = 2.
        let (mult, psi) = passivity(1);
        let g = grid();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let rows = divergence_sweep(&half, &psi, &mult, &[1e-9], &g).unwrap();
        assert_abs_diff_eq!(rows[0].gain, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn uniform_family_for_marginally_passive_plant() {
        // plant -s/(s+1) (negated convention of a passive, not strictly
        // passive system): strict membership fails, family gains escalate
        let (mult, psi) = passivity(1);
        let g = grid();
        let plant = StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 1.0, -1.0);
        let cert = destabilize(
            &plant,
            &psi,
            &mult,
            SynthesisProfile::T3,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseBRhoFamily);
        let gains: Vec<f64> = cert.family.iter().map(|r| r.gain).collect();
        for w in gains.windows(2) {
            assert!(w[1] > w[0]);
        }
        // closed form (1+rho)/(1-rho), within the hinf certification accuracy
        for r in &cert.family {
            let want = (1.0 + r.rho) / (1.0 - r.rho);
            assert!((r.gain - want).abs() <= 1e-5 * want, "{} vs {want}", r.gain);
            assert!(r.g2.is_stable().stable);
        }
        let report = verify_certificate(&cert, &plant, &psi, &mult, &g).unwrap();
        assert!(report.all_passed(), "failing: {:?}", report.failing());
    }

    #[test]
    fn worked_example_mirror_plant() {
        // plant gain 2: M = 3, Delta = 1/3, G2 = 1/2, singular static loop
        let (mult, psi) = passivity(1);
        let g = grid();
        let two = StateSpaceSystem::scalar_gain(Domain::Ct, 2.0);
        let cert = destabilize(
            &two,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_abs_diff_eq!(cert.beta.unwrap(), 3.0, epsilon = 1e-9);
        let g2 = cert.g2.as_ref().unwrap();
        let v = g2.evaluate_boundary(0.0).unwrap()[(0, 0)].re;
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-12);
    }

    #[test]
    fn beta_on_the_edge_downgrades_to_family() {
        // a barely-rejected plant puts the chain gain within the beta = 1
        // band; the strict branch falls back to the scaled family
        let (mult, psi) = passivity(1);
        let g = grid();
        let tiny = StateSpaceSystem::scalar_gain(Domain::Ct, 2e-7);
        let cert = destabilize(
            &tiny,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseBRhoFamily);
        assert!(cert.diagnostics.downgraded);
        for r in &cert.family {
            assert!(r.qc_margin >= 0.0);
            assert!(r.g2.is_stable().stable);
        }
    }

    #[test]
    fn case_a_exterior_zero_is_located() {
        // plant 3/(s+1): Xi = (G1 - 1)/sqrt 2 has an exterior zero at s = 2,
        // with an invertible feedthrough; the inverse realization is unstable
        let (mult, psi) = passivity(1);
        let g = grid();
        let plant = StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 3.0, 0.0);
        match chain_scatter(&plant, &psi, &g).unwrap() {
            ChainScattering::NotInvertible { .. } => {}
            _ => panic!("expected the exterior zero to block inversion"),
        }
        let cert = destabilize(
            &plant,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseAPsi4Path);
        match cert.lambda0.lambda {
            crate::lti::BoundaryPoint::Complex(l) => {
                assert_abs_diff_eq!(l.re, 2.0, epsilon = 1e-8);
                assert_abs_diff_eq!(l.im, 0.0, epsilon = 1e-8);
            }
            _ => panic!("expected a finite exterior point"),
        }
        assert!(cert.lambda0.omega.is_none());
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-10);
        let report = verify_certificate(&cert, &plant, &psi, &mult, &g).unwrap();
        assert!(report.all_passed(), "failing: {:?}", report.failing());
        // certificate JSON carries the exterior point through a round trip
        let text = crate::io::certificate_to_json(&cert);
        let back = crate::io::certificate_from_json(&text).unwrap();
        assert_eq!(crate::io::certificate_to_json(&back), text);
    }

    #[test]
    fn discrete_time_synthesis_traces() {
        // static: same arithmetic as the CT worked example
        let e = catalog(&CatalogKind::Passivity, 1, 1, Domain::Dt).unwrap();
        let (mult, psi) = (e.multiplier, e.factors.unwrap());
        let g = FrequencyGrid::default_with_points(Domain::Dt, 200);
        let half = StateSpaceSystem::scalar_gain(Domain::Dt, 0.5);
        let cert = destabilize(
            &half,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_abs_diff_eq!(cert.beta.unwrap(), 3.0, epsilon = 1e-9);
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-12);

        // plant 2/(z - 0.5): Xi has an exterior zero at z = 2.5 (G1 = 1
        // there), so the chain transform is not boundedly invertible
        let plant = StateSpaceSystem::first_order(Domain::Dt, 0.5, 1.0, 2.0, 0.0);
        let cert = destabilize(
            &plant,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseAPsi4Path);
        match cert.lambda0.lambda {
            crate::lti::BoundaryPoint::Complex(l) => {
                assert_abs_diff_eq!(l.re, 2.5, epsilon = 1e-8);
            }
            _ => panic!("expected the exterior zero at 2.5"),
        }
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-10);

        // plant 0.3/(z - 0.5): the Xi zero moves inside the disk, the chain
        // gain peaks at 4 on z = 1, and the lifted uncertainty hits 5/3 there
        let plant = StateSpaceSystem::first_order(Domain::Dt, 0.5, 1.0, 0.3, 0.0);
        let cert = destabilize(
            &plant,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        assert_eq!(cert.branch, CertificateBranch::CaseBDeltaPath);
        assert_abs_diff_eq!(cert.beta.unwrap(), 4.0, epsilon = 1e-9);
        let g2 = cert.g2.as_ref().unwrap();
        let v = g2.evaluate_boundary(0.0).unwrap()[(0, 0)].re;
        assert_abs_diff_eq!(v, 5.0 / 3.0, epsilon = 1e-10);
        assert!(cert.diagnostics.closedloop_singularity_residual <= 1e-10);
        let report = verify_certificate(&cert, &plant, &psi, &mult, &g).unwrap();
        assert!(report.all_passed(), "failing: {:?}", report.failing());
    }

    #[test]
    fn family_gains_match_closed_loop_block() {
        // the family gain is the lower-right block of the assembled loop map
        let (mult, psi) = passivity(1);
        let g = grid();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let rows = divergence_sweep(&half, &psi, &mult, &[0.5, 0.9], &g).unwrap();
        for r in &rows {
            let loop_ = crate::feedback::interconnect(
                &half,
                &r.g2,
                crate::feedback::Sign::Positive,
            )
            .unwrap();
            let cl = loop_.cl.as_ref().unwrap();
            let block_gain = cl.evaluate_boundary(0.0).unwrap()[(1, 1)].norm();
            assert_abs_diff_eq!(block_gain, r.gain, epsilon = 1e-9);
        }
    }

    #[test]
    fn tampered_certificate_fails_verification() {
        let (mult, psi) = passivity(1);
        let g = grid();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let mut cert = destabilize(
            &half,
            &psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap();
        cert.g2 = Some(StateSpaceSystem::scalar_gain(Domain::Ct, 3.0));
        let report = verify_certificate(&cert, &half, &psi, &mult, &g).unwrap();
        assert!(!report.all_passed());
        assert!(report
            .failing()
            .contains(&"closed_loop_singularity"));
    }

    #[test]
    fn conditions_gate_runs_first() {
        let g = grid();
        let (mult, _) = passivity(1);
        let bad_psi = JSpectralFactors::new(
            StateSpaceSystem::identity(Domain::Ct, 1),
            StateSpaceSystem::zero(Domain::Ct, 1, 1),
            StateSpaceSystem::zero(Domain::Ct, 1, 1),
            StateSpaceSystem::scalar_gain(Domain::Ct, 0.0),
        )
        .unwrap();
        let half = StateSpaceSystem::scalar_gain(Domain::Ct, 0.5);
        let err = destabilize(
            &half,
            &bad_psi,
            &mult,
            SynthesisProfile::T1,
            &g,
            &DEFAULT_RHO_LADDER,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConditionsFailed(_)));
    }
}
