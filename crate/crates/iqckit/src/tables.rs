//! Machine-checked reproduction of the robust-stability condition matrices.
//!
//! Two 3x3 tables relate a passivity class of the plant (columns: passive,
//! output strict, input strict) to robustness of the negative-feedback loop
//! over a passivity class of uncertainties (rows). Table one covers plain
//! closed-loop stability, table two uniform stability (a single gain bound
//! over the whole uncertainty class). Every asserted mark is backed by a
//! script: necessity marks by a constructed destabilizer or diverging family,
//! sufficiency marks by a seeded sample sweep, and the negated marks by a
//! concrete counterexample system.

use crate::analysis::{classify_passivity, input_passivity_index, STRICT_TOL};
use crate::destabilizer::{destabilize, CertificateBranch, SynthesisProfile, DEFAULT_RHO_LADDER};
use crate::error::Result;
use crate::feedback::{closed_loop_gain, closed_loop_stable, interconnect, Sign};
use crate::grid::FrequencyGrid;
use crate::lti::{Domain, StateSpaceSystem};
use crate::multiplier::{catalog, CatalogKind};
use crate::sampling::SystemSampler;
use nalgebra::dmatrix;

/// Passivity classes indexing rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassId {
    Passive,
    OutputStrict,
    InputStrict,
}

impl ClassId {
    pub fn label(&self) -> &'static str {
        match self {
            ClassId::Passive => "P",
            ClassId::OutputStrict => "P_O",
            ClassId::InputStrict => "P_I",
        }
    }
}

const CLASSES: [ClassId; 3] = [ClassId::Passive, ClassId::OutputStrict, ClassId::InputStrict];

/// Expected marks of one cell; `None` means the table leaves it unasserted.
#[derive(Debug, Clone, Copy)]
pub struct CellPattern {
    pub necessary: Option<bool>,
    pub sufficient: Option<bool>,
}

impl CellPattern {
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        match self.necessary {
            Some(true) => parts.push("N".to_string()),
            Some(false) => parts.push("\u{2717}N".to_string()),
            None => {}
        }
        match self.sufficient {
            Some(true) => parts.push("S".to_string()),
            Some(false) => parts.push("\u{2717}S".to_string()),
            None => {}
        }
        parts.join(" ")
    }
}

/// One executed claim script.
#[derive(Debug, Clone)]
pub struct ClaimResult {
    pub name: String,
    pub verified: bool,
    pub detail: String,
}

/// One table cell with its executed scripts.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub row: ClassId,
    pub col: ClassId,
    pub pattern: CellPattern,
    pub claims: Vec<ClaimResult>,
}

impl CellResult {
    pub fn ok(&self) -> bool {
        self.claims.iter().all(|c| c.verified)
    }
}

/// Both tables with per-cell evidence.
#[derive(Debug, Clone)]
pub struct TableReport {
    pub stability: Vec<CellResult>,
    pub uniform: Vec<CellResult>,
    pub samples: usize,
    pub seed: u64,
}

impl TableReport {
    pub fn all_ok(&self) -> bool {
        self.stability.iter().all(CellResult::ok) && self.uniform.iter().all(CellResult::ok)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let render_one = |title: &str, cells: &[CellResult], out: &mut String| {
            out.push_str(title);
            out.push('\n');
            out.push_str(&format!(
                "{:8} {:12} {:12} {:12}\n",
                "", "G1 in P", "G1 in P_O", "G1 in P_I"
            ));
            for row in CLASSES {
                let mut line = format!("{:8}", format!("all {}", row.label()));
                for col in CLASSES {
                    let cell = cells
                        .iter()
                        .find(|c| c.row == row && c.col == col)
                        .expect("cell exists");
                    let mark = cell.pattern.render();
                    let status = if cell.ok() { "" } else { " [FAIL]" };
                    line.push_str(&format!(" {:12}", format!("{mark}{status}")));
                }
                out.push_str(&line);
                out.push('\n');
            }
            for cell in cells {
                for claim in &cell.claims {
                    out.push_str(&format!(
                        "  [{}] ({}, {}) {}: {}\n",
                        if claim.verified { "ok" } else { "FAIL" },
                        cell.row.label(),
                        cell.col.label(),
                        claim.name,
                        claim.detail
                    ));
                }
            }
            out.push('\n');
        };
        render_one(
            "Robust stability of [-G1, G2] over a class of G2",
            &self.stability,
            &mut out,
        );
        render_one(
            "Robust uniform stability of [-G1, G2] over a class of G2",
            &self.uniform,
            &mut out,
        );
        out
    }
}

fn expected_stability(row: ClassId, col: ClassId) -> CellPattern {
    use ClassId::*;
    match (row, col) {
        (Passive, Passive) => CellPattern { necessary: Some(true), sufficient: Some(false) },
        (Passive, OutputStrict) => CellPattern { necessary: None, sufficient: Some(true) },
        (Passive, InputStrict) => CellPattern { necessary: Some(false), sufficient: Some(true) },
        (_, Passive) => CellPattern { necessary: Some(true), sufficient: Some(true) },
        (_, _) => CellPattern { necessary: Some(false), sufficient: Some(true) },
    }
}

fn expected_uniform(row: ClassId, col: ClassId) -> CellPattern {
    use ClassId::*;
    match (row, col) {
        (Passive, Passive) => CellPattern { necessary: Some(true), sufficient: Some(false) },
        (Passive, OutputStrict) => CellPattern { necessary: Some(true), sufficient: Some(false) },
        (Passive, InputStrict) => CellPattern { necessary: Some(true), sufficient: Some(true) },
        (_, Passive) => CellPattern { necessary: Some(true), sufficient: Some(false) },
        (_, OutputStrict) => CellPattern { necessary: None, sufficient: Some(false) },
        (_, InputStrict) => CellPattern { necessary: None, sufficient: Some(true) },
    }
}

struct Pools {
    passive: Vec<StateSpaceSystem>,
    output_strict: Vec<StateSpaceSystem>,
    input_strict: Vec<StateSpaceSystem>,
}

impl Pools {
    fn class(&self, id: ClassId) -> &[StateSpaceSystem] {
        match id {
            ClassId::Passive => &self.passive,
            ClassId::OutputStrict => &self.output_strict,
            ClassId::InputStrict => &self.input_strict,
        }
    }
}

fn build_pools(seed: u64, samples: usize, grid: &FrequencyGrid) -> Result<Pools> {
    let mut sampler = SystemSampler::new(seed);
    let mut passive = Vec::with_capacity(samples);
    let mut output_strict = Vec::with_capacity(samples);
    let mut input_strict = Vec::with_capacity(samples);
    for _ in 0..samples {
        let nx = sampler.random_order(4);
        passive.push(sampler.passive(Domain::Ct, nx, 2, 1e-3, grid)?);
        let nx = sampler.random_order(4);
        output_strict.push(sampler.output_strict(Domain::Ct, nx, 2, grid)?);
        let nx = sampler.random_order(4);
        input_strict.push(sampler.input_strict(Domain::Ct, nx, 2, 0.05, grid)?);
    }
    Ok(Pools {
        passive,
        output_strict,
        input_strict,
    })
}

/// Sweeps the negative-feedback loop of a fixed plant against a pool; when
/// `with_gains` is set, also certifies every loop gain and reports the worst.
fn sweep_pool(
    g1: &StateSpaceSystem,
    pool: &[StateSpaceSystem],
    grid: &FrequencyGrid,
    with_gains: bool,
) -> Result<(bool, f64)> {
    let neg_g1 = g1.negate();
    let mut max_gain: f64 = 0.0;
    for g2 in pool {
        let loop_ = interconnect(&neg_g1, g2, Sign::Positive)?;
        if !loop_.well_posed {
            return Ok((false, f64::INFINITY));
        }
        let st = closed_loop_stable(&loop_, grid)?;
        if !st.stable {
            return Ok((false, f64::INFINITY));
        }
        if with_gains {
            max_gain = max_gain.max(closed_loop_gain(&loop_, grid, 1e-4)?);
        }
    }
    Ok((true, max_gain))
}

/// Fixed plant representatives per column class.
fn representative(col: ClassId) -> StateSpaceSystem {
    match col {
        // skew static gain: passive, neither output nor input strict
        ClassId::Passive => {
            StateSpaceSystem::gain(Domain::Ct, dmatrix![0.0, 1.0; -1.0, 0.0])
        }
        // lag 1/(s+1) replicated: output strict, not input strict
        ClassId::OutputStrict => StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 1.0, 0.0)
            .diag_replicate(2)
            .expect("scalar replication"),
        // 1 + 1/(s+1): input strict with index 1
        ClassId::InputStrict => StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, 1.0, 1.0)
            .diag_replicate(2)
            .expect("scalar replication"),
    }
}

/// Constructs a destabilizer in the row class for a plant outside the column
/// class, through the multiplier whose complementary set matches the row.
fn necessity_witness(
    row: ClassId,
    grid: &FrequencyGrid,
) -> Result<ClaimResult> {
    // Not-passive plant: a negative gain.
    let g1 = StateSpaceSystem::gain(Domain::Ct, dmatrix![-0.5, 0.0; 0.0, -0.4]);
    let plant = g1.negate();
    let (kind, profile, class_check): (_, _, fn(&StateSpaceSystem, &FrequencyGrid) -> bool) =
        match row {
            ClassId::OutputStrict => (
                CatalogKind::Osp { epsilon: 0.5 },
                SynthesisProfile::T1,
                |g2, grid| {
                    classify_passivity(g2, grid)
                        .map(|r| r.rho > STRICT_TOL && r.nu >= -STRICT_TOL)
                        .unwrap_or(false)
                },
            ),
            _ => (
                CatalogKind::Passivity,
                SynthesisProfile::T1,
                |g2, grid| {
                    input_passivity_index(g2, grid)
                        .map(|v| v.value > STRICT_TOL)
                        .unwrap_or(false)
                },
            ),
        };
    let entry = catalog(&kind, 2, 2, Domain::Ct)?;
    let psi = entry.factors.expect("catalog factors exist");
    let cert = destabilize(&plant, &psi, &entry.multiplier, profile, grid, &DEFAULT_RHO_LADDER)?;
    let g2 = cert
        .primary_g2()
        .expect("certificate carries an uncertainty")
        .clone();
    let in_class = class_check(&g2, grid);
    let residual = cert.diagnostics.closedloop_singularity_residual;
    let loop_ = interconnect(&plant, &g2, Sign::Positive)?;
    let broken = !loop_.well_posed || !closed_loop_stable(&loop_, grid)?.stable;
    Ok(ClaimResult {
        name: "necessary_witness".into(),
        verified: in_class && residual <= 1e-6 && broken,
        detail: format!(
            "non-passive plant destabilized by a {} uncertainty (singularity residual {:.2e})",
            row.label(),
            residual
        ),
    })
}

/// Diverging family showing a plant outside the column class cannot be
/// uniformly stable even over plain passive uncertainties.
fn uniform_necessity_family(
    col: ClassId,
    grid: &FrequencyGrid,
) -> Result<ClaimResult> {
    // Plant in P but outside the column class.
    let g1 = match col {
        ClassId::OutputStrict => {
            StateSpaceSystem::gain(Domain::Ct, dmatrix![0.0, 1.0; -1.0, 0.0])
        }
        _ => StateSpaceSystem::first_order(Domain::Ct, -1.0, 1.0, -1.0, 1.0)
            .diag_replicate(2)?,
    };
    let plant = g1.negate();
    let entry = catalog(&CatalogKind::Passivity, 2, 2, Domain::Ct)?;
    let psi = entry.factors.expect("catalog factors exist");
    let cert = destabilize(
        &plant,
        &psi,
        &entry.multiplier,
        SynthesisProfile::T3,
        grid,
        &DEFAULT_RHO_LADDER,
    )?;
    let verified = match cert.branch {
        CertificateBranch::CaseBRhoFamily => {
            let gains: Vec<f64> = cert.family.iter().map(|r| r.gain).collect();
            gains.windows(2).all(|w| w[1] > w[0])
                && gains.last().copied().unwrap_or(0.0)
                    >= 10.0 * gains.first().copied().unwrap_or(f64::INFINITY)
        }
        // An outright singular loop is an even stronger refutation.
        _ => cert.diagnostics.closedloop_singularity_residual <= 1e-6,
    };
    Ok(ClaimResult {
        name: "necessary_witness".into(),
        verified,
        detail: format!(
            "plant outside {} driven to unbounded loop gain by passive uncertainties",
            col.label()
        ),
    })
}

/// The zero system against an escalating ladder of static gains: every rung
/// is input strictly passive, yet the loop gain tracks the rung.
fn zero_system_insufficiency(grid: &FrequencyGrid) -> Result<ClaimResult> {
    let zero = StateSpaceSystem::zero(Domain::Ct, 2, 2);
    let mut gains = Vec::new();
    for c in [1.0, 10.0, 100.0] {
        let g2 = StateSpaceSystem::gain(Domain::Ct, nalgebra::DMatrix::identity(2, 2) * c);
        let loop_ = interconnect(&zero.negate(), &g2, Sign::Positive)?;
        gains.push(closed_loop_gain(&loop_, grid, 1e-6)?);
    }
    let verified = gains.windows(2).all(|w| w[1] >= 5.0 * w[0]);
    Ok(ClaimResult {
        name: "not_sufficient_witness".into(),
        verified,
        detail: format!(
            "zero system: loop gains {:.1}, {:.1}, {:.1} under growing strictly passive gains",
            gains[0], gains[1], gains[2]
        ),
    })
}

fn stability_cell(
    row: ClassId,
    col: ClassId,
    pools: &Pools,
    grid: &FrequencyGrid,
) -> Result<CellResult> {
    let pattern = expected_stability(row, col);
    let mut claims = Vec::new();
    match pattern.necessary {
        Some(true) => claims.push(necessity_witness(row, grid)?),
        Some(false) => {
            // A plant outside the column class that still survives the row sweep.
            let g1 = match col {
                ClassId::InputStrict if row == ClassId::Passive => representative(ClassId::OutputStrict),
                _ => representative(ClassId::Passive),
            };
            let outside = match col {
                ClassId::InputStrict => {
                    input_passivity_index(&g1, grid)?.value <= STRICT_TOL
                }
                ClassId::OutputStrict => {
                    classify_passivity(&g1, grid)?.rho <= STRICT_TOL
                }
                ClassId::Passive => false,
            };
            let (all_stable, _) = sweep_pool(&g1, pools.class(row), grid, false)?;
            claims.push(ClaimResult {
                name: "not_necessary_sweep".into(),
                verified: outside && all_stable,
                detail: format!(
                    "plant outside {} stable against {} sampled {} uncertainties",
                    col.label(),
                    pools.class(row).len(),
                    row.label()
                ),
            });
        }
        None => {}
    }
    match pattern.sufficient {
        Some(true) => {
            let g1 = representative(col);
            let (all_stable, _) = sweep_pool(&g1, pools.class(row), grid, false)?;
            claims.push(ClaimResult {
                name: "sufficient_sweep".into(),
                verified: all_stable,
                detail: format!(
                    "{} plant stable against {} sampled {} uncertainties",
                    col.label(),
                    pools.class(row).len(),
                    row.label()
                ),
            });
        }
        Some(false) => {
            // The skew pair: both passive, the loop is not even well-posed.
            let j = StateSpaceSystem::gain(Domain::Ct, dmatrix![0.0, 1.0; -1.0, 0.0]);
            let loop_ = interconnect(&j.negate(), &j, Sign::Positive)?;
            claims.push(ClaimResult {
                name: "not_sufficient_witness".into(),
                verified: !loop_.well_posed,
                detail: "skew static pair: loop is not well-posed".into(),
            });
        }
        None => {}
    }
    Ok(CellResult {
        row,
        col,
        pattern,
        claims,
    })
}

fn uniform_cell(
    row: ClassId,
    col: ClassId,
    pools: &Pools,
    grid: &FrequencyGrid,
) -> Result<CellResult> {
    let pattern = expected_uniform(row, col);
    let mut claims = Vec::new();
    if pattern.necessary == Some(true) {
        let claim = match col {
            // Plant not even passive: an unstable loop inside the row class.
            ClassId::Passive => necessity_witness(row, grid)?,
            // Plant passive but outside the finer class: diverging family.
            _ => uniform_necessity_family(col, grid)?,
        };
        claims.push(claim);
    }
    match pattern.sufficient {
        Some(true) => {
            let g1 = representative(ClassId::InputStrict);
            let (all_stable, max_gain) = sweep_pool(&g1, pools.class(row), grid, true)?;
            claims.push(ClaimResult {
                name: "sufficient_sweep".into(),
                verified: all_stable && max_gain.is_finite(),
                detail: format!(
                    "strictly passive plant: {} loops stable, worst gain {:.3}",
                    pools.class(row).len(),
                    max_gain
                ),
            });
        }
        Some(false) => claims.push(zero_system_insufficiency(grid)?),
        None => {}
    }
    Ok(CellResult {
        row,
        col,
        pattern,
        claims,
    })
}

/// Runs every cell script of both tables.
pub fn prop_table(seed: u64, samples: usize, grid: &FrequencyGrid) -> Result<TableReport> {
    let pools = build_pools(seed, samples, grid)?;
    let mut stability = Vec::with_capacity(9);
    let mut uniform = Vec::with_capacity(9);
    for row in CLASSES {
        for col in CLASSES {
            stability.push(stability_cell(row, col, &pools, grid)?);
            uniform.push(uniform_cell(row, col, &pools, grid)?);
        }
    }
    Ok(TableReport {
        stability,
        uniform,
        samples,
        seed,
    })
}
