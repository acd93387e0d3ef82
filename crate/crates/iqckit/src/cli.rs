//! Command-line frontend.
//!
//! Loads systems and multipliers from JSON, runs the analyses, and writes
//! deterministic JSON reports, CSV frequency data, and destabilization
//! certificates. Exit codes encode verdicts for scripting: 0 success or
//! positive verdict, 1 negative verdict, 2 input or validation error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    classify_passivity, hinf_norm, PassivityClass, HINF_TOL_CT, HINF_TOL_DT,
};
use crate::destabilizer::{
    destabilize, divergence_sweep, verify_certificate, SynthesisProfile, DEFAULT_RHO_LADDER,
};
use crate::error::{Error, Result};
use crate::feedback::{closed_loop_gain, closed_loop_stable, interconnect, Sign};
use crate::grid::{FrequencyGrid, DEFAULT_CT_WMAX, DEFAULT_CT_WMIN, DEFAULT_GRID_POINTS};
use crate::io::{
    certificate_from_json, certificate_to_json, freqresp_csv, fw_passivity_display_jv,
    system_to_json, system_to_jv, Jv, MultiplierSpec,
};
use crate::lti::{Domain, StateSpaceSystem};
use crate::multiplier::{
    check_conditions, factorize_constant, fw_passivity_check, fw_smallgain_check, membership,
    reconstruction_residual, CatalogEntry, ConditionProfile, JSpectralFactors, MultiplierForm,
    QSide, SetId,
};
use crate::tables::prop_table;

#[derive(Parser)]
#[command(
    name = "iqckit",
    about = "Frequency-domain IQC verification and worst-case destabilizer synthesis",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    run: RunOpts,
}

/// Grid, tolerance and reproducibility settings shared by every subcommand.
#[derive(Args, Clone)]
struct RunOpts {
    /// Smallest finite CT grid frequency (rad/s).
    #[arg(long, global = true, default_value_t = DEFAULT_CT_WMIN)]
    wmin: f64,
    /// Largest finite CT grid frequency (rad/s).
    #[arg(long, global = true, default_value_t = DEFAULT_CT_WMAX)]
    wmax: f64,
    /// Interior grid point count; falls back to IQC_GRID_POINTS, then 400.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Extra grid frequencies merged into the sweep (repeatable).
    #[arg(long = "extra-point", global = true)]
    extra_points: Vec<f64>,
    /// Margins within this band of zero count as non-strict.
    #[arg(long, global = true, default_value_t = crate::analysis::STRICT_TOL)]
    strict_tol: f64,
    /// Eigenvalue margin below which a pole counts as unstable.
    #[arg(long, global = true, default_value_t = crate::lti::STABILITY_TOL)]
    stability_tol: f64,
    /// Relative accuracy of the H-infinity certification.
    #[arg(long, global = true)]
    hinf_tol: Option<f64>,
    /// Seed of the randomized property sweeps.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

impl RunOpts {
    fn validate(&self) -> Result<()> {
        let all_positive = self.wmin > 0.0
            && self.wmax > self.wmin
            && self.strict_tol > 0.0
            && self.stability_tol > 0.0
            && self.hinf_tol.map(|t| t > 0.0).unwrap_or(true)
            && self.points.map(|p| p >= 2).unwrap_or(true);
        if !all_positive {
            return Err(Error::InvalidParameter(
                "grid bounds and tolerances must be positive (wmin < wmax, points >= 2)".into(),
            ));
        }
        Ok(())
    }

    fn grid_points(&self) -> usize {
        self.points
            .or_else(|| {
                std::env::var("IQC_GRID_POINTS")
                    .ok()
                    .and_then(|s| s.parse().ok())
            })
            .unwrap_or(DEFAULT_GRID_POINTS)
    }

    fn grid_for(&self, domain: Domain) -> Result<FrequencyGrid> {
        let base = match domain {
            Domain::Ct => FrequencyGrid::log_ct(self.wmin, self.wmax, self.grid_points())?,
            Domain::Dt => FrequencyGrid::linear_dt(self.grid_points())?,
        };
        if self.extra_points.is_empty() {
            Ok(base)
        } else {
            base.with_extra_points(&self.extra_points)
        }
    }

    fn hinf_tol_for(&self, domain: Domain) -> f64 {
        self.hinf_tol.unwrap_or(match domain {
            Domain::Ct => HINF_TOL_CT,
            Domain::Dt => HINF_TOL_DT,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Dimensions, poles and stability of a system.
    Info {
        #[arg(long)]
        system: PathBuf,
    },
    /// Frequency response sweep as CSV.
    Freqresp {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// H-infinity norm with its peak frequency.
    Hinf {
        #[arg(long)]
        system: PathBuf,
    },
    /// Passivity indices and classification.
    Passivity {
        #[arg(long)]
        system: PathBuf,
    },
    /// Membership of a system in one of the four IQC sets.
    Membership {
        #[arg(long)]
        system: PathBuf,
        /// Multiplier JSON, inline or @path.
        #[arg(long)]
        multiplier: String,
        /// g1-strict | g1-nonstrict | g2-strict | g2-nonstrict
        #[arg(long)]
        set: String,
    },
    /// J-spectral factors of a multiplier with the reconstruction residual.
    Factorize {
        #[arg(long)]
        multiplier: String,
        /// Block sizes when the multiplier JSON does not pin them.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        domain: Option<String>,
    },
    /// Factor conditions of a theorem profile.
    CheckConditions {
        #[arg(long)]
        multiplier: String,
        /// t1 | t2 | t3 | t4
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        domain: Option<String>,
    },
    /// Construct a certified destabilizing uncertainty.
    Destabilize {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        multiplier: String,
        /// t1 | t3
        #[arg(long, default_value = "t1")]
        profile: String,
        /// Family scales (repeatable); defaults to 0.5, 0.9, 0.99, 0.999.
        #[arg(long = "rho")]
        rho: Vec<f64>,
        /// Where to write the constructed uncertainty.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the certificate.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Re-derive every claim of a certificate.
    VerifyCert {
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        multiplier: String,
    },
    /// Gain divergence of the scaled uncertainty family.
    SweepRho {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        multiplier: String,
        #[arg(long = "rho")]
        rho: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interconnect two systems and test the loop.
    ClosedLoop {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        /// positive | negative
        #[arg(long, default_value = "positive")]
        sign: String,
    },
    /// Frequency-weighted gain test on the plant side.
    FwSmallgain {
        #[arg(long)]
        g1: PathBuf,
        /// Stable scalar weight system (JSON file).
        #[arg(long)]
        weight: PathBuf,
    },
    /// Rotated passivity test with a constant angle.
    FwPassivity {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        theta: f64,
        /// plant | uncertainty
        #[arg(long, default_value = "uncertainty")]
        side: String,
    },
    /// Reproduce the stability / uniform-stability condition matrices.
    PropTable {
        /// Sample count per sufficiency sweep.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = cli.run.validate() {
        eprintln!("error: {e}");
        return 2;
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure(_)
        | Error::SingularResolvent(_)
        | Error::NotInvertible(_)
        | Error::SingularPsi4 => 3,
        Error::PlantSatisfiesIqc(_)
        | Error::ConditionsFailed(_)
        | Error::NotWellPosed(_)
        | Error::UnstableClosedLoop => 1,
        _ => 2,
    }
}

fn load_system(path: &Path) -> Result<StateSpaceSystem> {
    crate::io::load_system(path)
}

fn multiplier_text(arg: &str) -> Result<String> {
    if let Some(path) = arg.strip_prefix('@') {
        Ok(std::fs::read_to_string(path)?)
    } else if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        Ok(std::fs::read_to_string(arg)?)
    }
}

fn entry_for(
    arg: &str,
    n: usize,
    m: usize,
    domain: Domain,
) -> Result<CatalogEntry> {
    MultiplierSpec::from_json(&multiplier_text(arg)?)?.instantiate(n, m, domain)
}

/// Factors of an entry: explicit ones, or the constant factorization.
fn factors_of(entry: &CatalogEntry) -> Result<JSpectralFactors> {
    match &entry.factors {
        Some(psi) => Ok(psi.clone()),
        None => match entry.multiplier.form() {
            MultiplierForm::Constant(_) => factorize_constant(&entry.multiplier),
            MultiplierForm::Factored(psi) => Ok(psi.clone()),
        },
    }
}

fn parse_domain_flag(flag: &Option<String>) -> Result<Domain> {
    match flag.as_deref() {
        None | Some("ct") => Ok(Domain::Ct),
        Some("dt") => Ok(Domain::Dt),
        Some(other) => Err(Error::InvalidParameter(format!("unknown domain {other}"))),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None if text.ends_with('\n') => print!("{text}"),
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let opts = &cli.run;
    match &cli.cmd {
        Cmd::Info { system } => {
            let sys = load_system(system)?;
            let stab = sys.is_stable();
            let poles = Jv::Arr(
                sys.poles()
                    .iter()
                    .map(|p| Jv::Obj(vec![("re", Jv::Num(p.re)), ("im", Jv::Num(p.im))]))
                    .collect(),
            );
            let report = Jv::Obj(vec![
                ("domain", Jv::Str(sys.domain().to_string())),
                ("order", Jv::Int(sys.order() as i64)),
                ("outputs", Jv::Int(sys.noutputs() as i64)),
                ("inputs", Jv::Int(sys.ninputs() as i64)),
                ("poles", poles),
                ("stable", Jv::Bool(stab.margin > opts.stability_tol)),
                ("stability_margin", Jv::Num(stab.margin)),
            ]);
            println!("{}", report.render());
            Ok(0)
        }
        Cmd::Freqresp { system, out } => {
            let sys = load_system(system)?;
            let grid = opts.grid_for(sys.domain())?;
            emit(&freqresp_csv(&sys, &grid)?, out)?;
            Ok(0)
        }
        Cmd::Hinf { system } => {
            let sys = load_system(system)?;
            let grid = opts.grid_for(sys.domain())?;
            let h = hinf_norm(&sys, &grid, opts.hinf_tol_for(sys.domain()))?;
            let report = Jv::Obj(vec![
                ("gamma", Jv::Num(h.gamma)),
                ("peak_frequency", Jv::Num(h.peak_frequency)),
            ]);
            println!("{}", report.render());
            Ok(0)
        }
        Cmd::Passivity { system } => {
            let sys = load_system(system)?;
            let grid = opts.grid_for(sys.domain())?;
            let rep = classify_passivity(&sys, &grid)?;
            let report = Jv::Obj(vec![
                ("nu", Jv::Num(rep.nu)),
                ("rho", Jv::Num(rep.rho)),
                ("classification", Jv::Str(rep.classification.as_str().into())),
                ("worst_frequency_nu", Jv::Num(rep.worst_frequency_nu)),
                ("worst_frequency_rho", Jv::Num(rep.worst_frequency_rho)),
                (
                    "grid_meta",
                    Jv::Obj(vec![
                        ("points", Jv::Int(grid.len() as i64)),
                        ("domain", Jv::Str(sys.domain().to_string())),
                    ]),
                ),
            ]);
            println!("{}", report.render());
            Ok(if rep.classification == PassivityClass::NotPassive {
                1
            } else {
                0
            })
        }
        Cmd::Membership {
            system,
            multiplier,
            set,
        } => {
            let sys = load_system(system)?;
            let set_id = SetId::parse(set)?;
            let (n, m) = if set_id.is_plant_side() {
                sys.shape()
            } else {
                (sys.ninputs(), sys.noutputs())
            };
            let entry = entry_for(multiplier, n, m, sys.domain())?;
            let grid = opts.grid_for(sys.domain())?;
            let verdict = membership(&entry.multiplier, &sys, set_id, &grid)?;
            let holds = if set_id.is_strict() {
                verdict.margin > opts.strict_tol
            } else {
                verdict.margin >= -opts.strict_tol
            };
            let report = Jv::Obj(vec![
                ("set", Jv::Str(set_id.as_str().into())),
                ("holds", Jv::Bool(holds)),
                ("margin", Jv::Num(verdict.margin)),
                ("worst_frequency", Jv::Num(verdict.worst_frequency)),
                (
                    "grid_meta",
                    Jv::Obj(vec![("points", Jv::Int(verdict.grid_points as i64))]),
                ),
            ]);
            println!("{}", report.render());
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::Factorize {
            multiplier,
            n,
            m,
            domain,
        } => {
            let domain = parse_domain_flag(domain)?;
            let text = multiplier_text(multiplier)?;
            let spec = MultiplierSpec::from_json(&text)?;
            let entry = spec.instantiate(*n, *m, domain)?;
            // Rotated passivity with a nonzero angle has complex constant
            // factors; display them without claiming a realization.
            if let MultiplierSpec::Catalog {
                kind_name, theta, ..
            } = &spec
            {
                if kind_name == "fw_passivity" && theta.map(|t| t != 0.0).unwrap_or(false) {
                    let report = fw_passivity_display_jv(theta.unwrap_or(0.0), *n);
                    println!("{}", report.render());
                    return Ok(0);
                }
            }
            let psi = factors_of(&entry)?;
            let grid = opts.grid_for(domain)?;
            let residual = reconstruction_residual(&psi, &entry.multiplier, &grid)?;
            let report = Jv::Obj(vec![
                ("psi1", system_to_jv(&psi.psi1)),
                ("psi2", system_to_jv(&psi.psi2)),
                ("psi3", system_to_jv(&psi.psi3)),
                ("psi4", system_to_jv(&psi.psi4)),
                ("reconstruction_residual", Jv::Num(residual)),
            ]);
            println!("{}", report.render());
            Ok(0)
        }
        Cmd::CheckConditions {
            multiplier,
            profile,
            n,
            m,
            domain,
        } => {
            let domain = parse_domain_flag(domain)?;
            let entry = entry_for(multiplier, *n, *m, domain)?;
            let psi = factors_of(&entry)?;
            let grid = opts.grid_for(domain)?;
            let profile = ConditionProfile::parse(profile)?;
            let report = check_conditions(&psi, profile, &grid)?;
            let items = Jv::Arr(
                report
                    .items
                    .iter()
                    .map(|i| {
                        Jv::Obj(vec![
                            ("name", Jv::Str(i.name.clone())),
                            ("passed", Jv::Bool(i.passed)),
                            ("margin", Jv::Num(i.margin)),
                        ])
                    })
                    .collect(),
            );
            let all = report.all_passed();
            let out = Jv::Obj(vec![
                ("profile", Jv::Str(profile.as_str().into())),
                ("all_passed", Jv::Bool(all)),
                ("items", items),
            ]);
            println!("{}", out.render());
            Ok(if all { 0 } else { 1 })
        }
        Cmd::Destabilize {
            g1,
            multiplier,
            profile,
            rho,
            out,
            cert,
        } => {
            let g1 = load_system(g1)?;
            let entry = entry_for(multiplier, g1.noutputs(), g1.ninputs(), g1.domain())?;
            let psi = factors_of(&entry)?;
            let grid = opts.grid_for(g1.domain())?;
            let profile = SynthesisProfile::parse(profile)?;
            let ladder: Vec<f64> = if rho.is_empty() {
                DEFAULT_RHO_LADDER.to_vec()
            } else {
                rho.clone()
            };
            let certificate =
                destabilize(&g1, &psi, &entry.multiplier, profile, &grid, &ladder)?;
            let cert_text = certificate_to_json(&certificate);
            if let Some(path) = out {
                if let Some(g2) = certificate.primary_g2() {
                    std::fs::write(path, system_to_json(g2))?;
                }
            }
            match cert {
                Some(path) => std::fs::write(path, &cert_text)?,
                None => println!("{cert_text}"),
            }
            if cert.is_some() {
                println!(
                    "{}",
                    Jv::Obj(vec![
                        ("branch", Jv::Str(certificate.branch.as_str().into())),
                        (
                            "beta",
                            certificate.beta.map(Jv::Num).unwrap_or(Jv::Null)
                        ),
                        (
                            "qc_margin",
                            Jv::Num(certificate.diagnostics.qc_margin)
                        ),
                        (
                            "closedloop_singularity_residual",
                            Jv::Num(
                                certificate
                                    .diagnostics
                                    .closedloop_singularity_residual
                            )
                        ),
                    ])
                    .render()
                );
            }
            Ok(0)
        }
        Cmd::VerifyCert {
            cert,
            g1,
            multiplier,
        } => {
            let cert = certificate_from_json(&std::fs::read_to_string(cert)?)?;
            let g1 = load_system(g1)?;
            let entry = entry_for(multiplier, g1.noutputs(), g1.ninputs(), g1.domain())?;
            let psi = factors_of(&entry)?;
            let grid = opts.grid_for(g1.domain())?;
            let report = verify_certificate(&cert, &g1, &psi, &entry.multiplier, &grid)?;
            let items = Jv::Arr(
                report
                    .items
                    .iter()
                    .map(|i| {
                        Jv::Obj(vec![
                            ("name", Jv::Str(i.name.clone())),
                            ("passed", Jv::Bool(i.passed)),
                            ("value", Jv::Num(i.value)),
                            ("bound", Jv::Num(i.bound)),
                        ])
                    })
                    .collect(),
            );
            let all = report.all_passed();
            println!(
                "{}",
                Jv::Obj(vec![("all_passed", Jv::Bool(all)), ("checks", items)]).render()
            );
            Ok(if all { 0 } else { 1 })
        }
        Cmd::SweepRho {
            g1,
            multiplier,
            rho,
            out,
        } => {
            let g1 = load_system(g1)?;
            let entry = entry_for(multiplier, g1.noutputs(), g1.ninputs(), g1.domain())?;
            let psi = factors_of(&entry)?;
            let grid = opts.grid_for(g1.domain())?;
            let ladder: Vec<f64> = if rho.is_empty() {
                DEFAULT_RHO_LADDER.to_vec()
            } else {
                rho.clone()
            };
            let rows = divergence_sweep(&g1, &psi, &entry.multiplier, &ladder, &grid)?;
            let table = Jv::Obj(vec![(
                "rows",
                Jv::Arr(
                    rows.iter()
                        .map(|r| {
                            Jv::Obj(vec![
                                ("rho", Jv::Num(r.rho)),
                                ("gain", Jv::Num(r.gain)),
                                ("qc_margin", Jv::Num(r.qc_margin)),
                            ])
                        })
                        .collect(),
                ),
            )]);
            emit(&table.render(), out)?;
            Ok(0)
        }
        Cmd::ClosedLoop { g1, g2, sign } => {
            let g1 = load_system(g1)?;
            let g2 = load_system(g2)?;
            let sign = Sign::parse(sign)?;
            let loop_ = interconnect(&g1, &g2, sign)?;
            if !loop_.well_posed {
                let report = Jv::Obj(vec![
                    ("well_posed", Jv::Bool(false)),
                    ("posedness_margin", Jv::Num(loop_.posedness_margin)),
                    ("message", Jv::Str("not well-posed".into())),
                ]);
                println!("{}", report.render());
                return Ok(1);
            }
            let grid = opts.grid_for(g1.domain())?;
            let st = closed_loop_stable(&loop_, &grid)?;
            let gain = if st.stable {
                Some(closed_loop_gain(&loop_, &grid, opts.hinf_tol_for(g1.domain()))?)
            } else {
                None
            };
            let report = Jv::Obj(vec![
                ("well_posed", Jv::Bool(true)),
                ("stable", Jv::Bool(st.stable)),
                ("margin", Jv::Num(st.margin)),
                ("marginal", Jv::Bool(st.marginal)),
                ("min_grid_det", Jv::Num(st.min_grid_det)),
                ("gain", gain.map(Jv::Num).unwrap_or(Jv::Null)),
            ]);
            println!("{}", report.render());
            Ok(if st.stable { 0 } else { 1 })
        }
        Cmd::FwSmallgain { g1, weight } => {
            let g1 = load_system(g1)?;
            let weight = load_system(weight)?;
            let grid = opts.grid_for(g1.domain())?;
            let verdict = fw_smallgain_check(&g1, &weight, &grid)?;
            let holds = verdict.margin > opts.strict_tol;
            let report = Jv::Obj(vec![
                ("holds", Jv::Bool(holds)),
                ("margin", Jv::Num(verdict.margin)),
                ("worst_frequency", Jv::Num(verdict.worst_frequency)),
            ]);
            println!("{}", report.render());
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::FwPassivity {
            system,
            theta,
            side,
        } => {
            let sys = load_system(system)?;
            let side = match side.to_ascii_lowercase().as_str() {
                "plant" => QSide::Plant,
                "uncertainty" => QSide::Uncertainty,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "side must be plant or uncertainty, got {other}"
                    )))
                }
            };
            let grid = opts.grid_for(sys.domain())?;
            let verdict = fw_passivity_check(&sys, *theta, side, &grid)?;
            let holds = match side {
                QSide::Plant => verdict.margin > opts.strict_tol,
                QSide::Uncertainty => verdict.margin >= -opts.strict_tol,
            };
            let report = Jv::Obj(vec![
                ("holds", Jv::Bool(holds)),
                ("margin", Jv::Num(verdict.margin)),
                ("worst_frequency", Jv::Num(verdict.worst_frequency)),
            ]);
            println!("{}", report.render());
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::PropTable { samples } => {
            let grid = opts.grid_for(Domain::Ct)?;
            let report = prop_table(opts.seed, *samples, &grid)?;
            print!("{}", report.render_text());
            Ok(if report.all_ok() { 0 } else { 1 })
        }
    }
}
