//! JSON and CSV interchange.
//!
//! Systems, multipliers, certificates and reports travel as JSON. Parsing
//! goes through `serde_json`; emission goes through a small deterministic
//! writer that orders keys explicitly and prints every float with 17
//! significant digits, so identical inputs produce byte-identical files and
//! reloaded systems match the originals exactly. Non-finite values appear as
//! the strings `"inf"`, `"-inf"` and `"nan"`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::Value;

use crate::destabilizer::{
    CertificateBranch, DestabilizationCertificate, Diagnostics, RhoMember, SingularPoint,
    SynthesisProfile,
};
use crate::error::{Error, Result};
use crate::lti::{BoundaryPoint, Domain, StateSpaceSystem};
use crate::multiplier::{
    catalog, CatalogEntry, CatalogKind, JSpectralFactors, Multiplier, SetId,
};

/// Formats a float with 17 significant digits; round-trips exactly.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".into()
    } else if x > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

/// Deterministically rendered JSON value.
#[derive(Debug, Clone)]
pub enum Jv {
    Null,
    Bool(bool),
    Num(f64),
    Int(i64),
    Str(String),
    Arr(Vec<Jv>),
    Obj(Vec<(&'static str, Jv)>),
}

impl Jv {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        match self {
            Jv::Null => out.push_str("null"),
            Jv::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Jv::Num(x) => out.push_str(&format_f64(*x)),
            Jv::Int(i) => out.push_str(&i.to_string()),
            Jv::Str(s) => {
                out.push('"');
                for ch in s.chars() {
                    match ch {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Jv::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, depth + 1);
                }
                out.push(']');
            }
            Jv::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                let pad = "  ".repeat(depth + 1);
                for (i, (k, v)) in fields.iter().enumerate() {
                    out.push_str(&pad);
                    out.push('"');
                    out.push_str(k);
                    out.push_str("\": ");
                    v.write(out, depth + 1);
                    if i + 1 < fields.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&"  ".repeat(depth));
                out.push('}');
            }
        }
    }
}

fn matrix_to_jv(m: &DMatrix<f64>) -> Jv {
    Jv::Arr(
        (0..m.nrows())
            .map(|i| Jv::Arr((0..m.ncols()).map(|j| Jv::Num(m[(i, j)])).collect()))
            .collect(),
    )
}

/// System as a deterministic JSON value; pure gains omit `A`, `B`, `C`.
pub fn system_to_jv(sys: &StateSpaceSystem) -> Jv {
    let mut fields = vec![("domain", Jv::Str(sys.domain().to_string()))];
    if sys.order() > 0 {
        fields.push(("A", matrix_to_jv(sys.a())));
        fields.push(("B", matrix_to_jv(sys.b())));
        fields.push(("C", matrix_to_jv(sys.c())));
    }
    fields.push(("D", matrix_to_jv(sys.d())));
    Jv::Obj(fields)
}

pub fn system_to_json(sys: &StateSpaceSystem) -> String {
    system_to_jv(sys).render()
}

fn parse_domain(v: &Value) -> Result<Domain> {
    match v.get("domain").and_then(Value::as_str) {
        Some("ct") => Ok(Domain::Ct),
        Some("dt") => Ok(Domain::Dt),
        Some(other) => Err(Error::Json(format!("unknown domain {other:?}"))),
        None => Err(Error::Json("missing \"domain\" field".into())),
    }
}

fn parse_matrix(v: &Value, name: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Json(format!("{name} must be an array of rows")))?;
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ncols = rows[0]
        .as_array()
        .ok_or_else(|| Error::Json(format!("{name} rows must be arrays")))?
        .len();
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Json(format!("{name} rows must be arrays")))?;
        if row.len() != ncols {
            return Err(Error::Json(format!("{name} rows have unequal lengths")));
        }
        for x in row {
            data.push(
                x.as_f64()
                    .ok_or_else(|| Error::Json(format!("{name} entries must be numbers")))?,
            );
        }
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

/// Parses the system JSON schema. Absent `A`/`B`/`C` with a present `D`
/// denotes a pure gain.
pub fn system_from_value(v: &Value) -> Result<StateSpaceSystem> {
    let domain = parse_domain(v)?;
    let d = parse_matrix(
        v.get("D").ok_or_else(|| Error::Json("missing \"D\"".into()))?,
        "D",
    )?;
    match (v.get("A"), v.get("B"), v.get("C")) {
        (None, None, None) => Ok(StateSpaceSystem::gain(domain, d)),
        (Some(a), Some(b), Some(c)) => {
            let a = parse_matrix(a, "A")?;
            let nx = a.nrows();
            let b = parse_matrix(b, "B")?;
            let c = parse_matrix(c, "C")?;
            // 0-state systems may write A/B/C as empty arrays
            let b = if b.nrows() == 0 { DMatrix::zeros(nx, d.ncols()) } else { b };
            let c = if c.nrows() == 0 { DMatrix::zeros(d.nrows(), nx) } else { c };
            StateSpaceSystem::new(domain, a, b, c, d)
        }
        _ => Err(Error::Json(
            "either provide all of A, B, C or none of them".into(),
        )),
    }
}

pub fn system_from_json(text: &str) -> Result<StateSpaceSystem> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
    system_from_value(&v)
}

pub fn load_system(path: &std::path::Path) -> Result<StateSpaceSystem> {
    system_from_json(&std::fs::read_to_string(path)?)
}

/// Multiplier description as found in JSON; instantiated against the
/// dimensions of the system it is applied to.
#[derive(Debug, Clone)]
pub enum MultiplierSpec {
    Catalog {
        kind_name: String,
        epsilon: Option<f64>,
        gamma: Option<f64>,
        theta: Option<f64>,
        weight: Option<StateSpaceSystem>,
        n: Option<usize>,
        m: Option<usize>,
    },
    Constant {
        pi: DMatrix<f64>,
        n: usize,
        m: usize,
    },
    Factors {
        psi1: StateSpaceSystem,
        psi2: StateSpaceSystem,
        psi3: StateSpaceSystem,
        psi4: StateSpaceSystem,
    },
}

impl MultiplierSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        match v.get("kind").and_then(Value::as_str) {
            Some("catalog") => {
                let name = v
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Json("catalog multiplier needs a name".into()))?;
                let weight = match v.get("weight") {
                    Some(w) => Some(system_from_value(w)?),
                    None => None,
                };
                Ok(MultiplierSpec::Catalog {
                    kind_name: name.to_string(),
                    epsilon: v.get("epsilon").and_then(Value::as_f64),
                    gamma: v.get("gamma").and_then(Value::as_f64),
                    theta: v.get("theta").and_then(Value::as_f64),
                    weight,
                    n: v.get("n").and_then(Value::as_u64).map(|x| x as usize),
                    m: v.get("m").and_then(Value::as_u64).map(|x| x as usize),
                })
            }
            Some("constant") => {
                let pi = parse_matrix(
                    v.get("pi")
                        .ok_or_else(|| Error::Json("constant multiplier needs \"pi\"".into()))?,
                    "pi",
                )?;
                let n = v
                    .get("n")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Json("constant multiplier needs \"n\"".into()))?
                    as usize;
                let m = v
                    .get("m")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Json("constant multiplier needs \"m\"".into()))?
                    as usize;
                Ok(MultiplierSpec::Constant { pi, n, m })
            }
            Some("factors") => {
                let part = |key: &str| -> Result<StateSpaceSystem> {
                    system_from_value(v.get(key).ok_or_else(|| {
                        Error::Json(format!("factors multiplier needs \"{key}\""))
                    })?)
                };
                Ok(MultiplierSpec::Factors {
                    psi1: part("psi1")?,
                    psi2: part("psi2")?,
                    psi3: part("psi3")?,
                    psi4: part("psi4")?,
                })
            }
            Some(other) => Err(Error::Json(format!("unknown multiplier kind {other:?}"))),
            None => Err(Error::Json("multiplier JSON needs a \"kind\"".into())),
        }
    }

    /// Materializes the multiplier for block dimensions `(n, m)`. Explicit
    /// dimensions in the JSON win over the caller's defaults.
    pub fn instantiate(&self, n: usize, m: usize, domain: Domain) -> Result<CatalogEntry> {
        match self {
            MultiplierSpec::Catalog {
                kind_name,
                epsilon,
                gamma,
                theta,
                weight,
                n: jn,
                m: jm,
            } => {
                let n = jn.unwrap_or(n);
                let m = jm.unwrap_or(m);
                let kind = match kind_name.as_str() {
                    "passivity" => CatalogKind::Passivity,
                    "osp" => CatalogKind::Osp {
                        epsilon: epsilon.unwrap_or(1.0),
                    },
                    "isp" => CatalogKind::Isp {
                        epsilon: epsilon.unwrap_or(1.0),
                    },
                    "smallgain" => CatalogKind::SmallGain {
                        gamma: gamma.ok_or_else(|| {
                            Error::InvalidParameter("smallgain needs \"gamma\"".into())
                        })?,
                    },
                    "fw_smallgain" => CatalogKind::FwSmallGain {
                        weight: weight
                            .clone()
                            .ok_or_else(|| {
                                Error::InvalidParameter("fw_smallgain needs \"weight\"".into())
                            })?,
                    },
                    "fw_passivity" => CatalogKind::FwPassivity {
                        theta: theta.ok_or_else(|| {
                            Error::InvalidParameter("fw_passivity needs \"theta\"".into())
                        })?,
                    },
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown catalog name {other:?}"
                        )))
                    }
                };
                catalog(&kind, n, m, domain)
            }
            MultiplierSpec::Constant { pi, n, m } => {
                let pi_c = DMatrix::from_fn(pi.nrows(), pi.ncols(), |i, j| {
                    Complex64::new(pi[(i, j)], 0.0)
                });
                let mult = Multiplier::constant(pi_c, *n, *m, domain)?;
                Ok(CatalogEntry {
                    multiplier: mult,
                    factors: None,
                })
            }
            MultiplierSpec::Factors {
                psi1,
                psi2,
                psi3,
                psi4,
            } => {
                let psi = JSpectralFactors::new(
                    psi1.clone(),
                    psi2.clone(),
                    psi3.clone(),
                    psi4.clone(),
                )?;
                Ok(CatalogEntry {
                    multiplier: Multiplier::from_factors(psi.clone()),
                    factors: Some(psi),
                })
            }
        }
    }
}

fn singular_point_to_jv(p: &SingularPoint) -> Jv {
    match (p.omega, &p.lambda) {
        (Some(w), _) => Jv::Obj(vec![("omega", Jv::Num(w))]),
        (None, BoundaryPoint::Infinity) => Jv::Obj(vec![("at_infinity", Jv::Bool(true))]),
        (None, BoundaryPoint::Complex(l)) => {
            Jv::Obj(vec![("re", Jv::Num(l.re)), ("im", Jv::Num(l.im))])
        }
    }
}

fn singular_point_from_value(v: &Value, domain: Domain) -> Result<SingularPoint> {
    if let Some(w) = v.get("omega") {
        let omega = value_to_f64(w)?;
        return Ok(SingularPoint::on_boundary(domain, omega));
    }
    if v.get("at_infinity").and_then(Value::as_bool) == Some(true) {
        return Ok(SingularPoint::at_infinity());
    }
    match (v.get("re"), v.get("im")) {
        (Some(re), Some(im)) => Ok(SingularPoint::exterior(Complex64::new(
            value_to_f64(re)?,
            value_to_f64(im)?,
        ))),
        _ => Err(Error::Json("unrecognized singular point encoding".into())),
    }
}

/// Accepts a JSON number or the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn value_to_f64(v: &Value) -> Result<f64> {
    if let Some(x) = v.as_f64() {
        return Ok(x);
    }
    match v.as_str() {
        Some("inf") => Ok(f64::INFINITY),
        Some("-inf") => Ok(f64::NEG_INFINITY),
        Some("nan") => Ok(f64::NAN),
        _ => Err(Error::Json(format!("expected a number, got {v}"))),
    }
}

pub fn certificate_to_jv(cert: &DestabilizationCertificate) -> Jv {
    let d = &cert.diagnostics;
    let family = Jv::Arr(
        cert.family
            .iter()
            .map(|r| {
                Jv::Obj(vec![
                    ("rho", Jv::Num(r.rho)),
                    ("gain", Jv::Num(r.gain)),
                    ("qc_margin", Jv::Num(r.qc_margin)),
                    ("g2", system_to_jv(&r.g2)),
                ])
            })
            .collect(),
    );
    let gain_table = match &d.gain_table {
        Some(rows) => Jv::Arr(
            rows.iter()
                .map(|(r, g)| Jv::Arr(vec![Jv::Num(*r), Jv::Num(*g)]))
                .collect(),
        ),
        None => Jv::Null,
    };
    Jv::Obj(vec![
        ("branch", Jv::Str(cert.branch.as_str().into())),
        ("profile", Jv::Str(cert.profile.as_str().into())),
        (
            "complementary_set",
            Jv::Str(cert.complementary_set.as_str().into()),
        ),
        ("lambda0", singular_point_to_jv(&cert.lambda0)),
        ("beta", cert.beta.map(Jv::Num).unwrap_or(Jv::Null)),
        (
            "g2",
            cert.g2.as_ref().map(system_to_jv).unwrap_or(Jv::Null),
        ),
        (
            "delta",
            cert.delta.as_ref().map(system_to_jv).unwrap_or(Jv::Null),
        ),
        ("rho_family", family),
        (
            "diagnostics",
            Jv::Obj(vec![
                ("m_norm", d.m_norm.map(Jv::Num).unwrap_or(Jv::Null)),
                ("zeta_identity_residual", Jv::Num(d.zeta_identity_residual)),
                ("qc_margin", Jv::Num(d.qc_margin)),
                (
                    "closedloop_singularity_residual",
                    Jv::Num(d.closedloop_singularity_residual),
                ),
                ("gain_table", gain_table),
                ("downgraded", Jv::Bool(d.downgraded)),
            ]),
        ),
    ])
}

pub fn certificate_to_json(cert: &DestabilizationCertificate) -> String {
    certificate_to_jv(cert).render()
}

pub fn certificate_from_json(text: &str) -> Result<DestabilizationCertificate> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
    let branch = CertificateBranch::parse(
        v.get("branch")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Json("certificate needs \"branch\"".into()))?,
    )?;
    let profile = SynthesisProfile::parse(
        v.get("profile")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Json("certificate needs \"profile\"".into()))?,
    )?;
    let complementary_set = SetId::parse(
        v.get("complementary_set")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Json("certificate needs \"complementary_set\"".into()))?,
    )?;
    let g2 = match v.get("g2") {
        Some(Value::Null) | None => None,
        Some(s) => Some(system_from_value(s)?),
    };
    let delta = match v.get("delta") {
        Some(Value::Null) | None => None,
        Some(s) => Some(system_from_value(s)?),
    };
    let domain = g2
        .as_ref()
        .or(delta.as_ref())
        .map(|s| s.domain())
        .unwrap_or(Domain::Ct);
    let lambda0 = singular_point_from_value(
        v.get("lambda0")
            .ok_or_else(|| Error::Json("certificate needs \"lambda0\"".into()))?,
        domain,
    )?;
    let beta = match v.get("beta") {
        Some(Value::Null) | None => None,
        Some(b) => Some(value_to_f64(b)?),
    };
    let mut family = Vec::new();
    if let Some(rows) = v.get("rho_family").and_then(Value::as_array) {
        for row in rows {
            family.push(RhoMember {
                rho: value_to_f64(
                    row.get("rho")
                        .ok_or_else(|| Error::Json("family row needs \"rho\"".into()))?,
                )?,
                gain: value_to_f64(
                    row.get("gain")
                        .ok_or_else(|| Error::Json("family row needs \"gain\"".into()))?,
                )?,
                qc_margin: value_to_f64(
                    row.get("qc_margin")
                        .ok_or_else(|| Error::Json("family row needs \"qc_margin\"".into()))?,
                )?,
                g2: system_from_value(
                    row.get("g2")
                        .ok_or_else(|| Error::Json("family row needs \"g2\"".into()))?,
                )?,
            });
        }
    }
    let dv = v
        .get("diagnostics")
        .ok_or_else(|| Error::Json("certificate needs \"diagnostics\"".into()))?;
    let num = |key: &str| -> Result<f64> {
        value_to_f64(
            dv.get(key)
                .ok_or_else(|| Error::Json(format!("diagnostics needs \"{key}\"")))?,
        )
    };
    let m_norm = match dv.get("m_norm") {
        Some(Value::Null) | None => None,
        Some(x) => Some(value_to_f64(x)?),
    };
    let gain_table = match dv.get("gain_table") {
        Some(Value::Null) | None => None,
        Some(Value::Array(rows)) => {
            let mut out = Vec::new();
            for row in rows {
                let pair = row
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::Json("gain_table rows are [rho, gain]".into()))?;
                out.push((value_to_f64(&pair[0])?, value_to_f64(&pair[1])?));
            }
            Some(out)
        }
        Some(_) => return Err(Error::Json("gain_table must be an array".into())),
    };
    let diagnostics = Diagnostics {
        m_norm,
        zeta_identity_residual: num("zeta_identity_residual")?,
        qc_margin: num("qc_margin")?,
        closedloop_singularity_residual: num("closedloop_singularity_residual")?,
        gain_table,
        downgraded: dv
            .get("downgraded")
            .and_then(Value::as_bool)
            .unwrap_or(false),
    };
    Ok(DestabilizationCertificate {
        branch,
        profile,
        complementary_set,
        lambda0,
        beta,
        g2,
        delta,
        family,
        diagnostics,
    })
}

/// Display form of the rotated-passivity factor blocks (complex constants
/// with no real realization): entries as `re`/`im` matrices.
pub fn fw_passivity_display_jv(theta: f64, n: usize) -> Jv {
    let blocks = crate::multiplier::fw_passivity_factor_display(theta, n);
    let names = ["psi1", "psi2", "psi3", "psi4"];
    let complex_matrix = |m: &DMatrix<Complex64>| {
        Jv::Obj(vec![
            (
                "re",
                Jv::Arr(
                    (0..m.nrows())
                        .map(|i| {
                            Jv::Arr((0..m.ncols()).map(|j| Jv::Num(m[(i, j)].re)).collect())
                        })
                        .collect(),
                ),
            ),
            (
                "im",
                Jv::Arr(
                    (0..m.nrows())
                        .map(|i| {
                            Jv::Arr((0..m.ncols()).map(|j| Jv::Num(m[(i, j)].im)).collect())
                        })
                        .collect(),
                ),
            ),
        ])
    };
    let mut fields: Vec<(&'static str, Jv)> = vec![(
        "note",
        Jv::Str("complex constant factors; display only, no real realization".into()),
    )];
    for (name, block) in names.iter().zip(blocks.iter()) {
        fields.push((name, complex_matrix(block)));
    }
    Jv::Obj(fields)
}

/// Frequency response as CSV: column `omega`, then row-major interleaved
/// `g_{i}{j}_re`, `g_{i}{j}_im` entries. The sentinel prints as `inf`.
pub fn freqresp_csv(sys: &StateSpaceSystem, grid: &crate::grid::FrequencyGrid) -> Result<String> {
    let resp = crate::grid::sweep(sys, grid)?;
    let (ny, nu) = sys.shape();
    let mut out = String::from("omega");
    for i in 1..=ny {
        for j in 1..=nu {
            out.push_str(&format!(",g_{i}{j}_re,g_{i}{j}_im"));
        }
    }
    out.push('\n');
    for (w, v) in grid.points().iter().zip(resp.values.iter()) {
        if w.is_infinite() {
            out.push_str("inf");
        } else {
            out.push_str(&format!("{w:.16e}"));
        }
        for i in 0..ny {
            for j in 0..nu {
                out.push_str(&format!(
                    ",{:.16e},{:.16e}",
                    v[(i, j)].re,
                    v[(i, j)].im
                ));
            }
        }
        out.push('\n');
    }
    Ok(out)
}
