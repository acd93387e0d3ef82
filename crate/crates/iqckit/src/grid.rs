//! Frequency grids over the stability boundary and scalar extremum refinement.
//!
//! "For all lambda on the boundary" conditions are certified on a finite grid
//! with golden-section refinement around the worst gridpoint. CT grids carry
//! an `f64::INFINITY` sentinel whose response is the feedthrough `D`; DT grids
//! sample `[0, pi]`, which suffices by conjugate symmetry of real-rational
//! responses.

use crate::error::{Error, Result};
use crate::lti::{Domain, StateSpaceSystem};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Default number of interior grid points.
pub const DEFAULT_GRID_POINTS: usize = 400;
/// Default CT grid span in rad/s.
pub const DEFAULT_CT_WMIN: f64 = 1e-4;
pub const DEFAULT_CT_WMAX: f64 = 1e4;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const REFINE_ITERS: usize = 40;

/// Ordered boundary parameters for one time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    domain: Domain,
    points: Vec<f64>,
}

impl FrequencyGrid {
    /// Builds a grid from raw points; they must be strictly increasing and
    /// non-empty. For CT the last point may be `f64::INFINITY`.
    pub fn new(domain: Domain, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("grid must be non-empty".into()));
        }
        for w in &points {
            if w.is_nan() || *w < 0.0 {
                return Err(Error::InvalidParameter(
                    "grid points must be non-negative".into(),
                ));
            }
            if domain == Domain::Dt && !w.is_finite() {
                return Err(Error::InvalidParameter(
                    "DT grid points must be finite".into(),
                ));
            }
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { domain, points })
    }

    /// Logarithmic CT grid over `[wmin, wmax]` plus `{0, inf}`.
    pub fn log_ct(wmin: f64, wmax: f64, n: usize) -> Result<Self> {
        if !(wmin > 0.0 && wmax > wmin && n >= 2) {
            return Err(Error::InvalidParameter(
                "need 0 < wmin < wmax and at least 2 points".into(),
            ));
        }
        let mut points = Vec::with_capacity(n + 2);
        points.push(0.0);
        let (l0, l1) = (wmin.ln(), wmax.ln());
        for i in 0..n {
            points.push((l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp());
        }
        points.push(f64::INFINITY);
        points.dedup();
        Self::new(Domain::Ct, points)
    }

    /// Uniform DT grid over `[0, pi]` with `n + 1` points.
    pub fn linear_dt(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("need at least 2 intervals".into()));
        }
        let points = (0..=n)
            .map(|i| std::f64::consts::PI * i as f64 / n as f64)
            .collect();
        Self::new(Domain::Dt, points)
    }

    /// Default grid for a domain with a given interior point count.
    pub fn default_with_points(domain: Domain, n: usize) -> Self {
        match domain {
            Domain::Ct => Self::log_ct(DEFAULT_CT_WMIN, DEFAULT_CT_WMAX, n)
                .expect("default CT grid parameters are valid"),
            Domain::Dt => Self::linear_dt(n).expect("default DT grid parameters are valid"),
        }
    }

    pub fn default_for(domain: Domain) -> Self {
        Self::default_with_points(domain, DEFAULT_GRID_POINTS)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid with extra points merged in (kept sorted, deduplicated).
    pub fn with_extra_points(&self, extra: &[f64]) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend_from_slice(extra);
        points.sort_by(|a, b| a.partial_cmp(b).expect("no NaN grid points"));
        points.dedup();
        Self::new(self.domain, points)
    }

    /// Grid with `factor` times as many interior points over the same span.
    pub fn densified(&self, factor: usize) -> Result<Self> {
        let finite: Vec<f64> = self.points.iter().copied().filter(|w| w.is_finite()).collect();
        let interior = finite.iter().filter(|w| **w > 0.0).count().max(2);
        match self.domain {
            Domain::Ct => {
                let wmin = finite
                    .iter()
                    .copied()
                    .filter(|w| *w > 0.0)
                    .fold(f64::INFINITY, f64::min);
                let wmax = finite.iter().copied().fold(0.0, f64::max);
                Self::log_ct(wmin, wmax, interior * factor)
            }
            Domain::Dt => Self::linear_dt((self.points.len() - 1) * factor),
        }
    }
}

/// Per-gridpoint complex response matrices.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub grid: FrequencyGrid,
    pub values: Vec<DMatrix<Complex64>>,
}

impl FrequencyResponse {
    pub fn new(grid: FrequencyGrid, values: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "response length differs from grid length".into(),
            ));
        }
        Ok(Self { grid, values })
    }
}

/// Evaluates a system over a grid.
pub fn sweep(sys: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
    if sys.domain() != grid.domain() {
        return Err(Error::DimensionMismatch(
            "system and grid domains differ".into(),
        ));
    }
    let values = grid
        .points()
        .iter()
        .map(|w| sys.evaluate_boundary(*w))
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(grid.clone(), values)
}

/// Location and value of a scalar extremum over the boundary.
#[derive(Debug, Clone, Copy)]
pub struct GridExtremum {
    pub omega: f64,
    pub value: f64,
}

/// Minimizes `f` over the grid with golden-section refinement around the
/// best gridpoint. `f` may return `+inf` where it imposes no constraint.
pub fn grid_minimum<F: FnMut(f64) -> f64>(grid: &FrequencyGrid, mut f: F) -> GridExtremum {
    let pts = grid.points();
    let mut best_idx = 0;
    let mut best = f64::INFINITY;
    let mut values = Vec::with_capacity(pts.len());
    for (i, w) in pts.iter().enumerate() {
        let v = f(*w);
        values.push(v);
        if v < best {
            best = v;
            best_idx = i;
        }
    }
    let mut out = GridExtremum {
        omega: pts[best_idx],
        value: best,
    };
    // Refine inside the bracket around the minimizer; sentinel and edge
    // points keep their grid value as a candidate.
    let lo_idx = best_idx.saturating_sub(1);
    let hi_idx = (best_idx + 1).min(pts.len() - 1);
    let lo = pts[lo_idx];
    let hi = pts[hi_idx];
    if lo < hi && lo.is_finite() && hi.is_finite() {
        let refined = golden_section(&mut f, lo, hi, true);
        if refined.value < out.value {
            out = refined;
        }
    } else if lo < hi && hi.is_infinite() && lo_idx < best_idx {
        // Best point is the CT sentinel: probe the last finite interval too.
        let refined = golden_section(&mut f, pts[lo_idx], pts[best_idx.min(pts.len() - 2)], true);
        if refined.value < out.value {
            out = refined;
        }
    }
    out
}

/// Maximizes `f` over the grid with local refinement.
pub fn grid_maximum<F: FnMut(f64) -> f64>(grid: &FrequencyGrid, mut f: F) -> GridExtremum {
    let m = grid_minimum(grid, |w| -f(w));
    GridExtremum {
        omega: m.omega,
        value: -m.value,
    }
}

fn golden_section<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, log_scale_ok: bool) -> GridExtremum {
    // Work in log coordinates when the bracket sits well inside the positive
    // axis; CT grids are logarithmic so this keeps the search balanced.
    let use_log = log_scale_ok && lo > 0.0 && hi / lo > 4.0;
    let (mut a, mut b) = if use_log { (lo.ln(), hi.ln()) } else { (lo, hi) };
    let back = |t: f64| if use_log { t.exp() } else { t };
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(back(x1));
    let mut f2 = f(back(x2));
    for _ in 0..REFINE_ITERS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(back(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(back(x2));
        }
    }
    if f1 <= f2 {
        GridExtremum {
            omega: back(x1),
            value: f1,
        }
    } else {
        GridExtremum {
            omega: back(x2),
            value: f2,
        }
    }
}
