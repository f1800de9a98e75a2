//! The scale–shift system `g(x) = h_c·g(c·x + u_c) + v_c` (one equation per
//! scale `c`): residual checks, the derived translation identities, and
//! recovery of the solution family.
//!
//! Continuous solutions are either constant or a two-sided power law
//! `a + b₁(d − x)^s` (x < d), `a + b₂(x − d)^s` (x ≥ d) with `h_c = c^(−s)`,
//! `u_c = d(1 − c)`. The affine case is `s = 1`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Arity, DomainError, FieldError, ScalarField};
use crate::numeric::{linspace, max_abs, mean, pairwise_sum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuncEqError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("h(c1)·h(c2) = 0 for c1 = {c1}, c2 = {c2}")]
    ZeroScaleFactor { c1: f64, c2: f64 },
    #[error("scale factors do not follow a power law (best s = {s}, max log residual {max_log_residual:e})")]
    NotPowerLaw { s: f64, max_log_residual: f64 },
    #[error("non-positive scale factor h = {h} at c = {c}")]
    NonPositiveScale { c: f64, h: f64 },
    #[error("need at least two distinct scales")]
    InsufficientScales,
    #[error("shifts are not of the form d(1 − c) (best d = {d}, max residual {max_residual:e})")]
    NotCoherent { d: f64, max_residual: f64 },
    #[error("every scale equals 1; the shift centre is undetermined")]
    AllScalesOne,
    #[error("system residual {residual:e} exceeds tolerance {tol:e}")]
    SystemViolated { residual: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub c: f64,
    pub h: f64,
    pub u: f64,
    pub v: f64,
}

impl ScaleEntry {
    pub fn new(c: f64, h: f64, u: f64, v: f64) -> ScaleEntry {
        ScaleEntry { c, h, u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lo: -10.0,
            hi: 10.0,
            n: 512,
        }
    }
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Grid {
        Grid { lo, hi, n }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n.max(2) - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncEqSystem {
    entries: Vec<ScaleEntry>,
    g: ScalarField,
    grid: Grid,
}

/// On-disk form: `{ "g": "...", "grid": {lo, hi, n}, "entries": [{c, h, u, v}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub g: String,
    #[serde(default)]
    pub grid: Grid,
    pub entries: Vec<ScaleEntry>,
}

impl FuncEqSystem {
    pub fn new(g: ScalarField, entries: Vec<ScaleEntry>, grid: Grid) -> Result<Self, FuncEqError> {
        if g.arity() != Arity::One {
            return Err(FuncEqError::InvalidSystem("g must be a one-variable field".into()));
        }
        if entries.is_empty() {
            return Err(FuncEqError::InvalidSystem("no scale entries".into()));
        }
        if grid.n < 16 {
            return Err(FuncEqError::InvalidSystem(format!(
                "grid needs at least 16 points, got {}",
                grid.n
            )));
        }
        if !(grid.hi > grid.lo) || !grid.lo.is_finite() || !grid.hi.is_finite() {
            return Err(FuncEqError::InvalidSystem("grid must satisfy lo < hi".into()));
        }
        for e in &entries {
            if !(e.c > 0.0) || !e.c.is_finite() {
                return Err(FuncEqError::InvalidSystem(format!("scale c = {} must be positive", e.c)));
            }
            if ![e.h, e.u, e.v].iter().all(|x| x.is_finite()) {
                return Err(FuncEqError::InvalidSystem("non-finite entry".into()));
            }
        }
        Ok(FuncEqSystem { entries, g, grid })
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self, FuncEqError> {
        let g = ScalarField::parse1(&spec.g)?;
        FuncEqSystem::new(g, spec.entries.clone(), spec.grid)
    }

    pub fn to_spec(&self) -> SystemSpec {
        SystemSpec {
            g: self.g.source().to_string(),
            grid: self.grid,
            entries: self.entries.clone(),
        }
    }

    pub fn entries(&self) -> &[ScaleEntry] {
        &self.entries
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// max over entries and grid points of |g(x) − h·g(cx + u) − v|.
pub fn residual(system: &FuncEqSystem) -> Result<f64, FuncEqError> {
    let xs = system.grid.points();
    let mut worst: f64 = 0.0;
    for e in &system.entries {
        for &x in &xs {
            worst = worst.max(entry_residual(&system.g, e, x)?.abs());
        }
    }
    Ok(worst)
}

fn entry_residual(g: &ScalarField, e: &ScaleEntry, x: f64) -> Result<f64, DomainError> {
    Ok(g.eval1(x)? - e.h * g.eval1(e.c * x + e.u)? - e.v)
}

/// Shift pair `(u₁₂, v₁₂)` with `g(x + u₁₂) = g(x) + v₁₂` implied by two
/// entries of a consistent system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairShift {
    pub c1: f64,
    pub c2: f64,
    pub u12: f64,
    pub v12: f64,
}

pub fn pair_shift(e1: &ScaleEntry, e2: &ScaleEntry) -> Result<PairShift, FuncEqError> {
    let hh = e1.h * e2.h;
    if hh == 0.0 {
        return Err(FuncEqError::ZeroScaleFactor { c1: e1.c, c2: e2.c });
    }
    Ok(PairShift {
        c1: e1.c,
        c2: e2.c,
        u12: shift_u(e1, e2),
        v12: (e1.v * (e2.h - 1.0) - e2.v * (e1.h - 1.0)) / hh,
    })
}

fn shift_u(e1: &ScaleEntry, e2: &ScaleEntry) -> f64 {
    e1.u * (e2.c - 1.0) - e2.u * (e1.c - 1.0)
}

/// max over the grid of |g(x + u₁₂) − g(x) − v₁₂|.
pub fn check_translation_equation(
    g: &ScalarField,
    shift: &PairShift,
    grid: &Grid,
) -> Result<f64, FuncEqError> {
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        worst = worst.max((g.eval1(x + shift.u12)? - g.eval1(x)? - shift.v12).abs());
    }
    Ok(worst)
}

/// Bound on the translation-equation residual of a pair when both system
/// equations hold to within `eps` everywhere.
pub fn translation_error_bound(e1: &ScaleEntry, e2: &ScaleEntry, eps: f64) -> f64 {
    (2.0 + e1.h.abs() + e2.h.abs()) * eps / (e1.h * e2.h).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub s: f64,
    pub max_log_residual: f64,
}

/// Least-squares fit of `log h = −s·log c` through the origin.
pub fn fit_exponent(entries: &[(f64, f64)], tol: f64) -> Result<ExponentFit, FuncEqError> {
    for &(c, h) in entries {
        if !(c > 0.0) {
            return Err(FuncEqError::InvalidSystem(format!("scale c = {c} must be positive")));
        }
        if !(h > 0.0) {
            return Err(FuncEqError::NonPositiveScale { c, h });
        }
    }
    let mut distinct: Vec<f64> = entries.iter().map(|e| e.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(FuncEqError::InsufficientScales);
    }
    let lc: Vec<f64> = entries.iter().map(|e| e.0.ln()).collect();
    let lh: Vec<f64> = entries.iter().map(|e| e.1.ln()).collect();
    let sxx = pairwise_sum(&lc.iter().map(|a| a * a).collect::<Vec<_>>());
    let sxy = pairwise_sum(&lc.iter().zip(&lh).map(|(a, b)| a * b).collect::<Vec<_>>());
    let s = -sxy / sxx;
    let max_log_residual = max_abs(lc.iter().zip(&lh).map(|(a, b)| b + s * a));
    if max_log_residual > tol {
        return Err(FuncEqError::NotPowerLaw { s, max_log_residual });
    }
    Ok(ExponentFit { s, max_log_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    pub d: f64,
    pub max_residual: f64,
}

/// Least-squares `d` in `u_c = d(1 − c)`.
pub fn fit_shift(entries: &[(f64, f64)], tol: f64) -> Result<ShiftFit, FuncEqError> {
    if entries.iter().all(|e| e.0 == 1.0) {
        return Err(FuncEqError::AllScalesOne);
    }
    let a: Vec<f64> = entries.iter().map(|e| 1.0 - e.0).collect();
    let saa = pairwise_sum(&a.iter().map(|x| x * x).collect::<Vec<_>>());
    let sau = pairwise_sum(&a.iter().zip(entries).map(|(x, e)| x * e.1).collect::<Vec<_>>());
    let d = sau / saa;
    let max_residual = max_abs(entries.iter().zip(&a).map(|(e, x)| e.1 - d * x));
    if max_residual > tol {
        return Err(FuncEqError::NotCoherent { d, max_residual });
    }
    Ok(ShiftFit { d, max_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuncEqTolerances {
    /// System residual accepted before classifying.
    pub sys: f64,
    /// Max residual of a family fit on the grid.
    pub fit: f64,
    /// Max log residual for the exponent and max residual for the shift fit.
    pub param: f64,
}

impl Default for FuncEqTolerances {
    fn default() -> Self {
        FuncEqTolerances {
            sys: 1e-8,
            fit: 1e-8,
            param: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    Constant,
    Affine,
    TwoSidedPower,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionFamily {
    Constant { a: f64 },
    Affine { a: f64, b: f64 },
    /// `a + b1·(d − x)^s` for x < d, `a + b2·(x − d)^s` for x ≥ d.
    TwoSidedPower { a: f64, b1: f64, b2: f64, d: f64, s: f64 },
    None,
}

impl SolutionFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            SolutionFamily::Constant { .. } => FamilyKind::Constant,
            SolutionFamily::Affine { .. } => FamilyKind::Affine,
            SolutionFamily::TwoSidedPower { .. } => FamilyKind::TwoSidedPower,
            SolutionFamily::None => FamilyKind::None,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            SolutionFamily::Constant { a } => vec![("a", a)],
            SolutionFamily::Affine { a, b } => vec![("a", a), ("b", b)],
            SolutionFamily::TwoSidedPower { a, b1, b2, d, s } => {
                vec![("a", a), ("b1", b1), ("b2", b2), ("d", d), ("s", s)]
            }
            SolutionFamily::None => vec![],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SolutionFamily::Constant { a } => a,
            SolutionFamily::Affine { a, b } => a + b * x,
            SolutionFamily::TwoSidedPower { a, b1, b2, d, s } => {
                if x < d {
                    a + b1 * (d - x).powf(s)
                } else {
                    a + b2 * (x - d).powf(s)
                }
            }
            SolutionFamily::None => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub family: SolutionFamily,
    pub system_residual: f64,
    /// Max |g − family| on the grid (NaN for `None`).
    pub fit_residual: f64,
    pub notes: Vec<String>,
}

/// JSON verdict: `{ kind, params, residuals, notes }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerdict {
    pub kind: FamilyKind,
    pub params: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Classification {
    pub fn verdict(&self) -> FamilyVerdict {
        let mut residuals = BTreeMap::new();
        residuals.insert("system".to_string(), self.system_residual);
        if self.fit_residual.is_finite() {
            residuals.insert("fit".to_string(), self.fit_residual);
        }
        FamilyVerdict {
            kind: self.family.kind(),
            params: self.family.params(),
            residuals,
            notes: self.notes.clone(),
        }
    }
}

/// Decides which solution family `g` belongs to, after checking that the
/// system actually holds on the grid.
///
/// Order: constant, affine, two-sided power. The power path is taken only
/// when all pair shifts `u₁₂` vanish (coherent shifts); otherwise only the
/// affine family can solve the system.
pub fn classify_solution(
    system: &FuncEqSystem,
    tol: &FuncEqTolerances,
) -> Result<Classification, FuncEqError> {
    let system_residual = residual(system)?;
    if !(system_residual <= tol.sys) {
        return Err(FuncEqError::SystemViolated {
            residual: system_residual,
            tol: tol.sys,
        });
    }
    let xs = system.grid.points();
    let gs: Vec<f64> = xs
        .iter()
        .map(|&x| system.g.eval1(x))
        .collect::<Result<_, _>>()?;
    let mut notes = Vec::new();
    let done = |family: SolutionFamily, fit_residual: f64, notes: Vec<String>| {
        Ok(Classification {
            family,
            system_residual,
            fit_residual,
            notes,
        })
    };

    let (gmin, gmax) = gs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if gmax - gmin <= tol.fit {
        let a = mean(&gs);
        let fit = max_abs(gs.iter().map(|v| v - a));
        return done(SolutionFamily::Constant { a }, fit, notes);
    }

    let ch: Vec<(f64, f64)> = system.entries.iter().map(|e| (e.c, e.h)).collect();
    let exponent = fit_exponent(&ch, tol.param);
    let (a, b, affine_fit) = fit_affine(&xs, &gs);
    if affine_fit <= tol.fit {
        match &exponent {
            Ok(fit) if (fit.s - 1.0).abs() <= tol.param.max(1e-9) => {
                return done(SolutionFamily::Affine { a, b }, affine_fit, notes);
            }
            Ok(fit) => notes.push(format!("affine g but fitted exponent s = {} ≠ 1", fit.s)),
            Err(e) => notes.push(format!("affine g but exponent fit failed: {e}")),
        }
    }

    // coherent-shift regime test
    let max_u = max_abs(system.entries.iter().map(|e| e.u));
    let max_c = system.entries.iter().fold(1.0f64, |m, e| m.max(e.c));
    let mut max_u12: f64 = 0.0;
    for (i, e1) in system.entries.iter().enumerate() {
        for e2 in &system.entries[i + 1..] {
            max_u12 = max_u12.max(shift_u(e1, e2).abs());
        }
    }
    let shift_tol = tol.param * (1.0 + max_u * max_c);
    if max_u12 > shift_tol {
        notes.push(format!(
            "pair shifts do not vanish (max |u12| = {max_u12:e}); only affine solutions exist in this regime"
        ));
        return done(SolutionFamily::None, f64::NAN, notes);
    }

    let cu: Vec<(f64, f64)> = system.entries.iter().map(|e| (e.c, e.u)).collect();
    let shift = match fit_shift(&cu, shift_tol) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("shift fit failed: {e}"));
            return done(SolutionFamily::None, f64::NAN, notes);
        }
    };
    let exponent = match exponent {
        Ok(fit) => fit,
        Err(e) => {
            notes.push(format!("exponent fit failed: {e}"));
            return done(SolutionFamily::None, f64::NAN, notes);
        }
    };
    if exponent.s <= 0.0 {
        notes.push(format!("fitted exponent s = {} is not positive", exponent.s));
        return done(SolutionFamily::None, f64::NAN, notes);
    }
    for e in system.entries.iter().filter(|e| e.c == 1.0) {
        if (e.h - 1.0).abs() > tol.param {
            notes.push(format!("scale 1 has h = {} ≠ 1", e.h));
            return done(SolutionFamily::None, f64::NAN, notes);
        }
    }

    let d = shift.d;
    let s = exponent.s;
    let half_bin = 0.5 * system.grid.spacing();
    let Some((a, b1, b2)) = fit_power_coefficients(&xs, &gs, d, s, half_bin) else {
        notes.push("power coefficients could not be fitted".into());
        return done(SolutionFamily::None, f64::NAN, notes);
    };
    let family = SolutionFamily::TwoSidedPower { a, b1, b2, d, s };
    let fit = max_abs(xs.iter().zip(&gs).map(|(&x, &g)| g - family.eval(x)));
    if fit > tol.fit {
        notes.push(format!("power family fit residual {fit:e} exceeds tolerance"));
        return done(SolutionFamily::None, fit, notes);
    }
    if b1.abs() <= tol.fit && b2.abs() <= tol.fit {
        notes.push("both power coefficients vanish".into());
        return done(SolutionFamily::None, fit, notes);
    }
    done(family, fit, notes)
}

fn fit_affine(xs: &[f64], gs: &[f64]) -> (f64, f64, f64) {
    let mx = mean(xs);
    let mg = mean(gs);
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx).powi(2)).collect::<Vec<_>>());
    let sxg = pairwise_sum(
        &xs.iter()
            .zip(gs)
            .map(|(x, g)| (x - mx) * (g - mg))
            .collect::<Vec<_>>(),
    );
    let b = sxg / sxx;
    let a = mg - b * mx;
    let fit = max_abs(xs.iter().zip(gs).map(|(x, g)| g - a - b * x));
    (a, b, fit)
}

/// Joint least squares for `(a, b1, b2)` at fixed `d`, `s`, skipping grid
/// points within `exclude` of `d`. A side with no grid points gets b = 0.
fn fit_power_coefficients(
    xs: &[f64],
    gs: &[f64],
    d: f64,
    s: f64,
    exclude: f64,
) -> Option<(f64, f64, f64)> {
    let rows: Vec<(f64, f64, f64)> = xs
        .iter()
        .zip(gs)
        .filter(|(&x, _)| (x - d).abs() >= exclude)
        .map(|(&x, &g)| {
            if x < d {
                ((d - x).powf(s), 0.0, g)
            } else {
                (0.0, (x - d).powf(s), g)
            }
        })
        .collect();
    let has_left = rows.iter().any(|r| r.0 != 0.0);
    let has_right = rows.iter().any(|r| r.1 != 0.0);
    let mut cols = vec![0usize];
    if has_left {
        cols.push(1);
    }
    if has_right {
        cols.push(2);
    }
    if rows.len() < cols.len() {
        return None;
    }
    let design = DMatrix::from_fn(rows.len(), cols.len(), |i, j| match cols[j] {
        0 => 1.0,
        1 => rows[i].0,
        _ => rows[i].1,
    });
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
    let qr = design.qr();
    let qty = qr.q().transpose() * rhs;
    let sol = qr.r().solve_upper_triangular(&qty)?;
    let mut out = [0.0; 3];
    for (j, &c) in cols.iter().enumerate() {
        out[c] = sol[j];
    }
    Some((out[0], out[1], out[2]))
}

/// Entries `(c, c^(−s), d(1 − c), a(1 − c^(−s)))` that make the two-sided
/// power family with parameters `a, d, s` (any `b1`, `b2`) an exact solution.
pub fn power_family_entries(a: f64, d: f64, s: f64, scales: &[f64]) -> Vec<ScaleEntry> {
    scales
        .iter()
        .map(|&c| {
            let h = c.powf(-s);
            ScaleEntry::new(c, h, d * (1.0 - c), a * (1.0 - h))
        })
        .collect()
}
