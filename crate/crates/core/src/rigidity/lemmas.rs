//! Numerical checks for split-form fields `f(x, y) = g(x) + d·y`: the
//! rotated cross-section, the reduction to a scale–shift system, and the
//! min/max separation diagnostic.

use serde::{Deserialize, Serialize};

use crate::expr::ScalarField;
use crate::funceq::{FuncEqSystem, Grid, ScaleEntry};
use crate::numeric::{cell_centres, golden_section, linspace, mean};
use crate::sphere::{rotation_about_x, Vec3};

use super::RigidityError;

/// `(α, w)` for the rotation about the x-axis taking graph(g(x) + d·y) to a
/// graph whose zero section is `y = −w·g(x)`.
pub fn rotation_constants(c: f64, d: f64) -> (f64, f64) {
    let alpha = (c * d).atan() - d.atan();
    let w = ((c * d).powi(2) + 1.0).sqrt() / (c * d * (d * d + 1.0).sqrt());
    (alpha, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCheckOptions {
    /// Spacing of the fibers `x = const` on which the section is solved.
    pub fiber_step: f64,
    /// Cell-centred check points on `[lo, hi]`.
    pub check_points: usize,
}

impl Default for RotationCheckOptions {
    fn default() -> Self {
        RotationCheckOptions {
            fiber_step: 1e-3,
            check_points: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCheck {
    pub alpha: f64,
    pub w: f64,
    pub max_error: f64,
    pub fibers: usize,
}

/// Rotates graph(g(x) + d·y) about the x-axis by α, solves for the zero of
/// the rotated height on each fiber, and compares the resulting curve,
/// linearly interpolated between fibers, with `−w·g` on the check points.
pub fn rotation_lemma_check(
    g: &ScalarField,
    d: f64,
    c: f64,
    lo: f64,
    hi: f64,
    opts: &RotationCheckOptions,
) -> Result<RotationCheck, RigidityError> {
    if d == 0.0 || !d.is_finite() {
        return Err(RigidityError::InvalidArgument("d must be nonzero".into()));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(RigidityError::InvalidScale(c));
    }
    if !(hi > lo) || !(opts.fiber_step > 0.0) || opts.check_points == 0 {
        return Err(RigidityError::InvalidArgument("empty x range or fiber step".into()));
    }
    let (alpha, w) = rotation_constants(c, d);
    let rot = rotation_about_x(alpha);

    let step = opts.fiber_step;
    let fibers = ((hi - lo) / step).ceil() as usize + 2;
    let mut section = Vec::with_capacity(fibers);
    for k in 0..fibers {
        let x = lo + (k as f64 - 0.5) * step;
        let gx = g.eval1(x)?;
        let height = |t: f64| rot.apply(&Vec3::new(x, t, gx + d * t)).z;
        let t = bracket_root(height).ok_or(RigidityError::ExtractionFailure { x })?;
        section.push(rot.apply(&Vec3::new(x, t, gx + d * t)).y);
    }

    let mut max_error: f64 = 0.0;
    for x in cell_centres(lo, hi, opts.check_points) {
        let s = (x - lo) / step + 0.5;
        let k = (s.floor() as usize).min(fibers - 2);
        let frac = s - k as f64;
        let y = section[k] + frac * (section[k + 1] - section[k]);
        max_error = max_error.max((y + w * g.eval1(x)?).abs());
    }
    Ok(RotationCheck {
        alpha,
        w,
        max_error,
        fibers,
    })
}

/// Sign-change scan over growing symmetric windows, then bisection.
fn bracket_root<F: Fn(f64) -> f64>(f: F) -> Option<f64> {
    const CELLS: usize = 64;
    let mut span = 1.0;
    while span <= 1e9 {
        let ts = linspace(-span, span, CELLS + 1);
        let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        for k in 0..CELLS {
            if vals[k] == 0.0 {
                return Some(ts[k]);
            }
            if vals[k].signum() != vals[k + 1].signum() && vals[k + 1] != 0.0 {
                return Some(bisect(&f, ts[k], ts[k + 1], vals[k]));
            }
        }
        if vals[CELLS] == 0.0 {
            return Some(ts[CELLS]);
        }
        span *= 8.0;
    }
    None
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `h_c = √((d² + 1)/((c·d)² + 1))`, the vertical factor forced on `g`.
pub fn a2_scale_factor(c: f64, d: f64) -> f64 {
    ((d * d + 1.0) / ((c * d).powi(2) + 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Fit {
    pub system: FuncEqSystem,
    /// `(c, max |g(x) − h_c·g(c·x + u_c) − v_c|)` per scale.
    pub residuals: Vec<(f64, f64)>,
}

impl A2Fit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.1))
    }
}

/// Builds the scale–shift system for `g` with the forced factors `h_c`,
/// fitting `u_c`, `v_c` by least squares on `grid` (`v` in closed form,
/// `u` by a coarse scan plus golden-section search).
pub fn subcase_a2_fit(
    g: &ScalarField,
    d: f64,
    scales: &[f64],
    grid: &Grid,
) -> Result<A2Fit, RigidityError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(RigidityError::InvalidArgument(format!("d must be positive, got {d}")));
    }
    if scales.is_empty() {
        return Err(RigidityError::EmptyScales);
    }
    let xs = grid.points();
    let gs: Vec<f64> = xs.iter().map(|&x| g.eval1(x)).collect::<Result<_, _>>()?;
    let reach = grid.lo.abs().max(grid.hi.abs());

    let mut entries = Vec::with_capacity(scales.len());
    let mut residuals = Vec::with_capacity(scales.len());
    for &c in scales {
        if !(c > 0.0) || !c.is_finite() {
            return Err(RigidityError::InvalidScale(c));
        }
        let h = a2_scale_factor(c, d);
        let misfit = |u: f64| -> Option<Vec<f64>> {
            xs.iter()
                .zip(&gs)
                .map(|(&x, &gx)| {
                    let r = gx - h * g.eval1(c * x + u).ok()?;
                    r.is_finite().then_some(r)
                })
                .collect()
        };
        let sse = |u: f64| match misfit(u) {
            Some(r) => {
                let m = mean(&r);
                r.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            }
            None => f64::INFINITY,
        };
        let span = (1.0 + c) * reach + 1.0;
        let coarse = 801;
        let us = linspace(-span, span, coarse);
        let mut best: (f64, f64) = (0.0, sse(0.0));
        for &u in &us {
            let s = sse(u);
            if s < best.1 || (s == best.1 && u.abs() < best.0.abs()) {
                best = (u, s);
            }
        }
        if !best.1.is_finite() {
            return Err(RigidityError::FitFailure {
                c,
                residual: f64::INFINITY,
                tol: f64::NAN,
            });
        }
        if best.1 > 0.0 {
            let du = us[1] - us[0];
            let (u, s) = golden_section(sse, best.0 - du, best.0 + du, 1e-13 * (1.0 + span));
            if s < best.1 {
                best = (u, s);
            }
        }
        let u = best.0;
        let r = misfit(u).expect("best shift is feasible");
        let v = mean(&r);
        let max_res = r.iter().fold(0.0f64, |m, x| m.max((x - v).abs()));
        entries.push(ScaleEntry::new(c, h, u, v));
        residuals.push((c, max_res));
    }
    let system = FuncEqSystem::new(g.clone(), entries, *grid)?;
    Ok(A2Fit { system, residuals })
}

/// As [`subcase_a2_fit`], but fails when some scale cannot be fitted to
/// within `tol`.
pub fn subcase_a2_reduce(
    g: &ScalarField,
    d: f64,
    scales: &[f64],
    grid: &Grid,
    tol: f64,
) -> Result<FuncEqSystem, RigidityError> {
    let fit = subcase_a2_fit(g, d, scales, grid)?;
    for &(c, residual) in &fit.residuals {
        if !(residual <= tol) {
            return Err(RigidityError::FitFailure { c, residual, tol });
        }
    }
    Ok(fit.system)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxSeparation {
    /// Distance between the min and max sets of `f` on the disc of radius r.
    pub original: f64,
    /// The same for `f(c·)` on the disc of radius r/c.
    pub scaled: f64,
}

/// Diagnostic: distance between the sets where `f` attains its minimum and
/// maximum on a centred disc, before and after rescaling by `c`. For a
/// rigid map of the kind considered, `scaled = original / c`.
pub fn min_max_separation(
    field: &ScalarField,
    c: f64,
    radius: f64,
    resolution: usize,
    rel_tol: f64,
) -> Result<MinMaxSeparation, RigidityError> {
    if !(c > 0.0) {
        return Err(RigidityError::InvalidScale(c));
    }
    let original = separation(|x, y| field.eval(x, y), radius, resolution, rel_tol)?;
    let scaled = separation(|x, y| field.eval(c * x, c * y), radius / c, resolution, rel_tol)?;
    Ok(MinMaxSeparation { original, scaled })
}

fn separation<F>(f: F, radius: f64, m: usize, rel_tol: f64) -> Result<f64, RigidityError>
where
    F: Fn(f64, f64) -> Result<f64, crate::expr::DomainError>,
{
    let m = m.max(2) as i64;
    let mut pts = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            if i * i + j * j <= m * m {
                let (x, y) = (radius * i as f64 / m as f64, radius * j as f64 / m as f64);
                pts.push((x, y, f(x, y)?));
            }
        }
    }
    let lo = pts.iter().fold(f64::INFINITY, |a, p| a.min(p.2));
    let hi = pts.iter().fold(f64::NEG_INFINITY, |a, p| a.max(p.2));
    let band = rel_tol * (hi - lo).max(f64::MIN_POSITIVE);
    let mins: Vec<_> = pts.iter().filter(|p| p.2 <= lo + band).collect();
    let maxs: Vec<_> = pts.iter().filter(|p| p.2 >= hi - band).collect();
    let mut best = f64::INFINITY;
    for a in &mins {
        for b in &maxs {
            best = best.min((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_reference_point() {
        let (alpha, w) = rotation_constants(2.0, 1.0);
        assert!((alpha - (2f64.atan() - std::f64::consts::FRAC_PI_4)).abs() < 1e-15);
        assert!((w - 0.5 * 2.5f64.sqrt()).abs() < 1e-15);
        let (alpha, w) = rotation_constants(1.0, 3.0);
        assert_eq!(alpha, 0.0);
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn root_bracketing() {
        let t = bracket_root(|t| 3.0 * t - 1.0).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
        assert!((bracket_root(|t| t - 1e5).unwrap() - 1e5).abs() < 1e-9);
        assert!(bracket_root(|_| 1.0).is_none());
    }

    #[test]
    fn zero_d_rejected() {
        let g = ScalarField::parse1("x").unwrap();
        assert!(rotation_lemma_check(&g, 0.0, 2.0, -1.0, 1.0, &Default::default()).is_err());
    }

    #[test]
    fn separation_of_linear_field() {
        let f = ScalarField::parse2("x").unwrap();
        let s = min_max_separation(&f, 4.0, 2.0, 40, 1e-9).unwrap();
        assert!((s.original - 4.0).abs() < 1e-12);
        assert!((s.scaled - 1.0).abs() < 1e-12);
    }
}
