//! Can a pure translation carry graph(f) onto graph(f(c·))?

use serde::{Deserialize, Serialize};

use crate::directions::SampleBox;
use crate::expr::ScalarField;
use crate::numeric::{cell_centres, linspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationOptions {
    /// Cell-centred evaluation points per axis.
    pub grid_points: usize,
    /// Coarse candidates per axis (forced odd so the zero offset is one).
    pub coarse_points: usize,
    pub max_refinements: usize,
}

impl Default for TranslationOptions {
    fn default() -> Self {
        TranslationOptions {
            grid_points: 40,
            coarse_points: 21,
            max_refinements: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationFit {
    /// `(u₁, u₂, w)`.
    pub offset: [f64; 3],
    /// max over the grid of |f(c·x, c·y) − f(x − u₁, y − u₂) − w|.
    pub residual: f64,
}

struct Problem<'a> {
    field: &'a ScalarField,
    xs: Vec<f64>,
    ys: Vec<f64>,
    scaled: Vec<f64>,
}

impl Problem<'_> {
    /// Best `w` and residual for a horizontal offset; `w` is the midrange of
    /// the differences, which minimizes the max norm.
    fn score(&self, u1: f64, u2: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut k = 0;
        for &y in &self.ys {
            for &x in &self.xs {
                let Ok(v) = self.field.eval(x - u1, y - u2) else {
                    return (0.0, f64::INFINITY);
                };
                let d = self.scaled[k] - v;
                if !d.is_finite() {
                    return (0.0, f64::INFINITY);
                }
                lo = lo.min(d);
                hi = hi.max(d);
                k += 1;
            }
        }
        (0.5 * (hi + lo), 0.5 * (hi - lo))
    }
}

/// Minimizes the max-norm misfit of `f(c·) − f(· − u) − w` over offsets
/// `u` in `search` and all `w`, on a cell-centred grid over `grid_box`.
/// Coarse grid search (ties go to the smallest offset) followed by compass
/// refinement. Domain errors make a candidate infeasible.
pub fn translation_test(
    field: &ScalarField,
    c: f64,
    search: &SampleBox,
    grid_box: &SampleBox,
    opts: &TranslationOptions,
) -> TranslationFit {
    let xs = cell_centres(grid_box.x0, grid_box.x1, opts.grid_points);
    let ys = cell_centres(grid_box.y0, grid_box.y1, opts.grid_points);
    let mut scaled = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            scaled.push(field.eval(c * x, c * y).unwrap_or(f64::NAN));
        }
    }
    if scaled.iter().any(|v| !v.is_finite()) {
        return TranslationFit {
            offset: [0.0; 3],
            residual: f64::INFINITY,
        };
    }
    let problem = Problem {
        field,
        xs,
        ys,
        scaled,
    };

    let m = opts.coarse_points.max(3) | 1;
    let cu = coarse_axis(search.x0, search.x1, m);
    let cv = coarse_axis(search.y0, search.y1, m);
    let mut best: (f64, f64, f64, f64) = (0.0, 0.0, 0.0, f64::INFINITY);
    for &u2 in &cv {
        for &u1 in &cu {
            let (w, r) = problem.score(u1, u2);
            let better = r < best.3
                || (r == best.3 && u1.hypot(u2) < best.0.hypot(best.1));
            if better {
                best = (u1, u2, w, r);
            }
        }
    }
    if !best.3.is_finite() {
        return TranslationFit {
            offset: [0.0; 3],
            residual: f64::INFINITY,
        };
    }

    let mut step = 0.5 * ((search.x1 - search.x0).max(search.y1 - search.y0) / (m - 1) as f64);
    let floor = 1e-12 * (1.0 + best.0.abs().max(best.1.abs()) + step);
    let mut iterations = 0;
    while step > floor && iterations < opts.max_refinements && best.3 > 0.0 {
        iterations += 1;
        let mut improved = false;
        for (du, dv) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let (u1, u2) = (best.0 + du, best.1 + dv);
            let (w, r) = problem.score(u1, u2);
            if r < best.3 {
                best = (u1, u2, w, r);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    TranslationFit {
        offset: [best.0, best.1, best.2],
        residual: best.3,
    }
}

/// Odd number of candidates symmetric about the box centre, with the zero
/// offset included whenever it lies inside.
fn coarse_axis(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let mut axis = linspace(lo, hi, m);
    if lo < 0.0 && hi > 0.0 {
        let k = axis
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k)
            .unwrap();
        axis[k] = 0.0;
    }
    axis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test(src: &str, c: f64, half: f64) -> TranslationFit {
        let f = ScalarField::parse2(src).unwrap();
        let b = SampleBox::square(half);
        translation_test(&f, c, &b, &b, &TranslationOptions::default())
    }

    #[test]
    fn constant_passes() {
        let fit = test("7", 10.0, 2.0);
        assert_eq!(fit.residual, 0.0);
        assert_eq!(fit.offset, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_fails() {
        let fit = test("x", 2.0, 2.0);
        assert!(fit.residual >= 1.0);
    }

    #[test]
    fn coarse_axis_has_zero() {
        let a = coarse_axis(-1.0, 1.0, 21);
        assert!(a.contains(&0.0));
        assert_eq!(a.len(), 21);
    }
}
