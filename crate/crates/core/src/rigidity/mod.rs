//! Numerical evidence for or against horizontal rigidity of `z = f(x, y)`
//! over a finite list of scales.

mod lemmas;
mod obstruction;
mod registration;
mod translation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::directions::{
    classify, estimate_profile, sample_direction_set, CaseLabel, ClassifierTolerances,
    DirectionError, DirectionSet, SampleBox, DEFAULT_PAIR_BUDGET,
};
use crate::expr::{DomainError, ScalarField};
use crate::funceq::{classify_solution, FamilyVerdict, FuncEqError, FuncEqTolerances, Grid};
use crate::numeric::cell_centres;
use crate::sphere::RigidIsometry;

pub use lemmas::{
    a2_scale_factor, min_max_separation, rotation_constants, rotation_lemma_check,
    subcase_a2_fit, subcase_a2_reduce, A2Fit, MinMaxSeparation, RotationCheck,
    RotationCheckOptions,
};
pub use obstruction::{direction_obstruction, direction_obstruction_with, Obstruction, ObstructionOptions};
pub use registration::{
    alignment_rms, find_isometry, find_isometry_with, halton_points, sample_graph, Alignment,
    AlignmentOptions, CloudMeta, GraphCloud,
};
pub use translation::{translation_test, TranslationFit, TranslationOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigidityError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error(transparent)]
    FuncEq(#[from] FuncEqError),
    #[error("need at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("scale list is empty")]
    EmptyScales,
    #[error("empty direction set")]
    EmptyDirectionSet,
    #[error("no sign change of the rotated height on the fiber x = {x}")]
    ExtractionFailure { x: f64 },
    #[error("scale {c}: best fit residual {residual:e} exceeds {tol:e}")]
    FitFailure { c: f64, residual: f64, tol: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Rigid,
    NotRigid,
    Indeterminate,
}

/// Residual levels above which a scale counts as evidence against rigidity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonRigidThresholds {
    pub rms: f64,
    pub obstruction: f64,
}

/// Record of the calibration run the default thresholds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub field: String,
    pub c: f64,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub n: usize,
    pub seed: u64,
    pub random_seeds: usize,
    pub min_rms: f64,
    pub min_obstruction: f64,
    pub safety: f64,
    pub thresholds: NonRigidThresholds,
}

const CALIBRATION_JSON: &str = include_str!("../../fixtures/nonrigid_calibration.json");

impl Calibration {
    pub fn committed() -> Calibration {
        serde_json::from_str(CALIBRATION_JSON).expect("committed calibration fixture parses")
    }
}

impl Default for NonRigidThresholds {
    fn default() -> Self {
        Calibration::committed().thresholds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityConfig {
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub n: usize,
    pub seed: u64,
    pub bins: usize,
    pub pair_budget: usize,
    pub classifier: ClassifierTolerances,
    pub tol_align: f64,
    pub tol_dir: f64,
    pub thresholds: NonRigidThresholds,
    pub alignment: AlignmentOptions,
    pub obstruction: ObstructionOptions,
    pub translation: TranslationOptions,
    pub funceq: FuncEqTolerances,
    pub a2_grid: Grid,
    /// Relative tolerance of the split-form and plane detections.
    pub tol_form: f64,
}

impl Default for RigidityConfig {
    fn default() -> Self {
        RigidityConfig {
            sample_box: SampleBox::square(3.0),
            n: 1000,
            seed: 0,
            bins: 360,
            pair_budget: DEFAULT_PAIR_BUDGET,
            classifier: ClassifierTolerances::default(),
            tol_align: 1e-6,
            tol_dir: 0.02,
            thresholds: NonRigidThresholds::default(),
            alignment: AlignmentOptions::default(),
            obstruction: ObstructionOptions::default(),
            translation: TranslationOptions::default(),
            funceq: FuncEqTolerances::default(),
            a2_grid: Grid::default(),
            tol_form: 1e-9,
        }
    }
}

pub const DEFAULT_SCALES: [f64; 4] = [2.0, 5.0, 10.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityVerdict {
    pub c: f64,
    pub decision: Decision,
    pub isometry: Option<RigidIsometry>,
    pub rms: f64,
    pub obstruction: f64,
    pub obstruction_ort: RigidIsometry,
    pub translation: TranslationFit,
    pub notes: Vec<String>,
}

/// Rigid needs both residuals within tolerance; either residual above its
/// calibrated threshold is evidence of non-rigidity; otherwise undecided.
pub fn decide(rms: f64, obstruction: f64, cfg: &RigidityConfig) -> Decision {
    if rms <= cfg.tol_align && obstruction <= cfg.tol_dir {
        Decision::Rigid
    } else if !(rms <= cfg.thresholds.rms) || !(obstruction <= cfg.thresholds.obstruction) {
        Decision::NotRigid
    } else {
        Decision::Indeterminate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    /// max |z − (a + b·x + d·y)| over the sample.
    pub residual: f64,
}

/// Least-squares plane `z = a + b·x + d·y` through a graph cloud.
pub fn plane_fit(cloud: &GraphCloud) -> PlaneFit {
    let pts = cloud.points();
    let a = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].x,
        _ => pts[i].y,
    });
    let z = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| p.z));
    let qr = a.clone().qr();
    let sol = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &z))
        .unwrap_or_else(|| nalgebra::DVector::zeros(3));
    let residual = (a * &sol - z).amax();
    PlaneFit {
        a: sol[0],
        b: sol[1],
        d: sol[2],
        residual,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitForm {
    pub d: f64,
    /// `x ↦ f(x, 0)`.
    pub g: ScalarField,
}

/// Detects `f(x, y) = g(x) + d·y` on a grid over `sample_box`: the
/// difference `f(x, y) − f(x, 0)` must be independent of `x` and linear in
/// `y`, both to within `rel_tol` of the field's range.
pub fn detect_split_form(field: &ScalarField, sample_box: &SampleBox, rel_tol: f64) -> Option<SplitForm> {
    const M: usize = 24;
    let xs = cell_centres(sample_box.x0, sample_box.x1, M);
    let ys = cell_centres(sample_box.y0, sample_box.y1, M);
    let base: Vec<f64> = xs.iter().map(|&x| field.eval(x, 0.0)).collect::<Result<_, _>>().ok()?;
    let mut diffs = Vec::with_capacity(M);
    let mut scale: f64 = 0.0;
    for &y in &ys {
        let mut row = Vec::with_capacity(M);
        for (&x, &b) in xs.iter().zip(&base) {
            let v = field.eval(x, y).ok()?;
            scale = scale.max(v.abs()).max(b.abs());
            row.push(v - b);
        }
        diffs.push(row);
    }
    let tol = rel_tol * (1.0 + scale);
    let mut means = Vec::with_capacity(M);
    for row in &diffs {
        let lo = row.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        let hi = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        if hi - lo > tol {
            return None;
        }
        means.push(0.5 * (hi + lo));
    }
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let d = ys.iter().zip(&means).map(|(y, m)| y * m).sum::<f64>() / syy;
    if ys.iter().zip(&means).any(|(y, m)| (m - d * y).abs() > tol) {
        return None;
    }
    Some(SplitForm {
        d,
        g: field.section_at_y(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Summary {
    pub d: f64,
    /// `(c, best fit residual)` per scale.
    pub residuals: Vec<(f64, f64)>,
    pub family: Option<FamilyVerdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub field: String,
    pub decision: Decision,
    pub case: CaseLabel,
    pub plane_fit: PlaneFit,
    /// `d` of a detected split form `g(x) + d·y`.
    pub split_d: Option<f64>,
    pub a2: Option<A2Summary>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub verdicts: Vec<RigidityVerdict>,
    pub summary: PipelineSummary,
}

fn validate_scales(scales: &[f64]) -> Result<Vec<f64>, RigidityError> {
    if scales.is_empty() {
        return Err(RigidityError::EmptyScales);
    }
    if let Some(&c) = scales.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(RigidityError::InvalidScale(c));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

/// Obstruction, translation test and isometry search at one scale.
pub fn scale_verdict(
    field: &ScalarField,
    ds: &DirectionSet,
    source: &GraphCloud,
    c: f64,
    cfg: &RigidityConfig,
) -> Result<RigidityVerdict, RigidityError> {
    let obs_opts = ObstructionOptions {
        seed: cfg.seed,
        ..cfg.obstruction
    };
    let obs = direction_obstruction_with(ds, c, &obs_opts)?;
    let translation = translation_test(field, c, &cfg.sample_box, &cfg.sample_box, &cfg.translation);
    let target = sample_graph(field, c, cfg.sample_box, cfg.n, cfg.seed)?;
    let align_opts = AlignmentOptions {
        seed: cfg.seed,
        ..cfg.alignment
    };
    let alignment = find_isometry_with(source, &target, &[*obs.ort.ort()], &align_opts)?;
    let decision = decide(alignment.rms, obs.residual, cfg);

    let mut notes = Vec::new();
    if !alignment.converged {
        notes.push("isometry search did not converge; best-so-far reported".to_string());
    }
    if !alignment.rms.is_finite() {
        notes.push(format!(
            "no candidate reached the minimum overlap of {}",
            align_opts.min_overlap
        ));
    }
    if translation.residual <= cfg.tol_align {
        notes.push("a pure translation already matches the graphs".to_string());
    }
    notes.push("residuals are measured on the sampled box only".to_string());
    Ok(RigidityVerdict {
        c,
        decision,
        isometry: alignment.rms.is_finite().then_some(alignment.isometry),
        rms: alignment.rms,
        obstruction: obs.residual,
        obstruction_ort: obs.ort,
        translation,
        notes,
    })
}

/// Classifies the direction set, then checks every scale in `scales`
/// (sorted, deduplicated; scales run concurrently) and summarizes.
pub fn full_rigidity_pipeline(
    field: &ScalarField,
    scales: &[f64],
    cfg: &RigidityConfig,
) -> Result<PipelineReport, RigidityError> {
    let scales = validate_scales(scales)?;
    let ds = sample_direction_set(field, cfg.sample_box, cfg.n, cfg.seed, cfg.pair_budget)?;
    let profile = estimate_profile(&ds, cfg.bins)?;
    let case = classify(&profile, &cfg.classifier);
    let source = sample_graph(field, 1.0, cfg.sample_box, cfg.n, cfg.seed)?;

    let verdicts: Vec<RigidityVerdict> = std::thread::scope(|s| {
        let handles: Vec<_> = scales
            .iter()
            .map(|&c| {
                let (ds, source) = (&ds, &source);
                s.spawn(move || scale_verdict(field, ds, source, c, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scale worker panicked"))
            .collect::<Result<_, _>>()
    })?;

    let decision = if verdicts.iter().all(|v| v.decision == Decision::Rigid) {
        Decision::Rigid
    } else if verdicts.iter().any(|v| v.decision == Decision::NotRigid) {
        Decision::NotRigid
    } else {
        Decision::Indeterminate
    };

    let plane = plane_fit(&source);
    let mut notes = vec![format!("verdict covers the tested scales {scales:?} only")];
    let zscale = source.points().iter().fold(1.0f64, |m, p| m.max(p.z.abs()));
    if plane.residual <= cfg.tol_form * zscale {
        notes.push("sampled graph is planar".to_string());
    }
    let split = detect_split_form(field, &cfg.sample_box, cfg.tol_form);
    let a2 = match &split {
        Some(sf) if sf.d != 0.0 => Some(a2_summary(sf, &scales, cfg)?),
        Some(_) => {
            notes.push("split form with d = 0: the graph is a cylinder over g".to_string());
            None
        }
        None => None,
    };
    Ok(PipelineReport {
        verdicts,
        summary: PipelineSummary {
            field: field.source().to_string(),
            decision,
            case,
            plane_fit: plane,
            split_d: split.map(|s| s.d),
            a2,
            notes,
        },
    })
}

fn a2_summary(sf: &SplitForm, scales: &[f64], cfg: &RigidityConfig) -> Result<A2Summary, RigidityError> {
    let mut notes = Vec::new();
    // f(x, −y) = g(x) − d·y has the same rigidity
    let d = sf.d.abs();
    if sf.d < 0.0 {
        notes.push("d < 0: analysed the reflection y ↦ −y".to_string());
    }
    let fit = subcase_a2_fit(&sf.g, d, scales, &cfg.a2_grid)?;
    let family = match classify_solution(&fit.system, &cfg.funceq) {
        Ok(cls) => Some(cls.verdict()),
        Err(e) => {
            notes.push(format!("reduced system has no exact solution: {e}"));
            None
        }
    };
    Ok(A2Summary {
        d: sf.d,
        residuals: fit.residuals,
        family,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConsistency {
    /// Decision for `f(c₀·)` at the scale `c/c₀`.
    pub normalized: Decision,
    /// Decision comparing the `c₀`- and `c`-clouds of `f` directly.
    pub direct: Decision,
}

/// Checks that normalizing a scale pair `(c₀, c)` to `(1, c/c₀)` on the
/// rescaled field leads to the same decision as comparing the two scales
/// of `f` directly.
pub fn scale_consistency(
    field: &ScalarField,
    c0: f64,
    c: f64,
    cfg: &RigidityConfig,
) -> Result<ScaleConsistency, RigidityError> {
    if !(c0 > 0.0) {
        return Err(RigidityError::InvalidScale(c0));
    }
    let ratio = c / c0;
    let rescaled = field.rescaled(c0);
    let ds = sample_direction_set(&rescaled, cfg.sample_box, cfg.n, cfg.seed, cfg.pair_budget)?;
    let source = sample_graph(&rescaled, 1.0, cfg.sample_box, cfg.n, cfg.seed)?;
    let normalized = scale_verdict(&rescaled, &ds, &source, ratio, cfg)?.decision;

    let src = sample_graph(field, c0, cfg.sample_box, cfg.n, cfg.seed)?;
    let tgt = sample_graph(field, c, cfg.sample_box, cfg.n, cfg.seed)?;
    let obs = direction_obstruction_with(
        &ds,
        ratio,
        &ObstructionOptions {
            seed: cfg.seed,
            ..cfg.obstruction
        },
    )?;
    let align = find_isometry_with(
        &src,
        &tgt,
        &[*obs.ort.ort()],
        &AlignmentOptions {
            seed: cfg.seed,
            ..cfg.alignment
        },
    )?;
    Ok(ScaleConsistency {
        normalized,
        direct: decide(align.rms, obs.residual, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule() {
        let cfg = RigidityConfig {
            thresholds: NonRigidThresholds {
                rms: 1e-2,
                obstruction: 0.03,
            },
            ..RigidityConfig::default()
        };
        assert_eq!(decide(1e-8, 0.01, &cfg), Decision::Rigid);
        assert_eq!(decide(1e-8, 0.05, &cfg), Decision::NotRigid);
        assert_eq!(decide(0.1, 0.0, &cfg), Decision::NotRigid);
        assert_eq!(decide(f64::INFINITY, 0.0, &cfg), Decision::NotRigid);
        assert_eq!(decide(1e-3, 0.01, &cfg), Decision::Indeterminate);
    }

    #[test]
    fn split_form_detection() {
        let f = ScalarField::parse2("x^2 + 3*y").unwrap();
        let sf = detect_split_form(&f, &SampleBox::square(2.0), 1e-9).unwrap();
        assert!((sf.d - 3.0).abs() < 1e-12);
        assert_eq!(sf.g.eval1(1.5).unwrap(), 2.25);
        let f = ScalarField::parse2("x*y").unwrap();
        assert!(detect_split_form(&f, &SampleBox::square(2.0), 1e-9).is_none());
        let f = ScalarField::parse2("y^2").unwrap();
        assert!(detect_split_form(&f, &SampleBox::square(2.0), 1e-9).is_none());
    }

    #[test]
    fn scales_validated() {
        assert_eq!(validate_scales(&[]), Err(RigidityError::EmptyScales));
        assert!(validate_scales(&[2.0, -1.0]).is_err());
        assert_eq!(validate_scales(&[5.0, 2.0, 5.0]).unwrap(), vec![2.0, 5.0]);
    }

    #[test]
    fn calibration_fixture_loads() {
        let cal = Calibration::committed();
        assert!(cal.thresholds.rms > 0.0 && cal.thresholds.rms < cal.min_rms);
        assert!(cal.thresholds.obstruction > 0.0 && cal.thresholds.obstruction < cal.min_obstruction);
    }
}
