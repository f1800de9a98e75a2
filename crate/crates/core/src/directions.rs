//! Sampled direction sets of surface graphs, their per-azimuth arc profile,
//! and classification into the four rigid shapes (Cases A–D).
//!
//! All shapes are judged relative to the sampled window recorded in
//! [`DirectionMeta`]; the infinite set is never available.

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{DomainError, ScalarField};
use crate::sphere::{direction, psi, UnitVec3, Vec3};

pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectionError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("need at least 2 sample points, got {0}")]
    TooFewSamples(usize),
    #[error("empty direction set")]
    EmptyDirectionSet,
    #[error("degenerate sampling box {0:?}")]
    DegenerateBox(SampleBox),
    #[error("need at least 8 azimuth bins, got {0}")]
    TooFewBins(usize),
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SampleBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> SampleBox {
        SampleBox { x0, x1, y0, y1 }
    }

    pub fn square(half_width: f64) -> SampleBox {
        SampleBox::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn is_valid(&self) -> bool {
        [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Shrinks each side by `fraction` of the box width/height.
    pub fn trimmed(&self, fraction: f64) -> SampleBox {
        let dx = (self.x1 - self.x0) * fraction;
        let dy = (self.y1 - self.y0) * fraction;
        SampleBox::new(self.x0 + dx, self.x1 - dx, self.y0 + dy, self.y1 - dy)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.x1, self.y0, self.y1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMeta {
    pub field: String,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub points: usize,
    pub seed: u64,
    pub pair_budget: usize,
    pub pairs_used: usize,
    /// Product of all ψ-deformations applied so far (1 for a raw sample).
    pub deformation: f64,
}

/// Chord directions of a graph, closed under `v ↦ −v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub samples: Vec<UnitVec3>,
    pub meta: DirectionMeta,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Builds a set from raw directions, adding every antipode.
    pub fn from_directions(dirs: &[UnitVec3], meta: DirectionMeta) -> DirectionSet {
        let mut samples = Vec::with_capacity(dirs.len() * 2);
        for v in dirs {
            samples.push(*v);
            samples.push(v.antipode());
        }
        DirectionSet { samples, meta }
    }

    /// Antipodal pairs are stored adjacently: (2k, 2k+1).
    pub fn pair_count(&self) -> usize {
        self.samples.len() / 2
    }

    /// Seeded selection of at most `max_samples` samples, keeping antipodal
    /// pairs together. Returns a copy of the samples if already small enough.
    pub fn thinned(&self, max_samples: usize, seed: u64) -> Vec<UnitVec3> {
        let pairs = self.pair_count();
        let keep = (max_samples / 2).max(1);
        if pairs <= keep {
            return self.samples.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7417);
        let mut chosen = index::sample(&mut rng, pairs, keep).into_vec();
        chosen.sort_unstable();
        let mut out = Vec::with_capacity(keep * 2);
        for k in chosen {
            out.push(self.samples[2 * k]);
            out.push(self.samples[2 * k + 1]);
        }
        out
    }

    /// Samples as CSV with header `x,y,z`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.samples.len() * 48 + 8);
        s.push_str("x,y,z\n");
        for v in &self.samples {
            s.push_str(&format!("{},{},{}\n", v.x(), v.y(), v.z()));
        }
        s
    }
}

/// Draws `n` points uniformly in `sample_box`, lifts them to the graph of
/// `field` and records every chord direction (and its antipode). When the
/// number of pairs exceeds `pair_budget`, pairs are drawn uniformly instead.
pub fn sample_direction_set(
    field: &ScalarField,
    sample_box: SampleBox,
    n: usize,
    seed: u64,
    pair_budget: usize,
) -> Result<DirectionSet, DirectionError> {
    if n < 2 {
        return Err(DirectionError::TooFewSamples(n));
    }
    if !sample_box.is_valid() {
        return Err(DirectionError::DegenerateBox(sample_box));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(sample_box.x0..=sample_box.x1);
        let y = rng.gen_range(sample_box.y0..=sample_box.y1);
        let z = field.eval(x, y)?;
        points.push(Vec3::new(x, y, z));
    }

    let total_pairs = n * (n - 1) / 2;
    let mut dirs = Vec::with_capacity(total_pairs.min(pair_budget.max(1)));
    // identical planar points (probability zero) give no chord
    let mut push = |i: usize, j: usize| {
        if let Ok(d) = direction(&points[i], &points[j]) {
            dirs.push(d);
        }
    };
    if total_pairs <= pair_budget {
        for i in 0..n {
            for j in (i + 1)..n {
                push(i, j);
            }
        }
    } else {
        for _ in 0..pair_budget {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            push(i.min(j), i.max(j));
        }
    }
    let pairs_used = dirs.len();
    Ok(DirectionSet::from_directions(
        &dirs,
        DirectionMeta {
            field: field.source().to_string(),
            sample_box,
            points: n,
            seed,
            pair_budget,
            pairs_used,
            deformation: 1.0,
        },
    ))
}

/// Applies ψ_c to every sample.
pub fn deform_direction_set(ds: &DirectionSet, c: f64) -> DirectionSet {
    assert!(c > 0.0, "deformation scale must be positive, got {c}");
    let samples = ds.samples.iter().map(|v| psi(c, v)).collect();
    let mut meta = ds.meta.clone();
    meta.deformation *= c;
    DirectionSet { samples, meta }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub zmin: Option<f64>,
    pub zmax: Option<f64>,
    pub count: usize,
}

/// Per-azimuth extent of the direction set: bin `k` covers
/// `(−π + k·w, −π + (k+1)·w]` with `w = 2π/B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcProfile {
    pub bins: Vec<ProfileBin>,
}

pub fn bin_width(bins: usize) -> f64 {
    2.0 * PI / bins as f64
}

/// Bin index of an azimuth in (−π, π].
pub fn bin_of(theta: f64, bins: usize) -> usize {
    let w = bin_width(bins);
    let k = ((theta + PI) / w).ceil() as isize - 1;
    k.clamp(0, bins as isize - 1) as usize
}

impl ArcProfile {
    pub fn empty(bins: usize) -> ArcProfile {
        let w = bin_width(bins);
        ArcProfile {
            bins: (0..bins)
                .map(|k| ProfileBin {
                    theta_lo: -PI + k as f64 * w,
                    theta_hi: -PI + (k + 1) as f64 * w,
                    zmin: None,
                    zmax: None,
                    count: 0,
                })
                .collect(),
        }
    }

    /// Builds a profile directly from per-bin `(zmin, zmax)` values.
    pub fn from_values(values: &[(f64, f64)]) -> ArcProfile {
        let mut p = ArcProfile::empty(values.len());
        for (bin, &(lo, hi)) in p.bins.iter_mut().zip(values) {
            bin.zmin = Some(lo);
            bin.zmax = Some(hi);
            bin.count = 1;
        }
        p
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn has_empty_bins(&self) -> bool {
        self.bins.iter().any(|b| b.count == 0)
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        0.5 * (self.bins[k].theta_lo + self.bins[k].theta_hi)
    }

    /// Cyclic shift by `shift` bins: new bin `k + shift` holds the old bin `k`
    /// data. Equivalent to rotating the x-axis by `shift` bin widths.
    pub fn rotated(&self, shift: usize) -> ArcProfile {
        let b = self.bins.len();
        let mut out = ArcProfile::empty(b);
        for k in 0..b {
            let src = &self.bins[k];
            let dst = &mut out.bins[(k + shift) % b];
            dst.zmin = src.zmin;
            dst.zmax = src.zmax;
            dst.count = src.count;
        }
        out
    }

    /// Largest antipodal mismatch |zmin(θ) + zmax(θ+π)| over bins where both
    /// are present. Requires an even bin count.
    pub fn antipodal_mismatch(&self) -> Option<f64> {
        let b = self.bins.len();
        if !b.is_multiple_of(2) {
            return None;
        }
        let mut worst: f64 = 0.0;
        for k in 0..b {
            let opp = &self.bins[(k + b / 2) % b];
            if let (Some(lo), Some(hi)) = (self.bins[k].zmin, opp.zmax) {
                worst = worst.max((lo + hi).abs());
            }
        }
        Some(worst)
    }
}

pub fn estimate_profile(ds: &DirectionSet, bins: usize) -> Result<ArcProfile, DirectionError> {
    profile_of(&ds.samples, bins)
}

pub fn profile_of(samples: &[UnitVec3], bins: usize) -> Result<ArcProfile, DirectionError> {
    if bins < 8 {
        return Err(DirectionError::TooFewBins(bins));
    }
    if samples.is_empty() {
        return Err(DirectionError::EmptyDirectionSet);
    }
    let mut profile = ArcProfile::empty(bins);
    for v in samples {
        let Some(theta) = v.azimuth() else { continue };
        let bin = &mut profile.bins[bin_of(theta, bins)];
        let z = v.z();
        bin.zmax = Some(bin.zmax.map_or(z, |m| m.max(z)));
        bin.zmin = Some(bin.zmin.map_or(z, |m| m.min(z)));
        bin.count += 1;
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTolerances {
    pub eps_pole: f64,
    pub eps_zero: f64,
    pub eps_arc: f64,
    /// Minimum margin, in bin widths, separating a Case D interval length
    /// from 0 and from π.
    pub eps_len_bins: f64,
}

impl Default for ClassifierTolerances {
    fn default() -> Self {
        ClassifierTolerances {
            eps_pole: 0.05,
            eps_zero: 0.05,
            eps_arc: 0.02,
            eps_len_bins: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
    D,
    Indeterminate,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::D => "D",
            Case::Indeterminate => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzimuthInterval {
    pub start: f64,
    pub length: f64,
    pub first_bin: usize,
    pub bin_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    /// min over bins of zmax − zmin
    pub min_arc_width: f64,
    /// min over bins of zmax
    pub min_zmax: f64,
    /// bins with zmax ≤ eps_zero
    pub zero_bins: usize,
    /// bins with zmax ≥ 1 − eps_pole
    pub pole_bins: usize,
    pub empty_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub case: Case,
    /// Bin-center azimuth of the degenerate arc (A) or the zero bin (C).
    pub witness_azimuth: Option<f64>,
    pub witness_bin: Option<usize>,
    /// Zero interval (D).
    pub interval: Option<AzimuthInterval>,
    pub scores: CaseScores,
}

/// Maximal cyclic runs of `true`, as `(first, len)`.
fn cyclic_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let b = flags.len();
    if flags.iter().all(|&f| f) {
        return vec![(0, b)];
    }
    // start scanning right after a false entry so no run wraps the scan origin
    let origin = flags.iter().position(|&f| !f).unwrap();
    let mut runs = Vec::new();
    let mut k = 0;
    while k < b {
        let idx = (origin + 1 + k) % b;
        if flags[idx] {
            let start = idx;
            let mut len = 0;
            while k < b && flags[(origin + 1 + k) % b] {
                len += 1;
                k += 1;
            }
            runs.push((start, len));
        } else {
            k += 1;
        }
    }
    runs
}

/// Decision procedure over the arc profile. Precedence A > B > C > D;
/// anything else, including profiles with empty bins, is `Indeterminate`.
pub fn classify(profile: &ArcProfile, tol: &ClassifierTolerances) -> CaseLabel {
    let b = profile.len();
    let empty_bins = profile.bins.iter().filter(|x| x.count == 0).count();
    let mut scores = CaseScores {
        min_arc_width: f64::INFINITY,
        min_zmax: f64::INFINITY,
        zero_bins: 0,
        pole_bins: 0,
        empty_bins,
    };
    let mut label = CaseLabel {
        case: Case::Indeterminate,
        witness_azimuth: None,
        witness_bin: None,
        interval: None,
        scores,
    };
    if b == 0 || empty_bins > 0 {
        return label;
    }

    let zmax: Vec<f64> = profile.bins.iter().map(|x| x.zmax.unwrap()).collect();
    let zmin: Vec<f64> = profile.bins.iter().map(|x| x.zmin.unwrap()).collect();
    let mut arc_bin = 0;
    for k in 0..b {
        let width = zmax[k] - zmin[k];
        if width < scores.min_arc_width {
            scores.min_arc_width = width;
            arc_bin = k;
        }
        scores.min_zmax = scores.min_zmax.min(zmax[k]);
    }
    let zero: Vec<bool> = zmax.iter().map(|&z| z <= tol.eps_zero).collect();
    let pole: Vec<bool> = zmax.iter().map(|&z| z >= 1.0 - tol.eps_pole).collect();
    scores.zero_bins = zero.iter().filter(|&&f| f).count();
    scores.pole_bins = pole.iter().filter(|&&f| f).count();
    label.scores = scores;

    if scores.min_arc_width <= tol.eps_arc {
        label.case = Case::A;
        label.witness_bin = Some(arc_bin);
        label.witness_azimuth = Some(profile.bin_center(arc_bin));
        return label;
    }
    if scores.pole_bins == b {
        label.case = Case::B;
        return label;
    }
    // every bin must be either a zero bin or a pole bin
    if (0..b).any(|k| !zero[k] && !pole[k]) {
        return label;
    }
    let runs = cyclic_runs(&zero);
    if runs.len() != 1 {
        return label;
    }
    let (first, len) = runs[0];
    if len == b {
        return label;
    }
    let w = bin_width(b);
    if len == 1 {
        label.case = Case::C;
        label.witness_bin = Some(first);
        label.witness_azimuth = Some(profile.bin_center(first));
        return label;
    }
    let length = len as f64 * w;
    let margin = tol.eps_len_bins * w;
    if length > margin && length < PI - margin {
        label.case = Case::D;
        label.interval = Some(AzimuthInterval {
            start: profile.bins[first].theta_lo,
            length,
            first_bin: first,
            bin_count: len,
        });
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;

    fn meta() -> DirectionMeta {
        DirectionMeta {
            field: "test".into(),
            sample_box: SampleBox::square(1.0),
            points: 0,
            seed: 0,
            pair_budget: 0,
            pairs_used: 0,
            deformation: 1.0,
        }
    }

    #[test]
    fn constant_field_gives_horizontal_chords() {
        let f = ScalarField::parse2("5").unwrap();
        let ds = sample_direction_set(&f, SampleBox::square(3.0), 100, 1, DEFAULT_PAIR_BUDGET).unwrap();
        assert_eq!(ds.len(), 100 * 99);
        assert!(ds.samples.iter().all(|v| v.z() == 0.0));
        let p = estimate_profile(&ds, 360).unwrap();
        for bin in p.bins.iter().filter(|b| b.count > 0) {
            assert_eq!(bin.zmax, Some(0.0));
            assert_eq!(bin.zmin, Some(0.0));
        }
    }

    #[test]
    fn too_few_samples() {
        let f = ScalarField::parse2("x").unwrap();
        assert_eq!(
            sample_direction_set(&f, SampleBox::square(1.0), 1, 0, 10),
            Err(DirectionError::TooFewSamples(1))
        );
        assert!(matches!(
            sample_direction_set(&f, SampleBox::new(0.0, 0.0, 0.0, 1.0), 5, 0, 10),
            Err(DirectionError::DegenerateBox(_))
        ));
    }

    #[test]
    fn domain_error_propagates() {
        let f = ScalarField::parse2("ln(x)").unwrap();
        assert!(matches!(
            sample_direction_set(&f, SampleBox::square(1.0), 50, 0, 100),
            Err(DirectionError::Domain(_))
        ));
    }

    #[test]
    fn pair_budget_subsamples() {
        let f = ScalarField::parse2("x*y").unwrap();
        let ds = sample_direction_set(&f, SampleBox::square(1.0), 200, 4, 1000).unwrap();
        assert_eq!(ds.meta.pairs_used, 1000);
        assert_eq!(ds.len(), 2000);
    }

    #[test]
    fn single_sample_profile() {
        let v = UnitVec3::from_xyz(1.0, 0.0, 0.0).unwrap();
        let ds = DirectionSet::from_directions(&[v], meta());
        let p = estimate_profile(&ds, 360).unwrap();
        let at_zero = bin_of(0.0, 360);
        let at_pi = bin_of(PI, 360);
        assert_eq!(p.bins[at_zero].zmax, Some(0.0));
        assert_eq!(p.bins[at_zero].count, 1);
        assert_eq!(p.bins[at_pi].count, 1);
        let nonempty = p.bins.iter().filter(|b| b.count > 0).count();
        assert_eq!(nonempty, 2);
    }

    #[test]
    fn profile_errors() {
        let ds = DirectionSet::from_directions(&[], meta());
        assert_eq!(
            estimate_profile(&ds, 360),
            Err(DirectionError::EmptyDirectionSet)
        );
        let v = UnitVec3::from_xyz(1.0, 0.0, 0.0).unwrap();
        let ds = DirectionSet::from_directions(&[v], meta());
        assert_eq!(estimate_profile(&ds, 4), Err(DirectionError::TooFewBins(4)));
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_of(PI, 360), 359);
        assert_eq!(bin_of(-PI + 1e-12, 360), 0);
        assert_eq!(bin_of(0.0, 360), 179);
        assert_eq!(bin_of(1e-12, 360), 180);
    }

    #[test]
    fn cyclic_runs_wrap() {
        let flags = [true, false, false, true, true];
        assert_eq!(cyclic_runs(&flags), vec![(3, 3)]);
        assert_eq!(cyclic_runs(&[false, false]), vec![]);
        assert_eq!(cyclic_runs(&[true, true]), vec![(0, 2)]);
        let mut runs = cyclic_runs(&[true, false, true, false]);
        runs.sort();
        assert_eq!(runs, vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn synthetic_case_b() {
        let p = ArcProfile::from_values(&vec![(-1.0, 1.0); 360]);
        assert_eq!(classify(&p, &Default::default()).case, Case::B);
    }

    #[test]
    fn empty_bin_is_indeterminate() {
        let mut p = ArcProfile::from_values(&vec![(-1.0, 1.0); 360]);
        p.bins[17].count = 0;
        p.bins[17].zmax = None;
        p.bins[17].zmin = None;
        assert_eq!(classify(&p, &Default::default()).case, Case::Indeterminate);
    }

    #[test]
    fn two_zero_bins_are_neither_c_nor_d() {
        let mut v = vec![(-1.0, 1.0); 360];
        v[10] = (-1.0, 0.0);
        v[11] = (-1.0, 0.0);
        let p = ArcProfile::from_values(&v);
        assert_eq!(classify(&p, &Default::default()).case, Case::Indeterminate);
    }

    #[test]
    fn csv_header_and_rows() {
        let v = UnitVec3::from_xyz(0.0, 1.0, 0.0).unwrap();
        let ds = DirectionSet::from_directions(&[v], meta());
        assert_eq!(ds.to_csv(), "x,y,z\n0,1,0\n-0,-1,-0\n");
    }
}
