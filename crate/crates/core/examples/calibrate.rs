//! Regenerates `fixtures/nonrigid_calibration.json`.
//!
//! Runs the isometry search and the direction obstruction for exp(x) at
//! c = 2 on [−3, 3]² with n = 2000 and a large number of extra random seeds,
//! then sets each non-rigidity threshold to `safety` times the smallest
//! residual found.
//!
//!     cargo run --release --example calibrate > crates/core/fixtures/nonrigid_calibration.json

use hrigid::directions::{sample_direction_set, SampleBox, DEFAULT_PAIR_BUDGET};
use hrigid::rigidity::{
    direction_obstruction_with, find_isometry_with, sample_graph, AlignmentOptions, Calibration,
    NonRigidThresholds, ObstructionOptions,
};
use hrigid::ScalarField;

const RANDOM_SEEDS: usize = 2000;
const SAFETY: f64 = 0.5;

fn main() -> anyhow::Result<()> {
    let field = ScalarField::parse2("exp(x)")?;
    let (c, n, seed) = (2.0, 2000, 0);
    let sample_box = SampleBox::square(3.0);

    let ds = sample_direction_set(&field, sample_box, n, seed, DEFAULT_PAIR_BUDGET)?;
    // the exhaustive run does not contain the default one, so keep the better
    let exhaustive = direction_obstruction_with(
        &ds,
        c,
        &ObstructionOptions {
            random_seeds: RANDOM_SEEDS / 4,
            refine_best: 16,
            fine_candidates: 16,
            polish_evaluations: 200,
            ..ObstructionOptions::default()
        },
    )?;
    let default = direction_obstruction_with(&ds, c, &ObstructionOptions::default())?;
    let obs = if exhaustive.residual <= default.residual { exhaustive } else { default };
    eprintln!("obstruction minimum {:e}", obs.residual);

    let source = sample_graph(&field, 1.0, sample_box, n, seed)?;
    let target = sample_graph(&field, c, sample_box, n, seed)?;
    let align = find_isometry_with(
        &source,
        &target,
        &[*obs.ort.ort()],
        &AlignmentOptions {
            random_seeds: RANDOM_SEEDS,
            max_iterations: 100,
            ..AlignmentOptions::default()
        },
    )?;
    eprintln!("alignment minimum {:e} over {} seeds", align.rms, align.seeds_tried);

    let cal = Calibration {
        field: field.source().to_string(),
        c,
        sample_box,
        n,
        seed,
        random_seeds: RANDOM_SEEDS,
        min_rms: align.rms,
        min_obstruction: obs.residual,
        safety: SAFETY,
        thresholds: NonRigidThresholds {
            rms: SAFETY * align.rms,
            obstruction: SAFETY * obs.residual,
        },
    };
    println!("{}", serde_json::to_string_pretty(&cal)?);
    Ok(())
}
