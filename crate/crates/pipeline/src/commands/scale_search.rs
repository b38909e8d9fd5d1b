//! `scale-search`: constrained grid search for the base scale triple, with
//! optional compound scaling of an architecture plan by the winner.

use std::path::{Path, PathBuf};

use detkit_core::scaling::{compound_scale, grid_search_base, plan_variant};

use crate::error::{scaling_error, PipelineError};
use crate::formats::{atomic::write_atomic, json_docs};
use crate::oracle::make_oracle;

#[allow(clippy::too_many_arguments)]
pub fn run(
    grid_spec: &Path,
    oracle_spec: &str,
    scan_out: Option<PathBuf>,
    plan: Option<PathBuf>,
    plan_out: Option<PathBuf>,
    phi: f64,
    fix_resolution: bool,
    stage4_extra: u32,
) -> Result<(), PipelineError> {
    let (grid, target, tol) = json_docs::load_grid_spec(grid_spec)?;
    let oracle = make_oracle(oracle_spec)?;
    let outcome = grid_search_base(oracle.as_ref(), &grid, target, tol)
        .map_err(|e| scaling_error("scale-search", e))?;
    println!(
        "best depth={:.6} width={:.6} resolution={:.6} constraint={:.6} score={:.6}",
        outcome.best.depth,
        outcome.best.width,
        outcome.best.resolution,
        outcome.best.constraint_value(),
        outcome.best_score,
    );

    if let Some(path) = scan_out {
        let mut rows = String::from("Depth,Width,Resolution,Constraint,Feasible,Score\n");
        for point in &outcome.scan {
            let score = point.score.map(|s| format!("{s:.6}")).unwrap_or_default();
            rows.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{},{}\n",
                point.triple.depth,
                point.triple.width,
                point.triple.resolution,
                point.constraint,
                point.feasible,
                score,
            ));
        }
        write_atomic(&path, rows.as_bytes())?;
    }

    match (plan, plan_out) {
        (Some(plan_path), Some(out_path)) => {
            if !phi.is_finite() || phi < 0.0 {
                return Err(PipelineError::usage(format!(
                    "--phi must be non-negative, got {phi}"
                )));
            }
            let base = json_docs::load_arch_plan(&plan_path)?;
            let scaled = compound_scale(outcome.best, phi);
            let variant = plan_variant(&base, scaled, fix_resolution, stage4_extra)
                .map_err(|e| scaling_error("scale-search", e))?;
            json_docs::write_arch_plan(&variant, &out_path)?;
        }
        (None, None) => {}
        _ => {
            return Err(PipelineError::usage(
                "--plan and --plan-out must be given together",
            ));
        }
    }
    Ok(())
}
