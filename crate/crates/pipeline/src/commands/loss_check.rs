//! `loss-check`: distributed softmax losses, analytic gradients, and the
//! finite-difference report over paired CSV rows.

use std::path::Path;

use detkit_core::loss::{
    distributed_softmax_ce, distributed_softmax_grad, finite_diff_check, LabelDistribution, Logits,
};

use crate::error::{data_error, PipelineError};
use crate::formats::csv_io;

pub fn run(logits_path: &Path, targets_path: &Path, epsilon: f64) -> Result<(), PipelineError> {
    let logit_rows = csv_io::read_numeric_rows(logits_path)?;
    let target_rows = csv_io::read_numeric_rows(targets_path)?;
    if logit_rows.len() != target_rows.len() {
        return Err(PipelineError::data(format!(
            "loss-check: {} logit rows but {} target rows",
            logit_rows.len(),
            target_rows.len()
        )));
    }
    let mut max_fd = 0.0f64;
    for (i, (logit_row, target_row)) in logit_rows.into_iter().zip(target_rows).enumerate() {
        let context = format!("loss-check: row {i}");
        let x = Logits::new(logit_row).map_err(|e| data_error(&context, e))?;
        let y = LabelDistribution::from_weights(target_row).map_err(|e| data_error(&context, e))?;
        let loss = distributed_softmax_ce(&x, &y).map_err(|e| data_error(&context, e))?;
        let grad = distributed_softmax_grad(&x, &y).map_err(|e| data_error(&context, e))?;
        let fd = finite_diff_check(&x, &y, epsilon).map_err(|e| data_error(&context, e))?;
        max_fd = max_fd.max(fd);
        let grad_text: Vec<String> = grad.iter().map(|g| format!("{g:.9}")).collect();
        println!("row {i} loss {loss:.9}");
        println!("row {i} grad {}", grad_text.join(","));
        println!("row {i} fd {fd:.3e}");
    }
    println!("max-fd {max_fd:.3e}");
    Ok(())
}
