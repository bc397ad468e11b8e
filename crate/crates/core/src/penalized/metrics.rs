use crate::error::{DprError, Result};

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(DprError::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(DprError::InvalidArgument("metrics need at least one observation".into()));
    }
    Ok(())
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination `1 - RSS / TSS`. Errors when `y` is
/// constant.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss == 0.0 {
        return Err(DprError::InvalidArgument("R^2 undefined for a constant response".into()));
    }
    let rss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

/// Fraction of exactly non-zero entries among the coefficients that are
/// allowed to move (`active`); 0 when nothing is active.
pub fn sparsity(coefficients: &[f64], active: &[usize]) -> f64 {
    if active.is_empty() {
        return 0.0;
    }
    let nonzero = active.iter().filter(|&&j| coefficients[j] != 0.0).count();
    nonzero as f64 / active.len() as f64
}
