//! Lossless decimal formatting for floating-point output.

/// Formats `x` with 17 significant digits in scientific notation, which
/// round-trips every finite `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
