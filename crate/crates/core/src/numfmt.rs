//! Plain-decimal numeric formatting with a fixed significant-digit budget.
//!
//! All numeric output written by this workspace (JSON results, CSV tables)
//! goes through [`format_significant`] so files are byte-stable across runs
//! and platforms: plain decimal notation, `.` separator, no exponent, 12
//! significant digits by convention, trailing zeros trimmed.

/// Number of significant digits used by the workspace's serializers.
pub const OUTPUT_SIG_DIGITS: usize = 12;

/// Format `x` in plain decimal with `digits` significant digits.
///
/// Trailing fractional zeros (and a bare trailing `.`) are trimmed, so
/// `0.05` stays `"0.05"` rather than `"0.0500000000000"`. Non-finite values
/// format as `"nan"` / `"inf"` / `"-inf"`; serializers are expected to keep
/// those out of output files.
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1, "need at least one significant digit");
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let exp = x.abs().log10().floor() as i64;
    let decimals = ((digits as i64 - 1) - exp).clamp(0, 340) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        s
    }
}
