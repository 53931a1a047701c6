//! Shortest-form float formatting for CSV output.
//!
//! All human-facing CSV columns use 6 significant digits in printf `%g`
//! style: fixed notation when the decimal exponent is in [-4, 6), scientific
//! otherwise, trailing zeros trimmed. Rust's standard formatter has no `%g`
//! equivalent, hence this small one. Output is locale-free and deterministic.

/// `%.6g`-equivalent formatting.
pub fn fmt_g6(v: f64) -> String {
    fmt_g(v, 6)
}

/// printf `%.<sig>g`-equivalent formatting (`sig` >= 1).
pub fn fmt_g(v: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v < 0.0 { "-inf".into() } else { "inf".into() };
    }
    // Round to `sig` significant digits first; the notation choice depends on
    // the exponent *after* rounding (999999.9 at 6 digits is 1e+06).
    let e = format!("{:.*e}", sig - 1, v);
    let (mant, exp) = e.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent parses");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if digits.is_empty() {
        return format!("{}0", sign);
    }

    if exp >= -4 && exp < sig as i32 {
        // fixed notation
        if exp < 0 {
            let zeros = "0".repeat((-exp - 1) as usize);
            format!("{}0.{}{}", sign, zeros, digits)
        } else {
            let ip = exp as usize + 1;
            if digits.len() > ip {
                format!("{}{}.{}", sign, &digits[..ip], &digits[ip..])
            } else {
                format!("{}{}{}", sign, digits, "0".repeat(ip - digits.len()))
            }
        }
    } else {
        // scientific, C-style two-digit exponent
        let m = if digits.len() > 1 {
            format!("{}.{}", &digits[..1], &digits[1..])
        } else {
            digits.to_string()
        };
        format!("{}{}e{}{:02}", sign, m, if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}
