//! Float formatting for machine-readable output.

/// Formats `x` with `digits` significant digits in the style of C's `%.{digits}g`:
/// positional notation for decimal exponents in `[-5, digits)`, scientific
/// otherwise, trailing zeros removed.
///
/// With `digits = 17` every finite `f64` round-trips through `str::parse`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let mantissa_digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let body = if exp < -5 || exp >= digits as i32 {
        let mut m = mantissa.trim_start_matches('-').to_string();
        if m.contains('.') {
            m = m.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = format!("{zeros}{mantissa_digits}");
        format!("0.{}", frac.trim_end_matches('0'))
    } else {
        let split = exp as usize + 1;
        let (int_part, frac) = mantissa_digits.split_at(split);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac}")
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Lossless 17-significant-digit form used in CSV and scalar output.
pub fn sig17(x: f64) -> String {
    format_sig(x, 17)
}

/// Six-digit form for human-readable tables.
pub fn sig6(x: f64) -> String {
    format_sig(x, 6)
}
