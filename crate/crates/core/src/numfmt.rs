//! `%g`-style number formatting used by the text file formats.

/// Formats `x` with `sig` significant digits, dropping trailing zeros and
/// switching to exponent notation for very large or small magnitudes, like
/// C's `%.{sig}g`.
pub fn format_sig(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(0.5, 9), "0.5");
        assert_eq!(format_sig(-0.123456789012, 9), "-0.123456789");
        assert_eq!(format_sig(123456789.0, 9), "123456789");
        assert_eq!(format_sig(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_sig(0.0001, 6), "0.0001");
        assert_eq!(format_sig(0.00001234, 6), "1.234e-05");
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(99.99999, 3), "100");
    }

    #[test]
    fn nine_digits_round_trip_f32() {
        let mut x = 1.0e-3f32;
        for _ in 0..2000 {
            let s = format_sig(x as f64, 9);
            assert_eq!(s.parse::<f32>().unwrap(), x, "{s}");
            x = x * 1.37 + 0.11;
            if x > 1e6 {
                x = -x * 1e-9;
            }
        }
    }
}
