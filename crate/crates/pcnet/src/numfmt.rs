//! Deterministic float rendering at a fixed number of significant digits,
//! with trailing zeros trimmed. Used for all numeric output so repeated
//! runs stay byte-identical.

/// Formats with the given significant digits, dropping trailing zeros.
/// Values far from one switch to exponent notation.
pub fn significant(x: f64, digits: usize) -> String {
    assert!(digits > 0);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exponent.parse().expect("exponent value");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{exp}", trim(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn trim(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::significant;

    #[test]
    fn renders_at_requested_precision() {
        assert_eq!(significant(0.0, 12), "0");
        assert_eq!(significant(-0.0, 12), "0");
        assert_eq!(significant(5.0, 12), "5");
        assert_eq!(significant(0.44, 12), "0.44");
        assert_eq!(significant(3.0 / 11.0, 12), "0.272727272727");
        assert_eq!(significant(-290.0 / 11.0, 12), "-26.3636363636");
        assert_eq!(significant(20.0 / 7.0, 12), "2.85714285714");
        assert_eq!(significant(1234.5, 3), "1.23e3");
        assert_eq!(significant(1234.5, 6), "1234.5");
        assert_eq!(significant(0.00012344, 4), "0.0001234");
        assert_eq!(significant(0.000012344, 4), "1.234e-5");
        assert_eq!(significant(1.5e16, 6), "1.5e16");
        assert_eq!(significant(-1.0038e-4, 12), "-0.00010038");
    }
}
