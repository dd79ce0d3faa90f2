//! Deterministic number formatting for CSV bodies and stdout reports.

/// Formats with exactly `sig` significant digits, plain decimal where the
/// magnitude allows and normalized scientific notation otherwise. Output is a
/// pure function of the value, so repeated runs emit byte-identical files.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let scientific = format!("{:.*e}", sig - 1, x);
    let (mantissa, exponent) = scientific
        .split_once('e')
        .expect("scientific format always has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if exponent >= -4 && exponent < sig as i32 {
        let decimals = (sig as i32 - 1 - exponent).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{mantissa}e{exponent}")
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn plain_decimal_range() {
        assert_eq!(fmt_sig(4.09402262307, 12), "4.09402262307");
        assert_eq!(fmt_sig(0.294904, 6), "0.294904");
        assert_eq!(fmt_sig(18.1001727374, 12), "18.1001727374");
        assert_eq!(fmt_sig(-1.5, 3), "-1.50");
        assert_eq!(fmt_sig(0.0, 12), "0");
    }

    #[test]
    fn scientific_fallback() {
        assert_eq!(fmt_sig(1.25e-7, 3), "1.25e-7");
        assert_eq!(fmt_sig(3.0e15, 2), "3.0e15");
    }

    #[test]
    fn rounding_is_correct() {
        assert_eq!(fmt_sig(0.2949047, 6), "0.294905");
        assert_eq!(fmt_sig(999.9999, 6), "1000.00");
    }
}
