//! Byte-stable number rendering for output files.

/// Renders `x` with exactly six significant digits, in the style of C's
/// `%#.6g`: fixed notation for exponents in `[-4, 6)`, scientific otherwise.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(6.95), "6.95000");
        assert_eq!(sig6(19.7), "19.7000");
        assert_eq!(sig6(0.05), "0.0500000");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(9.999996), "10.0000");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(-0.000012345), "-1.23450e-05");
        assert_eq!(sig6(0.0), "0.00000");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }
}
