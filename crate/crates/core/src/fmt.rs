//! Number formatting shared by the writers.

/// Rounds to 9 significant digits and prints the shortest form; magnitudes
/// outside [1e-4, 1e12) use exponent notation.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded = round9(x);
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if !(1e-4..1e12).contains(&a) {
        return format!("{rounded:e}");
    }
    format!("{rounded}")
}

/// `x` rounded to 9 significant digits; non-finite values pass through.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Same as [`sig9`] but for JSON values: non-finite numbers become `null`.
pub fn sig9_value(x: f64) -> serde_json::Value {
    if !x.is_finite() {
        return serde_json::Value::Null;
    }
    serde_json::Number::from_f64(round9(x)).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(sig9(0.853_553_390_593_273_8), "0.853553391");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(123_456_789_123.0), "123456789000");
        assert_eq!(sig9(f64::NAN), "NaN");
        assert_eq!(sig9(1.164_836_749e-8), "1.16483675e-8");
        assert_eq!(sig9(-2.5e13), "-2.5e13");
        assert_eq!(sig9_value(0.1234567891234).to_string(), "0.123456789");
    }
}
