//! Bit-reproducible number formatting shared by every text output.

/// Formats `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn num17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{:.16e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, std::f64::consts::E, 1e-300, -7.25e12] {
            let s = num17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num17(f64::NAN), "NaN");
    }
}
