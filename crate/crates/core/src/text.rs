//! Plain-text number formatting shared by CSV writers.

/// `v` with 9 significant digits. Plain notation for magnitudes in
/// `[1e-5, 1e9)`, scientific otherwise; trailing zeros are dropped.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // rounding can carry into the next decade, so format via scientific first
    let sci = format!("{v:.8e}");
    let (mant, e) = sci.split_once('e').expect("scientific notation");
    let e: i32 = e.parse().expect("integer exponent");
    if !(-5..9).contains(&e) {
        return format!("{}e{e}", trim(mant));
    }
    let decimals = (8 - e).max(0) as usize;
    trim(&format!("{v:.decimals$}")).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
