//! Report serialization: every numeric value is written with 12 significant
//! digits so tolerances stay meaningful across platforms, and files carry no
//! timestamps so identical runs are byte-identical.

use std::fmt::Write as _;

/// Formats with 12 significant digits, trimming trailing zeros; values far
/// from unit scale switch to scientific notation.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exponent) {
        return format!("{:.11e}", x);
    }
    let decimals = (11 - exponent).max(0) as usize;
    let fixed = format!("{:.*}", decimals, x);
    let trimmed = fixed.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Accumulates `key value` lines for the machine-readable report.
#[derive(Debug, Default)]
pub struct KeyValueReport {
    lines: Vec<(String, String)>,
}

impl KeyValueReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) {
        self.lines.push((key.to_string(), value.into()));
    }

    pub fn number(&mut self, key: &str, value: f64) {
        self.text(key, fmt_g12(value));
    }

    pub fn integer(&mut self, key: &str, value: usize) {
        self.text(key, value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.lines {
            let _ = writeln!(out, "{key} {value}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_g12(0.0), "0");
        assert_eq!(fmt_g12(1.0), "1");
        assert_eq!(fmt_g12(0.5), "0.5");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(123456.789), "123456.789");
        assert_eq!(fmt_g12(-0.25), "-0.25");
        assert!(fmt_g12(1.5e-9).contains('e'));
        assert_eq!(fmt_g12(1e15), "1.00000000000e15");
    }

    #[test]
    fn report_renders_in_insertion_order() {
        let mut report = KeyValueReport::new();
        report.text("run_label", "reg");
        report.number("accuracy", 0.78);
        report.integer("samples", 300);
        assert_eq!(report.render(), "run_label reg\naccuracy 0.78\nsamples 300\n");
        assert_eq!(report.get("accuracy"), Some("0.78"));
    }
}
