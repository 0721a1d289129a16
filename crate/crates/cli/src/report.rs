//! `key = value` documents on stdout and number formatting shared with the
//! CSV writer.

use std::fmt::Write;

/// `x` with `digits` significant digits, trailing zeros removed. Plain
/// notation for exponents in [-4, digits), scientific otherwise.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub struct Report {
    precision: usize,
    out: String,
}

impl Report {
    pub fn new(precision: usize) -> Self {
        Report {
            precision,
            out: String::new(),
        }
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        let v = fmt_sig(value, self.precision);
        let _ = writeln!(self.out, "{key} = {v}");
        self
    }

    pub fn int(&mut self, key: &str, value: usize) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value:?}");
        self
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn render(&self) -> &str {
        &self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(-4_197_342.123_456, 9), "-4197342.12");
        assert_eq!(fmt_sig(0.201_438_123_4, 9), "0.201438123");
        assert_eq!(fmt_sig(3.47e-4, 9), "0.000347");
        assert_eq!(fmt_sig(4.6e-12, 9), "4.6e-12");
        assert_eq!(fmt_sig(1.0, 9), "1");
        assert_eq!(fmt_sig(1.23456789e12, 3), "1.23e12");
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(f64::INFINITY, 9), "inf");
        assert_eq!(fmt_sig(99.99999999, 3), "100");
    }

    #[test]
    fn document_lines() {
        let mut r = Report::new(4);
        r.num("x", 1.23456).text("kind", "fixed").int("n", 3).flag("ok", true);
        assert_eq!(r.render(), "x = 1.235\nkind = \"fixed\"\nn = 3\nok = true\n");
    }
}
