//! Text output helpers shared by the CSV writers.

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn sig12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_owned()
    } else {
        t.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::sig12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(0.546875), "0.546875");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(-2.5), "-2.5");
        assert_eq!(sig12(123456.0), "123456");
        assert_eq!(sig12(1.5e-7), "1.5e-7");
        assert_eq!(sig12(6.02214076e23), "6.02214076e23");
        assert_eq!(sig12(std::f64::consts::PI), "3.14159265359");
    }
}
