//! CSV serialization. Floats are written with 17 significant digits so that
//! equal values are byte-identical across runs.

/// A float rendered with 17 significant digits in scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Assemble a CSV text from a header and rows; always ends with a newline.
pub fn table(header: &str, rows: &[String]) -> String {
    let mut out =
        String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.24197072451914337), "2.4197072451914337e-1");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        assert_eq!(num(-1.5), "-1.5000000000000000e0");
        let v = 0.1 + 0.2;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn table_layout() {
        let t = table("a,b", &["1,2".into(), "3,4".into()]);
        assert_eq!(t, "a,b\n1,2\n3,4\n");
    }
}
