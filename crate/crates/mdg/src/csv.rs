//! Convergence tables as CSV.

use std::io;

use mdg_core::postprocess::ConvergenceTable;

pub const HEADER: [&str; 12] = [
    "inv_kappa",
    "nu",
    "k",
    "n",
    "u_l2",
    "u_rate",
    "sigma_broken",
    "sigma_broken_rate",
    "sigma_l2",
    "sigma_l2_rate",
    "p_l2",
    "p_rate",
];

/// One convergence study: a fixed inverse permeability and viscosity over
/// a sequence of meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    /// The constant value, or a label for variable fields.
    pub inv_kappa: String,
    pub nu: f64,
    pub k: usize,
    pub table: ConvergenceTable,
}

/// Six significant digits with a signed two-digit exponent, `3.18199e-03`.
pub fn format_error(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.5e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn format_rate(r: f64) -> String {
    format!("{r:.2}")
}

/// Write the header and one row per mesh of every table. Rates are empty on
/// the first row of each table.
pub fn write_tables<W: io::Write>(out: W, tables: &[StudyTable]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for t in tables {
        for (i, row) in t.table.rows.iter().enumerate() {
            let rates = i.checked_sub(1).map(|j| t.table.rates[j]);
            let rate = |f: fn(&mdg_core::postprocess::Rates) -> f64| rates.as_ref().map(f).map(format_rate).unwrap_or_default();
            let e = &row.errors;
            w.write_record([
                t.inv_kappa.clone(),
                format!("{}", t.nu),
                t.k.to_string(),
                row.n.to_string(),
                format_error(e.u_l2),
                rate(|r| r.u_l2),
                format_error(e.sigma_broken),
                rate(|r| r.sigma_broken),
                format_error(e.sigma_l2),
                rate(|r| r.sigma_l2),
                format_error(e.p_l2),
                rate(|r| r.p_l2),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_format() {
        assert_eq!(format_error(3.18199e-3), "3.18199e-03");
        assert_eq!(format_error(1.0), "1.00000e+00");
        assert_eq!(format_error(2.93956e-5), "2.93956e-05");
        assert_eq!(format_error(1.234567e12), "1.23457e+12");
        assert_eq!(format_error(0.0), "0.00000e+00");
    }

    #[test]
    fn rate_format() {
        assert_eq!(format_rate(1.996), "2.00");
        assert_eq!(format_rate(0.5), "0.50");
    }
}
