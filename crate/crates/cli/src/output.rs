use std::io::Write;

use mata_core::bound::CurveRow;

use crate::CliError;

/// Six significant digits, switching to exponent form for very large or
/// small magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit, e.g. 9.999996 -> 10.00000
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 6 && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

/// Curve rows at full round-trip precision.
pub fn write_curve<W: Write>(w: W, rows: &[CurveRow]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| CliError::Input(format!("writing curve: {e}"));
    wtr.write_record(CurveRow::HEADER).map_err(io)?;
    for r in rows {
        wtr.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.d.to_string(),
            r.alpha.to_string(),
            r.rho_max_abs.to_string(),
            r.gamma_star.to_string(),
            r.upper_bound.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| CliError::Input(format!("writing curve: {e}")))?;
    Ok(())
}
