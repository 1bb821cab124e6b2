//! Unit-suffixed quantities at the command-line boundary.

/// Parses `<number><suffix>` where the suffix is one of `units`, given as
/// `(suffix, factor to SI)`. Longer suffixes must come first.
fn parse_suffixed(s: &str, units: &[(&str, f64)], what: &str) -> Result<f64, String> {
    let s = s.trim();
    for &(suffix, factor) in units {
        if let Some(num) = s.strip_suffix(suffix) {
            let v: f64 = num.trim().parse().map_err(|_| format!("cannot parse {what} '{s}'"))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{what} '{s}' must be positive"));
            }
            return Ok(v * factor);
        }
    }
    let names: Vec<&str> = units.iter().map(|u| u.0).collect();
    Err(format!("{what} '{s}' needs a unit suffix ({})", names.join(", ")))
}

/// Mass in kilograms from a value suffixed with `g` or `kg`.
pub fn parse_mass(s: &str) -> Result<f64, String> {
    parse_suffixed(s, &[("kg", 1.0), ("g", 1e-3)], "mass")
}

/// Length in metres from a value suffixed with `cm` or `m`.
pub fn parse_length(s: &str) -> Result<f64, String> {
    parse_suffixed(s, &[("cm", 1e-2), ("m", 1.0)], "length")
}

/// Masses of a sweep, in kilograms.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSweep(pub Vec<f64>);

/// A log-spaced mass range `FROM:TO:POINTS`.
pub fn parse_mass_sweep(s: &str) -> Result<MassSweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [from, to, n] = parts[..] else {
        return Err(format!("mass sweep '{s}' must look like FROM:TO:POINTS"));
    };
    let (lo, hi) = (parse_mass(from)?, parse_mass(to)?);
    let n: usize = n.parse().map_err(|_| format!("cannot parse point count '{n}'"))?;
    if n == 0 {
        return Err("a sweep needs at least one point".into());
    }
    if n == 1 {
        return Ok(MassSweep(vec![lo]));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    Ok(MassSweep(v))
}
