use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `count` equally spaced points from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
            .collect(),
    }
}

/// `{0, 1/denom, 2/denom, …}` up to `max` inclusive.
pub fn step_grid(max: f64, denom: u32) -> Vec<f64> {
    let top = (max * denom as f64 + 1e-9).floor() as u32;
    (0..=top).map(|k| k as f64 / denom as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.count)
    }

    /// Parses `lo:hi:count`.
    pub fn parse(text: &str) -> Result<GridSpec> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::invalid(format!("grid `{text}` is not lo:hi:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) || hi < lo || count == 0 {
            return Err(bad());
        }
        Ok(GridSpec { lo, hi, count })
    }
}

/// Exponent/prefactor caps for fits and verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    pub rate: f64,
    pub nu: f64,
    /// Largest admissible prefactor (or Gramian ceiling/floor ratio).
    pub pref: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { rate: 5.0, nu: 3.0, pref: 10f64.exp() }
    }
}

impl Caps {
    pub fn log_pref(&self) -> f64 {
        self.pref.ln()
    }

    pub fn rate_grid(&self) -> Vec<f64> {
        step_grid(self.rate, 20)
    }

    pub fn nu_grid(&self) -> Vec<f64> {
        step_grid(self.nu, 20)
    }

    /// Parses `rate:nu:pref`.
    pub fn parse(text: &str) -> Result<Caps> {
        let bad = || Error::invalid(format!("caps `{text}` are not rate:nu:pref"));
        let v: Vec<f64> = text.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if v.len() != 3 || v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(bad());
        }
        Ok(Caps { rate: v[0], nu: v[1], pref: v[2] })
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("`{text}` is not a comma-separated list of numbers")))?;
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("bad list `{text}`")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-1.0, 2.0, 4);
        assert_eq!(v, vec![-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(linspace(3.0, 5.0, 1), vec![3.0]);
        assert_eq!(*linspace(-4.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI, 33).last().unwrap(), 4.0 * std::f64::consts::PI);
    }

    #[test]
    fn default_search_grids() {
        let caps = Caps::default();
        let r = caps.rate_grid();
        assert_eq!(r.len(), 101);
        assert_eq!(r[20], 1.0);
        assert_eq!(r[40], 2.0);
        assert_eq!(caps.nu_grid().len(), 61);
    }

    #[test]
    fn parsing() {
        assert_eq!(GridSpec::parse("-3:3:7").unwrap().points().len(), 7);
        assert!(GridSpec::parse("3:-3:7").is_err());
        assert!(GridSpec::parse("a:b").is_err());
        let c = Caps::parse("5:3:22026").unwrap();
        assert_eq!(c.nu, 3.0);
        assert!(Caps::parse("5:0:1").is_err());
        assert_eq!(parse_list("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_list("1,,2").is_err());
    }
}
