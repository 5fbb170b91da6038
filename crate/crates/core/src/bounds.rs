//! Closed-form index lower bounds in terms of the spectral genus `g` and the
//! multiplicity `m`, the area estimates, and their comparison with a spectrum.

use std::f64::consts::PI;
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Section};
use crate::field::ScalarField;
use crate::spectrum::SpectrumReport;

pub const DEFAULT_C_TILDE: f64 = 1e7;
pub const BOUNDS_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("spectral genus must be >= 2, got {0}")]
    GenusTooSmall(u32),
    #[error("multiplicity must be >= 1")]
    ZeroMultiplicity,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("empty genus range {from}..={to}")]
    EmptyRange { from: u32, to: u32 },
}

/// `⌊(g−1)/3⌋`.
fn third(g: u32) -> i64 {
    (g as i64 - 1).div_euclid(3)
}

/// `(g+2)² − ½(1+(−1)^g)`, an integer.
pub fn genus_quadratic(g: u32) -> i64 {
    let g = g as i64;
    (g + 2) * (g + 2) - if g % 2 == 0 { 1 } else { 0 }
}

/// `m·⌊(g−1)/3⌋ − 2`.
pub fn thm1_bound(g: u32, m: u32) -> i64 {
    m as i64 * third(g) - 2
}

/// `m·(⌊(g−1)/3⌋ + ⌊min((g−1)/3, 4)⌋) − 2`.
pub fn thm2_bound(g: u32, m: u32) -> i64 {
    m as i64 * (third(g) + third(g).min(4)) - 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticBound {
    /// `C((g+2)² − ½(1+(−1)^g)) − 2`.
    pub sharp: f64,
    /// `C g² − 2`.
    pub simplified: f64,
}

pub fn thm3_bound(g: u32, c: f64) -> QuadraticBound {
    QuadraticBound {
        sharp: c * genus_quadratic(g) as f64 - 2.0,
        simplified: c * (g as f64) * (g as f64) - 2.0,
    }
}

/// Integer form of the quadratic bound: `⌊C·Q⌋ − 2`.
pub fn thm3_integer(g: u32, c: f64) -> i64 {
    (c * genus_quadratic(g) as f64).floor() as i64 - 2
}

/// `(π/4)((g+2)² − ½(1+(−1)^g))`.
pub fn flpp_area_lower(g: u32) -> f64 {
    PI / 4.0 * genus_quadratic(g) as f64
}

/// `∫ e^u dxdy` by the periodic trapezoid rule.
pub fn surface_area(u: &ScalarField) -> f64 {
    u.map(f64::exp).integral()
}

/// `⌊A/C̃⌋ − 2`.
pub fn korevaar_lower(area: f64, c_tilde: f64) -> i64 {
    (area / c_tilde).floor() as i64 - 2
}

/// The constant `π/(4C̃)` obtained by composing the two area estimates.
pub fn default_c(c_tilde: f64) -> f64 {
    PI / (4.0 * c_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub g: u32,
    pub m: u32,
    /// Whether the vanishing condition at the half-periods is asserted.
    pub d_zero: bool,
    pub c_tilde: f64,
    /// `None` selects [`default_c`].
    pub c: Option<f64>,
    pub area: Option<f64>,
}

impl BoundInputs {
    pub fn new(g: u32, m: u32) -> Result<Self, BoundsError> {
        let inputs = Self {
            g,
            m,
            d_zero: false,
            c_tilde: DEFAULT_C_TILDE,
            c: None,
            area: None,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if self.g < 2 {
            return Err(BoundsError::GenusTooSmall(self.g));
        }
        if self.m == 0 {
            return Err(BoundsError::ZeroMultiplicity);
        }
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(BoundsError::NonPositive { name, value })
            }
        };
        positive("c_tilde", self.c_tilde)?;
        if let Some(c) = self.c {
            positive("c", c)?;
        }
        if let Some(a) = self.area {
            positive("area", a)?;
        }
        Ok(())
    }

    pub fn c_value(&self) -> f64 {
        self.c.unwrap_or_else(|| default_c(self.c_tilde))
    }
}

pub const BOUNDS_KEYS: &[&str] = &["g", "m", "d_zero", "c_tilde", "c", "area"];

impl BoundInputs {
    pub fn from_section(s: &Section) -> Result<Self, ConfigError> {
        s.reject_unknown(BOUNDS_KEYS)?;
        let g: u32 = s.require("g")?;
        let inputs = Self {
            g,
            m: s.get_or("m", 1)?,
            d_zero: s.get_or("d_zero", false)?,
            c_tilde: s.positive("c_tilde", DEFAULT_C_TILDE)?,
            c: s.get("c")?,
            area: s.get("area")?,
        };
        inputs.validate().map_err(|e| s.bad("g", &e.to_string()))?;
        Ok(inputs)
    }
}

/// A bound value with its label: `vacuous` when it is at most zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabeledBound {
    pub value: i64,
    pub vacuous: bool,
    pub applicable: bool,
}

impl LabeledBound {
    fn new(value: i64, applicable: bool) -> Self {
        Self {
            value,
            vacuous: value <= 0,
            applicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub schema: u32,
    pub inputs: BoundInputs,
    pub c_used: f64,
    pub thm1: LabeledBound,
    pub thm2: LabeledBound,
    pub thm3: LabeledBound,
    pub thm3_real: QuadraticBound,
    pub area_lower: f64,
    pub korevaar_lower: Option<LabeledBound>,
    /// Reported only: a numerical `u` need not come from a genus-`g` torus.
    pub area_meets_lower: Option<bool>,
    pub spectrum_interval: Option<[i64; 2]>,
    /// `index_lower` at least every applicable bound.
    pub spectrum_consistent: Option<bool>,
    pub flags: Vec<String>,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned two-column text rendering.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("g".into(), self.inputs.g.to_string()),
            ("m".into(), self.inputs.m.to_string()),
            ("thm1".into(), labeled(&self.thm1)),
            ("thm2".into(), labeled(&self.thm2)),
            ("thm3".into(), labeled(&self.thm3)),
            ("thm3 sharp (real)".into(), format!("{:.6e}", self.thm3_real.sharp)),
            ("C".into(), format!("{:.6e}", self.c_used)),
            ("area lower".into(), format!("{:.12}", self.area_lower)),
        ];
        if let Some(a) = self.inputs.area {
            rows.push(("area".into(), format!("{a:.12}")));
        }
        if let Some(k) = &self.korevaar_lower {
            rows.push(("korevaar".into(), labeled(k)));
        }
        if let Some([lo, hi]) = self.spectrum_interval {
            rows.push(("index interval".into(), format!("[{lo}, {hi}]")));
        }
        if let Some(ok) = self.spectrum_consistent {
            rows.push(("spectrum >= bounds".into(), ok.to_string()));
        }
        if !self.flags.is_empty() {
            rows.push(("flags".into(), self.flags.join(",")));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

fn labeled(b: &LabeledBound) -> String {
    let mut s = b.value.to_string();
    if b.vacuous {
        s.push_str(" (vacuous)");
    }
    if !b.applicable {
        s.push_str(" (not applicable)");
    }
    s
}

/// Assembles all bounds for `inputs` and, if given, compares them with the
/// index interval of `spectrum`.
pub fn compare(inputs: &BoundInputs, spectrum: Option<&SpectrumReport>) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    let (g, m) = (inputs.g, inputs.m);
    let c = inputs.c_value();
    let thm1 = LabeledBound::new(thm1_bound(g, m), true);
    let thm2 = LabeledBound::new(thm2_bound(g, m), inputs.d_zero);
    let thm3 = LabeledBound::new(thm3_integer(g, c), true);
    let area_lower = flpp_area_lower(g);
    let mut flags = vec!["g-unverified".to_string()];
    if !inputs.d_zero {
        flags.push("thm2-requires-d-zero".into());
    }
    let korevaar = inputs
        .area
        .map(|a| LabeledBound::new(korevaar_lower(a, inputs.c_tilde), true));
    let area_meets_lower = inputs.area.map(|a| a >= area_lower);
    if area_meets_lower == Some(false) {
        flags.push("area-below-genus-bound".into());
    }
    let (interval, consistent) = match spectrum {
        None => (None, None),
        Some(s) => {
            let mut applicable = vec![thm1.value, thm3.value];
            if thm2.applicable {
                applicable.push(thm2.value);
            }
            if let Some(k) = korevaar {
                applicable.push(k.value);
            }
            let ok = applicable.iter().all(|&b| s.index_lower >= b);
            if !ok {
                flags.push("spectrum-below-bounds".into());
            }
            (Some([s.index_lower, s.index_upper]), Some(ok))
        }
    };
    Ok(BoundReport {
        schema: BOUNDS_SCHEMA,
        inputs: *inputs,
        c_used: c,
        thm1,
        thm2,
        thm3,
        thm3_real: thm3_bound(g, c),
        area_lower,
        korevaar_lower: korevaar,
        area_meets_lower,
        spectrum_interval: interval,
        spectrum_consistent: consistent,
        flags,
    })
}

pub const TABLE_HEADER: &str = "g,m,thm1,thm2,thm3_sharp,thm3_simplified,flpp_area_lower";

/// CSV over `g ∈ [g_from, g_to]` and the given multiplicities, with the
/// quadratic bound evaluated at constant `c`. Floats use shortest round-trip form.
pub fn table_csv(g_from: u32, g_to: u32, ms: &[u32], c: f64) -> Result<String, BoundsError> {
    if g_from < 2 {
        return Err(BoundsError::GenusTooSmall(g_from));
    }
    if g_to < g_from {
        return Err(BoundsError::EmptyRange { from: g_from, to: g_to });
    }
    if ms.contains(&0) {
        return Err(BoundsError::ZeroMultiplicity);
    }
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for g in g_from..=g_to {
        for &m in ms {
            let q = thm3_bound(g, c);
            let _ = writeln!(
                out,
                "{g},{m},{},{},{:?},{:?},{:?}",
                thm1_bound(g, m),
                thm2_bound(g, m),
                q.sharp,
                q.simplified,
                flpp_area_lower(g)
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid, TorusLattice};

    #[test]
    fn linear_bounds() {
        assert_eq!(thm1_bound(2, 1), -2);
        assert_eq!(thm1_bound(4, 1), -1);
        assert_eq!(thm1_bound(13, 2), 6);
        assert_eq!(thm2_bound(13, 1), 6);
        assert_eq!(thm2_bound(7, 1), 2);
        assert_eq!(thm2_bound(20, 3), 28);
        for g in 2..60 {
            for m in 1..5 {
                let gap = thm2_bound(g, m) - thm1_bound(g, m);
                assert_eq!(gap, m as i64 * third(g).min(4));
                assert!(gap >= 0);
            }
        }
    }

    #[test]
    fn quadratic_bound_and_areas() {
        assert_eq!(thm3_bound(2, 1.0), QuadraticBound { sharp: 13.0, simplified: 2.0 });
        assert_eq!(thm3_bound(3, 1.0).sharp, 23.0);
        assert!((thm3_bound(2, 1e-7).sharp + 2.0).abs() < 1e-5);
        for g in 2..100 {
            let q = thm3_bound(g, 0.37);
            assert!(q.sharp >= q.simplified);
        }
        assert_eq!(flpp_area_lower(2), PI / 4.0 * 15.0);
        assert_eq!(flpp_area_lower(3), PI / 4.0 * 25.0);
        assert!((2..40).all(|g| flpp_area_lower(g + 1) > flpp_area_lower(g)));
    }

    #[test]
    fn korevaar_composition() {
        assert_eq!(korevaar_lower(3e7, 1e7), 1);
        assert_eq!(korevaar_lower(4.0 * PI * PI, 1e7), -2);
        let c = default_c(1e7);
        assert_eq!(korevaar_lower(flpp_area_lower(20), 1e7), -2);
        assert_eq!(thm3_integer(20, c), -2);
        // composing the two estimates gives exactly the default constant
        let g = 20;
        assert!((flpp_area_lower(g) / 1e7 - c * genus_quadratic(g) as f64).abs() < 1e-18);
        assert!(korevaar_lower(2e7, 1e7) >= korevaar_lower(1e7, 1e7));
        assert!(korevaar_lower(2e7, 1e6) >= korevaar_lower(2e7, 1e7));
    }

    #[test]
    fn flat_area() {
        let g = Grid::new(TorusLattice::square(2.0 * PI).unwrap(), 8, 8).unwrap();
        let a = surface_area(&ScalarField::zeros(g));
        assert!((a - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn report_without_spectrum() {
        let inputs = BoundInputs::new(13, 2).unwrap();
        let r = compare(&inputs, None).unwrap();
        assert_eq!(r.thm1.value, 6);
        assert!(!r.thm2.applicable);
        assert!(r.spectrum_interval.is_none() && r.spectrum_consistent.is_none());
        assert!(r.flags.contains(&"g-unverified".to_string()));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["thm1"]["value"], 6);
        assert!(r.to_table().contains("thm1"));
        assert!(BoundInputs::new(1, 1).is_err());
        assert!(BoundInputs::new(3, 0).is_err());
    }

    #[test]
    fn csv_table() {
        let t = table_csv(2, 3, &[1, 2], 1.0).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], TABLE_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("2,1,-2,-2,13.0,2.0,"));
        assert!(table_csv(5, 4, &[1], 1.0).is_err());
    }

    #[test]
    fn config_section() {
        let mut s = Section::new("bounds");
        s.insert("g", "7");
        s.insert("d_zero", "true");
        let b = BoundInputs::from_section(&s).unwrap();
        assert_eq!((b.g, b.m, b.d_zero), (7, 1, true));
        s.insert("g", "1");
        assert!(BoundInputs::from_section(&s).is_err());
    }
}
