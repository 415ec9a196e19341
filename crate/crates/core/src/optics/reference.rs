//! The shipped beam-displacer layout of the experiment and its exact plate angles.
//!
//! Path labels are in units of walker positions. The BDs displace H by two labels
//! (BD5 by minus two), so the label ↔ position offset drifts by one per BD; the
//! `position_map` of each plane records it. HWP13 only shapes the complement of
//! the post-selected state and has no constraint on the post-selected channel.

use std::collections::BTreeMap;

use serde::Serialize;

use super::circuit::OpticalCircuit;

const REFERENCE: &str = include_str!("../../data/reference_circuit.json");

/// Loads the shipped circuit with the published (rounded) plate angles.
pub fn compile_reference_circuit() -> OpticalCircuit {
    OpticalCircuit::from_json(REFERENCE).expect("shipped reference circuit is valid")
}

pub fn reference_json() -> &'static str {
    REFERENCE
}

/// Published plate angles in degrees.
pub fn table1_angles() -> BTreeMap<String, f64> {
    [
        ("HWP2", 13.3),
        ("HWP3", 157.5),
        ("HWP4", 22.5),
        ("HWP5", 157.5),
        ("HWP6", 45.0),
        ("HWP7", 45.0),
        ("HWP8", 45.0),
        ("HWP9", 45.0),
        ("HWP10", 22.5),
        ("HWP11", 157.5),
        ("HWP12", 45.0),
        ("HWP13", 135.0),
        ("HWP14", 157.5),
        ("HWP15", 31.7),
        ("HWP16", -58.3),
        ("HWP17", -58.3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Angle in `[0, 180)` of the standard-convention plate mapping the real Jones
/// vector `from` onto `to` (both of equal norm).
pub fn solve_hwp(from: [f64; 2], to: [f64; 2]) -> f64 {
    let [a, b] = from;
    let [p, q] = to;
    let n = a * a + b * b;
    let c = (a * p - b * q) / n;
    let s = (b * p + a * q) / n;
    (s.atan2(c).to_degrees() / 2.0).rem_euclid(180.0)
}

/// Signed difference `table − exact` folded into `(−90, 90]`.
pub fn angle_deviation(table: f64, exact: f64) -> f64 {
    let d = (table - exact).rem_euclid(180.0);
    if d > 90.0 {
        d - 180.0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateRole {
    pub name: String,
    pub exact_deg: f64,
    /// What the plate must do; `None` when it only acts on the complement.
    pub role: Option<String>,
}

/// Exact angles solved from each plate's job in the circuit.
pub fn exact_plates() -> Vec<PlateRole> {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r5 = 1.0 / 5f64.sqrt();
    let mut out = Vec::new();
    let mut push = |name: &str, from: [f64; 2], to: [f64; 2], role: &str| {
        out.push(PlateRole { name: name.into(), exact_deg: solve_hwp(from, to), role: Some(role.into()) });
    };
    push("HWP2", [1.0, 0.0], [2.0 * r5, r5], "H -> (2H+V)/sqrt5");
    push("HWP3", [1.0, 0.0], [r2, -r2], "H -> (H-V)/sqrt2");
    push("HWP4", [1.0, 0.0], [r2, r2], "H -> (H+V)/sqrt2");
    push("HWP5", [0.0, 1.0], [-r2, -r2], "V -> -(H+V)/sqrt2");
    for n in ["HWP6", "HWP7", "HWP8", "HWP9"] {
        push(n, [1.0, 0.0], [0.0, 1.0], "NOT coin");
    }
    push("HWP10", [-r2, r2], [0.0, -1.0], "(V-H)/sqrt2 -> -V");
    push("HWP11", [-r2, r2], [-1.0, 0.0], "(V-H)/sqrt2 -> -H");
    push("HWP12", [0.0, 1.0], [1.0, 0.0], "V -> H");
    push("HWP14", [r2, r2], [0.0, -1.0], "(H+V)/sqrt2 -> -V");
    push("HWP15", [r5, 2.0 * r5], [1.0, 0.0], "(H+2V)/sqrt5 -> H");
    let t15 = out.last().map(|p| p.exact_deg).unwrap_or_default();
    for n in ["HWP16", "HWP17"] {
        out.push(PlateRole { name: n.into(), exact_deg: t15 - 90.0, role: Some("undo HWP15 up to H<->V".into()) });
    }
    out.push(PlateRole { name: "HWP13".into(), exact_deg: 135.0, role: None });
    out.sort_by_key(|p| p.name.trim_start_matches("HWP").parse::<u32>().unwrap_or(0));
    out
}

/// The reference circuit with every constrained plate at its exact angle.
pub fn exact_reference_circuit() -> OpticalCircuit {
    let angles = exact_plates().into_iter().map(|p| (p.name, p.exact_deg)).collect();
    compile_reference_circuit().with_angles(&angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_circuit_carries_table_angles() {
        let c = compile_reference_circuit();
        for (name, theta) in table1_angles() {
            assert_eq!(c.hwp_named(&name), Some(theta), "{name}");
        }
        assert_eq!(c.bd_count(), 6);
    }

    #[test]
    fn hwp2_exact_angle() {
        let p = exact_plates().into_iter().find(|p| p.name == "HWP2").unwrap();
        let closed = 0.5 * (2.0 / 5f64.sqrt()).acos().to_degrees();
        assert!((p.exact_deg - closed).abs() < 1e-12);
        assert!(angle_deviation(13.3, p.exact_deg).abs() < 0.05);
    }

    #[test]
    fn exact_angles_match_table_up_to_rounding() {
        let table = table1_angles();
        for p in exact_plates() {
            let d = angle_deviation(table[&p.name], p.exact_deg);
            assert!(d.abs() < 0.05, "{}: {d}", p.name);
        }
    }

    #[test]
    fn evolution_plates_are_exact() {
        for p in exact_plates().iter().filter(|p| ["HWP6", "HWP7", "HWP8", "HWP9"].contains(&p.name.as_str())) {
            assert!((p.exact_deg - 45.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deviation_folds_mod_180() {
        assert!((angle_deviation(-58.3, 121.7) - 0.0).abs() < 1e-12);
        assert!((angle_deviation(179.0, 1.0) + 2.0).abs() < 1e-12);
    }
}
