use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Polarization amplitudes `(H, V)` on one path.
pub type Jones = [Complex64; 2];

pub const H: usize = 0;
pub const V: usize = 1;

/// Sign convention of the half-wave plate Jones matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HwpConvention {
    /// `H → cos2θ H + sin2θ V`, `V → sin2θ H − cos2θ V`.
    #[default]
    Standard,
    /// The same with `θ → −θ`.
    Mirrored,
}

/// Real Jones matrix `[[c, s], [s, −c]]` acting on `(H, V)` columns.
pub fn hwp_matrix(theta_deg: f64, convention: HwpConvention) -> [[f64; 2]; 2] {
    let theta = match convention {
        HwpConvention::Standard => theta_deg,
        HwpConvention::Mirrored => -theta_deg,
    };
    let (s, c) = (2.0 * theta.to_radians()).sin_cos();
    [[c, s], [s, -c]]
}

pub fn apply_real(m: &[[f64; 2]; 2], j: Jones) -> Jones {
    [j[H] * m[0][0] + j[V] * m[0][1], j[H] * m[1][0] + j[V] * m[1][1]]
}

/// Where a beam displacer sends the H component of each path. V is transmitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Displacement {
    /// Every path `p` goes to `p + shift`.
    Shift(i64),
    /// Listed paths move; H on unlisted paths stays put.
    Map(Vec<(i64, i64)>),
}

impl Displacement {
    pub fn target(&self, path: i64) -> i64 {
        match self {
            Displacement::Shift(d) => path + d,
            Displacement::Map(m) => m.iter().find(|(from, _)| *from == path).map(|(_, to)| *to).unwrap_or(path),
        }
    }

    pub fn moves(&self, path: i64) -> bool {
        match self {
            Displacement::Shift(d) => *d != 0,
            Displacement::Map(m) => m.iter().any(|(from, to)| *from == path && from != to),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OpticalElement {
    #[serde(rename = "HWP")]
    Hwp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        theta_deg: f64,
        paths: Vec<i64>,
    },
    #[serde(rename = "BD")]
    Bd {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        displacement: Displacement,
    },
    #[serde(rename = "PHASE")]
    Phase {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        phi: f64,
        path: i64,
    },
    #[serde(rename = "BLOCK")]
    Block {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        path: i64,
    },
    #[serde(rename = "PBS")]
    Pbs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        path: i64,
        transmit_port: String,
        reflect_port: String,
    },
}

impl OpticalElement {
    pub fn name(&self) -> Option<&str> {
        match self {
            OpticalElement::Hwp { name, .. }
            | OpticalElement::Bd { name, .. }
            | OpticalElement::Phase { name, .. }
            | OpticalElement::Block { name, .. }
            | OpticalElement::Pbs { name, .. } => name.as_deref(),
        }
    }

    /// Paths the element occupies within its stage. A BD spans the whole beam.
    pub fn paths(&self) -> Option<Vec<i64>> {
        match self {
            OpticalElement::Hwp { paths, .. } => Some(paths.clone()),
            OpticalElement::Bd { .. } => None,
            OpticalElement::Phase { path, .. }
            | OpticalElement::Block { path, .. }
            | OpticalElement::Pbs { path, .. } => Some(vec![*path]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hwp_at_45_is_not() {
        let m = hwp_matrix(45.0, HwpConvention::Standard);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let out = apply_real(&m, [one, zero]);
        assert!(out[H].norm() < 1e-15);
        assert!((out[V] - one).norm() < 1e-15);
        let out = apply_real(&m, [zero, one]);
        assert!((out[H] - one).norm() < 1e-15);
    }

    #[test]
    fn hwp_is_orthogonal_with_determinant_minus_one() {
        for theta in [0.0, 13.3, 22.5, 31.7, 157.5, -58.3] {
            for conv in [HwpConvention::Standard, HwpConvention::Mirrored] {
                let m = hwp_matrix(theta, conv);
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                assert!((det + 1.0).abs() < 1e-14);
                let col = m[0][0] * m[0][0] + m[1][0] * m[1][0];
                assert!((col - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn element_json_shape() {
        let e: OpticalElement = serde_json::from_str(r#"{"kind":"HWP","theta_deg":13.3,"paths":[2]}"#).unwrap();
        assert_eq!(e, OpticalElement::Hwp { name: None, theta_deg: 13.3, paths: vec![2] });
        let bd: OpticalElement =
            serde_json::from_str(r#"{"kind":"BD","name":"BD1","displacement":{"shift":2}}"#).unwrap();
        assert!(matches!(bd, OpticalElement::Bd { displacement: Displacement::Shift(2), .. }));
        let bd: OpticalElement = serde_json::from_str(r#"{"kind":"BD","displacement":{"map":[[2,4],[4,6]]}}"#).unwrap();
        match bd {
            OpticalElement::Bd { displacement, .. } => {
                assert_eq!(displacement.target(2), 4);
                assert_eq!(displacement.target(8), 8);
                assert!(!displacement.moves(8));
            }
            _ => unreachable!(),
        }
    }
}
