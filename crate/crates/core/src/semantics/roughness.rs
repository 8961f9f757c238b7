use crate::error::{Error, Result};

/// Surface roughness class with its measured arithmetic roughness and the
/// associated diffuse scattering coefficient interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughnessLevel {
    pub label: &'static str,
    /// Arithmetic mean roughness Ra (um).
    pub ra_um: f64,
    pub s_range: [f64; 2],
}

const TABLE: [RoughnessLevel; 5] = [
    RoughnessLevel { label: "Wall Plasterboard", ra_um: 2.309, s_range: [0.07, 0.1] },
    RoughnessLevel { label: "Chipboard", ra_um: 2.695, s_range: [0.1, 0.2] },
    RoughnessLevel { label: "Cardboard", ra_um: 3.252, s_range: [0.1, 0.2] },
    RoughnessLevel { label: "Ceiling Plasterboard", ra_um: 11.85, s_range: [0.2, 0.4] },
    RoughnessLevel { label: "Brick", ra_um: 14.68, s_range: [0.3, 0.5] },
];

pub fn roughness_table() -> &'static [RoughnessLevel] {
    &TABLE
}

/// Scattering interval for a roughness level label (case-insensitive).
pub fn roughness_to_scattering(label: &str) -> Result<[f64; 2]> {
    let key = label.trim();
    TABLE.iter().find(|r| r.label.eq_ignore_ascii_case(key)).map(|r| r.s_range).ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        assert_eq!(roughness_to_scattering("Wall Plasterboard").unwrap(), [0.07, 0.1]);
        assert_eq!(roughness_to_scattering("Brick").unwrap(), [0.3, 0.5]);
        assert_eq!(roughness_to_scattering("ceiling plasterboard").unwrap(), [0.2, 0.4]);
        assert!(roughness_to_scattering("velvet").is_err());
    }

    #[test]
    fn intervals_within_unit() {
        for r in roughness_table() {
            assert!(0.0 <= r.s_range[0] && r.s_range[0] <= r.s_range[1] && r.s_range[1] <= 1.0);
        }
        // rougher surfaces scatter more
        assert!(TABLE.windows(2).all(|w| w[0].ra_um < w[1].ra_um && w[0].s_range[0] <= w[1].s_range[0]));
    }
}
