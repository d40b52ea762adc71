use std::fmt;

use super::TrafficError;

/// Freeway level of service, A (free flow) to F (breakdown).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LosGrade {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl fmt::Display for LosGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            LosGrade::A => "A",
            LosGrade::B => "B",
            LosGrade::C => "C",
            LosGrade::D => "D",
            LosGrade::E => "E",
            LosGrade::F => "F",
        };
        f.write_str(c)
    }
}

/// One row of the density / volume-to-capacity table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosBand {
    pub grade: LosGrade,
    /// veh/mi/lane, inclusive
    pub density_low: f64,
    /// veh/mi/lane, exclusive; infinite for F
    pub density_high: f64,
    pub vc_low: f64,
    pub vc_high: f64,
    pub description: &'static str,
}

pub const LOS_TABLE: [LosBand; 6] = [
    LosBand {
        grade: LosGrade::A,
        density_low: 0.0,
        density_high: 11.0,
        vc_low: 0.0,
        vc_high: 0.3,
        description: "Virtually free flow; completely unimpeded",
    },
    LosBand {
        grade: LosGrade::B,
        density_low: 11.0,
        density_high: 18.0,
        vc_low: 0.3,
        vc_high: 0.5,
        description: "Stable flow with slight delays; reasonably unimpeded",
    },
    LosBand {
        grade: LosGrade::C,
        density_low: 18.0,
        density_high: 26.0,
        vc_low: 0.5,
        vc_high: 0.71,
        description: "Stable flow with delays; less freedom to maneuver",
    },
    LosBand {
        grade: LosGrade::D,
        density_low: 26.0,
        density_high: 35.0,
        vc_low: 0.71,
        vc_high: 0.89,
        description: "High density, but stable flow",
    },
    LosBand {
        grade: LosGrade::E,
        density_low: 35.0,
        density_high: 45.0,
        vc_low: 0.89,
        vc_high: 1.0,
        description: "Operating conditions at or near capacity; unstable flow",
    },
    LosBand {
        grade: LosGrade::F,
        density_low: 45.0,
        density_high: f64::INFINITY,
        vc_low: 1.0,
        vc_high: f64::INFINITY,
        description: "Forced flow, breakdown conditions",
    },
];

impl LosGrade {
    pub fn band(self) -> &'static LosBand {
        &LOS_TABLE[self as usize]
    }
}

/// Bands are closed below and open above, so a density of exactly 11
/// veh/mi/lane is grade B.
pub fn classify_los(density: f64) -> Result<LosGrade, TrafficError> {
    if !(density >= 0.0) {
        return Err(TrafficError::NegativeDensity(density));
    }
    Ok(LOS_TABLE
        .iter()
        .find(|b| density < b.density_high)
        .map(|b| b.grade)
        .unwrap_or(LosGrade::F))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_boundaries() {
        assert_eq!(classify_los(10.0).unwrap(), LosGrade::A);
        assert_eq!(classify_los(11.0).unwrap(), LosGrade::B);
        assert_eq!(classify_los(26.0).unwrap(), LosGrade::D);
        assert_eq!(classify_los(45.0).unwrap(), LosGrade::F);
        assert_eq!(classify_los(0.0).unwrap(), LosGrade::A);
        assert_eq!(classify_los(1e9).unwrap(), LosGrade::F);
    }

    #[test]
    fn negative_or_nan_density() {
        assert!(matches!(classify_los(-0.5), Err(TrafficError::NegativeDensity(_))));
        assert!(classify_los(f64::NAN).is_err());
    }

    #[test]
    fn bands_partition_half_line() {
        for w in LOS_TABLE.windows(2) {
            assert_eq!(w[0].density_high, w[1].density_low);
            assert_eq!(w[0].vc_high, w[1].vc_low);
        }
        assert_eq!(LOS_TABLE[0].density_low, 0.0);
        assert_eq!(LosGrade::E.band().density_high, 45.0);
    }

    proptest! {
        #[test]
        fn monotone(a in 0.0f64..200.0, b in 0.0f64..200.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_los(lo).unwrap() <= classify_los(hi).unwrap());
        }
    }
}
