use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const BAND_COUNT: usize = 9;

/// Sentinel-2 bands used as model features, in canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BandId {
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    B8,
    B11,
    B12,
}

impl BandId {
    pub const ALL: [BandId; BAND_COUNT] = [
        BandId::B2,
        BandId::B3,
        BandId::B4,
        BandId::B5,
        BandId::B6,
        BandId::B7,
        BandId::B8,
        BandId::B11,
        BandId::B12,
    ];

    /// Position in the canonical feature order, 0-based.
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<BandId> {
        Self::ALL.get(index).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            BandId::B2 => "B2",
            BandId::B3 => "B3",
            BandId::B4 => "B4",
            BandId::B5 => "B5",
            BandId::B6 => "B6",
            BandId::B7 => "B7",
            BandId::B8 => "B8",
            BandId::B11 => "B11",
            BandId::B12 => "B12",
        }
    }

    pub const fn description(self) -> &'static str {
        match self {
            BandId::B2 => "Blue",
            BandId::B3 => "Green",
            BandId::B4 => "Red",
            BandId::B5 => "Red-edge 1",
            BandId::B6 => "Red-edge 2",
            BandId::B7 => "Red-edge 3",
            BandId::B8 => "NIR",
            BandId::B11 => "SWIR I",
            BandId::B12 => "SWIR II",
        }
    }
}

impl fmt::Display for BandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BandId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown band '{s}'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_positions() {
        assert_eq!(BandId::B2.index(), 0);
        assert_eq!(BandId::B8.index(), 6);
        assert_eq!(BandId::B12.index(), 8);
    }

    #[test]
    fn index_is_a_bijection() {
        let mut seen = [false; BAND_COUNT];
        for b in BandId::ALL {
            assert!(!seen[b.index()]);
            seen[b.index()] = true;
            assert_eq!(BandId::from_index(b.index()), Some(b));
            assert_eq!(b.name().parse::<BandId>().unwrap(), b);
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(BandId::from_index(9), None);
    }
}
