//! Named experiment grids: families of specs trained under a shared data and seed policy.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Second-layer filter size varied from 1 to 7.
pub const FILTER_SIZE_SPECS: [&str; 4] = [
    "64(9)-32(1)-1(5)",
    "64(9)-32(3)-1(5)",
    "64(9)-32(5)-1(5)",
    "64(9)-32(7)-1(5)",
];

/// Doubling either hidden layer's filter count.
pub const FILTER_COUNT_SPECS: [&str; 3] = ["64(9)-32(7)-1(5)", "128(9)-32(7)-1(5)", "64(9)-64(7)-1(5)"];

/// Four-layer networks with growing filter sizes.
pub const DEPTH_SPECS: [&str; 8] = [
    "64(9)-32(7)-16(1)-1(5)",
    "64(9)-32(7)-16(3)-1(5)",
    "64(9)-32(7)-16(5)-1(5)",
    "64(9)-32(5)-16(5)-1(5)",
    "64(11)-32(9)-16(7)-1(5)",
    "64(11)-32(9)-16(9)-1(5)",
    "64(13)-32(11)-16(9)-1(5)",
    "64(15)-32(13)-16(11)-1(5)",
];

/// Structure trained under several initial seeds.
pub const INIT_SEEDS_SPEC: &str = "64(9)-32(7)-16(5)-1(5)";
pub const DEFAULT_INIT_SEED_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    FilterSize,
    FilterCount,
    Depth,
    InitSeeds,
}

/// One training run of a grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridVariant {
    pub label: String,
    pub spec: String,
    pub seed: u64,
}

impl Grid {
    pub const ALL: [Grid; 4] = [Grid::FilterSize, Grid::FilterCount, Grid::Depth, Grid::InitSeeds];

    pub fn name(self) -> &'static str {
        match self {
            Grid::FilterSize => "filter-size",
            Grid::FilterCount => "filter-count",
            Grid::Depth => "depth",
            Grid::InitSeeds => "init-seeds",
        }
    }

    /// Runs of this grid. Spec grids use `base_seed` for every variant; the
    /// seed grid uses `base_seed, base_seed + 1, …` for `seed_count` runs.
    pub fn variants(self, base_seed: u64, seed_count: usize) -> Vec<GridVariant> {
        let fixed = |specs: &[&str]| {
            specs
                .iter()
                .map(|s| GridVariant { label: s.to_string(), spec: s.to_string(), seed: base_seed })
                .collect()
        };
        match self {
            Grid::FilterSize => fixed(&FILTER_SIZE_SPECS),
            Grid::FilterCount => fixed(&FILTER_COUNT_SPECS),
            Grid::Depth => fixed(&DEPTH_SPECS),
            Grid::InitSeeds => (0..seed_count as u64)
                .map(|i| GridVariant {
                    label: format!("{INIT_SEEDS_SPEC}#seed{}", base_seed + i),
                    spec: INIT_SEEDS_SPEC.to_string(),
                    seed: base_seed + i,
                })
                .collect(),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Grid::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown grid `{s}` (expected one of filter-size, filter-count, depth, init-seeds)"
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_spec;

    #[test]
    fn every_grid_spec_parses() {
        for g in Grid::ALL {
            for v in g.variants(1, 3) {
                parse_spec(&v.spec).unwrap();
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for g in Grid::ALL {
            assert_eq!(g.name().parse::<Grid>().unwrap(), g);
        }
        assert!("widths".parse::<Grid>().is_err());
    }

    #[test]
    fn seed_grid_uses_consecutive_seeds() {
        let v = Grid::InitSeeds.variants(10, 3);
        assert_eq!(v.iter().map(|x| x.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
        assert!(v.iter().all(|x| x.spec == INIT_SEEDS_SPEC));
        assert!(Grid::Depth.variants(0, 3).iter().any(|x| x.spec == "64(11)-32(9)-16(9)-1(5)"));
    }
}
