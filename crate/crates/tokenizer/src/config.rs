//! Model shape and the blade-subspace partition that keeps every learned
//! map equivariant.

use ga_core::BLADE_COUNT;

/// Number of blade subspaces a spatial rotation acts on independently.
pub const BLADE_BLOCKS: usize = 8;

/// Subspace id per blade coefficient, in canonical blade order. A spatial
/// rotation mixes coefficients only within a subspace: {scalar}, the three
/// spatial vectors, {e4}, the spatial bivectors, the e4-carrying bivectors,
/// {e123}, the e4-carrying trivectors, and {e1234}. Learned linear maps mix
/// channels per subspace and therefore commute with the rotation action.
pub const BLOCK_OF_COEFF: [usize; BLADE_COUNT] = [0, 1, 1, 1, 2, 3, 3, 4, 3, 4, 4, 5, 6, 6, 6, 7];

/// Blade indices whose coefficients a spatial rotation leaves untouched:
/// scalar and e4. The learned global token is confined to these so its
/// content can never break equivariance, no matter how it trains.
pub const INVARIANT_BLADES: [usize; 2] = [0, 4];

/// Fixed slots in a token's auxiliary scalars.
pub const AUX_OPACITY: usize = 0;
pub const AUX_FLAG_ANCHOR: usize = 1;
pub const AUX_FLAG_TX: usize = 2;
pub const AUX_FLAG_CLS: usize = 3;
/// Slots 0..4 are reserved as above; the rest start at zero.
pub const AUX_RESERVED: usize = 4;

/// Architecture sizes for the multi-view tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TokenizerConfig {
    /// Multivector channels per token.
    pub mv_channels: usize,
    /// Auxiliary scalar lanes per token.
    pub aux_scalars: usize,
    /// Attention blocks stacked in the encoder.
    pub blocks: usize,
    /// Frequencies in the sinusoidal position embedding.
    pub frequencies: usize,
    /// Longest half-wavelength of the embedding, in meters; positions
    /// within (-scale, scale) embed without aliasing at the base frequency.
    pub embed_scale: f64,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self { mv_channels: 8, aux_scalars: 16, blocks: 2, frequencies: 6, embed_scale: 10.0 }
    }
}

impl TokenizerConfig {
    /// Length of one Euclidean position embedding.
    pub fn embed_dim(&self) -> usize {
        2 * self.frequencies * 3
    }

    /// Length of the invariant feature extracted from the global token:
    /// the rotation-invariant blade coefficients of every channel plus the
    /// auxiliary scalars.
    pub fn cls_feature_dim(&self) -> usize {
        INVARIANT_BLADES.len() * self.mv_channels + self.aux_scalars
    }

    pub fn validate(&self) -> Result<(), crate::TokenizerError> {
        if self.mv_channels == 0 {
            return Err(crate::TokenizerError::InvalidConfig("mv_channels must be at least 1"));
        }
        if self.aux_scalars < AUX_RESERVED {
            return Err(crate::TokenizerError::InvalidConfig(
                "aux_scalars must cover the reserved slots",
            ));
        }
        if self.blocks == 0 || self.frequencies == 0 {
            return Err(crate::TokenizerError::InvalidConfig(
                "blocks and frequencies must be at least 1",
            ));
        }
        if !(self.embed_scale.is_finite() && self.embed_scale > 0.0) {
            return Err(crate::TokenizerError::InvalidConfig(
                "embed_scale must be finite and positive",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ga_core::{blade_contains_e4, blade_grade};

    #[test]
    fn partition_respects_grade_and_degeneracy() {
        // Two coefficients share a subspace exactly when they have the same
        // grade and the same e4 membership.
        for i in 0..BLADE_COUNT {
            for j in 0..BLADE_COUNT {
                let same_class = blade_grade(i) == blade_grade(j)
                    && blade_contains_e4(i) == blade_contains_e4(j);
                assert_eq!(
                    BLOCK_OF_COEFF[i] == BLOCK_OF_COEFF[j],
                    same_class,
                    "blades {i} and {j}"
                );
            }
        }
    }

    #[test]
    fn invariant_blades_are_scalar_and_e4() {
        assert_eq!(blade_grade(INVARIANT_BLADES[0]), 0);
        assert_eq!(blade_grade(INVARIANT_BLADES[1]), 1);
        assert!(blade_contains_e4(INVARIANT_BLADES[1]));
    }

    #[test]
    fn default_feature_dimension_is_thirty_two() {
        assert_eq!(TokenizerConfig::default().cls_feature_dim(), 32);
        assert_eq!(TokenizerConfig::default().embed_dim(), 36);
    }
}
