//! The learnable model: tokenizer and mapping-network parameters bundled
//! with the configurations that fix their shapes.

use crate::TrainerError;
use mapping_net::{MappingConfig, MappingParams};
use rand::Rng;
use tokenizer::{TokenizerConfig, TokenizerParams};

/// Everything the optimizer owns apart from the scene itself.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Model {
    pub tokenizer_config: TokenizerConfig,
    pub mapping_config: MappingConfig,
    pub tokenizer: TokenizerParams,
    pub mapping: MappingParams,
}

impl Model {
    /// Fresh random parameters for a pair of mutually consistent configs.
    pub fn init(
        tokenizer_config: TokenizerConfig,
        mapping_config: MappingConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, TrainerError> {
        let model = Self {
            tokenizer: TokenizerParams::init(&tokenizer_config, rng),
            mapping: MappingParams::init(&mapping_config, rng),
            tokenizer_config,
            mapping_config,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks both configs and the dimensions that tie them together: the
    /// mapping network consumes the tokenizer's per-primitive embeddings
    /// and summary feature, and emits signal residuals sized for the
    /// scene's harmonic coefficients.
    pub fn validate(&self) -> Result<(), TrainerError> {
        self.tokenizer_config.validate().map_err(|_| {
            TrainerError::InvalidConfig("tokenizer configuration is invalid")
        })?;
        self.mapping_config
            .validate()
            .map_err(|_| TrainerError::InvalidConfig("mapping configuration is invalid"))?;
        if self.mapping_config.embed_dim != self.tokenizer_config.embed_dim() {
            return Err(TrainerError::SizeMismatch {
                what: "mapping embed_dim vs tokenizer embedding",
                expected: self.tokenizer_config.embed_dim(),
                got: self.mapping_config.embed_dim,
            });
        }
        if self.mapping_config.cls_dim != self.tokenizer_config.cls_feature_dim() {
            return Err(TrainerError::SizeMismatch {
                what: "mapping cls_dim vs tokenizer summary feature",
                expected: self.tokenizer_config.cls_feature_dim(),
                got: self.mapping_config.cls_dim,
            });
        }
        if self.mapping_config.signal_dim != scene::SIGNAL_DIM {
            return Err(TrainerError::SizeMismatch {
                what: "mapping signal_dim vs scene harmonics",
                expected: scene::SIGNAL_DIM,
                got: self.mapping_config.signal_dim,
            });
        }
        Ok(())
    }
}
