//! Model and training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ablation variants of the full model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Frozen edge weights; the weight ODE is skipped.
    #[serde(rename = "woEvo")]
    WoEvo,
    /// `dw/dt = f`, no curvature term.
    #[serde(rename = "woRic")]
    WoRic,
    /// Canonical flow `dw/dt = −R w`, no constraint network.
    #[serde(rename = "woCon")]
    WoCon,
    /// Exp/log maps around a linear layer instead of the Gyro-transform.
    #[serde(rename = "woGyr")]
    WoGyr,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::None,
        Ablation::WoEvo,
        Ablation::WoRic,
        Ablation::WoCon,
        Ablation::WoGyr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::WoEvo => "woEvo",
            Ablation::WoRic => "woRic",
            Ablation::WoCon => "woCon",
            Ablation::WoGyr => "woGyr",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown ablation `{s}`")))
    }
}

/// Aggregation coefficients inside the vector-field GAT.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatAttention {
    /// Row-normalised current flow weights (self-loop weight 1).
    #[default]
    FlowWeights,
    /// Standard learned additive attention with LeakyReLU(0.2).
    Learned,
}

/// Discretisation of the weight ODE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightUpdate {
    /// `w · exp(dt · rate)`, positivity-preserving.
    #[default]
    LogSpace,
    /// `w + dt · rhs`.
    PlainEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Latent manifold dimension.
    pub d: usize,
    /// Width of the sinusoidal time encoding (even).
    pub d_time: usize,
    pub gat_layers: usize,
    /// Hidden layers of the constraint MLP; only 1 is supported.
    pub mlp_hidden: usize,
    pub encoder_layers: usize,
    pub lr: f64,
    /// Overrides the dataset curvature when set.
    pub kappa: Option<f64>,
    pub base_step: f64,
    pub max_halvings: usize,
    pub epochs: usize,
    pub split_ratio: f64,
    pub ablation: Ablation,
    pub gat_attention: GatAttention,
    pub weight_update: WeightUpdate,
    pub dense_init: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 16,
            d_time: 16,
            gat_layers: 2,
            mlp_hidden: 1,
            encoder_layers: 1,
            lr: 5e-4,
            kappa: None,
            base_step: 0.01,
            max_halvings: 8,
            epochs: 200,
            split_ratio: 0.5,
            ablation: Ablation::None,
            gat_attention: GatAttention::FlowWeights,
            weight_update: WeightUpdate::LogSpace,
            dense_init: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if self.d_time < 2 || self.d_time % 2 != 0 {
            return bad(format!("d_time must be even and at least 2, got {}", self.d_time));
        }
        if self.gat_layers == 0 {
            return bad("gat_layers must be positive".into());
        }
        if self.mlp_hidden != 1 {
            return bad(format!("only mlp_hidden = 1 is supported, got {}", self.mlp_hidden));
        }
        if self.encoder_layers == 0 {
            return bad("encoder_layers must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return bad(format!("base_step must be positive, got {}", self.base_step));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio));
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() {
                return bad("kappa must be finite".into());
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
