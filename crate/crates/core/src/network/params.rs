use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct GatLayer<T = f64> {
    /// Feature transform, `d × d`.
    pub w: Matrix<T>,
    /// Additive attention vector of length `2d` (learned-attention mode).
    pub a: Vec<T>,
}

/// One-hidden-layer perceptron `2d → d → 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T = f64> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

/// Every learnable tensor of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f64> {
    /// One Gyro-transform matrix per encoder layer; the first maps the
    /// input feature dimension to `d`.
    pub encoder_w: Vec<Matrix<T>>,
    pub attn_w: Vec<T>,
    pub gat_layers: Vec<GatLayer<T>>,
    pub mlp: Mlp<T>,
    /// `d × F_out`.
    pub decoder_w: Matrix<T>,
}

/// Gradients share the parameter layout.
pub type GradientSet = ModelParams<f64>;

impl<T: Real> ModelParams<T> {
    /// Applies `f` to every scalar in a fixed canonical order.
    pub fn map<U: Real>(&self, f: &mut impl FnMut(T) -> U) -> ModelParams<U> {
        let map_vec = |v: &[T], f: &mut dyn FnMut(T) -> U| v.iter().map(|&x| f(x)).collect();
        ModelParams {
            encoder_w: self.encoder_w.iter().map(|m| m.map(&mut *f)).collect(),
            attn_w: map_vec(&self.attn_w, f),
            gat_layers: self
                .gat_layers
                .iter()
                .map(|l| GatLayer {
                    w: l.w.map(&mut *f),
                    a: map_vec(&l.a, f),
                })
                .collect(),
            mlp: Mlp {
                w1: self.mlp.w1.map(&mut *f),
                b1: map_vec(&self.mlp.b1, f),
                w2: self.mlp.w2.map(&mut *f),
                b2: map_vec(&self.mlp.b2, f),
            },
            decoder_w: self.decoder_w.map(&mut *f),
        }
    }

    /// Named views of every tensor, in the same order as [`Self::map`].
    pub fn named_tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        for (k, m) in self.encoder_w.iter().enumerate() {
            out.push((format!("encoder_W[{k}]"), m.data()));
        }
        out.push(("attn_w".into(), &self.attn_w));
        for (k, l) in self.gat_layers.iter().enumerate() {
            out.push((format!("gat_layers[{k}].W"), l.w.data()));
            out.push((format!("gat_layers[{k}].a"), &l.a));
        }
        out.push(("mlp.W1".into(), self.mlp.w1.data()));
        out.push(("mlp.b1".into(), &self.mlp.b1));
        out.push(("mlp.W2".into(), self.mlp.w2.data()));
        out.push(("mlp.b2".into(), &self.mlp.b2));
        out.push(("decoder_W".into(), self.decoder_w.data()));
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.named_tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    /// Same layout, values taken in order from `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ModelParams<f64>> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_scalars()
            )));
        }
        let mut it = flat.iter().copied();
        Ok(self.map(&mut |_| it.next().expect("length checked")))
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder_w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder_w[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.decoder_w.cols()
    }
}

impl ModelParams<f64> {
    /// Name of the first tensor holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }

    /// Checks every shape against the configuration and feature sizes.
    pub fn check_shapes(&self, cfg: &ModelConfig, f_in: usize, f_out: usize) -> Result<()> {
        let d = cfg.d;
        let mut expect: Vec<(String, (usize, usize), (usize, usize))> = Vec::new();
        if self.encoder_w.len() != cfg.encoder_layers {
            return Err(Error::Shape(format!(
                "{} encoder layers, config has {}",
                self.encoder_w.len(),
                cfg.encoder_layers
            )));
        }
        for (k, m) in self.encoder_w.iter().enumerate() {
            let rows = if k == 0 { f_in } else { d };
            expect.push((format!("encoder_W[{k}]"), m.shape(), (rows, d)));
        }
        expect.push(("attn_w".into(), (self.attn_w.len(), 1), (2 * cfg.d_time, 1)));
        if self.gat_layers.len() != cfg.gat_layers {
            return Err(Error::Shape(format!(
                "{} GAT layers, config has {}",
                self.gat_layers.len(),
                cfg.gat_layers
            )));
        }
        for (k, l) in self.gat_layers.iter().enumerate() {
            expect.push((format!("gat_layers[{k}].W"), l.w.shape(), (d, d)));
            expect.push((format!("gat_layers[{k}].a"), (l.a.len(), 1), (2 * d, 1)));
        }
        expect.push(("mlp.W1".into(), self.mlp.w1.shape(), (2 * d, d)));
        expect.push(("mlp.b1".into(), (self.mlp.b1.len(), 1), (d, 1)));
        expect.push(("mlp.W2".into(), self.mlp.w2.shape(), (d, 1)));
        expect.push(("mlp.b2".into(), (self.mlp.b2.len(), 1), (1, 1)));
        expect.push(("decoder_W".into(), self.decoder_w.shape(), (d, f_out)));
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Shape(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        if let Some(name) = self.first_non_finite() {
            return Err(Error::domain(format!("parameter {name} is not finite")));
        }
        Ok(())
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Matrix::new(rows, cols, data).expect("sized above")
}

/// Glorot-uniform matrices, zero biases and a zero temporal-attention
/// vector. Deterministic in `seed`.
pub fn init_params(cfg: &ModelConfig, f_in: usize, f_out: usize, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    if f_in < 2 || f_out < 2 {
        return Err(Error::domain(format!(
            "feature dimensions must be at least 2, got {f_in} -> {f_out}"
        )));
    }
    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder_w = (0..cfg.encoder_layers)
        .map(|k| glorot(&mut rng, if k == 0 { f_in } else { d }, d))
        .collect();
    let gat_layers = (0..cfg.gat_layers)
        .map(|_| {
            let w = glorot(&mut rng, d, d);
            let a = glorot(&mut rng, 2 * d, 1).data().to_vec();
            GatLayer { w, a }
        })
        .collect();
    let mlp = Mlp {
        w1: glorot(&mut rng, 2 * d, d),
        b1: vec![0.0; d],
        w2: glorot(&mut rng, d, 1),
        b2: vec![0.0],
    };
    let decoder_w = glorot(&mut rng, d, f_out);
    Ok(ModelParams {
        encoder_w,
        attn_w: vec![0.0; 2 * cfg.d_time],
        gat_layers,
        mlp,
        decoder_w,
    })
}

// ---- checkpoint document -------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GatLayerDoc {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpDoc {
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    config: ModelConfig,
    seed: u64,
    input_dim: usize,
    output_dim: usize,
    #[serde(rename = "encoder_W")]
    encoder_w: Vec<Vec<Vec<f64>>>,
    attn_w: Vec<f64>,
    gat_layers: Vec<GatLayerDoc>,
    mlp: MlpDoc,
    #[serde(rename = "decoder_W")]
    decoder_w: Vec<Vec<f64>>,
}

/// A trained model: configuration echo (with the resolved curvature),
/// seed and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub seed: u64,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let doc = CheckpointDoc {
            config: self.config.clone(),
            seed: self.seed,
            input_dim: p.input_dim(),
            output_dim: p.output_dim(),
            encoder_w: p.encoder_w.iter().map(Matrix::to_rows).collect(),
            attn_w: p.attn_w.clone(),
            gat_layers: p
                .gat_layers
                .iter()
                .map(|l| GatLayerDoc {
                    w: l.w.to_rows(),
                    a: l.a.clone(),
                })
                .collect(),
            mlp: MlpDoc {
                w1: p.mlp.w1.to_rows(),
                b1: p.mlp.b1.clone(),
                w2: p.mlp.w2.to_rows(),
                b2: p.mlp.b2.clone(),
            },
            decoder_w: p.decoder_w.to_rows(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        doc.config.validate()?;
        let rows = |r: &Vec<Vec<f64>>, name: &str| {
            Matrix::from_rows(r).map_err(|e| Error::Parse {
                location: name.to_string(),
                message: e.to_string(),
            })
        };
        let params = ModelParams {
            encoder_w: doc
                .encoder_w
                .iter()
                .enumerate()
                .map(|(k, m)| rows(m, &format!("encoder_W[{k}]")))
                .collect::<Result<_>>()?,
            attn_w: doc.attn_w,
            gat_layers: doc
                .gat_layers
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    Ok(GatLayer {
                        w: rows(&l.w, &format!("gat_layers[{k}].W"))?,
                        a: l.a.clone(),
                    })
                })
                .collect::<Result<_>>()?,
            mlp: Mlp {
                w1: rows(&doc.mlp.w1, "mlp.W1")?,
                b1: doc.mlp.b1,
                w2: rows(&doc.mlp.w2, "mlp.W2")?,
                b2: doc.mlp.b2,
            },
            decoder_w: rows(&doc.decoder_w, "decoder_W")?,
        };
        params.check_shapes(&doc.config, doc.input_dim, doc.output_dim)?;
        Ok(Self {
            config: doc.config,
            seed: doc.seed,
            params,
        })
    }
}
