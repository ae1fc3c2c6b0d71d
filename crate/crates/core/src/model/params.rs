use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    #[default]
    Additive,
    Dot,
}

impl std::str::FromStr for AttentionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" | "add" => Ok(Self::Additive),
            "dot" => Ok(Self::Dot),
            other => Err(Error::Config(format!("unknown attention kind `{other}`"))),
        }
    }
}

/// Every size the parameter shapes depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub trg_vocab: usize,
    pub emb_dim: usize,
    pub state_dim: usize,
    pub att_dim: usize,
    #[serde(default)]
    pub attention: AttentionKind,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("src_vocab", self.src_vocab),
            ("trg_vocab", self.trg_vocab),
            ("emb_dim", self.emb_dim),
            ("state_dim", self.state_dim),
            ("att_dim", self.att_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Width of one source annotation (forward and backward states).
    pub fn annotation_dim(&self) -> usize {
        2 * self.state_dim
    }
}

/// Packed GRU weights, gate order (update, reset, candidate).
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// `3·hidden × input`
    pub w: Array2<f64>,
    /// `3·hidden × hidden`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl GruParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((3 * hidden, input)),
            u: Array2::zeros((3 * hidden, hidden)),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }
}

/// All trainable arrays of the attentional encoder-decoder. The same struct
/// doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub src_emb: Array2<f64>,
    pub trg_emb: Array2<f64>,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    pub init_w: Array2<f64>,
    pub init_b: Array1<f64>,
    pub dec1: GruParams,
    pub dec2: GruParams,
    pub att_w: Array2<f64>,
    pub att_u: Array2<f64>,
    pub att_b: Array1<f64>,
    pub att_v: Array1<f64>,
    pub att_proj: Array2<f64>,
    pub readout_state: Array2<f64>,
    pub readout_context: Array2<f64>,
    pub readout_embed: Array2<f64>,
    pub readout_b: Array1<f64>,
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let ModelConfig {
            src_vocab: vs,
            trg_vocab: vt,
            emb_dim: e,
            state_dim: s,
            att_dim: a,
            ..
        } = config;
        let h = 2 * s;
        Self {
            config,
            src_emb: Array2::zeros((vs, e)),
            trg_emb: Array2::zeros((vt, e)),
            enc_fwd: GruParams::zeros(e, s),
            enc_bwd: GruParams::zeros(e, s),
            init_w: Array2::zeros((s, h)),
            init_b: Array1::zeros(s),
            dec1: GruParams::zeros(e, s),
            dec2: GruParams::zeros(h, s),
            att_w: Array2::zeros((a, s)),
            att_u: Array2::zeros((a, h)),
            att_b: Array1::zeros(a),
            att_v: Array1::zeros(a),
            att_proj: Array2::zeros((s, h)),
            readout_state: Array2::zeros((e, s)),
            readout_context: Array2::zeros((e, h)),
            readout_embed: Array2::zeros((e, e)),
            readout_b: Array1::zeros(e),
            output_w: Array2::zeros((vt, e)),
            output_b: Array1::zeros(vt),
        }
    }

    /// Glorot-uniform weights, zero biases; identical output for identical seeds.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, mut t) in params.tensors_mut() {
            if is_bias(name) {
                continue;
            }
            let (rows, cols) = match t.shape() {
                [r, c] => (*r, *c),
                [r] => (*r, 1),
                _ => unreachable!("parameters are vectors or matrices"),
            };
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            t.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
        Ok(params)
    }

    pub fn tensors(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>)> {
        vec![
            ("src_emb", self.src_emb.view().into_dyn()),
            ("trg_emb", self.trg_emb.view().into_dyn()),
            ("enc_fwd.w", self.enc_fwd.w.view().into_dyn()),
            ("enc_fwd.u", self.enc_fwd.u.view().into_dyn()),
            ("enc_fwd.b", self.enc_fwd.b.view().into_dyn()),
            ("enc_bwd.w", self.enc_bwd.w.view().into_dyn()),
            ("enc_bwd.u", self.enc_bwd.u.view().into_dyn()),
            ("enc_bwd.b", self.enc_bwd.b.view().into_dyn()),
            ("init.w", self.init_w.view().into_dyn()),
            ("init.b", self.init_b.view().into_dyn()),
            ("dec1.w", self.dec1.w.view().into_dyn()),
            ("dec1.u", self.dec1.u.view().into_dyn()),
            ("dec1.b", self.dec1.b.view().into_dyn()),
            ("dec2.w", self.dec2.w.view().into_dyn()),
            ("dec2.u", self.dec2.u.view().into_dyn()),
            ("dec2.b", self.dec2.b.view().into_dyn()),
            ("att.w", self.att_w.view().into_dyn()),
            ("att.u", self.att_u.view().into_dyn()),
            ("att.b", self.att_b.view().into_dyn()),
            ("att.v", self.att_v.view().into_dyn()),
            ("att.proj", self.att_proj.view().into_dyn()),
            ("readout.state", self.readout_state.view().into_dyn()),
            ("readout.context", self.readout_context.view().into_dyn()),
            ("readout.embed", self.readout_embed.view().into_dyn()),
            ("readout.b", self.readout_b.view().into_dyn()),
            ("output.w", self.output_w.view().into_dyn()),
            ("output.b", self.output_b.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, f64>)> {
        vec![
            ("src_emb", self.src_emb.view_mut().into_dyn()),
            ("trg_emb", self.trg_emb.view_mut().into_dyn()),
            ("enc_fwd.w", self.enc_fwd.w.view_mut().into_dyn()),
            ("enc_fwd.u", self.enc_fwd.u.view_mut().into_dyn()),
            ("enc_fwd.b", self.enc_fwd.b.view_mut().into_dyn()),
            ("enc_bwd.w", self.enc_bwd.w.view_mut().into_dyn()),
            ("enc_bwd.u", self.enc_bwd.u.view_mut().into_dyn()),
            ("enc_bwd.b", self.enc_bwd.b.view_mut().into_dyn()),
            ("init.w", self.init_w.view_mut().into_dyn()),
            ("init.b", self.init_b.view_mut().into_dyn()),
            ("dec1.w", self.dec1.w.view_mut().into_dyn()),
            ("dec1.u", self.dec1.u.view_mut().into_dyn()),
            ("dec1.b", self.dec1.b.view_mut().into_dyn()),
            ("dec2.w", self.dec2.w.view_mut().into_dyn()),
            ("dec2.u", self.dec2.u.view_mut().into_dyn()),
            ("dec2.b", self.dec2.b.view_mut().into_dyn()),
            ("att.w", self.att_w.view_mut().into_dyn()),
            ("att.u", self.att_u.view_mut().into_dyn()),
            ("att.b", self.att_b.view_mut().into_dyn()),
            ("att.v", self.att_v.view_mut().into_dyn()),
            ("att.proj", self.att_proj.view_mut().into_dyn()),
            ("readout.state", self.readout_state.view_mut().into_dyn()),
            ("readout.context", self.readout_context.view_mut().into_dyn()),
            ("readout.embed", self.readout_embed.view_mut().into_dyn()),
            ("readout.b", self.readout_b.view_mut().into_dyn()),
            ("output.w", self.output_w.view_mut().into_dyn()),
            ("output.b", self.output_b.view_mut().into_dyn()),
        ]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config)
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_shapes(other)?;
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            Zip::from(&mut a).and(&b).for_each(|a, &b| *a += alpha * b);
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * alpha);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_same_shapes(&self, other: &Self) -> Result<()> {
        for ((name, a), (_, b)) in self.tensors().iter().zip(other.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::ShapeMismatch {
                    name: name.to_string(),
                    expected: a.shape().to_vec(),
                    found: b.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

pub fn is_bias(name: &str) -> bool {
    name.ends_with(".b")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg(vs: usize, vt: usize, e: usize, s: usize, a: usize) -> ModelConfig {
        ModelConfig {
            src_vocab: vs,
            trg_vocab: vt,
            emb_dim: e,
            state_dim: s,
            att_dim: a,
            attention: AttentionKind::Additive,
        }
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let p = ModelParams::init(cfg(7, 9, 5, 6, 4), 1).unwrap();
        for (name, t) in p.tensors() {
            if is_bias(name) {
                assert!(t.iter().all(|&v| v == 0.0), "{name}");
                continue;
            }
            let (r, c) = match t.shape() {
                [r, c] => (*r, *c),
                [r] => (*r, 1),
                _ => unreachable!(),
            };
            let bound = (6.0 / (r + c) as f64).sqrt();
            assert!(t.iter().all(|v| v.abs() <= bound), "{name}");
            assert!(t.iter().any(|&v| v != 0.0), "{name}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let c = cfg(7, 9, 5, 6, 4);
        assert_eq!(ModelParams::init(c, 3).unwrap(), ModelParams::init(c, 3).unwrap());
        assert_ne!(ModelParams::init(c, 3).unwrap(), ModelParams::init(c, 4).unwrap());
    }

    #[test]
    fn large_matrix_mean_near_zero() {
        // 256x256 matrix: std of the mean is bound/sqrt(3·65536) ≈ 2.4e-4
        let p = ModelParams::init(cfg(256, 4, 256, 1, 1), 9).unwrap();
        let mean = p.src_emb.mean().unwrap();
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(
            ModelParams::init(cfg(7, 9, 0, 6, 4), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn names_unique() {
        let p = ModelParams::zeros(cfg(3, 3, 2, 2, 2));
        let mut names: Vec<_> = p.tensors().into_iter().map(|(n, _)| n).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}
