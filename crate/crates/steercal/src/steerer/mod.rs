//! The pose-rotation network: embeds an occlusion-masked 2D pose and a
//! rotation token, runs a transformer encoder, and regresses the 2D pose as
//! seen from the rotated viewpoint.
//!
//! Inputs and outputs are pose-centric (centered at the visible-joint mean,
//! RMS-scaled). Each joint becomes a 32-dim token via a small MLP; masked
//! joints are replaced by a learned mask token; the Rodrigues vector becomes
//! one extra token. A lookup positional encoding with `N + 1` entries is
//! added, the tokens pass through the encoder, and the mean-pooled output is
//! mapped to all `N` joint positions.

pub mod checkpoint;
pub mod nn;
pub mod train;

use ndarray::{Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Dual3;
use crate::matching::SteeredPose;
use crate::pose::{CoordFrame2D, Pose2D};
use crate::rotation::RotationSO3;
use nn::{Act, EncoderLayer, LayerNorm, Linear, Mlp};

/// Tag recording the input/output normalization convention in checkpoints.
pub const NORMALIZATION_TAG: &str = "pose_centric_rms";

#[derive(Debug, Error)]
pub enum SteererError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("pose has {got} joints, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("no visible joints in target pose")]
    NoVisibleJoints,
    #[error("degenerate pose: fewer than 2 visible joints")]
    DegeneratePose,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteererConfig {
    pub n_joints: usize,
    pub token_dim: usize,
    pub n_encoder_layers: usize,
    pub n_attention_heads: usize,
    pub feedforward_dim: usize,
    pub dropout: f64,
}

impl Default for SteererConfig {
    fn default() -> Self {
        Self {
            n_joints: 16,
            token_dim: 32,
            n_encoder_layers: 5,
            n_attention_heads: 4,
            feedforward_dim: 64,
            dropout: 0.0,
        }
    }
}

impl SteererConfig {
    pub fn validate(&self) -> Result<(), SteererError> {
        if self.n_joints < 3 {
            return Err(SteererError::BadConfig("n_joints must be >= 3".into()));
        }
        if self.token_dim == 0 || self.token_dim % self.n_attention_heads != 0 {
            return Err(SteererError::BadConfig(
                "attention heads must divide token_dim".into(),
            ));
        }
        if self.n_encoder_layers == 0 {
            return Err(SteererError::BadConfig("need at least one layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SteererError::BadConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// All learnable tensors plus the config and normalization convention.
#[derive(Debug, Clone)]
pub struct SteererParams {
    pub config: SteererConfig,
    pub norm_tag: String,
    pub skeleton_hash: String,
    pub joint_embed: Mlp,
    pub rot_embed: Mlp,
    pub mask_token: Array1<f64>,
    pub pos_table: Array2<f64>,
    pub layers: Vec<EncoderLayer>,
    pub final_norm: LayerNorm,
    pub head: Linear,
}

/// Deterministic parameter initialization.
pub fn init_params(
    config: &SteererConfig,
    skeleton_hash: &str,
    seed: u64,
) -> Result<SteererParams, SteererError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.token_dim;
    let n = config.n_joints;
    let joint_embed = Mlp::init(&mut rng, 2, d, d);
    let rot_embed = Mlp::init(&mut rng, 3, d, d);
    let mask_token = Array1::from_shape_fn(d, |_| {
        use rand::Rng;
        rng.random_range(-0.02..0.02)
    });
    let pos_table = Array2::from_shape_fn((n + 1, d), |_| {
        use rand::Rng;
        rng.random_range(-0.02..0.02)
    });
    let layers = (0..config.n_encoder_layers)
        .map(|_| EncoderLayer::init(&mut rng, d, config.n_attention_heads, config.feedforward_dim))
        .collect();
    let final_norm = LayerNorm::init(d);
    let head = Linear::init(&mut rng, d, 2 * n);
    Ok(SteererParams {
        config: *config,
        norm_tag: NORMALIZATION_TAG.to_string(),
        skeleton_hash: skeleton_hash.to_string(),
        joint_embed,
        rot_embed,
        mask_token,
        pos_table,
        layers,
        final_norm,
        head,
    })
}

impl SteererParams {
    /// Zero-valued gradient container with identical structure.
    pub fn zeros_like(&self) -> SteererParams {
        SteererParams {
            config: self.config,
            norm_tag: self.norm_tag.clone(),
            skeleton_hash: self.skeleton_hash.clone(),
            joint_embed: self.joint_embed.zeros_like(),
            rot_embed: self.rot_embed.zeros_like(),
            mask_token: Array1::zeros(self.mask_token.dim()),
            pos_table: Array2::zeros(self.pos_table.dim()),
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
            final_norm: self.final_norm.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// Visits every named parameter array as `(name, shape, slice)`.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        let lin = |f: &mut dyn FnMut(&str, &[usize], &[f64]), name: &str, l: &Linear| {
            f(
                &format!("{name}.w"),
                &[l.w.nrows(), l.w.ncols()],
                l.w.as_slice().unwrap(),
            );
            f(&format!("{name}.b"), &[l.b.len()], l.b.as_slice().unwrap());
        };
        let mlp = |f: &mut dyn FnMut(&str, &[usize], &[f64]), name: &str, m: &Mlp| {
            lin(f, &format!("{name}.fc1"), &m.fc1);
            lin(f, &format!("{name}.fc2"), &m.fc2);
        };
        let ln = |f: &mut dyn FnMut(&str, &[usize], &[f64]), name: &str, l: &LayerNorm| {
            f(
                &format!("{name}.gamma"),
                &[l.gamma.len()],
                l.gamma.as_slice().unwrap(),
            );
            f(
                &format!("{name}.beta"),
                &[l.beta.len()],
                l.beta.as_slice().unwrap(),
            );
        };
        mlp(f, "joint_embed", &self.joint_embed);
        mlp(f, "rot_embed", &self.rot_embed);
        f(
            "mask_token",
            &[self.mask_token.len()],
            self.mask_token.as_slice().unwrap(),
        );
        f(
            "pos_table",
            &[self.pos_table.nrows(), self.pos_table.ncols()],
            self.pos_table.as_slice().unwrap(),
        );
        for (i, layer) in self.layers.iter().enumerate() {
            ln(f, &format!("layers.{i}.norm1"), &layer.norm1);
            lin(f, &format!("layers.{i}.attn.wq"), &layer.attn.wq);
            lin(f, &format!("layers.{i}.attn.wk"), &layer.attn.wk);
            lin(f, &format!("layers.{i}.attn.wv"), &layer.attn.wv);
            lin(f, &format!("layers.{i}.attn.wo"), &layer.attn.wo);
            ln(f, &format!("layers.{i}.norm2"), &layer.norm2);
            mlp(f, &format!("layers.{i}.ff"), &layer.ff);
        }
        ln(f, "final_norm", &self.final_norm);
        lin(f, "head", &self.head);
    }

    /// Mutable visit in the same order as [`visit`].
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        let lin = |f: &mut dyn FnMut(&str, &mut [f64]), name: &str, l: &mut Linear| {
            f(&format!("{name}.w"), l.w.as_slice_mut().unwrap());
            f(&format!("{name}.b"), l.b.as_slice_mut().unwrap());
        };
        let mlp = |f: &mut dyn FnMut(&str, &mut [f64]), name: &str, m: &mut Mlp| {
            lin(f, &format!("{name}.fc1"), &mut m.fc1);
            lin(f, &format!("{name}.fc2"), &mut m.fc2);
        };
        let ln = |f: &mut dyn FnMut(&str, &mut [f64]), name: &str, l: &mut LayerNorm| {
            f(&format!("{name}.gamma"), l.gamma.as_slice_mut().unwrap());
            f(&format!("{name}.beta"), l.beta.as_slice_mut().unwrap());
        };
        mlp(f, "joint_embed", &mut self.joint_embed);
        mlp(f, "rot_embed", &mut self.rot_embed);
        f("mask_token", self.mask_token.as_slice_mut().unwrap());
        f("pos_table", self.pos_table.as_slice_mut().unwrap());
        for (i, layer) in self.layers.iter_mut().enumerate() {
            ln(f, &format!("layers.{i}.norm1"), &mut layer.norm1);
            lin(f, &format!("layers.{i}.attn.wq"), &mut layer.attn.wq);
            lin(f, &format!("layers.{i}.attn.wk"), &mut layer.attn.wk);
            lin(f, &format!("layers.{i}.attn.wv"), &mut layer.attn.wv);
            lin(f, &format!("layers.{i}.attn.wo"), &mut layer.attn.wo);
            ln(f, &format!("layers.{i}.norm2"), &mut layer.norm2);
            mlp(f, &format!("layers.{i}.ff"), &mut layer.ff);
        }
        ln(f, "final_norm", &mut self.final_norm);
        lin(f, "head", &mut self.head);
    }

    /// Flattens all parameters into one vector (visit order).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, _, s| out.extend_from_slice(s));
        out
    }

    /// Writes a flat vector back into the parameter arrays.
    pub fn from_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.visit_mut(&mut |_, s| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
        assert_eq!(off, flat.len(), "flat vector length mismatch");
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, s| n += s.len());
        n
    }
}

// ── Forward pass ─────────────────────────────────────────────────────────────

/// Batched inputs: `coords` is `(B, N, 2)`, `visible` is `(B, N)`,
/// `rodrigues` is `(B, 3)`. `rot_tangent_seed`, when present, is `(B, 3, 3)`
/// holding `d rodrigues_b / d theta_c` per tangent channel `c`.
pub struct BatchInput<'a> {
    pub coords: &'a Array3<f64>,
    pub visible: &'a Array2<bool>,
    pub rodrigues: &'a Array2<f64>,
    pub rot_tangent_seed: Option<&'a Array3<f64>>,
}

/// Predicted joint positions, optionally with rotation tangents.
pub struct ForwardOutput {
    /// `(B, N, 2)`.
    pub coords: Array3<f64>,
    /// Per-channel derivative arrays of the same shape.
    pub tangents: Option<[Array3<f64>; 3]>,
}

/// Caches for the training backward pass.
pub struct ForwardCaches {
    joint_mlp: nn::MlpCache,
    rot_mlp: nn::MlpCache,
    visible_flat: Vec<bool>,
    layer_caches: Vec<nn::EncoderLayerCache>,
    final_ln: nn::LayerNormCache,
    pooled: Array2<f64>,
    n_tokens: usize,
    batch: usize,
}

impl SteererParams {
    fn check_shapes(&self, input: &BatchInput) -> Result<(usize, usize), SteererError> {
        let (b, n, two) = input.coords.dim();
        if n != self.config.n_joints || two != 2 {
            return Err(SteererError::ShapeMismatch {
                expected: self.config.n_joints,
                got: n,
            });
        }
        if input.visible.dim() != (b, n) || input.rodrigues.dim() != (b, 3) {
            return Err(SteererError::ShapeMismatch {
                expected: self.config.n_joints,
                got: input.visible.dim().1,
            });
        }
        Ok((b, n))
    }

    /// Assembles the token sequence: joint embeddings (mask token where
    /// invisible), the rotation token, and positional encodings.
    fn embed(
        &self,
        input: &BatchInput,
        b: usize,
        n: usize,
    ) -> (Act, nn::MlpCache, nn::MlpCache, Vec<bool>) {
        let d = self.config.token_dim;
        let t = n + 1;
        // Joint coordinates as a (B*N, 2) matrix.
        let joint_in =
            Array2::from_shape_fn((b * n, 2), |(r, c)| input.coords[(r / n, r % n, c)]);
        let with_t = input.rot_tangent_seed.is_some();
        let joint_act = if with_t {
            Act::with_zero_tangents(joint_in)
        } else {
            Act::value(joint_in)
        };
        let (joint_emb, joint_mlp) = self.joint_embed.forward(&joint_act);

        // Rotation token: tangent seed flows in here.
        let rot_in = Array2::from_shape_fn((b, 3), |(r, c)| input.rodrigues[(r, c)]);
        let rot_act = Act {
            v: rot_in,
            t: input.rot_tangent_seed.map(|seed| {
                std::array::from_fn(|ch| {
                    Array2::from_shape_fn((b, 3), |(r, c)| seed[(r, c, ch)])
                })
            }),
        };
        let (rot_emb, rot_mlp) = self.rot_embed.forward(&rot_act);

        // Interleave into (B*T, D) with the rotation token last per batch
        // item, replacing invisible joints by the mask token, adding the
        // positional lookup.
        let mut v = Array2::zeros((b * t, d));
        let mut tan: Option<[Array2<f64>; 3]> =
            with_t.then(|| std::array::from_fn(|_| Array2::zeros((b * t, d))));
        let mut visible_flat = Vec::with_capacity(b * n);
        for bi in 0..b {
            for ji in 0..n {
                let row = bi * t + ji;
                let vis = input.visible[(bi, ji)];
                visible_flat.push(vis);
                if vis {
                    v.row_mut(row).assign(&joint_emb.v.row(bi * n + ji));
                } else {
                    v.row_mut(row).assign(&self.mask_token);
                }
                v.row_mut(row).scaled_add(1.0, &self.pos_table.row(ji));
                if let (Some(tv), Some(jt)) = (tan.as_mut(), joint_emb.t.as_ref()) {
                    if vis {
                        for ch in 0..3 {
                            tv[ch].row_mut(row).assign(&jt[ch].row(bi * n + ji));
                        }
                    }
                }
            }
            let row = bi * t + n;
            v.row_mut(row).assign(&rot_emb.v.row(bi));
            v.row_mut(row).scaled_add(1.0, &self.pos_table.row(n));
            if let (Some(tv), Some(rt)) = (tan.as_mut(), rot_emb.t.as_ref()) {
                for ch in 0..3 {
                    tv[ch].row_mut(row).assign(&rt[ch].row(bi));
                }
            }
        }
        (Act { v, t: tan }, joint_mlp, rot_mlp, visible_flat)
    }

    /// Forward pass; caches are returned only when `train` is set.
    fn forward_impl(
        &self,
        input: &BatchInput,
        want_caches: bool,
    ) -> Result<(ForwardOutput, Option<ForwardCaches>), SteererError> {
        let (b, n) = self.check_shapes(input)?;
        let t = n + 1;
        let (mut act, joint_mlp, rot_mlp, visible_flat) = self.embed(input, b, n);
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(&act, t);
            act = next;
            if want_caches {
                layer_caches.push(cache);
            }
        }
        let (normed, final_ln) = self.final_norm.forward(&act);

        // Mean pool over tokens: (B*T, D) -> (B, D).
        let d = self.config.token_dim;
        let pool = |m: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::zeros((b, d));
            for bi in 0..b {
                for ti in 0..t {
                    out.row_mut(bi).scaled_add(1.0 / t as f64, &m.row(bi * t + ti));
                }
            }
            out
        };
        let pooled = pool(&normed.v);
        let pooled_act = Act {
            v: pooled.clone(),
            t: normed.t.as_ref().map(|ts| std::array::from_fn(|i| pool(&ts[i]))),
        };
        let out = self.head.forward(&pooled_act);

        let reshape = |m: &Array2<f64>| {
            Array3::from_shape_fn((b, n, 2), |(bi, ji, c)| m[(bi, 2 * ji + c)])
        };
        let output = ForwardOutput {
            coords: reshape(&out.v),
            tangents: out.t.as_ref().map(|ts| std::array::from_fn(|i| reshape(&ts[i]))),
        };
        let caches = want_caches.then_some(ForwardCaches {
            joint_mlp,
            rot_mlp,
            visible_flat,
            layer_caches,
            final_ln,
            pooled,
            n_tokens: t,
            batch: b,
        });
        Ok((output, caches))
    }

    /// Inference forward pass over a batch.
    pub fn forward_batch(&self, input: &BatchInput) -> Result<ForwardOutput, SteererError> {
        Ok(self.forward_impl(input, false)?.0)
    }

    /// Training forward pass returning backward caches.
    pub fn forward_train(
        &self,
        input: &BatchInput,
    ) -> Result<(ForwardOutput, ForwardCaches), SteererError> {
        let (out, caches) = self.forward_impl(input, true)?;
        Ok((out, caches.expect("caches requested")))
    }

    /// Backward pass: accumulates parameter gradients for `d_coords`
    /// (`(B, N, 2)` upstream gradient) into `grads`.
    pub fn backward(
        &self,
        caches: &ForwardCaches,
        d_coords: &Array3<f64>,
        grads: &mut SteererParams,
    ) {
        let b = caches.batch;
        let t = caches.n_tokens;
        let n = t - 1;
        let d = self.config.token_dim;
        let d_out =
            Array2::from_shape_fn((b, 2 * n), |(bi, c)| d_coords[(bi, c / 2, c % 2)]);
        let d_pooled = self.head.backward(&caches.pooled, &d_out, &mut grads.head);

        // Un-pool: every token receives dy / T.
        let mut d_norm = Array2::zeros((b * t, d));
        for bi in 0..b {
            for ti in 0..t {
                d_norm
                    .row_mut(bi * t + ti)
                    .assign(&(&d_pooled.row(bi) / t as f64));
            }
        }
        let mut dx = self
            .final_norm
            .backward(&caches.final_ln, &d_norm, &mut grads.final_norm);
        for i in (0..self.layers.len()).rev() {
            dx = self.layers[i].backward(&caches.layer_caches[i], &dx, &mut grads.layers[i]);
        }

        // Split token gradients back into joint embeddings, mask token,
        // positional table, and the rotation embedding.
        let mut d_joint_emb = Array2::zeros((b * n, d));
        let mut d_rot_emb = Array2::zeros((b, d));
        for bi in 0..b {
            for ji in 0..n {
                let row = bi * t + ji;
                grads.pos_table.row_mut(ji).scaled_add(1.0, &dx.row(row));
                if caches.visible_flat[bi * n + ji] {
                    d_joint_emb.row_mut(bi * n + ji).assign(&dx.row(row));
                } else {
                    grads.mask_token.scaled_add(1.0, &dx.row(row));
                }
            }
            let row = bi * t + n;
            grads.pos_table.row_mut(n).scaled_add(1.0, &dx.row(row));
            d_rot_emb.row_mut(bi).assign(&dx.row(row));
        }
        let _ = self
            .joint_embed
            .backward(&caches.joint_mlp, &d_joint_emb, &mut grads.joint_embed);
        let _ = self
            .rot_embed
            .backward(&caches.rot_mlp, &d_rot_emb, &mut grads.rot_embed);
    }
}

/// Steers one pose-centric pose by a rotation; value-level convenience.
pub fn forward(
    params: &SteererParams,
    pose: &Pose2D,
    rotation: &RotationSO3,
) -> Result<Pose2D, SteererError> {
    let out = forward_dual(params, pose, rotation, None)?;
    let coords = out.coords.iter().map(|c| [c[0].value, c[1].value]).collect();
    Ok(Pose2D::fully_visible(coords, CoordFrame2D::PoseCentric))
}

/// Steers one pose, optionally seeding rotation tangents (`seed[c][r]` is
/// `d rodrigues_r / d theta_c`; identity for direct optimization of the
/// rotation, negated identity for the inverse direction).
pub fn forward_dual(
    params: &SteererParams,
    pose: &Pose2D,
    rotation: &RotationSO3,
    seed: Option<[[f64; 3]; 3]>,
) -> Result<SteeredPose, SteererError> {
    let n = params.config.n_joints;
    if pose.n_joints() != n {
        return Err(SteererError::ShapeMismatch {
            expected: n,
            got: pose.n_joints(),
        });
    }
    let coords = Array3::from_shape_fn((1, n, 2), |(_, j, c)| pose.coords[j][c]);
    let visible = Array2::from_shape_fn((1, n), |(_, j)| pose.visible[j]);
    let rodrigues =
        Array2::from_shape_fn((1, 3), |(_, c)| rotation.rodrigues[c]);
    let seed_arr = seed.map(|s| Array3::from_shape_fn((1, 3, 3), |(_, r, c)| s[c][r]));
    let out = params.forward_batch(&BatchInput {
        coords: &coords,
        visible: &visible,
        rodrigues: &rodrigues,
        rot_tangent_seed: seed_arr.as_ref(),
    })?;
    let coords = (0..n)
        .map(|j| {
            let mk = |c: usize| {
                let tangent = out
                    .tangents
                    .as_ref()
                    .map(|ts| std::array::from_fn(|ch| ts[ch][(0, j, c)]))
                    .unwrap_or([0.0; 3]);
                Dual3::new(out.coords[(0, j, c)], tangent)
            };
            [mk(0), mk(1)]
        })
        .collect();
    Ok(SteeredPose { coords })
}

/// Mean L2 distance over joints visible in the target.
pub fn keypoint_loss(predicted: &Pose2D, target: &Pose2D) -> Result<f64, SteererError> {
    if predicted.n_joints() != target.n_joints() {
        return Err(SteererError::ShapeMismatch {
            expected: target.n_joints(),
            got: predicted.n_joints(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..target.n_joints() {
        if target.visible[i] {
            let dx = predicted.coords[i][0] - target.coords[i][0];
            let dy = predicted.coords[i][1] - target.coords[i][1];
            sum += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return Err(SteererError::NoVisibleJoints);
    }
    Ok(sum / count as f64)
}

/// Fills missing joints by steering with the identity rotation.
///
/// With `keep_visible` set, visible input joints pass through verbatim and
/// only the masked joints take predicted values.
pub fn complete_keypoints(
    params: &SteererParams,
    pose: &Pose2D,
    keep_visible: bool,
) -> Result<Pose2D, SteererError> {
    if pose.n_visible() < 2 {
        return Err(SteererError::DegeneratePose);
    }
    let predicted = forward(params, pose, &RotationSO3::identity())?;
    if !keep_visible {
        return Ok(predicted);
    }
    let coords = (0..pose.n_joints())
        .map(|i| {
            if pose.visible[i] {
                pose.coords[i]
            } else {
                predicted.coords[i]
            }
        })
        .collect();
    Ok(Pose2D::fully_visible(coords, CoordFrame2D::PoseCentric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::normalize_pose_centric;
    use ndarray::Axis;
    use approx::assert_relative_eq;

    fn small_config() -> SteererConfig {
        SteererConfig {
            n_joints: 5,
            token_dim: 16,
            n_encoder_layers: 2,
            n_attention_heads: 4,
            feedforward_dim: 32,
            dropout: 0.0,
        }
    }

    fn random_pose(seed: u64, n: usize) -> Pose2D {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let p = Pose2D::fully_visible(coords, CoordFrame2D::Normalized);
        normalize_pose_centric(&p).unwrap().0
    }

    #[test]
    fn init_is_deterministic_and_shapes_match() {
        let cfg = SteererConfig {
            n_joints: 16,
            ..SteererConfig::default()
        };
        let a = init_params(&cfg, "h", 3).unwrap();
        let b = init_params(&cfg, "h", 3).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
        assert_eq!(a.pos_table.dim(), (17, 32));
        assert_eq!(a.head.w.dim(), (32, 32));
        let c = init_params(&cfg, "h", 4).unwrap();
        assert_ne!(a.to_flat(), c.to_flat());
    }

    #[test]
    fn forward_produces_finite_output() {
        let cfg = small_config();
        let params = init_params(&cfg, "h", 1).unwrap();
        let pose = random_pose(2, 5);
        let out = forward(&params, &pose, &RotationSO3::new([0.2, -0.1, 0.3])).unwrap();
        assert_eq!(out.n_joints(), 5);
        for c in &out.coords {
            assert!(c[0].is_finite() && c[1].is_finite());
        }
    }

    #[test]
    fn rejects_wrong_joint_count() {
        let params = init_params(&small_config(), "h", 1).unwrap();
        let pose = random_pose(2, 7);
        assert!(matches!(
            forward(&params, &pose, &RotationSO3::identity()),
            Err(SteererError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = SteererConfig {
            n_attention_heads: 5,
            ..small_config()
        };
        assert!(matches!(
            init_params(&cfg, "h", 0),
            Err(SteererError::BadConfig(_))
        ));
    }

    #[test]
    fn rotation_gradient_matches_finite_differences() {
        let cfg = small_config();
        let params = init_params(&cfg, "h", 5).unwrap();
        let pose = random_pose(3, 5);
        let rot = RotationSO3::new([0.3, -0.2, 0.4]);
        let identity_seed = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let out = forward_dual(&params, &pose, &rot, Some(identity_seed)).unwrap();
        let h = 1e-4;
        for p in 0..3 {
            let mut rp = rot.rodrigues;
            rp[p] += h;
            let mut rm = rot.rodrigues;
            rm[p] -= h;
            let op = forward(&params, &pose, &RotationSO3 { rodrigues: rp }).unwrap();
            let om = forward(&params, &pose, &RotationSO3 { rodrigues: rm }).unwrap();
            for j in 0..5 {
                for c in 0..2 {
                    let fd = (op.coords[j][c] - om.coords[j][c]) / (2.0 * h);
                    let an = out.coords[j][c].tangent[p];
                    let denom = fd.abs().max(an.abs()).max(1e-3);
                    assert!(
                        (fd - an).abs() / denom < 1e-3,
                        "joint {j} coord {c} param {p}: {an} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let cfg = small_config();
        let params = init_params(&cfg, "h", 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = 3;
        let coords = Array3::from_shape_fn((b, 5, 2), |_| rng.random_range(-1.0..1.0));
        let mut visible = Array2::from_elem((b, 5), true);
        visible[(1, 2)] = false; // exercise the mask-token path
        let rodrigues = Array2::from_shape_fn((b, 3), |_| rng.random_range(-0.5..0.5));
        let upstream = Array3::from_shape_fn((b, 5, 2), |_| rng.random_range(-1.0..1.0));

        let loss = |p: &SteererParams| -> f64 {
            let out = p
                .forward_batch(&BatchInput {
                    coords: &coords,
                    visible: &visible,
                    rodrigues: &rodrigues,
                    rot_tangent_seed: None,
                })
                .unwrap();
            (&out.coords * &upstream).sum()
        };

        let input = BatchInput {
            coords: &coords,
            visible: &visible,
            rodrigues: &rodrigues,
            rot_tangent_seed: None,
        };
        let (_, caches) = params.forward_train(&input).unwrap();
        let mut grads = params.zeros_like();
        params.backward(&caches, &upstream, &mut grads);

        let flat = params.to_flat();
        let gflat = grads.to_flat();
        let n = flat.len();
        // Spot-check a deterministic spread of parameters.
        let h = 1e-5;
        let mut checked = 0;
        for idx in (0..n).step_by(n / 97 + 1) {
            let mut pp = params.clone();
            let mut fp = flat.clone();
            fp[idx] += h;
            pp.from_flat(&fp);
            let lp = loss(&pp);
            let mut fm = flat.clone();
            fm[idx] -= h;
            pp.from_flat(&fm);
            let lm = loss(&pp);
            let fd = (lp - lm) / (2.0 * h);
            let an = gflat[idx];
            let denom = fd.abs().max(an.abs()).max(1e-4);
            assert!(
                (fd - an).abs() / denom < 1e-3,
                "param {idx}: analytic {an} vs fd {fd}"
            );
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn keypoint_loss_hand_cases() {
        let p = random_pose(4, 5);
        assert_relative_eq!(keypoint_loss(&p, &p).unwrap(), 0.0);
        let shifted = Pose2D::fully_visible(
            p.coords.iter().map(|c| [c[0] + 3.0, c[1] + 4.0]).collect(),
            CoordFrame2D::PoseCentric,
        );
        assert_relative_eq!(keypoint_loss(&shifted, &p).unwrap(), 5.0, epsilon = 1e-12);
        // Masking target joints restricts the sum to the visible subset.
        let mut half = p.clone();
        half.visible[0] = false;
        half.visible[1] = false;
        let l = keypoint_loss(&shifted, &half).unwrap();
        assert_relative_eq!(l, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn completion_keeps_visible_joints_verbatim() {
        let params = init_params(&small_config(), "h", 9).unwrap();
        let pose = random_pose(6, 5);
        let done = complete_keypoints(&params, &pose, true).unwrap();
        assert_eq!(done.coords, pose.coords);
        // Untrained completion of a masked pose still fills all joints.
        let mut masked = pose.clone();
        masked.visible[3] = false;
        masked.coords[3] = [0.0, 0.0];
        let done = complete_keypoints(&params, &masked, true).unwrap();
        assert!(done.visible.iter().all(|&v| v));
        for i in 0..5 {
            if i != 3 {
                assert_eq!(done.coords[i], masked.coords[i]);
            }
        }
    }

    #[test]
    fn completion_needs_two_visible_joints() {
        let params = init_params(&small_config(), "h", 9).unwrap();
        let pose = Pose2D::new(
            vec![[0.0, 0.0]; 5],
            vec![true, false, false, false, false],
            CoordFrame2D::PoseCentric,
        );
        assert!(matches!(
            complete_keypoints(&params, &pose, true),
            Err(SteererError::DegeneratePose)
        ));
    }

    #[test]
    fn batch_and_single_forward_agree() {
        use rand::{Rng, SeedableRng};
        let cfg = small_config();
        let params = init_params(&cfg, "h", 13).unwrap();
        let poses: Vec<Pose2D> = (0..4).map(|s| random_pose(20 + s, 5)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rots: Vec<RotationSO3> = (0..4)
            .map(|_| RotationSO3::new([rng.random_range(-1.0..1.0); 3]))
            .collect();
        let coords = Array3::from_shape_fn((4, 5, 2), |(b, j, c)| poses[b].coords[j][c]);
        let visible = Array2::from_elem((4, 5), true);
        let rodrigues = Array2::from_shape_fn((4, 3), |(b, c)| rots[b].rodrigues[c]);
        let out = params
            .forward_batch(&BatchInput {
                coords: &coords,
                visible: &visible,
                rodrigues: &rodrigues,
                rot_tangent_seed: None,
            })
            .unwrap();
        for b in 0..4 {
            let single = forward(&params, &poses[b], &rots[b]).unwrap();
            for j in 0..5 {
                assert_relative_eq!(single.coords[j][0], out.coords[(b, j, 0)], epsilon = 1e-12);
                assert_relative_eq!(single.coords[j][1], out.coords[(b, j, 1)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pooling_is_token_order_invariant_with_fixed_positions() {
        // Structural check: permuting encoder OUTPUT tokens before pooling
        // cannot change the result because pooling averages them.
        let v = Array2::from_shape_fn((6, 4), |(i, j)| (i * 4 + j) as f64);
        let mean_a = v.mean_axis(Axis(0)).unwrap();
        let mut perm = v.clone();
        perm.swap_axes(0, 0);
        let rows: Vec<_> = (0..6).rev().collect();
        let permuted = Array2::from_shape_fn((6, 4), |(i, j)| v[(rows[i], j)]);
        let mean_b = permuted.mean_axis(Axis(0)).unwrap();
        assert_relative_eq!(mean_a[0], mean_b[0]);
        let _ = perm;
    }
}
