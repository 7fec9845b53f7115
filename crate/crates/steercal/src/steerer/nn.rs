//! Batched network building blocks with three gradient paths:
//!
//! - plain value forward,
//! - forward with up to three tangent channels (directional derivatives of
//!   the rotation parameters, propagated alongside the values),
//! - reverse-mode backward for training, accumulating parameter gradients
//!   into a structurally identical gradient container.
//!
//! Activations are `(batch * tokens, dim)` matrices so the heavy lifting
//! stays in dgemm.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

/// Number of rotation tangent channels carried through the network.
pub const N_TANGENTS: usize = 3;

/// Value matrix plus optional tangent channels of identical shape.
#[derive(Debug, Clone)]
pub struct Act {
    pub v: Array2<f64>,
    pub t: Option<[Array2<f64>; N_TANGENTS]>,
}

impl Act {
    pub fn value(v: Array2<f64>) -> Self {
        Self { v, t: None }
    }

    pub fn with_zero_tangents(v: Array2<f64>) -> Self {
        let z = Array2::zeros(v.dim());
        Self {
            v,
            t: Some([z.clone(), z.clone(), z]),
        }
    }

    pub fn add(&self, other: &Act) -> Act {
        let v = &self.v + &other.v;
        let t = match (&self.t, &other.t) {
            (Some(a), Some(b)) => Some(std::array::from_fn(|i| &a[i] + &b[i])),
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (None, None) => None,
        };
        Act { v, t }
    }
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit))
}

// ── Linear ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn init(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: glorot(rng, fan_in, fan_out),
            b: Array1::zeros(fan_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.dim()),
            b: Array1::zeros(self.b.dim()),
        }
    }

    pub fn forward(&self, x: &Act) -> Act {
        let v = x.v.dot(&self.w) + &self.b;
        let t = x
            .t
            .as_ref()
            .map(|ts| std::array::from_fn(|i| ts[i].dot(&self.w)));
        Act { v, t }
    }

    /// Returns the input gradient; accumulates parameter gradients.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, g: &mut Linear) -> Array2<f64> {
        g.w += &x.t().dot(dy);
        g.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

// ── GELU ─────────────────────────────────────────────────────────────────────

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn gelu(x: &Act) -> Act {
    let v = x.v.mapv(gelu_scalar);
    let t = x.t.as_ref().map(|ts| {
        let g = x.v.mapv(gelu_grad_scalar);
        std::array::from_fn(|i| &ts[i] * &g)
    });
    Act { v, t }
}

pub fn gelu_backward(x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    dy * &x.mapv(gelu_grad_scalar)
}

// ── LayerNorm ────────────────────────────────────────────────────────────────

const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

pub struct LayerNormCache {
    /// Centered input.
    d: Array2<f64>,
    /// Per-row inverse standard deviation.
    s: Array1<f64>,
}

impl LayerNorm {
    pub fn init(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gamma: Array1::zeros(self.gamma.dim()),
            beta: Array1::zeros(self.beta.dim()),
        }
    }

    pub fn forward(&self, x: &Act) -> (Act, LayerNormCache) {
        let dim = x.v.ncols() as f64;
        let mu = x.v.mean_axis(Axis(1)).expect("nonempty rows");
        let d = &x.v - &mu.view().insert_axis(Axis(1));
        let var = d.mapv(|e| e * e).mean_axis(Axis(1)).expect("nonempty rows");
        let s = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        let xhat = &d * &s.view().insert_axis(Axis(1));
        let v = &xhat * &self.gamma + &self.beta;
        let t = x.t.as_ref().map(|ts| {
            std::array::from_fn(|i| {
                let mu_t = ts[i].mean_axis(Axis(1)).expect("nonempty rows");
                let d_t = &ts[i] - &mu_t.view().insert_axis(Axis(1));
                // sigma2_t = 2 mean(d * d_t); s_t = -0.5 s^3 sigma2_t
                let var_t = (&d * &d_t).mean_axis(Axis(1)).expect("rows") * 2.0;
                let s_t = s.mapv(|sv| -0.5 * sv * sv * sv) * &var_t;
                let y_t = &d_t * &s.view().insert_axis(Axis(1))
                    + &d * &s_t.view().insert_axis(Axis(1));
                &y_t * &self.gamma
            })
        });
        let _ = dim;
        (Act { v, t }, LayerNormCache { d, s })
    }

    pub fn backward(
        &self,
        cache: &LayerNormCache,
        dy: &Array2<f64>,
        g: &mut LayerNorm,
    ) -> Array2<f64> {
        let s_col = cache.s.view().insert_axis(Axis(1));
        let xhat = &cache.d * &s_col;
        g.gamma += &(dy * &xhat).sum_axis(Axis(0));
        g.beta += &dy.sum_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        let m1 = dxhat.mean_axis(Axis(1)).expect("rows");
        let m2 = (&dxhat * &xhat).mean_axis(Axis(1)).expect("rows");
        let dx = (&dxhat
            - &m1.view().insert_axis(Axis(1))
            - &(&xhat * &m2.view().insert_axis(Axis(1))))
            * &s_col;
        dx
    }
}

// ── Multi-head self-attention ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Attention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub n_heads: usize,
}

pub struct AttentionCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Softmax probabilities, one (T, T) block per (batch, head).
    probs: Vec<Array2<f64>>,
    concat: Array2<f64>,
    n_tokens: usize,
}

impl Attention {
    pub fn init(rng: &mut impl Rng, dim: usize, n_heads: usize) -> Self {
        assert_eq!(dim % n_heads, 0, "heads must divide the token dim");
        Self {
            wq: Linear::init(rng, dim, dim),
            wk: Linear::init(rng, dim, dim),
            wv: Linear::init(rng, dim, dim),
            wo: Linear::init(rng, dim, dim),
            n_heads,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            wq: self.wq.zeros_like(),
            wk: self.wk.zeros_like(),
            wv: self.wv.zeros_like(),
            wo: self.wo.zeros_like(),
            n_heads: self.n_heads,
        }
    }

    /// Self-attention over `(batch * n_tokens, dim)` activations.
    pub fn forward(&self, x: &Act, n_tokens: usize) -> (Act, AttentionCache) {
        let dim = x.v.ncols();
        let dh = dim / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let n_rows = x.v.nrows();
        let batch = n_rows / n_tokens;

        let q = self.wq.forward(x);
        let k = self.wk.forward(x);
        let v = self.wv.forward(x);

        let mut concat = Array2::zeros((n_rows, dim));
        let mut concat_t: Option<[Array2<f64>; N_TANGENTS]> = x
            .t
            .as_ref()
            .map(|_| std::array::from_fn(|_| Array2::zeros((n_rows, dim))));
        let mut probs = Vec::with_capacity(batch * self.n_heads);

        for b in 0..batch {
            let row0 = b * n_tokens;
            for h in 0..self.n_heads {
                let c0 = h * dh;
                let qs = q.v.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let ks = k.v.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let vs = v.v.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let mut scores = qs.dot(&ks.t());
                scores *= scale;
                // Row softmax.
                let mut p = scores;
                for mut row in p.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|e| (e - m).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|e| e / sum);
                }
                let o = p.dot(&vs);
                concat
                    .slice_mut(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh])
                    .assign(&o);

                if let (Some(ts), Some(ct)) = (x.t.as_ref(), concat_t.as_mut()) {
                    let _ = ts;
                    let qt = q.t.as_ref().unwrap();
                    let kt = k.t.as_ref().unwrap();
                    let vt = v.t.as_ref().unwrap();
                    for ch in 0..N_TANGENTS {
                        let qts = qt[ch].slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                        let kts = kt[ch].slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                        let vts = vt[ch].slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                        let mut s_t = qts.dot(&ks.t()) + qs.dot(&kts.t());
                        s_t *= scale;
                        // p_t = p ⊙ (s_t - rowsum(p ⊙ s_t))
                        let rowsum = (&p * &s_t).sum_axis(Axis(1));
                        let p_t = &p * &(&s_t - &rowsum.view().insert_axis(Axis(1)));
                        let o_t = p_t.dot(&vs) + p.dot(&vts);
                        ct[ch]
                            .slice_mut(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh])
                            .assign(&o_t);
                    }
                }
                probs.push(p);
            }
        }

        let concat_act = Act {
            v: concat.clone(),
            t: concat_t,
        };
        let out = self.wo.forward(&concat_act);
        (
            out,
            AttentionCache {
                x: x.v.clone(),
                q: q.v,
                k: k.v,
                v: v.v,
                probs,
                concat,
                n_tokens,
            },
        )
    }

    pub fn backward(
        &self,
        cache: &AttentionCache,
        dy: &Array2<f64>,
        g: &mut Attention,
    ) -> Array2<f64> {
        let dim = dy.ncols();
        let dh = dim / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let n_tokens = cache.n_tokens;
        let batch = dy.nrows() / n_tokens;

        let d_concat = self.wo.backward(&cache.concat, dy, &mut g.wo);
        let mut dq = Array2::zeros(cache.q.dim());
        let mut dk = Array2::zeros(cache.k.dim());
        let mut dv = Array2::zeros(cache.v.dim());
        for b in 0..batch {
            let row0 = b * n_tokens;
            for h in 0..self.n_heads {
                let c0 = h * dh;
                let p = &cache.probs[b * self.n_heads + h];
                let qs = cache.q.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let ks = cache.k.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let vs = cache.v.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let d_o = d_concat.slice(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh]);
                let d_p = d_o.dot(&vs.t());
                let d_v = p.t().dot(&d_o);
                // Softmax backward per row.
                let rowsum = (&d_p * p).sum_axis(Axis(1));
                let mut d_s = p * &(&d_p - &rowsum.view().insert_axis(Axis(1)));
                d_s *= scale;
                let d_q = d_s.dot(&ks);
                let d_k = d_s.t().dot(&qs);
                dq.slice_mut(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh])
                    .assign(&d_q);
                dk.slice_mut(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh])
                    .assign(&d_k);
                dv.slice_mut(ndarray::s![row0..row0 + n_tokens, c0..c0 + dh])
                    .assign(&d_v);
            }
        }
        let dx_q = self.wq.backward(&cache.x, &dq, &mut g.wq);
        let dx_k = self.wk.backward(&cache.x, &dk, &mut g.wk);
        let dx_v = self.wv.backward(&cache.x, &dv, &mut g.wv);
        dx_q + dx_k + dx_v
    }
}

// ── Two-layer perceptron ─────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct MlpCache {
    x: Array2<f64>,
    h_pre: Array2<f64>,
    h_post: Array2<f64>,
}

impl Mlp {
    pub fn init(rng: &mut impl Rng, fan_in: usize, hidden: usize, fan_out: usize) -> Self {
        Self {
            fc1: Linear::init(rng, fan_in, hidden),
            fc2: Linear::init(rng, hidden, fan_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
        }
    }

    pub fn forward(&self, x: &Act) -> (Act, MlpCache) {
        let h_pre = self.fc1.forward(x);
        let h_post = gelu(&h_pre);
        let y = self.fc2.forward(&h_post);
        (
            y,
            MlpCache {
                x: x.v.clone(),
                h_pre: h_pre.v,
                h_post: h_post.v,
            },
        )
    }

    pub fn backward(&self, cache: &MlpCache, dy: &Array2<f64>, g: &mut Mlp) -> Array2<f64> {
        let dh_post = self.fc2.backward(&cache.h_post, dy, &mut g.fc2);
        let dh_pre = gelu_backward(&cache.h_pre, &dh_post);
        self.fc1.backward(&cache.x, &dh_pre, &mut g.fc1)
    }
}

// ── Encoder layer (pre-norm) ─────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub norm1: LayerNorm,
    pub attn: Attention,
    pub norm2: LayerNorm,
    pub ff: Mlp,
}

pub struct EncoderLayerCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ff: MlpCache,
}

impl EncoderLayer {
    pub fn init(rng: &mut impl Rng, dim: usize, n_heads: usize, ff_dim: usize) -> Self {
        Self {
            norm1: LayerNorm::init(dim),
            attn: Attention::init(rng, dim, n_heads),
            norm2: LayerNorm::init(dim),
            ff: Mlp::init(rng, dim, ff_dim, dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            norm1: self.norm1.zeros_like(),
            attn: self.attn.zeros_like(),
            norm2: self.norm2.zeros_like(),
            ff: self.ff.zeros_like(),
        }
    }

    pub fn forward(&self, x: &Act, n_tokens: usize) -> (Act, EncoderLayerCache) {
        let (n1, ln1) = self.norm1.forward(x);
        let (a, attn) = self.attn.forward(&n1, n_tokens);
        let h = x.add(&a);
        let (n2, ln2) = self.norm2.forward(&h);
        let (f, ff) = self.ff.forward(&n2);
        let y = h.add(&f);
        (
            y,
            EncoderLayerCache {
                ln1,
                attn,
                ln2,
                ff,
            },
        )
    }

    pub fn backward(
        &self,
        cache: &EncoderLayerCache,
        dy: &Array2<f64>,
        g: &mut EncoderLayer,
    ) -> Array2<f64> {
        let df = dy; // residual: dy flows to both branches
        let dn2 = self.ff.backward(&cache.ff, df, &mut g.ff);
        let dh = self.norm2.backward(&cache.ln2, &dn2, &mut g.norm2) + dy;
        let dn1 = self.attn.backward(&cache.attn, &dh, &mut g.attn);
        let dx_branch = self.norm1.backward(&cache.ln1, &dn1, &mut g.norm1);
        dx_branch + &dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Finite-difference check of d(loss)/d(x) where loss = sum(w ⊙ y).
    fn check_input_grad(
        forward: impl Fn(&Array2<f64>) -> Array2<f64>,
        backward_dx: &Array2<f64>,
        x: &Array2<f64>,
        w: &Array2<f64>,
        tol: f64,
    ) {
        let h = 1e-6;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let mut xp = x.clone();
                xp[(i, j)] += h;
                let mut xm = x.clone();
                xm[(i, j)] -= h;
                let fd = ((&forward(&xp) * w).sum() - (&forward(&xm) * w).sum()) / (2.0 * h);
                let an = backward_dx[(i, j)];
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!(
                    (fd - an).abs() / denom < tol,
                    "({i},{j}): analytic {an} vs fd {fd}"
                );
            }
        }
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn linear_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lin = Linear::init(&mut rng, 4, 3);
        let x = rand_mat(&mut rng, 5, 4);
        let w = rand_mat(&mut rng, 5, 3);
        let mut g = lin.zeros_like();
        let dx = lin.backward(&x, &w, &mut g);
        check_input_grad(|x| lin.forward(&Act::value(x.clone())).v, &dx, &x, &w, 1e-6);
        // Weight gradient check on a few entries.
        let h = 1e-6;
        for (i, j) in [(0, 0), (2, 1), (3, 2)] {
            let mut lp = lin.clone();
            lp.w[(i, j)] += h;
            let mut lm = lin.clone();
            lm.w[(i, j)] -= h;
            let fd = ((&lp.forward(&Act::value(x.clone())).v * &w).sum()
                - (&lm.forward(&Act::value(x.clone())).v * &w).sum())
                / (2.0 * h);
            assert!((fd - g.w[(i, j)]).abs() < 1e-6);
        }
    }

    #[test]
    fn layernorm_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ln = LayerNorm::init(6);
        // Non-trivial gamma/beta.
        ln.gamma = Array1::from_shape_fn(6, |_| rng.random_range(0.5..1.5));
        ln.beta = Array1::from_shape_fn(6, |_| rng.random_range(-0.5..0.5));
        let x = rand_mat(&mut rng, 4, 6);
        let w = rand_mat(&mut rng, 4, 6);
        let (_, cache) = ln.forward(&Act::value(x.clone()));
        let mut g = ln.zeros_like();
        let dx = ln.backward(&cache, &w, &mut g);
        check_input_grad(
            |x| ln.forward(&Act::value(x.clone())).0.v,
            &dx,
            &x,
            &w,
            1e-5,
        );
    }

    #[test]
    fn layernorm_tangent_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ln = LayerNorm::init(5);
        let x = rand_mat(&mut rng, 3, 5);
        let dir = rand_mat(&mut rng, 3, 5);
        let mut act = Act::with_zero_tangents(x.clone());
        act.t.as_mut().unwrap()[0] = dir.clone();
        let (y, _) = ln.forward(&act);
        let h = 1e-6;
        let (yp, _) = ln.forward(&Act::value(&x + &(&dir * h)));
        let (ym, _) = ln.forward(&Act::value(&x - &(&dir * h)));
        let fd = (&yp.v - &ym.v) / (2.0 * h);
        let an = &y.t.unwrap()[0];
        for (a, f) in an.iter().zip(fd.iter()) {
            assert!((a - f).abs() < 1e-6, "{a} vs {f}");
        }
    }

    #[test]
    fn gelu_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_mat(&mut rng, 3, 4);
        let w = rand_mat(&mut rng, 3, 4);
        let dx = gelu_backward(&x, &w);
        check_input_grad(|x| gelu(&Act::value(x.clone())).v, &dx, &x, &w, 1e-6);
    }

    #[test]
    fn attention_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let attn = Attention::init(&mut rng, 8, 2);
        let n_tokens = 3;
        let x = rand_mat(&mut rng, 2 * n_tokens, 8); // batch of 2
        let w = rand_mat(&mut rng, 2 * n_tokens, 8);
        let (_, cache) = attn.forward(&Act::value(x.clone()), n_tokens);
        let mut g = attn.zeros_like();
        let dx = attn.backward(&cache, &w, &mut g);
        check_input_grad(
            |x| attn.forward(&Act::value(x.clone()), n_tokens).0.v,
            &dx,
            &x,
            &w,
            1e-5,
        );
    }

    #[test]
    fn attention_tangent_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let attn = Attention::init(&mut rng, 8, 2);
        let n_tokens = 4;
        let x = rand_mat(&mut rng, n_tokens, 8);
        let dir = rand_mat(&mut rng, n_tokens, 8);
        let mut act = Act::with_zero_tangents(x.clone());
        act.t.as_mut().unwrap()[1] = dir.clone();
        let (y, _) = attn.forward(&act, n_tokens);
        let h = 1e-6;
        let (yp, _) = attn.forward(&Act::value(&x + &(&dir * h)), n_tokens);
        let (ym, _) = attn.forward(&Act::value(&x - &(&dir * h)), n_tokens);
        let fd = (&yp.v - &ym.v) / (2.0 * h);
        let an = &y.t.unwrap()[1];
        for (a, f) in an.iter().zip(fd.iter()) {
            assert!((a - f).abs() < 1e-6, "{a} vs {f}");
        }
    }

    #[test]
    fn encoder_layer_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = EncoderLayer::init(&mut rng, 8, 2, 16);
        let n_tokens = 3;
        let x = rand_mat(&mut rng, 2 * n_tokens, 8);
        let w = rand_mat(&mut rng, 2 * n_tokens, 8);
        let (_, cache) = layer.forward(&Act::value(x.clone()), n_tokens);
        let mut g = layer.zeros_like();
        let dx = layer.backward(&cache, &w, &mut g);
        check_input_grad(
            |x| layer.forward(&Act::value(x.clone()), n_tokens).0.v,
            &dx,
            &x,
            &w,
            1e-5,
        );
    }
}
