use super::{Denoiser, LN_EPS};
use crate::conditioning::{ConditionBundle, Features};
use crate::numerics::{Gradients, Scalar, Tape, Tensor, Var};
use crate::{Error, Result};

/// Sinusoidal encoding of a timestep: `sin(t·ω_k)` in the first half,
/// `cos(t·ω_k)` in the second, with `ω_k = 10000^(−2k/C)`.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let freq = 1.0 / 10000f64.powf(2.0 * k as f64 / dim as f64);
        let phase = t as f64 * freq;
        out[k] = phase.sin();
        out[half + k] = phase.cos();
    }
    out
}

/// One forward pass recorded on a tape, with every parameter bound as a leaf.
pub struct Graph<'m, T: Scalar> {
    pub tape: Tape<T>,
    model: &'m Denoiser<T>,
    vars: Vec<Var>,
    /// Self-attention probabilities, indexed `[block][head]`.
    pub self_attn_probs: Vec<Vec<Var>>,
}

impl<'m, T: Scalar> Graph<'m, T> {
    pub fn new(model: &'m Denoiser<T>, requires_grad: bool, checked: bool) -> Self {
        let mut tape = if checked { Tape::checked() } else { Tape::new() };
        let vars = model
            .params
            .iter()
            .map(|(_, t)| tape.leaf(t.clone(), requires_grad))
            .collect();
        Self {
            tape,
            model,
            vars,
            self_attn_probs: Vec::new(),
        }
    }

    fn p(&self, name: &str) -> Var {
        let id = self
            .model
            .params
            .id(name)
            .unwrap_or_else(|| panic!("denoiser parameter {name} is registered at construction"));
        self.vars[id]
    }

    fn linear(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let w = self.p(&format!("{prefix}.weight"));
        let b = self.p(&format!("{prefix}.bias"));
        let y = self.tape.matmul(x, w)?;
        self.tape.add(y, b)
    }

    fn mlp(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let h = self.linear(x, &format!("{prefix}.0"))?;
        let h = self.tape.gelu(h)?;
        self.linear(h, &format!("{prefix}.2"))
    }

    fn norm(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let g = self.p(&format!("{prefix}.gain"));
        let b = self.p(&format!("{prefix}.bias"));
        self.tape.layer_norm(x, g, b, LN_EPS)
    }

    pub fn input(&mut self, grid: &[T]) -> Result<Var> {
        let c = &self.model.config;
        if grid.len() != c.seq_len() * c.token_width {
            return Err(Error::shape(
                "denoiser input",
                format!(
                    "{} values, expected {}×{}",
                    grid.len(),
                    c.seq_len(),
                    c.token_width
                ),
            ));
        }
        let t = Tensor::new(vec![c.seq_len(), c.token_width], grid.to_vec())?;
        Ok(self.tape.constant(t))
    }

    /// Row `i·N + j` gets `φ(row) + Emb_P[i] + Emb_E[j] + 𝒯(t)`.
    pub fn embed(&mut self, x: Var, t: usize) -> Result<Var> {
        let c = self.model.config;
        let phi = self.mlp(x, "phi")?;
        let rows = c.seq_len();
        let panel_idx: Vec<usize> = (0..rows).map(|r| r / c.max_edges).collect();
        let edge_idx: Vec<usize> = (0..rows).map(|r| r % c.max_edges).collect();
        let ep = self.p("emb_panel");
        let ee = self.p("emb_edge");
        let ep = self.tape.embedding(ep, &panel_idx)?;
        let ee = self.tape.embedding(ee, &edge_idx)?;
        let te = Tensor::from_f64(&[1, c.embed_dim], &time_embedding(t, c.embed_dim))?;
        let te = self.tape.constant(te);
        let te = self.mlp(te, "time")?;
        let h = self.tape.add(phi, ep)?;
        let h = self.tape.add(h, ee)?;
        self.tape.add(h, te)
    }

    /// Multi-head scaled dot-product attention; returns the concatenated
    /// head outputs and the per-head probability matrices.
    fn attend(&mut self, q: Var, k: Var, v: Var) -> Result<(Var, Vec<Var>)> {
        let heads = self.model.config.n_heads;
        let dh = self.model.config.embed_dim / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (qh, kh, vh) = if heads == 1 {
                (q, k, v)
            } else {
                (
                    self.tape.slice_cols(q, h * dh, (h + 1) * dh)?,
                    self.tape.slice_cols(k, h * dh, (h + 1) * dh)?,
                    self.tape.slice_cols(v, h * dh, (h + 1) * dh)?,
                )
            };
            let s = self.tape.matmul_nt(qh, kh)?;
            let s = self.tape.scale(s, scale)?;
            let p = self.tape.softmax_rows(s)?;
            outs.push(self.tape.matmul(p, vh)?);
            probs.push(p);
        }
        let out = if heads == 1 { outs[0] } else { self.tape.concat_cols(&outs)? };
        Ok((out, probs))
    }

    pub fn self_attention(&mut self, block: usize, z: Var) -> Result<Var> {
        let pre = format!("blocks.{block}.self_attn");
        let q = self.linear(z, &format!("{pre}.q"))?;
        let k = self.linear(z, &format!("{pre}.k"))?;
        let v = self.linear(z, &format!("{pre}.v"))?;
        let (o, probs) = self.attend(q, k, v)?;
        self.self_attn_probs.push(probs);
        self.linear(o, &format!("{pre}.o"))
    }

    fn condition(&mut self, feats: Option<&Features>, null: &str) -> Result<Var> {
        let dim = self.model.config.cond_dim;
        match feats {
            Some(f) => {
                if f.dim != dim || f.pooled.len() != dim {
                    return Err(Error::shape(
                        "cross-attention condition",
                        format!("feature width {} vs cond_dim {dim}", f.dim),
                    ));
                }
                let rows = f.len() + 1;
                let t = Tensor::from_f64(&[rows, dim], &f.attention_rows())?;
                Ok(self.tape.constant(t))
            }
            None => Ok(self.p(null)),
        }
    }

    /// Shared query, separate text and image keys/values, summed per-modality
    /// attention outputs, then an output projection. `z` is the normed stream.
    pub fn cross_attention(&mut self, block: usize, z: Var, cond: &ConditionBundle) -> Result<Var> {
        let pre = format!("blocks.{block}.cross_attn");
        let text = self.condition(cond.text.as_ref(), "null_text")?;
        let image = self.condition(cond.image.as_ref(), "null_image")?;
        let q = self.linear(z, &format!("{pre}.q"))?;
        let kt = self.linear(text, &format!("{pre}.text_k"))?;
        let vt = self.linear(text, &format!("{pre}.text_v"))?;
        let ki = self.linear(image, &format!("{pre}.image_k"))?;
        let vi = self.linear(image, &format!("{pre}.image_v"))?;
        let (ot, _) = self.attend(q, kt, vt)?;
        let (oi, _) = self.attend(q, ki, vi)?;
        let o = self.tape.add(ot, oi)?;
        self.linear(o, &format!("{pre}.o"))
    }

    fn block(&mut self, b: usize, x: Var, cond: &ConditionBundle) -> Result<Var> {
        let h = self.norm(x, &format!("blocks.{b}.norm1"))?;
        let h = self.self_attention(b, h)?;
        let x = self.tape.add(x, h)?;
        let h = self.norm(x, &format!("blocks.{b}.norm2"))?;
        let h = self.cross_attention(b, h, cond)?;
        let x = self.tape.add(x, h)?;
        let h = self.norm(x, &format!("blocks.{b}.norm3"))?;
        let h = self.mlp(h, &format!("blocks.{b}.ffn"))?;
        self.tape.add(x, h)
    }

    /// Predicted noise, `(M·N) × D`.
    pub fn forward(&mut self, grid: &[T], t: usize, cond: &ConditionBundle) -> Result<Var> {
        let x = self.input(grid)?;
        let mut h = self.embed(x, t)?;
        for b in 0..self.model.config.n_blocks {
            h = self.block(b, h, cond)?;
        }
        let h = self.norm(h, "head.norm")?;
        self.linear(h, "head.proj")
    }

    /// Gradients in parameter registration order.
    pub fn param_grads(&self, grads: &mut Gradients<T>) -> Vec<Vec<T>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(id, &v)| grads.take_or_zeros(v, self.model.params.get(id).len()))
            .collect()
    }
}

impl<T: Scalar> Denoiser<T> {
    pub fn forward(&self, grid: &[T], t: usize, cond: &ConditionBundle) -> Result<Vec<T>> {
        let mut g = Graph::new(self, false, false);
        let out = g.forward(grid, t, cond)?;
        Ok(g.tape.value(out).data().to_vec())
    }

    /// Like [`Denoiser::forward`] but fails on the first non-finite activation.
    pub fn forward_checked(&self, grid: &[T], t: usize, cond: &ConditionBundle) -> Result<Vec<T>> {
        let mut g = Graph::new(self, false, true);
        let out = g.forward(grid, t, cond)?;
        Ok(g.tape.value(out).data().to_vec())
    }

    /// Mean squared error between `eps` and the predicted noise at `x_t`.
    pub fn loss(&self, x_t: &[T], t: usize, cond: &ConditionBundle, eps: &[T]) -> Result<T> {
        let mut g = Graph::new(self, false, false);
        let out = g.forward(x_t, t, cond)?;
        let l = g.tape.mse(out, eps)?;
        Ok(g.tape.value(l).data()[0])
    }

    /// Loss and its gradient for every parameter, in registration order.
    pub fn loss_and_grads(
        &self,
        x_t: &[T],
        t: usize,
        cond: &ConditionBundle,
        eps: &[T],
    ) -> Result<(T, Vec<Vec<T>>)> {
        let mut g = Graph::new(self, true, false);
        let out = g.forward(x_t, t, cond)?;
        let l = g.tape.mse(out, eps)?;
        let loss = g.tape.value(l).data()[0];
        let mut grads = g.tape.backward(l)?;
        Ok((loss, g.param_grads(&mut grads)))
    }
}
