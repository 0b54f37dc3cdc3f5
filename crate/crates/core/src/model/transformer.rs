//! Decoder-only transformer over a flat parameter vector.
//!
//! Pre-norm blocks (RMSNorm, causal multi-head attention, GELU MLP), learned
//! absolute positions and an untied output head. Every sequence is implicitly
//! preceded by `<bos>`, so the output at position `t` predicts `tokens[t]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::real::{gemm, MatMut, MatRef, Real};
use super::vocab::{Control, TokenId};
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Maximum number of positions, counting the implicit `<bos>`.
    pub context: usize,
}

impl ModelConfig {
    /// The size used for desk-scale experiments.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            context: 1536,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.vocab_size > 1
            && self.d_model > 0
            && self.n_layers > 0
            && self.n_heads > 0
            && self.d_model.is_multiple_of(self.n_heads)
            && self.d_ff > 0
            && self.context > 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid model dimensions {self:?}")))
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerOffsets {
    ln1: usize,
    w_qkv: usize,
    w_o: usize,
    ln2: usize,
    w_fc1: usize,
    b_fc1: usize,
    w_fc2: usize,
    b_fc2: usize,
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    tok_emb: usize,
    pos_emb: usize,
    layers: Vec<LayerOffsets>,
    ln_f: usize,
    w_out: usize,
    total: usize,
    /// `(start, len, decays)` for every tensor, in storage order.
    tensors: Vec<(usize, usize, bool)>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let d = cfg.d_model;
        let mut tensors = Vec::new();
        let mut next = 0usize;
        let mut alloc = |len: usize, decays: bool| {
            let start = next;
            tensors.push((start, len, decays));
            next += len;
            start
        };
        let tok_emb = alloc(cfg.vocab_size * d, true);
        let pos_emb = alloc(cfg.context * d, true);
        let layers = (0..cfg.n_layers)
            .map(|_| LayerOffsets {
                ln1: alloc(d, false),
                w_qkv: alloc(d * 3 * d, true),
                w_o: alloc(d * d, true),
                ln2: alloc(d, false),
                w_fc1: alloc(d * cfg.d_ff, true),
                b_fc1: alloc(cfg.d_ff, false),
                w_fc2: alloc(cfg.d_ff * d, true),
                b_fc2: alloc(d, false),
            })
            .collect();
        let ln_f = alloc(d, false);
        let w_out = alloc(d * cfg.vocab_size, true);
        Layout {
            tok_emb,
            pos_emb,
            layers,
            ln_f,
            w_out,
            total: next,
            tensors,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Per-parameter weight-decay flags (matrices and embeddings decay; gains and biases do not).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for &(start, len, decays) in &self.tensors {
            mask[start..start + len].iter_mut().for_each(|m| *m = decays);
        }
        mask
    }
}

/// The student network. Parameters are owned; gradients live in caller buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformer<F> {
    cfg: ModelConfig,
    layout: Layout,
    params: Vec<F>,
}

/// A training target: token sequence, first target index and per-target weights.
#[derive(Clone, Copy, Debug)]
pub struct TargetSpan<'a> {
    pub tokens: &'a [TokenId],
    pub start: usize,
    /// One weight per target position (`tokens.len() - start` entries); `None` means all 1.0.
    pub weights: Option<&'a [f64]>,
}

struct LayerTape<F> {
    x_in: Vec<F>,
    r1: Vec<F>,
    h1: Vec<F>,
    qkv: Vec<F>,
    probs: Vec<F>,
    att: Vec<F>,
    x_mid: Vec<F>,
    r2: Vec<F>,
    h2: Vec<F>,
    pre: Vec<F>,
    act: Vec<F>,
}

struct Tape<F> {
    len: usize,
    inputs: Vec<TokenId>,
    layers: Vec<LayerTape<F>>,
    x_final: Vec<F>,
    rf: Vec<F>,
    hf: Vec<F>,
    /// Softmax rows for target positions, `n_targets x vocab`.
    probs_out: Vec<F>,
    /// Natural-log probability of each target token, accumulated in f64.
    target_logp: Vec<f64>,
    /// Full log-softmax of the last target row.
    last_logp: Vec<f64>,
}

/// Incremental decoding state (key/value cache).
#[derive(Clone, Debug)]
pub struct DecodeCache<F> {
    keys: Vec<Vec<F>>,
    values: Vec<Vec<F>>,
    pos: usize,
}

impl<F> DecodeCache<F> {
    pub fn position(&self) -> usize {
        self.pos
    }
}

fn rmsnorm<F: Real>(x: &[F], gain: &[F], rows: usize, d: usize, out: &mut [F], rinv: &mut [F]) {
    let eps = F::c(NORM_EPS);
    let dn = F::c(d as f64);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let ms = row.iter().map(|&v| v * v).sum::<F>() / dn;
        let ri = F::one() / (ms + eps).sqrt();
        rinv[r] = ri;
        for ((o, &v), &g) in out[r * d..(r + 1) * d].iter_mut().zip(row).zip(gain) {
            *o = v * ri * g;
        }
    }
}

/// Accumulates `dx += d rms(x)*g / dx` and `dgain`.
fn rmsnorm_backward<F: Real>(
    x: &[F],
    gain: &[F],
    rinv: &[F],
    dy: &[F],
    rows: usize,
    d: usize,
    dx: &mut [F],
    dgain: &mut [F],
) {
    let dn = F::c(d as f64);
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let dyr = &dy[r * d..(r + 1) * d];
        let ri = rinv[r];
        let mut dot = F::zero();
        for i in 0..d {
            let gdy = gain[i] * dyr[i];
            dot += gdy * xr[i];
            dgain[i] += dyr[i] * xr[i] * ri;
        }
        let coef = ri * ri * ri * dot / dn;
        let dxr = &mut dx[r * d..(r + 1) * d];
        for i in 0..d {
            dxr[i] += ri * gain[i] * dyr[i] - coef * xr[i];
        }
    }
}

#[inline]
fn gelu<F: Real>(x: F) -> F {
    let c = F::c((2.0 / std::f64::consts::PI).sqrt());
    let k = F::c(0.044715);
    let half = F::c(0.5);
    half * x * (F::one() + (c * (x + k * x * x * x)).tanh())
}

#[inline]
fn gelu_grad<F: Real>(x: F) -> F {
    let c = F::c((2.0 / std::f64::consts::PI).sqrt());
    let k = F::c(0.044715);
    let half = F::c(0.5);
    let th = (c * (x + k * x * x * x)).tanh();
    half * (F::one() + th) + half * x * (F::one() - th * th) * c * (F::one() + F::c(3.0) * k * x * x)
}

fn add_bias<F: Real>(x: &mut [F], bias: &[F], rows: usize) {
    let n = bias.len();
    for r in 0..rows {
        for (v, &b) in x[r * n..(r + 1) * n].iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn log_softmax_f64<F: Real>(logits: &[F]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.f64()));
    let lse = max + logits.iter().map(|&v| (v.f64() - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&v| v.f64() - lse).collect()
}

impl<F: Real> Transformer<F> {
    /// Fresh parameters drawn from a seed. Same config + seed gives bit-identical weights.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let mut params = vec![F::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 0.02;
        let resid_std = std / (2.0 * cfg.n_layers as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        let resid = Normal::new(0.0, resid_std).expect("valid std");
        let d = cfg.d_model;
        let mut fill = |start: usize, len: usize, dist: &Normal<f64>| {
            for p in &mut params[start..start + len] {
                *p = F::c(dist.sample(&mut rng));
            }
        };
        fill(layout.tok_emb, cfg.vocab_size * d, &normal);
        fill(layout.pos_emb, cfg.context * d, &normal);
        for l in &layout.layers {
            fill(l.w_qkv, d * 3 * d, &normal);
            fill(l.w_o, d * d, &resid);
            fill(l.w_fc1, d * cfg.d_ff, &normal);
            fill(l.w_fc2, cfg.d_ff * d, &resid);
        }
        fill(layout.w_out, d * cfg.vocab_size, &normal);
        for l in &layout.layers {
            params[l.ln1..l.ln1 + d].iter_mut().for_each(|g| *g = F::one());
            params[l.ln2..l.ln2 + d].iter_mut().for_each(|g| *g = F::one());
        }
        params[layout.ln_f..layout.ln_f + d].iter_mut().for_each(|g| *g = F::one());
        Ok(Transformer { cfg, layout, params })
    }

    pub fn from_params(cfg: ModelConfig, params: Vec<F>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Transformer { cfg, layout, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    /// `<bos>` id, or the last id for reduced vocabularies that do not contain it.
    pub fn bos(&self) -> TokenId {
        Control::Begin.id().min(self.cfg.vocab_size as u32 - 1)
    }

    fn p(&self, off: usize, len: usize) -> &[F] {
        &self.params[off..off + len]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.cfg.context {
            return Err(Error::ContextOverflow {
                len,
                context: self.cfg.context,
                sample: None,
            });
        }
        Ok(())
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= self.cfg.vocab_size) {
            return Err(Error::Contract(format!(
                "token id {bad} outside vocabulary of {}",
                self.cfg.vocab_size
            )));
        }
        Ok(())
    }

    fn forward(&self, span: &TargetSpan<'_>) -> Result<Tape<F>> {
        let tokens = span.tokens;
        let k = tokens.len();
        if span.start >= k {
            return Err(Error::Contract(format!(
                "target start {} out of range for {} tokens",
                span.start, k
            )));
        }
        self.check_len(k)?;
        self.check_tokens(tokens)?;
        let cfg = &self.cfg;
        let (d, h, dh, ff, v) = (cfg.d_model, cfg.n_heads, cfg.head_dim(), cfg.d_ff, cfg.vocab_size);
        let t_len = k;
        let mut inputs = Vec::with_capacity(t_len);
        inputs.push(self.bos());
        inputs.extend_from_slice(&tokens[..k - 1]);

        let mut x = vec![F::zero(); t_len * d];
        for (t, &tok) in inputs.iter().enumerate() {
            let te = self.p(self.layout.tok_emb + tok as usize * d, d);
            let pe = self.p(self.layout.pos_emb + t * d, d);
            for ((o, &a), &b) in x[t * d..(t + 1) * d].iter_mut().zip(te).zip(pe) {
                *o = a + b;
            }
        }

        let scale = F::c(1.0 / (dh as f64).sqrt());
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lo in &self.layout.layers {
            let x_in = x.clone();
            let mut r1 = vec![F::zero(); t_len];
            let mut h1 = vec![F::zero(); t_len * d];
            rmsnorm(&x_in, self.p(lo.ln1, d), t_len, d, &mut h1, &mut r1);
            let mut qkv = vec![F::zero(); t_len * 3 * d];
            gemm(
                F::one(),
                MatRef::dense(&h1, t_len, d),
                MatRef::dense(self.p(lo.w_qkv, d * 3 * d), d, 3 * d),
                F::zero(),
                MatMut::dense(&mut qkv, t_len, 3 * d),
            );
            let mut probs = vec![F::zero(); h * t_len * t_len];
            let mut att = vec![F::zero(); t_len * d];
            for head in 0..h {
                let pr = &mut probs[head * t_len * t_len..(head + 1) * t_len * t_len];
                let q = MatRef::new(&qkv, head * dh, t_len, dh, 3 * d);
                let kk = MatRef::new(&qkv, d + head * dh, t_len, dh, 3 * d);
                gemm(scale, q, kk.t(), F::zero(), MatMut::dense(pr, t_len, t_len));
                for i in 0..t_len {
                    let row = &mut pr[i * t_len..(i + 1) * t_len];
                    let max = row[..=i].iter().copied().fold(F::neg_infinity(), F::max);
                    let mut sum = F::zero();
                    for val in &mut row[..=i] {
                        *val = (*val - max).exp();
                        sum += *val;
                    }
                    for val in &mut row[..=i] {
                        *val = *val / sum;
                    }
                    row[i + 1..].iter_mut().for_each(|val| *val = F::zero());
                }
                let vv = MatRef::new(&qkv, 2 * d + head * dh, t_len, dh, 3 * d);
                gemm(
                    F::one(),
                    MatRef::dense(pr, t_len, t_len),
                    vv,
                    F::zero(),
                    MatMut::new(&mut att, head * dh, t_len, dh, d),
                );
            }
            gemm(
                F::one(),
                MatRef::dense(&att, t_len, d),
                MatRef::dense(self.p(lo.w_o, d * d), d, d),
                F::one(),
                MatMut::dense(&mut x, t_len, d),
            );
            let x_mid = x.clone();
            let mut r2 = vec![F::zero(); t_len];
            let mut h2 = vec![F::zero(); t_len * d];
            rmsnorm(&x_mid, self.p(lo.ln2, d), t_len, d, &mut h2, &mut r2);
            let mut pre = vec![F::zero(); t_len * ff];
            gemm(
                F::one(),
                MatRef::dense(&h2, t_len, d),
                MatRef::dense(self.p(lo.w_fc1, d * ff), d, ff),
                F::zero(),
                MatMut::dense(&mut pre, t_len, ff),
            );
            add_bias(&mut pre, self.p(lo.b_fc1, ff), t_len);
            let act: Vec<F> = pre.iter().map(|&u| gelu(u)).collect();
            gemm(
                F::one(),
                MatRef::dense(&act, t_len, ff),
                MatRef::dense(self.p(lo.w_fc2, ff * d), ff, d),
                F::one(),
                MatMut::dense(&mut x, t_len, d),
            );
            add_bias(&mut x, self.p(lo.b_fc2, d), t_len);
            layers.push(LayerTape {
                x_in,
                r1,
                h1,
                qkv,
                probs,
                att,
                x_mid,
                r2,
                h2,
                pre,
                act,
            });
        }

        let mut rf = vec![F::zero(); t_len];
        let mut hf = vec![F::zero(); t_len * d];
        rmsnorm(&x, self.p(self.layout.ln_f, d), t_len, d, &mut hf, &mut rf);

        let s = span.start;
        let n_tgt = k - s;
        let mut logits = vec![F::zero(); n_tgt * v];
        gemm(
            F::one(),
            MatRef::new(&hf, s * d, n_tgt, d, d),
            MatRef::dense(self.p(self.layout.w_out, d * v), d, v),
            F::zero(),
            MatMut::dense(&mut logits, n_tgt, v),
        );
        let mut target_logp = Vec::with_capacity(n_tgt);
        let mut last_logp = Vec::new();
        for (j, row) in logits.chunks_mut(v).enumerate() {
            let lp = log_softmax_f64(row);
            target_logp.push(lp[tokens[s + j] as usize]);
            for (o, l) in row.iter_mut().zip(&lp) {
                *o = F::c(l.exp());
            }
            if j + 1 == n_tgt {
                last_logp = lp;
            }
        }
        Ok(Tape {
            len: t_len,
            inputs,
            layers,
            x_final: x,
            rf,
            hf,
            probs_out: logits,
            target_logp,
            last_logp,
        })
    }

    /// Log-probability of every token at positions `start..tokens.len()` under teacher forcing.
    pub fn target_log_probs(&self, tokens: &[TokenId], start: usize) -> Result<Vec<f64>> {
        Ok(self.forward(&TargetSpan {
            tokens,
            start,
            weights: None,
        })?
        .target_logp)
    }

    /// Weighted span loss `sum_t w_t * -log p_t / (K - s)` and its gradient,
    /// accumulated into `grad` after multiplying by `scale`.
    pub fn loss_and_grad(&self, span: &TargetSpan<'_>, scale: F, grad: &mut [F]) -> Result<f64> {
        assert_eq!(grad.len(), self.layout.total, "gradient buffer size");
        let tape = self.forward(span)?;
        let n_tgt = tape.target_logp.len();
        if let Some(w) = span.weights {
            if w.len() != n_tgt {
                return Err(Error::Contract(format!(
                    "{} weights for {} target tokens",
                    w.len(),
                    n_tgt
                )));
            }
        }
        let weight = |j: usize| span.weights.map_or(1.0, |w| w[j]);
        let inv_n = 1.0 / n_tgt as f64;
        let loss = tape
            .target_logp
            .iter()
            .enumerate()
            .map(|(j, lp)| weight(j) * -lp)
            .sum::<f64>()
            * inv_n;
        self.backward(span, &tape, scale, inv_n, &weight, grad);
        Ok(loss)
    }

    fn backward(
        &self,
        span: &TargetSpan<'_>,
        tape: &Tape<F>,
        scale: F,
        inv_n: f64,
        weight: &dyn Fn(usize) -> f64,
        grad: &mut [F],
    ) {
        let cfg = &self.cfg;
        let (d, h, dh, ff, v) = (cfg.d_model, cfg.n_heads, cfg.head_dim(), cfg.d_ff, cfg.vocab_size);
        let t_len = tape.len;
        let s = span.start;
        let n_tgt = t_len - s;
        let lay = &self.layout;

        let mut dlogits = tape.probs_out.clone();
        for j in 0..n_tgt {
            let row = &mut dlogits[j * v..(j + 1) * v];
            row[span.tokens[s + j] as usize] -= F::one();
            let c = scale * F::c(weight(j) * inv_n);
            row.iter_mut().for_each(|g| *g *= c);
        }
        gemm(
            F::one(),
            MatRef::new(&tape.hf, s * d, n_tgt, d, d).t(),
            MatRef::dense(&dlogits, n_tgt, v),
            F::one(),
            MatMut::dense(&mut grad[lay.w_out..lay.w_out + d * v], d, v),
        );
        let mut dhf = vec![F::zero(); t_len * d];
        gemm(
            F::one(),
            MatRef::dense(&dlogits, n_tgt, v),
            MatRef::dense(self.p(lay.w_out, d * v), d, v).t(),
            F::zero(),
            MatMut::new(&mut dhf, s * d, n_tgt, d, d),
        );
        let mut dx = vec![F::zero(); t_len * d];
        rmsnorm_backward(
            &tape.x_final,
            self.p(lay.ln_f, d),
            &tape.rf,
            &dhf,
            t_len,
            d,
            &mut dx,
            &mut grad[lay.ln_f..lay.ln_f + d],
        );

        let scale_att = F::c(1.0 / (dh as f64).sqrt());
        for (lo, lt) in lay.layers.iter().zip(&tape.layers).rev() {
            // MLP: x_out = x_mid + gelu(h2 W1 + b1) W2 + b2
            for r in 0..t_len {
                for (g, &dv) in grad[lo.b_fc2..lo.b_fc2 + d].iter_mut().zip(&dx[r * d..(r + 1) * d]) {
                    *g += dv;
                }
            }
            gemm(
                F::one(),
                MatRef::dense(&lt.act, t_len, ff).t(),
                MatRef::dense(&dx, t_len, d),
                F::one(),
                MatMut::dense(&mut grad[lo.w_fc2..lo.w_fc2 + ff * d], ff, d),
            );
            let mut dpre = vec![F::zero(); t_len * ff];
            gemm(
                F::one(),
                MatRef::dense(&dx, t_len, d),
                MatRef::dense(self.p(lo.w_fc2, ff * d), ff, d).t(),
                F::zero(),
                MatMut::dense(&mut dpre, t_len, ff),
            );
            for (g, &u) in dpre.iter_mut().zip(&lt.pre) {
                *g *= gelu_grad(u);
            }
            for r in 0..t_len {
                for (g, &dv) in grad[lo.b_fc1..lo.b_fc1 + ff].iter_mut().zip(&dpre[r * ff..(r + 1) * ff]) {
                    *g += dv;
                }
            }
            gemm(
                F::one(),
                MatRef::dense(&lt.h2, t_len, d).t(),
                MatRef::dense(&dpre, t_len, ff),
                F::one(),
                MatMut::dense(&mut grad[lo.w_fc1..lo.w_fc1 + d * ff], d, ff),
            );
            let mut dh2 = vec![F::zero(); t_len * d];
            gemm(
                F::one(),
                MatRef::dense(&dpre, t_len, ff),
                MatRef::dense(self.p(lo.w_fc1, d * ff), d, ff).t(),
                F::zero(),
                MatMut::dense(&mut dh2, t_len, d),
            );
            rmsnorm_backward(
                &lt.x_mid,
                self.p(lo.ln2, d),
                &lt.r2,
                &dh2,
                t_len,
                d,
                &mut dx,
                &mut grad[lo.ln2..lo.ln2 + d],
            );

            // Attention: x_mid = x_in + attn(h1) Wo
            gemm(
                F::one(),
                MatRef::dense(&lt.att, t_len, d).t(),
                MatRef::dense(&dx, t_len, d),
                F::one(),
                MatMut::dense(&mut grad[lo.w_o..lo.w_o + d * d], d, d),
            );
            let mut datt = vec![F::zero(); t_len * d];
            gemm(
                F::one(),
                MatRef::dense(&dx, t_len, d),
                MatRef::dense(self.p(lo.w_o, d * d), d, d).t(),
                F::zero(),
                MatMut::dense(&mut datt, t_len, d),
            );
            let mut dqkv = vec![F::zero(); t_len * 3 * d];
            let mut dp = vec![F::zero(); t_len * t_len];
            for head in 0..h {
                let pr = &lt.probs[head * t_len * t_len..(head + 1) * t_len * t_len];
                let datt_h = MatRef::new(&datt, head * dh, t_len, dh, d);
                let q = MatRef::new(&lt.qkv, head * dh, t_len, dh, 3 * d);
                let kk = MatRef::new(&lt.qkv, d + head * dh, t_len, dh, 3 * d);
                let vv = MatRef::new(&lt.qkv, 2 * d + head * dh, t_len, dh, 3 * d);
                gemm(F::one(), datt_h, vv.t(), F::zero(), MatMut::dense(&mut dp, t_len, t_len));
                gemm(
                    F::one(),
                    MatRef::dense(pr, t_len, t_len).t(),
                    datt_h,
                    F::zero(),
                    MatMut::new(&mut dqkv, 2 * d + head * dh, t_len, dh, 3 * d),
                );
                // dS = P * (dP - rowsum(P * dP)), scaled for the 1/sqrt(dh) factor.
                for i in 0..t_len {
                    let prow = &pr[i * t_len..(i + 1) * t_len];
                    let drow = &mut dp[i * t_len..(i + 1) * t_len];
                    let dot = prow[..=i].iter().zip(&drow[..=i]).map(|(&a, &b)| a * b).sum::<F>();
                    for j in 0..=i {
                        drow[j] = prow[j] * (drow[j] - dot) * scale_att;
                    }
                    drow[i + 1..].iter_mut().for_each(|g| *g = F::zero());
                }
                gemm(
                    F::one(),
                    MatRef::dense(&dp, t_len, t_len),
                    kk,
                    F::zero(),
                    MatMut::new(&mut dqkv, head * dh, t_len, dh, 3 * d),
                );
                gemm(
                    F::one(),
                    MatRef::dense(&dp, t_len, t_len).t(),
                    q,
                    F::zero(),
                    MatMut::new(&mut dqkv, d + head * dh, t_len, dh, 3 * d),
                );
            }
            gemm(
                F::one(),
                MatRef::dense(&lt.h1, t_len, d).t(),
                MatRef::dense(&dqkv, t_len, 3 * d),
                F::one(),
                MatMut::dense(&mut grad[lo.w_qkv..lo.w_qkv + d * 3 * d], d, 3 * d),
            );
            let mut dh1 = vec![F::zero(); t_len * d];
            gemm(
                F::one(),
                MatRef::dense(&dqkv, t_len, 3 * d),
                MatRef::dense(self.p(lo.w_qkv, d * 3 * d), d, 3 * d).t(),
                F::zero(),
                MatMut::dense(&mut dh1, t_len, d),
            );
            rmsnorm_backward(
                &lt.x_in,
                self.p(lo.ln1, d),
                &lt.r1,
                &dh1,
                t_len,
                d,
                &mut dx,
                &mut grad[lo.ln1..lo.ln1 + d],
            );
        }

        for (t, &tok) in tape.inputs.iter().enumerate() {
            let row = &dx[t * d..(t + 1) * d];
            let te = lay.tok_emb + tok as usize * d;
            for (g, &dv) in grad[te..te + d].iter_mut().zip(row) {
                *g += dv;
            }
            let pe = lay.pos_emb + t * d;
            for (g, &dv) in grad[pe..pe + d].iter_mut().zip(row) {
                *g += dv;
            }
        }
    }

    pub fn new_cache(&self) -> DecodeCache<F> {
        DecodeCache {
            keys: vec![Vec::new(); self.cfg.n_layers],
            values: vec![Vec::new(); self.cfg.n_layers],
            pos: 0,
        }
    }

    /// Feeds one token at the cache's next position and returns next-token log-probabilities.
    pub fn step(&self, cache: &mut DecodeCache<F>, token: TokenId) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        let (d, h, dh, ff, v) = (cfg.d_model, cfg.n_heads, cfg.head_dim(), cfg.d_ff, cfg.vocab_size);
        let pos = cache.pos;
        if pos >= cfg.context {
            return Err(Error::ContextOverflow {
                len: pos + 1,
                context: cfg.context,
                sample: None,
            });
        }
        if token as usize >= v {
            return Err(Error::Contract(format!("token id {token} outside vocabulary of {v}")));
        }
        let lay = &self.layout;
        let mut x: Vec<F> = self
            .p(lay.tok_emb + token as usize * d, d)
            .iter()
            .zip(self.p(lay.pos_emb + pos * d, d))
            .map(|(&a, &b)| a + b)
            .collect();
        let scale = F::c(1.0 / (dh as f64).sqrt());
        let mut r = [F::zero()];
        let mut hbuf = vec![F::zero(); d];
        for (li, lo) in lay.layers.iter().enumerate() {
            rmsnorm(&x, self.p(lo.ln1, d), 1, d, &mut hbuf, &mut r);
            let mut qkv = vec![F::zero(); 3 * d];
            gemm(
                F::one(),
                MatRef::dense(&hbuf, 1, d),
                MatRef::dense(self.p(lo.w_qkv, d * 3 * d), d, 3 * d),
                F::zero(),
                MatMut::dense(&mut qkv, 1, 3 * d),
            );
            cache.keys[li].extend_from_slice(&qkv[d..2 * d]);
            cache.values[li].extend_from_slice(&qkv[2 * d..]);
            let keys = &cache.keys[li];
            let values = &cache.values[li];
            let n = pos + 1;
            let mut att = vec![F::zero(); d];
            let mut scores = vec![F::zero(); n];
            for head in 0..h {
                let q = &qkv[head * dh..(head + 1) * dh];
                for (j, sc) in scores.iter_mut().enumerate() {
                    let kr = &keys[j * d + head * dh..j * d + (head + 1) * dh];
                    *sc = q.iter().zip(kr).map(|(&a, &b)| a * b).sum::<F>() * scale;
                }
                let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
                let mut sum = F::zero();
                for sc in &mut scores {
                    *sc = (*sc - max).exp();
                    sum += *sc;
                }
                let out = &mut att[head * dh..(head + 1) * dh];
                for (j, &w) in scores.iter().enumerate() {
                    let w = w / sum;
                    let vr = &values[j * d + head * dh..j * d + (head + 1) * dh];
                    for (o, &vv) in out.iter_mut().zip(vr) {
                        *o += w * vv;
                    }
                }
            }
            gemm(
                F::one(),
                MatRef::dense(&att, 1, d),
                MatRef::dense(self.p(lo.w_o, d * d), d, d),
                F::one(),
                MatMut::dense(&mut x, 1, d),
            );
            rmsnorm(&x, self.p(lo.ln2, d), 1, d, &mut hbuf, &mut r);
            let mut pre = self.p(lo.b_fc1, ff).to_vec();
            gemm(
                F::one(),
                MatRef::dense(&hbuf, 1, d),
                MatRef::dense(self.p(lo.w_fc1, d * ff), d, ff),
                F::one(),
                MatMut::dense(&mut pre, 1, ff),
            );
            pre.iter_mut().for_each(|u| *u = gelu(*u));
            gemm(
                F::one(),
                MatRef::dense(&pre, 1, ff),
                MatRef::dense(self.p(lo.w_fc2, ff * d), ff, d),
                F::one(),
                MatMut::dense(&mut x, 1, d),
            );
            for (o, &b) in x.iter_mut().zip(self.p(lo.b_fc2, d)) {
                *o += b;
            }
        }
        rmsnorm(&x, self.p(lay.ln_f, d), 1, d, &mut hbuf, &mut r);
        let mut logits = vec![F::zero(); v];
        gemm(
            F::one(),
            MatRef::dense(&hbuf, 1, d),
            MatRef::dense(self.p(lay.w_out, d * v), d, v),
            F::zero(),
            MatMut::dense(&mut logits, 1, v),
        );
        cache.pos += 1;
        Ok(log_softmax_f64(&logits))
    }

    /// Processes a whole prompt in one pass: returns the filled cache and the
    /// log-probabilities of the token following the prompt.
    pub fn prefill(&self, prompt: &[TokenId]) -> Result<(DecodeCache<F>, Vec<f64>)> {
        let mut tokens = prompt.to_vec();
        tokens.push(0);
        let tape = self.forward(&TargetSpan {
            tokens: &tokens,
            start: prompt.len(),
            weights: None,
        })?;
        let d = self.cfg.d_model;
        let mut cache = self.new_cache();
        for (li, layer) in tape.layers.iter().enumerate() {
            for row in layer.qkv.chunks(3 * d) {
                cache.keys[li].extend_from_slice(&row[d..2 * d]);
                cache.values[li].extend_from_slice(&row[2 * d..]);
            }
        }
        cache.pos = tape.len;
        Ok((cache, tape.last_logp))
    }

    /// Converts parameters to another precision (used by f64 gradient checks).
    pub fn cast<G: Real>(&self) -> Transformer<G> {
        Transformer {
            cfg: self.cfg,
            layout: self.layout.clone(),
            params: self.params.iter().map(|&p| G::c(p.f64())).collect(),
        }
    }
}
