//! Pre-LayerNorm transformer encoder with a two-logit span head, with the
//! backward pass written out by hand.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::model::ModelConfig;

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub seg_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
    /// `dim x 2`: column 0 scores starts, column 1 scores ends.
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

fn normal2<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let dist = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

impl LayerParams {
    fn init<R: Rng>(d: usize, f: usize, rng: &mut R) -> Self {
        LayerParams {
            ln1_g: Array1::ones(d),
            ln1_b: Array1::zeros(d),
            wq: normal2(d, d, rng),
            bq: Array1::zeros(d),
            wk: normal2(d, d, rng),
            bk: Array1::zeros(d),
            wv: normal2(d, d, rng),
            bv: Array1::zeros(d),
            wo: normal2(d, d, rng),
            bo: Array1::zeros(d),
            ln2_g: Array1::ones(d),
            ln2_b: Array1::zeros(d),
            w1: normal2(d, f, rng),
            b1: Array1::zeros(f),
            w2: normal2(f, d, rng),
            b2: Array1::zeros(d),
        }
    }

    fn slices(&self) -> [&[f64]; 16] {
        [
            self.ln1_g.as_slice().unwrap(),
            self.ln1_b.as_slice().unwrap(),
            self.wq.as_slice().unwrap(),
            self.bq.as_slice().unwrap(),
            self.wk.as_slice().unwrap(),
            self.bk.as_slice().unwrap(),
            self.wv.as_slice().unwrap(),
            self.bv.as_slice().unwrap(),
            self.wo.as_slice().unwrap(),
            self.bo.as_slice().unwrap(),
            self.ln2_g.as_slice().unwrap(),
            self.ln2_b.as_slice().unwrap(),
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 16] {
        [
            self.ln1_g.as_slice_mut().unwrap(),
            self.ln1_b.as_slice_mut().unwrap(),
            self.wq.as_slice_mut().unwrap(),
            self.bq.as_slice_mut().unwrap(),
            self.wk.as_slice_mut().unwrap(),
            self.bk.as_slice_mut().unwrap(),
            self.wv.as_slice_mut().unwrap(),
            self.bv.as_slice_mut().unwrap(),
            self.wo.as_slice_mut().unwrap(),
            self.bo.as_slice_mut().unwrap(),
            self.ln2_g.as_slice_mut().unwrap(),
            self.ln2_b.as_slice_mut().unwrap(),
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }
}

const LAYER_NAMES: [&str; 16] = [
    "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_g", "ln2_b", "w1", "b1", "w2",
    "b2",
];

impl Params {
    pub fn init<R: Rng>(config: &ModelConfig, vocab_size: usize, rng: &mut R) -> Self {
        let d = config.dim;
        let tok_emb = normal2(vocab_size, d, rng);
        let pos_emb = normal2(config.max_seq_len, d, rng);
        let seg_emb = normal2(2, d, rng);
        let layers = (0..config.layers).map(|_| LayerParams::init(d, config.ff_dim, rng)).collect();
        Params {
            tok_emb,
            pos_emb,
            seg_emb,
            layers,
            lnf_g: Array1::ones(d),
            lnf_b: Array1::zeros(d),
            w_out: normal2(d, 2, rng),
            b_out: Array1::zeros(2),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.slices_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named flat views in a fixed order (used by checkpoints and optimizers).
    pub fn named_slices(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("tok_emb".into(), self.tok_emb.as_slice().unwrap()),
            ("pos_emb".into(), self.pos_emb.as_slice().unwrap()),
            ("seg_emb".into(), self.seg_emb.as_slice().unwrap()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, sl) in LAYER_NAMES.iter().zip(l.slices()) {
                out.push((format!("layers.{i}.{name}"), sl));
            }
        }
        out.push(("lnf_g".into(), self.lnf_g.as_slice().unwrap()));
        out.push(("lnf_b".into(), self.lnf_b.as_slice().unwrap()));
        out.push(("w_out".into(), self.w_out.as_slice().unwrap()));
        out.push(("b_out".into(), self.b_out.as_slice().unwrap()));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.tok_emb.as_slice_mut().unwrap(),
            self.pos_emb.as_slice_mut().unwrap(),
            self.seg_emb.as_slice_mut().unwrap(),
        ];
        for l in self.layers.iter_mut() {
            out.extend(l.slices_mut());
        }
        out.push(self.lnf_g.as_slice_mut().unwrap());
        out.push(self.lnf_b.as_slice_mut().unwrap());
        out.push(self.w_out.as_slice_mut().unwrap());
        out.push(self.b_out.as_slice_mut().unwrap());
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_slices().iter().map(|(_, s)| s.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Params) {
        let src = other.named_slices();
        for (dst, (_, src)) in self.slices_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.slices_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.named_slices().iter().flat_map(|(_, s)| s.iter()).map(|v| v * v).sum()
    }
}

/// Start and end logits for every position.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanLogits {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl SpanLogits {
    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *is = 1.0 / (var + LN_EPS).sqrt();
        let s = *is;
        row.mapv_inplace(|v| v * s);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

/// Returns dx and accumulates the gain / bias gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let dxhat = dy * g;
    let mut dx = Array2::zeros(dy.raw_dim());
    for (((mut out, dxh), xh), is) in dx
        .rows_mut()
        .into_iter()
        .zip(dxhat.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let sum = dxh.sum();
        let dot: f64 = dxh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
        for ((o, a), x) in out.iter_mut().zip(dxh.iter()).zip(xh.iter()) {
            *o = is / d * (d * a - sum - x * dot);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

/// Row-wise softmax in place.
pub fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// `c += a . b`
fn matmul_acc(a: ArrayView2<f64>, b: ArrayView2<f64>, c: &mut Array2<f64>) {
    general_mat_mul(1.0, &a, &b, 1.0, c);
}

fn linear(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

struct LayerCache {
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2: LnCache,
    h2: Array2<f64>,
    u: Array2<f64>,
    g: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardCache {
    ids: Vec<u32>,
    segments: Vec<u8>,
    emb_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    hf: Array2<f64>,
}

impl ForwardCache {
    /// Attention probabilities of `layer`, one `T x T` matrix per head.
    pub fn attention(&self, layer: usize) -> &[Array2<f64>] {
        &self.layers[layer].probs
    }
}

fn dropout_mask<R: Rng>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Forward pass. Dropout is applied only when `dropout` carries an RNG and a
/// positive rate.
pub fn forward<R: Rng>(
    params: &Params,
    config: &ModelConfig,
    ids: &[u32],
    segments: &[u8],
    mut dropout: Option<(&mut R, f64)>,
) -> (SpanLogits, ForwardCache) {
    let t_len = ids.len();
    let d = config.dim;
    let heads = config.heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut mask = |rows: usize, cols: usize| -> Option<Array2<f64>> {
        match dropout.as_mut() {
            Some((rng, p)) if *p > 0.0 => Some(dropout_mask(rows, cols, *p, *rng)),
            _ => None,
        }
    };

    let mut x = Array2::zeros((t_len, d));
    for (t, mut row) in x.rows_mut().into_iter().enumerate() {
        row += &params.tok_emb.row(ids[t] as usize);
        row += &params.pos_emb.row(t);
        row += &params.seg_emb.row(segments[t] as usize);
    }
    let emb_mask = mask(t_len, d);
    if let Some(m) = &emb_mask {
        x *= m;
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (h1, ln1) = layer_norm(&x, &lp.ln1_g, &lp.ln1_b);
        let q = linear(&h1, &lp.wq, &lp.bq);
        let k = linear(&h1, &lp.wk, &lp.bk);
        let v = linear(&h1, &lp.wv, &lp.bv);
        let mut ctx = Array2::zeros((t_len, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut p = q.slice(cols).dot(&k.slice(cols).t());
            p *= scale;
            softmax_rows(&mut p);
            ctx.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        let mut a = linear(&ctx, &lp.wo, &lp.bo);
        let attn_mask = mask(t_len, d);
        if let Some(m) = &attn_mask {
            a *= m;
        }
        x += &a;
        let (h2, ln2) = layer_norm(&x, &lp.ln2_g, &lp.ln2_b);
        let u = linear(&h2, &lp.w1, &lp.b1);
        let g = u.mapv(gelu);
        let mut f = linear(&g, &lp.w2, &lp.b2);
        let ffn_mask = mask(t_len, d);
        if let Some(m) = &ffn_mask {
            f *= m;
        }
        x += &f;
        layers.push(LayerCache { ln1, h1, q, k, v, probs, ctx, attn_mask, ln2, h2, u, g, ffn_mask });
    }
    let (hf, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);
    let out = linear(&hf, &params.w_out, &params.b_out);
    let logits = SpanLogits { start: out.column(0).to_vec(), end: out.column(1).to_vec() };
    let cache = ForwardCache {
        ids: ids.to_vec(),
        segments: segments.to_vec(),
        emb_mask,
        layers,
        lnf,
        hf,
    };
    (logits, cache)
}

/// Accumulates parameter gradients into `grads` given the loss gradient with
/// respect to the start and end logits.
pub fn backward(
    params: &Params,
    config: &ModelConfig,
    cache: &ForwardCache,
    d_start: &[f64],
    d_end: &[f64],
    grads: &mut Params,
) {
    let t_len = cache.ids.len();
    let d = config.dim;
    let heads = config.heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut dlog = Array2::zeros((t_len, 2));
    dlog.column_mut(0).assign(&Array1::from(d_start.to_vec()));
    dlog.column_mut(1).assign(&Array1::from(d_end.to_vec()));
    matmul_acc(cache.hf.t(), dlog.view(), &mut grads.w_out);
    grads.b_out += &dlog.sum_axis(Axis(0));
    let dhf = dlog.dot(&params.w_out.t());
    let mut dx = layer_norm_backward(&dhf, &cache.lnf, &params.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let lg = &mut grads.layers[li];

        // feed-forward branch
        let df = match &lc.ffn_mask {
            Some(m) => &dx * m,
            None => dx.clone(),
        };
        matmul_acc(lc.g.t(), df.view(), &mut lg.w2);
        lg.b2 += &df.sum_axis(Axis(0));
        let mut du = df.dot(&lp.w2.t());
        du.zip_mut_with(&lc.u, |a, &u| *a *= gelu_grad(u));
        matmul_acc(lc.h2.t(), du.view(), &mut lg.w1);
        lg.b1 += &du.sum_axis(Axis(0));
        let dh2 = du.dot(&lp.w1.t());
        dx += &layer_norm_backward(&dh2, &lc.ln2, &lp.ln2_g, &mut lg.ln2_g, &mut lg.ln2_b);

        // attention branch
        let da = match &lc.attn_mask {
            Some(m) => &dx * m,
            None => dx.clone(),
        };
        matmul_acc(lc.ctx.t(), da.view(), &mut lg.wo);
        lg.bo += &da.sum_axis(Axis(0));
        let dctx = da.dot(&lp.wo.t());
        let mut dq = Array2::zeros((t_len, d));
        let mut dk = Array2::zeros((t_len, d));
        let mut dv = Array2::zeros((t_len, d));
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let p = &lc.probs[h];
            let dctx_h = dctx.slice(cols);
            let dp = dctx_h.dot(&lc.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
            let mut ds = &dp * p;
            let row_dot = ds.sum_axis(Axis(1));
            for ((mut r, pr), rd) in ds.rows_mut().into_iter().zip(p.rows()).zip(row_dot.iter()) {
                r.zip_mut_with(&pr, |v, &pv| *v -= pv * rd);
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&lc.q.slice(cols)));
        }
        matmul_acc(lc.h1.t(), dq.view(), &mut lg.wq);
        matmul_acc(lc.h1.t(), dk.view(), &mut lg.wk);
        matmul_acc(lc.h1.t(), dv.view(), &mut lg.wv);
        lg.bq += &dq.sum_axis(Axis(0));
        lg.bk += &dk.sum_axis(Axis(0));
        lg.bv += &dv.sum_axis(Axis(0));
        let mut dh1 = dq.dot(&lp.wq.t());
        matmul_acc(dk.view(), lp.wk.t(), &mut dh1);
        matmul_acc(dv.view(), lp.wv.t(), &mut dh1);
        dx += &layer_norm_backward(&dh1, &lc.ln1, &lp.ln1_g, &mut lg.ln1_g, &mut lg.ln1_b);
    }

    if let Some(m) = &cache.emb_mask {
        dx *= m;
    }
    for (t, row) in dx.rows().into_iter().enumerate() {
        let mut tok = grads.tok_emb.row_mut(cache.ids[t] as usize);
        tok += &row;
        let mut pos = grads.pos_emb.row_mut(t);
        pos += &row;
        let mut seg = grads.seg_emb.row_mut(cache.segments[t] as usize);
        seg += &row;
    }
}

/// Mean of start and end cross-entropy, each a softmax over the valid-answer
/// positions. Returns the loss and its gradient with respect to both logit
/// vectors (zero outside the mask).
pub fn span_loss(
    logits: &SpanLogits,
    mask: &[bool],
    target_start: usize,
    target_end: usize,
) -> (f64, Vec<f64>, Vec<f64>) {
    let one = |l: &[f64], target: usize| -> (f64, Vec<f64>) {
        let max = l
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> =
            l.iter().zip(mask).map(|(v, m)| if *m { (v - max).exp() } else { 0.0 }).collect();
        let z: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= z;
        }
        let loss = -(probs[target].max(f64::MIN_POSITIVE)).ln();
        probs[target] -= 1.0;
        (loss, probs)
    };
    let (ls, mut gs) = one(&logits.start, target_start);
    let (le, mut ge) = one(&logits.end, target_end);
    for g in gs.iter_mut().chain(ge.iter_mut()) {
        *g *= 0.5;
    }
    (0.5 * (ls + le), gs, ge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> (ModelConfig, Params) {
        let cfg = ModelConfig {
            layers: 1,
            heads: 1,
            dim: 8,
            ff_dim: 16,
            max_seq_len: 16,
            max_query_len: 4,
            max_answer_len: 5,
            dropout: 0.0,
            seed: 3,
        };
        let p = Params::init(&cfg, 12, &mut ChaCha8Rng::seed_from_u64(3));
        (cfg, p)
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (mut cfg, _) = tiny();
        cfg.heads = 2;
        cfg.layers = 2;
        let p = Params::init(&cfg, 12, &mut ChaCha8Rng::seed_from_u64(9));
        let ids = [2, 5, 3, 7, 8, 9, 3];
        let segs = [0, 0, 0, 1, 1, 1, 1];
        let (_, cache) = forward::<ChaCha8Rng>(&p, &cfg, &ids, &segs, None);
        for l in 0..2 {
            for probs in cache.attention(l) {
                for row in probs.rows() {
                    assert!((row.sum() - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn layer_norm_backward_matches_numeric() {
        let x = Array2::from_shape_fn((3, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let g = Array1::from(vec![1.0, 0.5, -0.3, 2.0, 0.9]);
        let b = Array1::zeros(5);
        let w = Array2::from_shape_fn((3, 5), |(i, j)| ((i + 2 * j) as f64 * 0.71).cos());
        let loss = |x: &Array2<f64>| (layer_norm(x, &g, &b).0 * &w).sum();
        let (_, cache) = layer_norm(&x, &g, &b);
        let mut dg = Array1::zeros(5);
        let mut db = Array1::zeros(5);
        let dx = layer_norm_backward(&w, &cache, &g, &mut dg, &mut db);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..5 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let num = (loss(&xp) - loss(&xm)) / (2.0 * h);
                assert!((num - dx[[i, j]]).abs() < 1e-6, "{num} vs {}", dx[[i, j]]);
            }
        }
    }

    #[test]
    fn span_loss_gradient_sums_to_zero() {
        let logits = SpanLogits { start: vec![0.1, 2.0, -1.0, 0.5], end: vec![1.0, 0.0, 3.0, -2.0] };
        let mask = [false, true, true, true];
        let (loss, gs, ge) = span_loss(&logits, &mask, 1, 2);
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(gs[0], 0.0);
        assert!(gs.iter().sum::<f64>().abs() < 1e-12);
        assert!(ge.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic_and_finite() {
        let (cfg, p) = tiny();
        let ids = [2, 5, 3, 7, 8, 3];
        let segs = [0, 0, 0, 1, 1, 1];
        let (a, _) = forward::<ChaCha8Rng>(&p, &cfg, &ids, &segs, None);
        let (b, _) = forward::<ChaCha8Rng>(&p, &cfg, &ids, &segs, None);
        assert_eq!(a, b);
        assert!(a.start.iter().chain(&a.end).all(|v| v.is_finite()));
    }
}
