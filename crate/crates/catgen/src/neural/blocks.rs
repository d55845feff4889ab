//! Transformer building blocks shared by the generator and the detector.
//!
//! Forward passes that will be differentiated return explicit caches;
//! backward passes accumulate into a gradient model of the same shape.
//! The KV-cache path is inference-only.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::TrainConfig;

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4;
pub const INIT_STD: f64 = 0.02;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_prime(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let mx = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
}

/// Mutable view of one named parameter tensor.
pub enum Pm<'a> {
    M(&'a mut Array2<f64>),
    V(&'a mut Array1<f64>),
}

impl Pm<'_> {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Pm::M(a) => a.shape().to_vec(),
            Pm::V(a) => a.shape().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Pm::M(a) => a.len(),
            Pm::V(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            Pm::M(a) => a.as_slice_mut().expect("parameter tensor not contiguous"),
            Pm::V(a) => a.as_slice_mut().expect("parameter tensor not contiguous"),
        }
    }
}

/// Seeded init. Weight matrices (".w" suffix) and the embedding tables get
/// N(0, 0.02); norm gains (".g") get 1; everything else 0. Constant fills
/// consume no draws, so the stream only depends on the weight tensors.
pub fn init_params(params: &mut [(String, Pm)], rng: &mut ChaCha20Rng) {
    let normal = Normal::new(0.0, INIT_STD).unwrap();
    for (name, p) in params.iter_mut() {
        let random = name.ends_with(".w") || name == "wte" || name == "wpe";
        let fill = if name.ends_with(".g") { 1.0 } else { 0.0 };
        for v in p.as_slice_mut() {
            *v = if random { normal.sample(rng) } else { fill };
        }
    }
}

pub fn scale_params(params: &mut [(String, Pm)], k: f64) {
    for (_, p) in params.iter_mut() {
        for v in p.as_slice_mut() {
            *v *= k;
        }
    }
}

/// Scales gradients so their global L2 norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_grads(grads: &mut [(String, Pm)], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, g) in grads.iter_mut() {
        for v in g.as_slice_mut() {
            sq += *v * *v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        scale_params(grads, max_norm / norm);
    }
    norm
}

pub struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(tc: &TrainConfig, sizes: &[usize]) -> Adam {
        Adam {
            lr: tc.lr,
            b1: tc.beta1,
            b2: tc.beta2,
            eps: tc.eps,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [(String, Pm)], grads: &mut [(String, Pm)]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.b1.powi(self.t as i32);
        let bc2 = 1.0 - self.b2.powi(self.t as i32);
        for i in 0..params.len() {
            let w = params[i].1.as_slice_mut();
            let g = grads[i].1.as_slice_mut();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..w.len() {
                m[j] = self.b1 * m[j] + (1.0 - self.b1) * g[j];
                v[j] = self.b2 * v[j] + (1.0 - self.b2) * g[j] * g[j];
                w[j] -= self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(d_in: usize, d_out: usize) -> Linear {
        Linear { w: Array2::zeros((d_in, d_out)), b: Array1::zeros(d_out) }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    pub fn forward_row(&self, x: &Array1<f64>) -> Array1<f64> {
        x.dot(&self.w) + &self.b
    }

    pub fn backward(&self, x: &Array2<f64>, gy: &Array2<f64>, g: &mut Linear) -> Array2<f64> {
        g.w += &x.t().dot(gy);
        g.b += &gy.sum_axis(Axis(0));
        gy.dot(&self.w.t())
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub g: Array1<f64>,
    pub b: Array1<f64>,
}

pub struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn zeros(d: usize) -> LayerNorm {
        LayerNorm { g: Array1::zeros(d), b: Array1::zeros(d) }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LnCache) {
        let (t, d) = (x.nrows(), x.ncols());
        let mut xhat = Array2::zeros((t, d));
        let mut inv_std = Array1::zeros(t);
        for i in 0..t {
            let row = x.row(i);
            let mean = row.sum() / d as f64;
            let var = row.fold(0.0, |acc, &v| acc + (v - mean) * (v - mean)) / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = is;
            for (j, &v) in row.iter().enumerate() {
                xhat[[i, j]] = (v - mean) * is;
            }
        }
        let y = &xhat * &self.g + &self.b;
        (y, LnCache { xhat, inv_std })
    }

    pub fn forward_row(&self, x: &Array1<f64>) -> Array1<f64> {
        let d = x.len() as f64;
        let mean = x.sum() / d;
        let var = x.fold(0.0, |acc, &v| acc + (v - mean) * (v - mean)) / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        let mut y = Array1::zeros(x.len());
        for (j, &v) in x.iter().enumerate() {
            y[j] = (v - mean) * is * self.g[j] + self.b[j];
        }
        y
    }

    pub fn backward(&self, gy: &Array2<f64>, c: &LnCache, g: &mut LayerNorm) -> Array2<f64> {
        let (t, d) = (gy.nrows(), gy.ncols());
        g.b += &gy.sum_axis(Axis(0));
        g.g += &(gy * &c.xhat).sum_axis(Axis(0));
        let gxhat = gy * &self.g;
        let mut gx = Array2::zeros((t, d));
        for i in 0..t {
            let gh = gxhat.row(i);
            let xh = c.xhat.row(i);
            let m1 = gh.sum() / d as f64;
            let m2 = gh.dot(&xh) / d as f64;
            for j in 0..d {
                gx[[i, j]] = c.inv_std[i] * (gh[j] - m1 - xh[j] * m2);
            }
        }
        gx
    }
}

#[derive(Debug, Clone)]
pub struct Attention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc: Linear,
    pub proj: Linear,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
}

impl Block {
    pub fn zeros(d: usize, ff: usize) -> Block {
        Block {
            ln1: LayerNorm::zeros(d),
            attn: Attention {
                wq: Linear::zeros(d, d),
                wk: Linear::zeros(d, d),
                wv: Linear::zeros(d, d),
                wo: Linear::zeros(d, d),
            },
            ln2: LayerNorm::zeros(d),
            mlp: Mlp { fc: Linear::zeros(d, ff), proj: Linear::zeros(ff, d) },
        }
    }
}

pub struct BlockCache {
    ln1c: LnCache,
    ln1_out: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    att: Vec<Array2<f64>>,
    o: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2c: LnCache,
    ln2_out: Array2<f64>,
    h: Array2<f64>,
    act: Array2<f64>,
    mlp_mask: Option<Array2<f64>>,
}

pub struct EncCache {
    ids: Vec<usize>,
    emb_mask: Option<Array2<f64>>,
    blocks: Vec<BlockCache>,
    lnf: LnCache,
}

pub struct KvLayer {
    k: Array2<f64>,
    v: Array2<f64>,
}

/// Per-layer key/value history for incremental decoding.
pub struct KvCache {
    layers: Vec<KvLayer>,
    pos: usize,
}

impl KvCache {
    pub fn pos(&self) -> usize {
        self.pos
    }
}

/// Pre-norm transformer encoder: token + learned position embeddings,
/// `blocks` with optional causal masking, and a final layer norm.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub n_heads: usize,
    pub causal: bool,
    pub dropout: f64,
    pub wte: Array2<f64>,
    pub wpe: Array2<f64>,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn zeros(
        vocab: usize,
        context: usize,
        d: usize,
        ff: usize,
        layers: usize,
        heads: usize,
        causal: bool,
        dropout: f64,
    ) -> Encoder {
        Encoder {
            n_heads: heads,
            causal,
            dropout,
            wte: Array2::zeros((vocab, d)),
            wpe: Array2::zeros((context, d)),
            blocks: (0..layers).map(|_| Block::zeros(d, ff)).collect(),
            ln_f: LayerNorm::zeros(d),
        }
    }

    pub fn zeros_like(&self) -> Encoder {
        Encoder::zeros(
            self.wte.nrows(),
            self.wpe.nrows(),
            self.d_model(),
            self.blocks[0].mlp.fc.w.ncols(),
            self.blocks.len(),
            self.n_heads,
            self.causal,
            self.dropout,
        )
    }

    pub fn d_model(&self) -> usize {
        self.wte.ncols()
    }

    pub fn params_mut(&mut self) -> Vec<(String, Pm<'_>)> {
        let mut ps: Vec<(String, Pm)> = vec![
            ("wte".into(), Pm::M(&mut self.wte)),
            ("wpe".into(), Pm::M(&mut self.wpe)),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            ps.push((format!("blocks.{i}.ln1.g"), Pm::V(&mut b.ln1.g)));
            ps.push((format!("blocks.{i}.ln1.b"), Pm::V(&mut b.ln1.b)));
            ps.push((format!("blocks.{i}.attn.wq.w"), Pm::M(&mut b.attn.wq.w)));
            ps.push((format!("blocks.{i}.attn.wq.b"), Pm::V(&mut b.attn.wq.b)));
            ps.push((format!("blocks.{i}.attn.wk.w"), Pm::M(&mut b.attn.wk.w)));
            ps.push((format!("blocks.{i}.attn.wk.b"), Pm::V(&mut b.attn.wk.b)));
            ps.push((format!("blocks.{i}.attn.wv.w"), Pm::M(&mut b.attn.wv.w)));
            ps.push((format!("blocks.{i}.attn.wv.b"), Pm::V(&mut b.attn.wv.b)));
            ps.push((format!("blocks.{i}.attn.wo.w"), Pm::M(&mut b.attn.wo.w)));
            ps.push((format!("blocks.{i}.attn.wo.b"), Pm::V(&mut b.attn.wo.b)));
            ps.push((format!("blocks.{i}.ln2.g"), Pm::V(&mut b.ln2.g)));
            ps.push((format!("blocks.{i}.ln2.b"), Pm::V(&mut b.ln2.b)));
            ps.push((format!("blocks.{i}.mlp.fc.w"), Pm::M(&mut b.mlp.fc.w)));
            ps.push((format!("blocks.{i}.mlp.fc.b"), Pm::V(&mut b.mlp.fc.b)));
            ps.push((format!("blocks.{i}.mlp.proj.w"), Pm::M(&mut b.mlp.proj.w)));
            ps.push((format!("blocks.{i}.mlp.proj.b"), Pm::V(&mut b.mlp.proj.b)));
        }
        ps.push(("ln_f.g".into(), Pm::V(&mut self.ln_f.g)));
        ps.push(("ln_f.b".into(), Pm::V(&mut self.ln_f.b)));
        ps
    }

    fn dropout_mask(
        &self,
        shape: (usize, usize),
        rng: &mut Option<&mut ChaCha20Rng>,
    ) -> Option<Array2<f64>> {
        match rng {
            Some(r) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                Some(Array2::from_shape_fn(shape, |_| {
                    if r.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                }))
            }
            _ => None,
        }
    }

    /// Full-sequence forward. `rng` enables dropout (training only).
    pub fn forward(
        &self,
        ids: &[usize],
        mut rng: Option<&mut ChaCha20Rng>,
    ) -> (Array2<f64>, EncCache) {
        let (t, d) = (ids.len(), self.d_model());
        let mut x = Array2::zeros((t, d));
        for (i, &id) in ids.iter().enumerate() {
            x.row_mut(i).assign(&(&self.wte.row(id) + &self.wpe.row(i)));
        }
        let emb_mask = self.dropout_mask((t, d), &mut rng);
        if let Some(m) = &emb_mask {
            x *= m;
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = self.block_forward(b, x, &mut rng);
            x = y;
            caches.push(c);
        }
        let (hf, lnf) = self.ln_f.forward(&x);
        (hf, EncCache { ids: ids.to_vec(), emb_mask, blocks: caches, lnf })
    }

    fn block_forward(
        &self,
        b: &Block,
        x: Array2<f64>,
        rng: &mut Option<&mut ChaCha20Rng>,
    ) -> (Array2<f64>, BlockCache) {
        let (t, d) = (x.nrows(), x.ncols());
        let hd = d / self.n_heads;
        let scale = 1.0 / (hd as f64).sqrt();

        let (ln1_out, ln1c) = b.ln1.forward(&x);
        let q = b.attn.wq.forward(&ln1_out);
        let k = b.attn.wk.forward(&ln1_out);
        let v = b.attn.wv.forward(&ln1_out);
        let mut o = Array2::zeros((t, d));
        let mut att = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let cols = s![.., h * hd..(h + 1) * hd];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t());
            sc.mapv_inplace(|v| v * scale);
            if self.causal {
                for i in 0..t {
                    for j in i + 1..t {
                        sc[[i, j]] = f64::NEG_INFINITY;
                    }
                }
            }
            softmax_rows(&mut sc);
            o.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            att.push(sc);
        }
        let mut attn_out = b.attn.wo.forward(&o);
        let attn_mask = self.dropout_mask((t, d), rng);
        if let Some(m) = &attn_mask {
            attn_out *= m;
        }
        let x2 = &x + &attn_out;

        let (ln2_out, ln2c) = b.ln2.forward(&x2);
        let h = b.mlp.fc.forward(&ln2_out);
        let act = h.mapv(gelu);
        let mut mlp_out = b.mlp.proj.forward(&act);
        let mlp_mask = self.dropout_mask((t, d), rng);
        if let Some(m) = &mlp_mask {
            mlp_out *= m;
        }
        let y = &x2 + &mlp_out;
        let cache = BlockCache {
            ln1c,
            ln1_out,
            q,
            k,
            v,
            att,
            o,
            attn_mask,
            ln2c,
            ln2_out,
            h,
            act,
            mlp_mask,
        };
        (y, cache)
    }

    /// Accumulates gradients of a scalar loss into `g`, given the loss
    /// gradient with respect to the final hidden states.
    pub fn backward(&self, g_out: &Array2<f64>, c: &EncCache, g: &mut Encoder) {
        let mut gx = self.ln_f.backward(g_out, &c.lnf, &mut g.ln_f);
        for i in (0..self.blocks.len()).rev() {
            gx = self.block_backward(&self.blocks[i], &c.blocks[i], gx, &mut g.blocks[i]);
        }
        if let Some(m) = &c.emb_mask {
            gx *= m;
        }
        for (i, &id) in c.ids.iter().enumerate() {
            let row = gx.row(i);
            let mut wte_row = g.wte.row_mut(id);
            wte_row += &row;
            let mut wpe_row = g.wpe.row_mut(i);
            wpe_row += &row;
        }
    }

    fn block_backward(
        &self,
        b: &Block,
        c: &BlockCache,
        gy: Array2<f64>,
        g: &mut Block,
    ) -> Array2<f64> {
        let (t, d) = (gy.nrows(), gy.ncols());
        let hd = d / self.n_heads;
        let scale = 1.0 / (hd as f64).sqrt();

        let mut g_mlp_out = gy.clone();
        if let Some(m) = &c.mlp_mask {
            g_mlp_out *= m;
        }
        let g_act = b.mlp.proj.backward(&c.act, &g_mlp_out, &mut g.mlp.proj);
        let g_h = &g_act * &c.h.mapv(gelu_prime);
        let g_ln2out = b.mlp.fc.backward(&c.ln2_out, &g_h, &mut g.mlp.fc);
        let g_x2 = &gy + &b.ln2.backward(&g_ln2out, &c.ln2c, &mut g.ln2);

        let mut g_attn_out = g_x2.clone();
        if let Some(m) = &c.attn_mask {
            g_attn_out *= m;
        }
        let g_o = b.attn.wo.backward(&c.o, &g_attn_out, &mut g.attn.wo);
        let mut gq = Array2::zeros((t, d));
        let mut gk = Array2::zeros((t, d));
        let mut gv = Array2::zeros((t, d));
        for h in 0..self.n_heads {
            let cols = s![.., h * hd..(h + 1) * hd];
            let a = &c.att[h];
            let goh = g_o.slice(cols);
            gv.slice_mut(cols).assign(&a.t().dot(&goh));
            let ga = goh.dot(&c.v.slice(cols).t());
            let mut gs = Array2::zeros((t, t));
            for i in 0..t {
                let ai = a.row(i);
                let dot = ai.dot(&ga.row(i));
                for j in 0..t {
                    gs[[i, j]] = ai[j] * (ga[[i, j]] - dot);
                }
            }
            gq.slice_mut(cols).assign(&gs.dot(&c.k.slice(cols)).mapv(|v| v * scale));
            gk.slice_mut(cols).assign(&gs.t().dot(&c.q.slice(cols)).mapv(|v| v * scale));
        }
        let mut g_ln1out = b.attn.wq.backward(&c.ln1_out, &gq, &mut g.attn.wq);
        g_ln1out += &b.attn.wk.backward(&c.ln1_out, &gk, &mut g.attn.wk);
        g_ln1out += &b.attn.wv.backward(&c.ln1_out, &gv, &mut g.attn.wv);
        let g_x_attn = b.ln1.backward(&g_ln1out, &c.ln1c, &mut g.ln1);
        &g_x2 + &g_x_attn
    }

    pub fn new_cache(&self) -> KvCache {
        let d = self.d_model();
        KvCache {
            layers: self
                .blocks
                .iter()
                .map(|_| KvLayer { k: Array2::zeros((0, d)), v: Array2::zeros((0, d)) })
                .collect(),
            pos: 0,
        }
    }

    /// One incremental decode step at position `cache.pos`; returns the
    /// final hidden row. The caller keeps `cache.pos` below the context.
    pub fn step(&self, id: usize, cache: &mut KvCache) -> Array1<f64> {
        let d = self.d_model();
        let hd = d / self.n_heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut x = &self.wte.row(id) + &self.wpe.row(cache.pos);
        for (b, kv) in self.blocks.iter().zip(&mut cache.layers) {
            let h1 = b.ln1.forward_row(&x);
            let q = b.attn.wq.forward_row(&h1);
            kv.k.push_row(b.attn.wk.forward_row(&h1).view()).unwrap();
            kv.v.push_row(b.attn.wv.forward_row(&h1).view()).unwrap();
            let mut o = Array1::zeros(d);
            for h in 0..self.n_heads {
                let span = s![h * hd..(h + 1) * hd];
                let cols = s![.., h * hd..(h + 1) * hd];
                let mut sc = kv.k.slice(cols).dot(&q.slice(span));
                sc.mapv_inplace(|v| v * scale);
                let mx = sc.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut z = 0.0;
                for v in sc.iter_mut() {
                    *v = (*v - mx).exp();
                    z += *v;
                }
                sc.mapv_inplace(|v| v / z);
                o.slice_mut(span).assign(&sc.dot(&kv.v.slice(cols)));
            }
            x = &x + &b.attn.wo.forward_row(&o);
            let h2 = b.ln2.forward_row(&x);
            let act = b.mlp.fc.forward_row(&h2).mapv(gelu);
            x = &x + &b.mlp.proj.forward_row(&act);
        }
        cache.pos += 1;
        self.ln_f.forward_row(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny_encoder(seed: u64, causal: bool) -> Encoder {
        let mut e = Encoder::zeros(12, 16, 8, 16, 2, 2, causal, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        init_params(&mut e.params_mut(), &mut rng);
        e
    }

    #[test]
    fn init_rule_and_determinism() {
        let a = tiny_encoder(5, true);
        let b = tiny_encoder(5, true);
        assert_eq!(a.wte, b.wte);
        assert_eq!(a.blocks[1].mlp.proj.w, b.blocks[1].mlp.proj.w);
        assert!(a.ln_f.g.iter().all(|&v| v == 1.0));
        assert!(a.ln_f.b.iter().all(|&v| v == 0.0));
        assert!(a.blocks[0].attn.wq.b.iter().all(|&v| v == 0.0));
        assert!(a.wte.iter().any(|&v| v != 0.0));
        let c = tiny_encoder(6, true);
        assert_ne!(a.wte, c.wte);
    }

    #[test]
    fn param_names_cover_every_tensor() {
        let mut e = tiny_encoder(0, true);
        let names: Vec<String> = e.params_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 2 + 2 * 16 + 2);
        assert!(names.contains(&"blocks.1.attn.wo.w".to_string()));
        assert!(names.contains(&"ln_f.g".to_string()));
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut g2 = Array2::from_elem((2, 2), 3.0);
        let mut g1 = Array1::from_elem(2, 4.0);
        let mut grads = vec![
            ("a.w".to_string(), Pm::M(&mut g2)),
            ("a.b".to_string(), Pm::V(&mut g1)),
        ];
        let norm = clip_grads(&mut grads, 1.0);
        assert!((norm - 68.0f64.sqrt()) < 1e-12);
        let mut sq = 0.0;
        for (_, g) in grads.iter_mut() {
            for v in g.as_slice_mut() {
                sq += *v * *v;
            }
        }
        assert!((sq.sqrt() - 1.0).abs() < 1e-12);

        let mut small = Array1::from_elem(2, 0.1);
        let mut grads = vec![("b.b".to_string(), Pm::V(&mut small))];
        clip_grads(&mut grads, 1.0);
        assert_eq!(small, Array1::from_elem(2, 0.1));
    }

    #[test]
    fn adam_first_step_matches_hand_calc() {
        let tc = TrainConfig { lr: 0.01, ..Default::default() };
        let mut w = Array1::zeros(1);
        let mut g = Array1::from_elem(1, 2.0);
        let mut adam = Adam::new(&tc, &[1]);
        adam.step(
            &mut [("w.b".to_string(), Pm::V(&mut w))],
            &mut [("w.b".to_string(), Pm::V(&mut g))],
        );
        // mhat = g, vhat = g^2, so the first step is -lr * g/(|g| + eps).
        let expected = -0.01 * 2.0 / (2.0 + 1e-8);
        assert!((w[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn layernorm_rows_are_normalized() {
        let mut ln = LayerNorm::zeros(6);
        ln.g.fill(1.0);
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i * 7 + j * 3) as f64 * 0.25 - 1.0);
        let (y, _) = ln.forward(&x);
        for row in y.rows() {
            let mean = row.sum() / 6.0;
            let var = row.fold(0.0, |a, &v| a + (v - mean) * (v - mean)) / 6.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut a = Array2::from_shape_fn((4, 5), |(i, j)| (i as f64 - j as f64) * 1.7);
        a[[2, 3]] = f64::NEG_INFINITY;
        softmax_rows(&mut a);
        for row in a.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(a[[2, 3]], 0.0);
    }

    #[test]
    fn causal_forward_ignores_future_tokens() {
        let e = tiny_encoder(3, true);
        let (h1, _) = e.forward(&[1, 4, 7, 2], None);
        let (h2, _) = e.forward(&[1, 4, 7, 9], None);
        for i in 0..3 {
            assert_eq!(h1.row(i), h2.row(i), "position {i} changed");
        }
        assert_ne!(h1.row(3), h2.row(3));
    }

    #[test]
    fn bidirectional_forward_sees_future_tokens() {
        let e = tiny_encoder(3, false);
        let (h1, _) = e.forward(&[1, 4, 7, 2], None);
        let (h2, _) = e.forward(&[1, 4, 7, 9], None);
        assert_ne!(h1.row(0), h2.row(0));
    }

    #[test]
    fn kv_steps_match_full_forward() {
        for causal in [true] {
            let e = tiny_encoder(8, causal);
            let ids = [0usize, 3, 11, 5, 5, 2];
            let (full, _) = e.forward(&ids, None);
            let mut cache = e.new_cache();
            for (i, &id) in ids.iter().enumerate() {
                let row = e.step(id, &mut cache);
                for j in 0..e.d_model() {
                    assert!(
                        (row[j] - full[[i, j]]).abs() < 1e-12,
                        "pos {i} dim {j}: {} vs {}",
                        row[j],
                        full[[i, j]]
                    );
                }
            }
            assert_eq!(cache.pos(), ids.len());
        }
    }

    #[test]
    fn dropout_masks_apply_only_with_rng() {
        let mut e = tiny_encoder(2, true);
        e.dropout = 0.5;
        let ids = [1usize, 2, 3];
        let (a, _) = e.forward(&ids, None);
        let (b, _) = e.forward(&ids, None);
        assert_eq!(a, b);
        let mut r1 = ChaCha20Rng::seed_from_u64(1);
        let mut r2 = ChaCha20Rng::seed_from_u64(1);
        let (c, _) = e.forward(&ids, Some(&mut r1));
        let (d, _) = e.forward(&ids, Some(&mut r2));
        assert_eq!(c, d);
        assert_ne!(a, c);
    }

    #[test]
    fn gelu_matches_reference_points() {
        assert!(gelu(0.0).abs() < 1e-15);
        assert!((gelu(1.0) - 0.841192).abs() < 1e-5);
        assert!((gelu(-1.0) + 0.158808).abs() < 1e-5);
        for &x in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let eps = 1e-6;
            let num = (gelu(x + eps) - gelu(x - eps)) / (2.0 * eps);
            assert!((num - gelu_prime(x)).abs() < 1e-8, "x={x}");
        }
    }
}
