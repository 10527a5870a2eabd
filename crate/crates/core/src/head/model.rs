use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD, Axis, Dimension};
use serde::{Deserialize, Serialize};

use super::features::FeatureSequence;
use super::loss::{gelu, gelu_grad};
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub dim: usize,
    pub heads: usize,
    pub classes: usize,
    /// Hidden width of the feed-forward block.
    pub inner: usize,
    pub t_len: usize,
}

impl HeadConfig {
    /// Feed-forward width defaults to `4 * dim`.
    pub fn new(dim: usize, heads: usize, classes: usize, t_len: usize) -> Result<Self> {
        let cfg = Self {
            dim,
            heads,
            classes,
            inner: 4 * dim,
            t_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::Param(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.classes < 2 {
            return Err(Error::Param("need at least two classes".into()));
        }
        if self.inner == 0 || self.t_len == 0 {
            return Err(Error::Param("inner width and t_len must be >= 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

/// Learned tensors of the head. Projections act on row vectors as
/// `x W^T`, so every weight is stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub pos_embed: Array2<f64>,
    pub cls_token: Array1<f64>,
    pub w_query: Array2<f64>,
    pub w_key: Array2<f64>,
    pub w_value: Array2<f64>,
    pub w_out: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub wc: Array2<f64>,
    pub bc: Array1<f64>,
}

pub const PARAM_NAMES: [&str; 12] = [
    "pos_embed",
    "cls_token",
    "w_query",
    "w_key",
    "w_value",
    "w_out",
    "w1",
    "b1",
    "w2",
    "b2",
    "wc",
    "bc",
];

macro_rules! each_tensor {
    ($p:expr, $view:ident) => {
        vec![
            $p.pos_embed.$view().into_dyn(),
            $p.cls_token.$view().into_dyn(),
            $p.w_query.$view().into_dyn(),
            $p.w_key.$view().into_dyn(),
            $p.w_value.$view().into_dyn(),
            $p.w_out.$view().into_dyn(),
            $p.w1.$view().into_dyn(),
            $p.b1.$view().into_dyn(),
            $p.w2.$view().into_dyn(),
            $p.b2.$view().into_dyn(),
            $p.wc.$view().into_dyn(),
            $p.bc.$view().into_dyn(),
        ]
    };
}

impl HeadParams {
    pub fn zeros(cfg: &HeadConfig) -> Self {
        let (d, i, c) = (cfg.dim, cfg.inner, cfg.classes);
        Self {
            pos_embed: Array2::zeros((cfg.t_len + 1, d)),
            cls_token: Array1::zeros(d),
            w_query: Array2::zeros((d, d)),
            w_key: Array2::zeros((d, d)),
            w_value: Array2::zeros((d, d)),
            w_out: Array2::zeros((d, d)),
            w1: Array2::zeros((i, d)),
            b1: Array1::zeros(i),
            w2: Array2::zeros((d, i)),
            b2: Array1::zeros(d),
            wc: Array2::zeros((c, d)),
            bc: Array1::zeros(c),
        }
    }

    /// Every entry `~ U(-scale, scale)`, tensors filled in name order.
    pub fn uniform(cfg: &HeadConfig, scale: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(cfg);
        for mut t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.uniform_range(-scale, scale));
        }
        p
    }

    /// The training initialisation, `U(-1/sqrt(D), 1/sqrt(D))`.
    pub fn init(cfg: &HeadConfig, rng: &mut Rng) -> Self {
        Self::uniform(cfg, 1.0 / (cfg.dim as f64).sqrt(), rng)
    }

    pub fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        each_tensor!(self, view)
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        each_tensor!(self, view_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Shapes expected for `cfg` versus the stored ones.
    pub fn check(&self, cfg: &HeadConfig) -> Result<()> {
        let want = Self::zeros(cfg);
        for ((name, a), b) in PARAM_NAMES.iter().zip(self.tensors()).zip(want.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::DimMismatch(format!(
                    "{name} has shape {:?}, expected {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    o: Array2<f64>,
    h: Array2<f64>,
    z1: Array2<f64>,
    g: Array2<f64>,
    u: Array1<f64>,
    inv_std: f64,
    heads: usize,
}

impl HeadCache {
    /// Attention weights of each head, `[T'+1, T'+1]`.
    pub fn attention(&self) -> &[Array2<f64>] {
        &self.attn
    }
}

fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let col = a.insert_axis(Axis(1));
    let row = b.insert_axis(Axis(0));
    col.dot(&row)
}

/// Logits of the classification token and the cache for [`head_backward`].
///
/// Tokens are `[cls; seq] + pos_embed`; one multi-head self-attention block
/// and one GELU feed-forward block, each with a residual connection, are
/// followed by a parameter-free layer norm of the class row and a linear
/// classifier. Blank positions are not masked.
pub fn head_forward(seq: &FeatureSequence, params: &HeadParams, cfg: &HeadConfig) -> Result<(Array1<f64>, HeadCache)> {
    if seq.t_len() != cfg.t_len || seq.dim() != cfg.dim {
        return Err(Error::DimMismatch(format!(
            "sequence is {}x{}, head expects {}x{}",
            seq.t_len(),
            seq.dim(),
            cfg.t_len,
            cfg.dim
        )));
    }
    params.check(cfg)?;
    let dh = cfg.head_dim();
    let scale = (dh as f64).sqrt();

    let mut x = Array2::zeros((cfg.t_len + 1, cfg.dim));
    x.row_mut(0).assign(&params.cls_token);
    x.slice_mut(s![1.., ..]).assign(seq.values());
    x += &params.pos_embed;

    let q = x.dot(&params.w_query.t());
    let k = x.dot(&params.w_key.t());
    let v = x.dot(&params.w_value.t());
    let mut o = Array2::zeros(x.raw_dim());
    let mut attn = Vec::with_capacity(cfg.heads);
    for hd in 0..cfg.heads {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let mut a = q.slice(cols).dot(&k.slice(cols).t()) / scale;
        softmax_rows(&mut a);
        o.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        attn.push(a);
    }
    let h = &x + &o.dot(&params.w_out.t());
    let z1 = h.dot(&params.w1.t()) + &params.b1;
    let g = z1.mapv(gelu);
    let y = &h + &(g.dot(&params.w2.t()) + &params.b2);

    let cls = y.row(0);
    let mean = cls.mean().expect("dim >= 1");
    let var = cls.mapv(|v| (v - mean) * (v - mean)).mean().expect("dim >= 1");
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let u = cls.mapv(|v| (v - mean) * inv_std);
    let logits = params.wc.dot(&u) + &params.bc;

    let cache = HeadCache {
        x,
        q,
        k,
        v,
        attn,
        o,
        h,
        z1,
        g,
        u,
        inv_std,
        heads: cfg.heads,
    };
    Ok((logits, cache))
}

/// Gradients of every parameter given the upstream gradient on the logits.
pub fn head_backward(cache: &HeadCache, params: &HeadParams, dlogits: ArrayView1<f64>) -> HeadParams {
    let t1 = cache.x.nrows();
    let d = cache.x.ncols();
    let dh = d / cache.heads;
    let scale = (dh as f64).sqrt();

    let wc = outer(dlogits, cache.u.view());
    let bc = dlogits.to_owned();
    let du = params.wc.t().dot(&dlogits);

    let u = &cache.u;
    let mean_du = du.mean().expect("dim >= 1");
    let mean_duu = (&du * u).mean().expect("dim >= 1");
    let dcls = (&du - mean_du - &(u * mean_duu)) * cache.inv_std;
    let mut dy = Array2::zeros((t1, d));
    dy.row_mut(0).assign(&dcls);

    let b2 = dy.sum_axis(Axis(0));
    let w2 = dy.t().dot(&cache.g);
    let dz1 = dy.dot(&params.w2) * cache.z1.mapv(gelu_grad);
    let b1 = dz1.sum_axis(Axis(0));
    let w1 = dz1.t().dot(&cache.h);
    let dhid = &dy + &dz1.dot(&params.w1);

    let w_out = dhid.t().dot(&cache.o);
    let d_o = dhid.dot(&params.w_out);
    let mut dq = Array2::zeros((t1, d));
    let mut dk = Array2::zeros((t1, d));
    let mut dv = Array2::zeros((t1, d));
    for (hd, a) in cache.attn.iter().enumerate() {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let doh = d_o.slice(cols);
        dv.slice_mut(cols).assign(&a.t().dot(&doh));
        let da = doh.dot(&cache.v.slice(cols).t());
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(&da - &row_dot) / scale;
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }
    let w_query = dq.t().dot(&cache.x);
    let w_key = dk.t().dot(&cache.x);
    let w_value = dv.t().dot(&cache.x);
    let dx = dhid + dq.dot(&params.w_query) + dk.dot(&params.w_key) + dv.dot(&params.w_value);
    let cls_token = dx.row(0).to_owned();

    HeadParams {
        pos_embed: dx,
        cls_token,
        w_query,
        w_key,
        w_value,
        w_out,
        w1,
        b1,
        w2,
        b2,
        wc,
        bc,
    }
}

/// Shape of each named tensor, in [`PARAM_NAMES`] order.
pub fn param_shapes(params: &HeadParams) -> Vec<Vec<usize>> {
    params.tensors().iter().map(|t| t.raw_dim().slice().to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::loss::softmax;

    fn small() -> (HeadConfig, HeadParams, FeatureSequence) {
        let cfg = HeadConfig::new(8, 2, 3, 4).unwrap();
        let mut rng = Rng::new(5);
        let params = HeadParams::uniform(&cfg, 0.5, &mut rng);
        let seq = FeatureSequence::dense(Array2::from_shape_fn((4, 8), |_| rng.uniform_range(-1.0, 1.0))).unwrap();
        (cfg, params, seq)
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let (cfg, _, seq) = small();
        let mut params = HeadParams::zeros(&cfg);
        params.pos_embed.fill(0.3);
        let (logits, _) = head_forward(&seq, &params, &cfg).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
        let p = softmax(logits.view());
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (cfg, params, seq) = small();
        let (_, cache) = head_forward(&seq, &params, &cfg).unwrap();
        assert_eq!(cache.attention().len(), 2);
        for a in cache.attention() {
            for row in a.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_symmetry_without_positions() {
        let (cfg, mut params, seq) = small();
        params.pos_embed.fill(0.0);
        let (base, _) = head_forward(&seq, &params, &cfg).unwrap();
        let order = [2, 0, 3, 1];
        let permuted = Array2::from_shape_fn((4, 8), |(t, d)| seq.values()[[order[t], d]]);
        let (other, _) = head_forward(&FeatureSequence::dense(permuted).unwrap(), &params, &cfg).unwrap();
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (cfg, params, seq) = small();
        let (_, cache) = head_forward(&seq, &params, &cfg).unwrap();
        let grads = head_backward(&cache, &params, Array1::zeros(3).view());
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn blank_positions_still_get_gradient() {
        let (cfg, params, _) = small();
        let mut vals = Array2::zeros((4, 8));
        vals.row_mut(1).fill(0.7);
        vals.row_mut(2).fill(-0.4);
        let seq = FeatureSequence::new(vals, vec![true, false, false, true]).unwrap();
        let (_, cache) = head_forward(&seq, &params, &cfg).unwrap();
        let grads = head_backward(&cache, &params, ndarray::array![1.0, -0.5, 0.2].view());
        assert!(grads.pos_embed.row(1).iter().any(|&v| v != 0.0));
        assert!(grads.pos_embed.row(4).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (cfg, params, _) = small();
        let seq = FeatureSequence::dense(Array2::zeros((5, 8))).unwrap();
        assert!(matches!(head_forward(&seq, &params, &cfg), Err(Error::DimMismatch(_))));
        assert_eq!(params.count(), 5 * 8 + 8 + 4 * 64 + 32 * 8 + 32 + 8 * 32 + 8 + 24 + 3);
    }
}
