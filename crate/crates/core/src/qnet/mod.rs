//! The communicative Q-network.
//!
//! Every agent's observation goes through one shared 3D convolutional trunk
//! (four conv layers, rectified-linear, max pooling after three of them).
//! Each agent then has its own stack of four fully connected layers. With
//! communication on, the mean of all agents' outputs of FC layer `j` (the
//! *message*) is appended to every agent's input of layer `j + 1`. The last
//! layer emits one Q-value per action.
//!
//! Parameters live in one flat `f32` vector in canonical order: conv layers
//! in order (weights then bias), then heads agent by agent and layer by layer
//! (weights then bias). Conv weights are `[out][in][kz][ky][kx]`, FC weights
//! `[out][in]`.
//!
//! Forward and backward are generic over [`Real`] so the same code runs in
//! `f32` for training and in `f64` for gradient checking. Reductions always
//! accumulate in `f64`.

mod gradcheck;
mod kernels;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;
use kernels::ConvGeom;

pub use gradcheck::{gradient_check, GradCheckReport};

pub trait Real: Copy + Send + Sync + Default + PartialOrd + std::fmt::Debug + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cache does not match: {0}")]
    CacheMismatch(String),
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub n_agents: usize,
    pub in_frames: usize,
    pub roi_size: usize,
    pub conv_channels: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    /// Conv layer indices followed by a 2×2×2 max pool.
    pub pool_after: Vec<usize>,
    /// Widths of the three hidden FC layers; a fourth maps to the actions.
    pub fc_sizes: Vec<usize>,
    pub n_actions: usize,
    pub comm_enabled: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            n_agents: 1,
            in_frames: 4,
            roi_size: 45,
            conv_channels: vec![32, 32, 64, 64],
            conv_kernels: vec![3, 3, 3, 3],
            pool_after: vec![0, 1, 2],
            fc_sizes: vec![512, 256, 128],
            n_actions: 6,
            comm_enabled: true,
        }
    }
}

pub const CONV_LAYERS: usize = 4;
pub const POOL_LAYERS: usize = 3;
pub const FC_LAYERS: usize = 4;

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if self.n_agents == 0 || self.in_frames == 0 || self.roi_size == 0 || self.n_actions == 0 {
            return bad("n_agents, in_frames, roi_size and n_actions must be positive".into());
        }
        if self.conv_channels.len() != CONV_LAYERS || self.conv_kernels.len() != CONV_LAYERS {
            return bad(format!("need exactly {CONV_LAYERS} conv channels and kernels"));
        }
        if self.conv_channels.contains(&0) {
            return bad("conv channels must be positive".into());
        }
        if self.conv_kernels.iter().any(|&k| k == 0 || k % 2 == 0) {
            return bad("conv kernels must be odd".into());
        }
        let mut pools = self.pool_after.clone();
        pools.sort_unstable();
        pools.dedup();
        if pools.len() != POOL_LAYERS || pools.len() != self.pool_after.len() || pools.iter().any(|&p| p >= CONV_LAYERS) {
            return bad(format!("pool_after must name {POOL_LAYERS} distinct conv layers"));
        }
        if self.fc_sizes.len() != FC_LAYERS - 1 || self.fc_sizes.contains(&0) {
            return bad(format!("need {} positive hidden FC sizes", FC_LAYERS - 1));
        }
        let mut s = self.roi_size;
        for l in 0..CONV_LAYERS {
            if self.pool_after.contains(&l) {
                s /= 2;
                if s == 0 {
                    return bad(format!("roi_size {} pools away to nothing", self.roi_size));
                }
            }
        }
        Ok(())
    }

    /// Width of the flattened trunk output.
    pub fn feature_len(&self) -> usize {
        let mut s = self.roi_size;
        for l in 0..CONV_LAYERS {
            if self.pool_after.contains(&l) {
                s /= 2;
            }
        }
        self.conv_channels[CONV_LAYERS - 1] * s * s * s
    }

    pub fn observation_len(&self) -> usize {
        self.in_frames * self.roi_size.pow(3)
    }
}

#[derive(Debug, Clone)]
struct ConvLayer {
    geom: ConvGeom,
    pool: bool,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, Copy)]
struct FcLayer {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

/// A named contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    conv: Vec<ConvLayer>,
    heads: Vec<Vec<FcLayer>>,
    trunk_len: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let mut off = 0;
        let mut conv = Vec::with_capacity(CONV_LAYERS);
        let mut s = cfg.roi_size;
        let mut in_c = cfg.in_frames;
        for l in 0..CONV_LAYERS {
            let geom = ConvGeom {
                in_c,
                out_c: cfg.conv_channels[l],
                k: cfg.conv_kernels[l],
                s,
            };
            let w_len = geom.out_c * geom.in_c * geom.k.pow(3);
            let pool = cfg.pool_after.contains(&l);
            conv.push(ConvLayer {
                geom,
                pool,
                w_off: off,
                b_off: off + w_len,
            });
            off += w_len + geom.out_c;
            in_c = geom.out_c;
            if pool {
                s /= 2;
            }
        }
        let trunk_len = off;
        let feat = cfg.feature_len();
        let widen = if cfg.comm_enabled { 2 } else { 1 };
        let mut heads = Vec::with_capacity(cfg.n_agents);
        for _ in 0..cfg.n_agents {
            let mut layers = Vec::with_capacity(FC_LAYERS);
            for j in 0..FC_LAYERS {
                let n_in = if j == 0 { feat } else { cfg.fc_sizes[j - 1] * widen };
                let n_out = if j + 1 < FC_LAYERS { cfg.fc_sizes[j] } else { cfg.n_actions };
                layers.push(FcLayer {
                    n_in,
                    n_out,
                    w_off: off,
                    b_off: off + n_in * n_out,
                });
                off += n_in * n_out + n_out;
            }
            heads.push(layers);
        }
        Self {
            conv,
            heads,
            trunk_len,
            total: off,
        }
    }
}

/// Exact number of trainable parameters for `cfg`.
pub fn count_params(cfg: &NetConfig) -> Result<usize> {
    cfg.validate()?;
    Ok(Layout::new(cfg).total)
}

/// Flat parameter vector in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetParams {
    pub values: Vec<f32>,
}

impl QNetParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Deep copy for the target network; later online updates do not reach it.
pub fn copy_to_target(online: &QNetParams) -> QNetParams {
    online.clone()
}

#[derive(Debug, Clone, Default)]
struct UnitCache<T> {
    /// Post-activation output of each conv layer, `[c][s³]`.
    conv_out: Vec<Vec<T>>,
    pooled: Vec<Option<(Vec<T>, Vec<u32>)>>,
}

impl<T: Real> UnitCache<T> {
    fn layer_output(&self, l: usize) -> &[T] {
        match &self.pooled[l] {
            Some((p, _)) => p,
            None => &self.conv_out[l],
        }
    }
}

/// Intermediates of one forward pass, consumed by [`QNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch_size: usize,
    input: Vec<T>,
    units: Vec<UnitCache<T>>,
    /// `fc_in[j][unit]`: input of FC layer `j`, message included.
    fc_in: Vec<Vec<Vec<T>>>,
    /// `fc_out[j][unit]`: post-activation output of FC layer `j`.
    fc_out: Vec<Vec<Vec<T>>>,
}

impl<T> ForwardCache<T> {
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }
}

/// Gradients in canonical parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

/// Units processed per parallel task; fixed so reductions are reproducible
/// for any thread count.
const UNIT_CHUNK: usize = 4;

#[derive(Debug, Clone)]
pub struct QNet {
    cfg: NetConfig,
    layout: Layout,
}

impl QNet {
    pub fn new(cfg: NetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        Ok(Self { cfg, layout })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn trunk_param_count(&self) -> usize {
        self.layout.trunk_len
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        for (l, c) in self.layout.conv.iter().enumerate() {
            out.push(ParamGroup {
                name: format!("conv{l}.weight"),
                offset: c.w_off,
                len: c.b_off - c.w_off,
            });
            out.push(ParamGroup {
                name: format!("conv{l}.bias"),
                offset: c.b_off,
                len: c.geom.out_c,
            });
        }
        for (a, head) in self.layout.heads.iter().enumerate() {
            for (j, f) in head.iter().enumerate() {
                out.push(ParamGroup {
                    name: format!("agent{a}.fc{j}.weight"),
                    offset: f.w_off,
                    len: f.n_in * f.n_out,
                });
                out.push(ParamGroup {
                    name: format!("agent{a}.fc{j}.bias"),
                    offset: f.b_off,
                    len: f.n_out,
                });
            }
        }
        out
    }

    /// He-normal weights (variance `2 / fan_in`), zero biases.
    pub fn init_params(&self, rng: &mut Rng) -> QNetParams {
        let mut values = vec![0f32; self.layout.total];
        for c in &self.layout.conv {
            let std = (2.0 / (c.geom.in_c * c.geom.k.pow(3)) as f64).sqrt();
            for v in &mut values[c.w_off..c.b_off] {
                *v = (rng.normal() * std) as f32;
            }
        }
        for head in &self.layout.heads {
            for f in head {
                let std = (2.0 / f.n_in as f64).sqrt();
                for v in &mut values[f.w_off..f.b_off] {
                    *v = (rng.normal() * std) as f32;
                }
            }
        }
        QNetParams { values }
    }

    fn check_inputs<T>(&self, params: &[T], batch: &[T], batch_size: usize) -> Result<()> {
        if params.len() != self.layout.total {
            return Err(NetError::ShapeMismatch(format!(
                "{} parameters, network has {}",
                params.len(),
                self.layout.total
            )));
        }
        let want = batch_size * self.cfg.n_agents * self.cfg.observation_len();
        if batch.len() != want {
            return Err(NetError::ShapeMismatch(format!(
                "batch of {} values, expected {batch_size} x {} agents x {} frames x {}^3 = {want}",
                batch.len(),
                self.cfg.n_agents,
                self.cfg.in_frames,
                self.cfg.roi_size
            )));
        }
        Ok(())
    }

    /// Q-values `[batch][agent][action]` without keeping intermediates.
    pub fn predict<T: Real>(&self, params: &[T], batch: &[T], batch_size: usize) -> Result<Vec<T>> {
        self.check_inputs(params, batch, batch_size)?;
        let units = batch_size * self.cfg.n_agents;
        let obs = self.cfg.observation_len();
        let feat = self.cfg.feature_len();
        let wf = self.trunk_f64(params);
        let mut features = vec![T::default(); units * feat];
        features
            .par_chunks_mut(feat * UNIT_CHUNK)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let mut scratch = TrunkScratch::default();
                for (k, f) in chunk.chunks_mut(feat).enumerate() {
                    let u = ci * UNIT_CHUNK + k;
                    let cache = self.trunk_forward(&wf, &batch[u * obs..(u + 1) * obs], &mut scratch);
                    f.copy_from_slice(cache.layer_output(CONV_LAYERS - 1));
                }
            });
        let (q, _, _) = self.heads_forward(params, batch_size, |u| &features[u * feat..(u + 1) * feat], false);
        Ok(q)
    }

    /// Q-values `[batch][agent][action]` plus everything backward needs.
    pub fn forward<T: Real>(&self, params: &[T], batch: &[T], batch_size: usize) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_inputs(params, batch, batch_size)?;
        let units = batch_size * self.cfg.n_agents;
        let obs = self.cfg.observation_len();
        let wf = self.trunk_f64(params);
        let mut unit_caches: Vec<UnitCache<T>> = vec![UnitCache::default(); units];
        unit_caches
            .par_chunks_mut(UNIT_CHUNK)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let mut scratch = TrunkScratch::default();
                for (k, c) in chunk.iter_mut().enumerate() {
                    let u = ci * UNIT_CHUNK + k;
                    *c = self.trunk_forward(&wf, &batch[u * obs..(u + 1) * obs], &mut scratch);
                }
            });
        let (q, fc_in, fc_out) =
            self.heads_forward(params, batch_size, |u| unit_caches[u].layer_output(CONV_LAYERS - 1), true);
        Ok((
            q,
            ForwardCache {
                batch_size,
                input: batch.to_vec(),
                units: unit_caches,
                fc_in,
                fc_out,
            },
        ))
    }

    fn trunk_f64<T: Real>(&self, params: &[T]) -> Vec<f64> {
        params[..self.layout.trunk_len].iter().map(|v| v.to_f64()).collect()
    }

    fn trunk_forward<T: Real>(&self, wf: &[f64], input: &[T], scratch: &mut TrunkScratch) -> UnitCache<T> {
        let mut cache = UnitCache {
            conv_out: Vec::with_capacity(CONV_LAYERS),
            pooled: Vec::with_capacity(CONV_LAYERS),
        };
        for (l, layer) in self.layout.conv.iter().enumerate() {
            let g = &layer.geom;
            {
                let x: &[T] = if l == 0 { input } else { cache.layer_output(l - 1) };
                kernels::im2col(g, x, &mut scratch.cols);
            }
            let mut y = vec![T::default(); g.out_c * g.vol()];
            kernels::conv_relu_forward(
                g,
                &wf[layer.w_off..layer.b_off],
                &wf[layer.b_off..layer.b_off + g.out_c],
                &scratch.cols,
                &mut scratch.z,
                &mut y,
            );
            let pooled = layer.pool.then(|| {
                let o = g.s / 2;
                let mut p = vec![T::default(); g.out_c * o * o * o];
                let mut am = vec![0u32; p.len()];
                kernels::max_pool(g.out_c, g.s, &y, &mut p, &mut am);
                (p, am)
            });
            cache.conv_out.push(y);
            cache.pooled.push(pooled);
        }
        cache
    }

    #[allow(clippy::type_complexity)]
    fn heads_forward<'a, T: Real, F>(
        &self,
        params: &[T],
        batch_size: usize,
        features: F,
        keep: bool,
    ) -> (Vec<T>, Vec<Vec<Vec<T>>>, Vec<Vec<Vec<T>>>)
    where
        F: Fn(usize) -> &'a [T],
        T: 'a,
    {
        let n = self.cfg.n_agents;
        let units = batch_size * n;
        let mut fc_in: Vec<Vec<Vec<T>>> = Vec::new();
        let mut fc_out: Vec<Vec<Vec<T>>> = Vec::new();
        let mut q = vec![T::default(); units * self.cfg.n_actions];
        let mut prev: Vec<Vec<T>> = (0..units).map(|u| features(u).to_vec()).collect();
        let mut message: Vec<Vec<T>> = Vec::new();
        for j in 0..FC_LAYERS {
            let last = j + 1 == FC_LAYERS;
            let mut inputs = Vec::with_capacity(units);
            let mut outputs = Vec::with_capacity(units);
            let mut acc = Vec::new();
            for u in 0..units {
                let (b, a) = (u / n, u % n);
                let f = self.layout.heads[a][j];
                let mut input = std::mem::take(&mut prev[u]);
                if j > 0 && self.cfg.comm_enabled {
                    input.extend_from_slice(&message[b]);
                }
                debug_assert_eq!(input.len(), f.n_in);
                acc.clear();
                acc.resize(f.n_out, 0.0);
                kernels::dense(&params[f.w_off..f.b_off], &params[f.b_off..f.b_off + f.n_out], &input, &mut acc);
                let out: Vec<T> = if last {
                    acc.iter().map(|&v| T::from_f64(v)).collect()
                } else {
                    acc.iter().map(|&v| T::from_f64(v.max(0.0))).collect()
                };
                if last {
                    q[u * self.cfg.n_actions..(u + 1) * self.cfg.n_actions].copy_from_slice(&out);
                }
                inputs.push(input);
                outputs.push(out);
            }
            if !last {
                let width = outputs[0].len();
                message = (0..batch_size)
                    .map(|b| {
                        (0..width)
                            .map(|i| {
                                let sum: f64 = (0..n).map(|a| outputs[b * n + a][i].to_f64()).sum();
                                T::from_f64(sum / n as f64)
                            })
                            .collect()
                    })
                    .collect();
                prev = outputs.clone();
            }
            if keep {
                fc_in.push(inputs);
                fc_out.push(outputs);
            }
        }
        (q, fc_in, fc_out)
    }

    /// Exact gradients of `Σ dq · Q` with respect to every parameter.
    pub fn backward<T: Real>(&self, params: &[T], cache: &ForwardCache<T>, dq: &[f64]) -> Result<Gradients> {
        let n = self.cfg.n_agents;
        let units = cache.batch_size * n;
        if params.len() != self.layout.total {
            return Err(NetError::CacheMismatch(format!(
                "{} parameters, network has {}",
                params.len(),
                self.layout.total
            )));
        }
        if cache.units.len() != units
            || cache.fc_in.len() != FC_LAYERS
            || cache.input.len() != units * self.cfg.observation_len()
        {
            return Err(NetError::CacheMismatch("cache was produced by a different network".into()));
        }
        if dq.len() != units * self.cfg.n_actions {
            return Err(NetError::CacheMismatch(format!(
                "dq has {} values, expected {}",
                dq.len(),
                units * self.cfg.n_actions
            )));
        }
        let mut grads = vec![0f64; self.layout.total];

        // Heads, top down. `dz[u]` is the gradient at layer j's pre-activation.
        let mut dz: Vec<Vec<f64>> = (0..units)
            .map(|u| dq[u * self.cfg.n_actions..(u + 1) * self.cfg.n_actions].to_vec())
            .collect();
        let mut d_features: Vec<Vec<f64>> = Vec::new();
        for j in (0..FC_LAYERS).rev() {
            let mut d_own: Vec<Vec<f64>> = Vec::with_capacity(units);
            let mut d_msg: Vec<Vec<f64>> = Vec::new();
            for u in 0..units {
                let (b, a) = (u / n, u % n);
                let f = self.layout.heads[a][j];
                let input = &cache.fc_in[j][u];
                let w = &params[f.w_off..f.b_off];
                let g = &dz[u];
                for (o, &go) in g.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    grads[f.b_off + o] += go;
                    let row = &mut grads[f.w_off + o * f.n_in..f.w_off + (o + 1) * f.n_in];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += go * x.to_f64();
                    }
                }
                let mut d_in = vec![0f64; f.n_in];
                for (o, &go) in g.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    let row = &w[o * f.n_in..(o + 1) * f.n_in];
                    for (d, wv) in d_in.iter_mut().zip(row) {
                        *d += go * wv.to_f64();
                    }
                }
                if j > 0 && self.cfg.comm_enabled {
                    let width = f.n_in / 2;
                    let msg_part = d_in.split_off(width);
                    if d_msg.len() <= b {
                        d_msg.resize(b + 1, vec![0f64; width]);
                    }
                    for (m, v) in d_msg[b].iter_mut().zip(&msg_part) {
                        *m += v;
                    }
                }
                d_own.push(d_in);
            }
            if j == 0 {
                d_features = d_own;
                break;
            }
            // The message is the mean over agents, own output included.
            for (u, d) in d_own.iter_mut().enumerate() {
                if self.cfg.comm_enabled {
                    let b = u / n;
                    for (dv, m) in d.iter_mut().zip(&d_msg[b]) {
                        *dv += m / n as f64;
                    }
                }
                for (dv, h) in d.iter_mut().zip(&cache.fc_out[j - 1][u]) {
                    if h.to_f64() <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            dz = d_own;
        }

        // Trunk, per unit, reduced in fixed chunk order.
        let trunk_len = self.layout.trunk_len;
        let obs = self.cfg.observation_len();
        let wf = self.trunk_f64(params);
        let partials: Vec<Vec<f64>> = (0..units.div_ceil(UNIT_CHUNK))
            .into_par_iter()
            .map(|ci| {
                let mut local = vec![0f64; trunk_len];
                let mut scratch = TrunkScratch::default();
                for u in ci * UNIT_CHUNK..((ci + 1) * UNIT_CHUNK).min(units) {
                    self.trunk_backward(
                        &wf,
                        &cache.input[u * obs..(u + 1) * obs],
                        &cache.units[u],
                        &d_features[u],
                        &mut local,
                        &mut scratch,
                    );
                }
                local
            })
            .collect();
        for p in partials {
            for (g, v) in grads[..trunk_len].iter_mut().zip(&p) {
                *g += v;
            }
        }
        Ok(Gradients { values: grads })
    }

    fn trunk_backward<T: Real>(
        &self,
        wf: &[f64],
        input: &[T],
        cache: &UnitCache<T>,
        d_out: &[f64],
        grads: &mut [f64],
        scratch: &mut TrunkScratch,
    ) {
        let mut d_act = d_out.to_vec();
        for l in (0..CONV_LAYERS).rev() {
            let layer = &self.layout.conv[l];
            let g = &layer.geom;
            let y = &cache.conv_out[l];
            let mut dz = match &cache.pooled[l] {
                Some((_, argmax)) => {
                    let mut d = vec![0f64; y.len()];
                    for (dv, &i) in d_act.iter().zip(argmax) {
                        d[i as usize] += dv;
                    }
                    d
                }
                None => std::mem::take(&mut d_act),
            };
            for (d, v) in dz.iter_mut().zip(y) {
                if v.to_f64() <= 0.0 {
                    *d = 0.0;
                }
            }
            let x: &[T] = if l == 0 { input } else { cache.layer_output(l - 1) };
            kernels::im2col(g, x, &mut scratch.cols);
            let (dw, rest) = grads[layer.w_off..].split_at_mut(layer.b_off - layer.w_off);
            let db = &mut rest[..g.out_c];
            kernels::conv_backward(
                g,
                &wf[layer.w_off..layer.b_off],
                &scratch.cols,
                &dz,
                dw,
                db,
                (l > 0).then_some(&mut d_act),
                &mut scratch.dcols,
            );
        }
    }
}

#[derive(Default)]
struct TrunkScratch {
    cols: Vec<f64>,
    dcols: Vec<f64>,
    z: Vec<f64>,
}
