//! The forward-model network: particle features → action fusion → temporal
//! cell → displacement head, with hand-rolled backward passes for training.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::nn::{
    self, Conv1d, Dense, LayerNorm, LayerNormCache, LstmCache, LstmCell, Mlp, Params, Scalar,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchVariant {
    /// 1D convolution over particles + recurrent cell (default).
    Conv1dRecurrent,
    /// Recurrent cell on flattened particles, no convolution.
    RecurrentOnly,
    /// Convolution + dense fusion, no recurrence.
    Conv1dOnly,
    /// Flattened particles through a dense layer only.
    MlpBaseline,
}

impl ArchVariant {
    pub const ALL: [ArchVariant; 4] = [
        ArchVariant::Conv1dRecurrent,
        ArchVariant::RecurrentOnly,
        ArchVariant::Conv1dOnly,
        ArchVariant::MlpBaseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ArchVariant::Conv1dRecurrent => "conv1d_recurrent",
            ArchVariant::RecurrentOnly => "recurrent_only",
            ArchVariant::Conv1dOnly => "conv1d_only",
            ArchVariant::MlpBaseline => "mlp_baseline",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        match s {
            "conv1d_recurrent" => Ok(ArchVariant::Conv1dRecurrent),
            "recurrent_only" => Ok(ArchVariant::RecurrentOnly),
            "conv1d_only" => Ok(ArchVariant::Conv1dOnly),
            "mlp_baseline" => Ok(ArchVariant::MlpBaseline),
            other => Err(crate::Error::InvalidConfig(format!(
                "unknown dynamics architecture `{other}`"
            ))),
        }
    }
}

/// Architecture hyperparameters; the defaults follow the reference table
/// (4 conv layers, 32 channels, kernel 3, first stride 2, hidden 32).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub variant: ArchVariant,
    pub conv_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub first_stride: usize,
    pub recurrent_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            variant: ArchVariant::Conv1dRecurrent,
            conv_layers: 4,
            channels: 32,
            kernel: 3,
            first_stride: 2,
            recurrent_hidden: 32,
        }
    }
}

/// Input normalization constants baked into the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub center: [f64; 3],
    pub scale: f64,
}

impl InputNorm {
    pub fn from_bounds(bounds: &crate::sim::ActionBounds) -> Self {
        let c = bounds.center();
        let h = bounds.half_extent();
        InputNorm {
            center: [c.x, c.y, c.z],
            scale: h.x.max(h.y).max(h.z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsNet<F> {
    pub arch: ArchConfig,
    pub n_particles: usize,
    pub action_dim: usize,
    pub out_scale: F,
    pub norm: InputNorm,
    convs: Vec<Conv1d<F>>,
    lstm: Option<LstmCell<F>>,
    fuse: Option<Mlp<F>>,
    head: Dense<F>,
    head_norm: LayerNorm<F>,
}

/// Recurrent state threaded across an episode's steps.
#[derive(Debug, Clone)]
pub struct Hidden<F> {
    pub h: Array2<F>,
    pub c: Array2<F>,
}

impl<F: Scalar> Hidden<F> {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Hidden {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }
}

pub struct StepCache<F> {
    x_particles: Vec<Array2<F>>, // per sample: (3, N) normalized input
    conv_acts: Vec<Vec<Array2<F>>>, // per sample, per layer output (post-activation)
    fused_in: Array2<F>,
    lstm_cache: Option<LstmCache<F>>,
    fuse_cache: Option<nn::MlpCache<F>>,
    hidden_out: Array2<F>,
    ln_cache: LayerNormCache<F>,
    tanh_out: Array2<F>,
}

impl<F: Scalar> DynamicsNet<F> {
    pub fn new(
        arch: ArchConfig,
        n_particles: usize,
        action_dim: usize,
        out_scale: f64,
        norm: InputNorm,
        seed: u64,
    ) -> Self {
        let mut stream = rng::derive(seed, &[0xd1]);
        let mut convs = Vec::new();
        let uses_conv = matches!(
            arch.variant,
            ArchVariant::Conv1dRecurrent | ArchVariant::Conv1dOnly
        );
        if uses_conv {
            for layer in 0..arch.conv_layers {
                let in_c = if layer == 0 { 3 } else { arch.channels };
                let stride = if layer == 0 { arch.first_stride } else { 1 };
                convs.push(Conv1d::new(
                    in_c,
                    arch.channels,
                    arch.kernel,
                    stride,
                    &mut stream,
                ));
            }
        }
        let feature_dim = if uses_conv {
            arch.channels
        } else {
            3 * n_particles
        };
        let fused_dim = feature_dim + action_dim;
        let hidden = arch.recurrent_hidden;
        let (lstm, fuse) = match arch.variant {
            ArchVariant::Conv1dRecurrent | ArchVariant::RecurrentOnly => {
                (Some(LstmCell::new(fused_dim, hidden, &mut stream)), None)
            }
            ArchVariant::Conv1dOnly | ArchVariant::MlpBaseline => {
                (None, Some(Mlp::new(&[fused_dim, hidden, hidden], &mut stream)))
            }
        };
        DynamicsNet {
            arch,
            n_particles,
            action_dim,
            out_scale: F::from_f64(out_scale),
            norm,
            convs,
            lstm,
            fuse,
            head: Dense::new(hidden, 3 * n_particles, &mut stream),
            head_norm: LayerNorm::new(3 * n_particles),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.arch.recurrent_hidden
    }

    /// Zeroes the displacement head (used by the zero-output contract test).
    pub fn zero_head(&mut self) {
        self.head.fill(F::zero());
        self.head_norm.gain.fill(F::zero());
        self.head_norm.bias.fill(F::zero());
    }

    /// Normalizes flat particle positions into model units, shaped (3, N).
    pub fn normalize_particles(&self, flat: &[f64]) -> Array2<F> {
        let n = flat.len() / 3;
        let mut out = Array2::zeros((3, n));
        let s = 1.0 / self.norm.scale;
        for i in 0..n {
            for k in 0..3 {
                out[[k, i]] = F::from_f64((flat[3 * i + k] - self.norm.center[k]) * s);
            }
        }
        out
    }

    pub fn normalize_action(&self, flat: &[f64]) -> Vec<F> {
        let s = 1.0 / self.norm.scale;
        flat.iter()
            .enumerate()
            .map(|(i, &v)| F::from_f64((v - self.norm.center[i % 3]) * s))
            .collect()
    }

    /// One temporal step over a batch. `particles[b]` is the (3, N)
    /// normalized input, `actions` is (B, A). Returns predicted
    /// displacements (B, N*3) in meters and the step cache.
    pub fn forward_step(
        &self,
        particles: &[Array2<F>],
        actions: &Array2<F>,
        hidden: &mut Hidden<F>,
    ) -> (Array2<F>, StepCache<F>) {
        let b = particles.len();
        let uses_conv = !self.convs.is_empty();
        let mut conv_acts: Vec<Vec<Array2<F>>> = Vec::with_capacity(b);
        let feature_dim = if uses_conv {
            self.arch.channels
        } else {
            3 * self.n_particles
        };
        let mut features = Array2::zeros((b, feature_dim));
        for (bi, x) in particles.iter().enumerate() {
            if uses_conv {
                let mut acts = Vec::with_capacity(self.convs.len());
                let mut cur = x.clone();
                for conv in &self.convs {
                    let pre = conv.forward(&cur);
                    let act = nn::leaky_relu(&pre);
                    acts.push(act.clone());
                    cur = act;
                }
                // global mean pool over the particle axis
                let pooled = cur.mean_axis(Axis(1)).unwrap();
                features.row_mut(bi).assign(&pooled);
                conv_acts.push(acts);
            } else {
                let flat: Vec<F> = x.t().iter().copied().collect();
                features
                    .row_mut(bi)
                    .assign(&ndarray::Array1::from_vec(flat));
                conv_acts.push(Vec::new());
            }
        }
        let mut fused_in = Array2::zeros((b, feature_dim + self.action_dim));
        fused_in
            .slice_mut(ndarray::s![.., ..feature_dim])
            .assign(&features);
        fused_in
            .slice_mut(ndarray::s![.., feature_dim..])
            .assign(actions);

        let (hidden_out, lstm_cache, fuse_cache) = match (&self.lstm, &self.fuse) {
            (Some(lstm), None) => {
                let (h2, c2, cache) = lstm.forward(&fused_in, &hidden.h, &hidden.c);
                hidden.h = h2.clone();
                hidden.c = c2;
                (h2, Some(cache), None)
            }
            (None, Some(fuse)) => {
                let (pre, cache) = fuse.forward(&fused_in);
                let act = nn::leaky_relu(&pre);
                (act, None, Some(cache))
            }
            _ => unreachable!("exactly one temporal path exists"),
        };

        let head_out = self.head.forward(&hidden_out);
        let (ln_out, ln_cache) = self.head_norm.forward(&head_out);
        let tanh_out = nn::tanh(&ln_out);
        let pred = tanh_out.mapv(|v| v * self.out_scale);
        let cache = StepCache {
            x_particles: particles.to_vec(),
            conv_acts,
            fused_in,
            lstm_cache,
            fuse_cache,
            hidden_out,
            ln_cache,
            tanh_out,
        };
        (pred, cache)
    }

    /// Backward through one step given d(pred). `dh_next`/`dc_next` carry
    /// recurrent gradients from later steps; returns the pair for the
    /// previous step.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_step(
        &self,
        cache: &StepCache<F>,
        dpred: &Array2<F>,
        dh_next: Array2<F>,
        dc_next: Array2<F>,
        grads: &mut DynamicsNet<F>,
    ) -> (Array2<F>, Array2<F>) {
        let dtanh_out = dpred.mapv(|v| v * self.out_scale);
        let dln = nn::tanh_backward(&cache.tanh_out, &dtanh_out);
        let dhead_out = self
            .head_norm
            .backward(&cache.ln_cache, &dln, &mut grads.head_norm);
        let mut dhidden = self
            .head
            .backward(&cache.hidden_out, &dhead_out, &mut grads.head);
        dhidden = &dhidden + &dh_next;

        let (dfused, dh_prev, dc_prev) = match (&self.lstm, &self.fuse) {
            (Some(lstm), None) => {
                let (dx, dh, dc) = lstm.backward(
                    cache.lstm_cache.as_ref().unwrap(),
                    &dhidden,
                    &dc_next,
                    grads.lstm.as_mut().unwrap(),
                );
                (dx, dh, dc)
            }
            (None, Some(fuse)) => {
                let dpre = nn::leaky_relu_backward(&cache.hidden_out, &dhidden);
                let dx = fuse.backward(
                    cache.fuse_cache.as_ref().unwrap(),
                    &dpre,
                    grads.fuse.as_mut().unwrap(),
                );
                let z = Array2::zeros(dh_next.raw_dim());
                (dx, z.clone(), z)
            }
            _ => unreachable!(),
        };

        // propagate into the conv stack (feature slice only)
        if !self.convs.is_empty() {
            let feature_dim = self.arch.channels;
            let b = cache.x_particles.len();
            for bi in 0..b {
                let acts = &cache.conv_acts[bi];
                let last = &acts[acts.len() - 1];
                let out_len = last.ncols();
                let inv = F::from_f64(1.0 / out_len as f64);
                // mean-pool backward: broadcast over length
                let mut dcur = Array2::zeros((self.arch.channels, out_len));
                for ch in 0..self.arch.channels {
                    let g = dfused[[bi, ch]] * inv;
                    for l in 0..out_len {
                        dcur[[ch, l]] = g;
                    }
                }
                for li in (0..self.convs.len()).rev() {
                    dcur = nn::leaky_relu_backward(&acts[li], &dcur);
                    let input = if li == 0 {
                        &cache.x_particles[bi]
                    } else {
                        &acts[li - 1]
                    };
                    dcur = self.convs[li].backward(input, &dcur, &mut grads.convs[li]);
                }
            }
        }
        (dh_prev, dc_prev)
    }
}

impl<F: Scalar> Params<F> for DynamicsNet<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        for c in &self.convs {
            c.visit(f);
        }
        if let Some(l) = &self.lstm {
            l.visit(f);
        }
        if let Some(m) = &self.fuse {
            m.visit(f);
        }
        self.head.visit(f);
        self.head_norm.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        for c in &mut self.convs {
            c.visit_mut(f);
        }
        if let Some(l) = &mut self.lstm {
            l.visit_mut(f);
        }
        if let Some(m) = &mut self.fuse {
            m.visit_mut(f);
        }
        self.head.visit_mut(f);
        self.head_norm.visit_mut(f);
    }
    fn zeros_like(&self) -> Self {
        DynamicsNet {
            arch: self.arch.clone(),
            n_particles: self.n_particles,
            action_dim: self.action_dim,
            out_scale: self.out_scale,
            norm: self.norm,
            convs: self.convs.iter().map(Params::zeros_like).collect(),
            lstm: self.lstm.as_ref().map(Params::zeros_like),
            fuse: self.fuse.as_ref().map(Params::zeros_like),
            head: self.head.zeros_like(),
            head_norm: self.head_norm.zeros_like(),
        }
    }
}
