use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spline::{silu, silu_derivative, LocalBasis, SplineActivation, SplineGrid};
use crate::error::{GrnError, Result};
use crate::seed::rng_for;

/// How the SiLU base weights are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseInit {
    /// Every `w_b` set to the same value.
    Constant(f64),
    /// `w_b ~ U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    ScaledUniform,
}

/// Architecture and grid settings for [`KanNetwork::init`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    pub grid_size: usize,
    pub order: usize,
    /// Spline domain for the (normalized) network inputs.
    pub input_range: (f64, f64),
    /// Spline domain for hidden activations.
    pub hidden_range: (f64, f64),
    /// Hidden widths; `None` selects `[2d+1, 2(2d+1)+1, 2d+1]`.
    pub hidden_widths: Option<Vec<usize>>,
    pub base_init: BaseInit,
    /// Spline weights are drawn from `U(-s, s)` with `s = spline_init_scale / sqrt(G + k)`.
    pub spline_init_scale: f64,
}

impl Default for KanConfig {
    fn default() -> Self {
        KanConfig {
            grid_size: 10,
            order: 3,
            input_range: (-0.2, 1.2),
            hidden_range: (-3.0, 3.0),
            hidden_widths: None,
            base_init: BaseInit::ScaledUniform,
            spline_init_scale: 0.1,
        }
    }
}

/// Hidden widths used for an input dimension `d`.
pub fn default_hidden_widths(d: usize) -> Vec<usize> {
    let w = 2 * d + 1;
    vec![w, 2 * w + 1, w]
}

/// Matrix of `n_out x n_in` spline activations sharing one grid.
///
/// Weights are stored flat: `base[q * n_in + p]` and
/// `spline[(q * n_in + p) * (G + k) + i]` for activation `(q, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    n_in: usize,
    n_out: usize,
    grid: SplineGrid,
    base_weights: Vec<f64>,
    spline_weights: Vec<f64>,
}

impl KanLayer {
    pub fn new(
        n_in: usize,
        n_out: usize,
        grid: SplineGrid,
        base_weights: Vec<f64>,
        spline_weights: Vec<f64>,
    ) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(GrnError::config("layer dimensions must be positive"));
        }
        if base_weights.len() != n_in * n_out {
            return Err(GrnError::Shape {
                expected: n_in * n_out,
                got: base_weights.len(),
            });
        }
        let ns = n_in * n_out * grid.num_basis();
        if spline_weights.len() != ns {
            return Err(GrnError::Shape {
                expected: ns,
                got: spline_weights.len(),
            });
        }
        if base_weights.iter().chain(&spline_weights).any(|w| !w.is_finite()) {
            return Err(GrnError::domain("layer weights must be finite"));
        }
        Ok(KanLayer {
            n_in,
            n_out,
            grid,
            base_weights,
            spline_weights,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn spline_weights(&self) -> &[f64] {
        &self.spline_weights
    }

    fn num_params(&self) -> usize {
        self.base_weights.len() + self.spline_weights.len()
    }

    /// Activation `phi_{q,p}` mapping input `p` to output `q`.
    pub fn activation(&self, q: usize, p: usize) -> SplineActivation {
        let nb = self.grid.num_basis();
        let idx = q * self.n_in + p;
        SplineActivation {
            base_weight: self.base_weights[idx],
            spline_weights: self.spline_weights[idx * nb..(idx + 1) * nb].to_vec(),
            grid: self.grid.clone(),
        }
    }

    fn forward(&self, input: &[f64], cache: &mut LayerCache, out: &mut [f64]) {
        let nb = self.grid.num_basis();
        cache.input.clear();
        cache.input.extend_from_slice(input);
        cache.silu.clear();
        cache.dsilu.clear();
        cache.local.clear();
        for &x in input {
            cache.silu.push(silu(x));
            cache.dsilu.push(silu_derivative(x));
            cache.local.push(self.grid.local(x));
        }
        for (q, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..self.n_in {
                let idx = q * self.n_in + p;
                acc += self.base_weights[idx] * cache.silu[p];
                let lb = &cache.local[p];
                let w = &self.spline_weights[idx * nb + lb.first..];
                for j in 0..lb.len {
                    acc += w[j] * lb.values[j];
                }
            }
            *o = acc;
        }
    }

    /// Propagates `delta_out = dL/d(out)` to `delta_in = dL/d(input)` and,
    /// when `grads` is given, accumulates parameter gradients into it
    /// (same layout as the layer's parameters).
    fn backward(
        &self,
        cache: &LayerCache,
        delta_out: &[f64],
        delta_in: &mut [f64],
        mut grads: Option<&mut [f64]>,
    ) {
        let nb = self.grid.num_basis();
        let nbase = self.base_weights.len();
        delta_in.iter_mut().for_each(|d| *d = 0.0);
        for (q, &dq) in delta_out.iter().enumerate() {
            if dq == 0.0 {
                continue;
            }
            for p in 0..self.n_in {
                let idx = q * self.n_in + p;
                let lb = &cache.local[p];
                let w = &self.spline_weights[idx * nb + lb.first..];
                let mut dphi = self.base_weights[idx] * cache.dsilu[p];
                for j in 0..lb.len {
                    dphi += w[j] * lb.derivs[j];
                }
                delta_in[p] += dq * dphi;
                if let Some(g) = grads.as_deref_mut() {
                    g[idx] += dq * cache.silu[p];
                    let gs = &mut g[nbase + idx * nb + lb.first..];
                    for j in 0..lb.len {
                        gs[j] += dq * lb.values[j];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    input: Vec<f64>,
    silu: Vec<f64>,
    dsilu: Vec<f64>,
    local: Vec<LocalBasis>,
}

/// Reusable forward/backward buffers for one network.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<LayerCache>,
    activations: Vec<Vec<f64>>,
    delta_a: Vec<f64>,
    delta_b: Vec<f64>,
    normalized: Vec<f64>,
}

/// Per-input affine map `x -> (x - shift) * scale` applied before layer 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(d: usize) -> Self {
        Normalization {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Min-max map of the given samples onto `[0, 1]`. Constant inputs
    /// keep unit scale.
    pub fn min_max<'a>(d: usize, samples: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for s in samples {
            for (p, &v) in s.iter().enumerate().take(d) {
                lo[p] = lo[p].min(v);
                hi[p] = hi[p].max(v);
            }
        }
        let mut shift = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        for p in 0..d {
            if lo[p].is_finite() && hi[p] > lo[p] {
                shift.push(lo[p]);
                scale.push(1.0 / (hi[p] - lo[p]));
            } else if lo[p].is_finite() {
                shift.push(lo[p]);
                scale.push(1.0);
            } else {
                shift.push(0.0);
                scale.push(1.0);
            }
        }
        Normalization { shift, scale }
    }
}

/// Gradients of a squared error with respect to every network weight,
/// laid out like [`KanNetwork::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    values: Vec<f64>,
    // (base start, spline start, end) per layer
    spans: Vec<(usize, usize, usize)>,
}

impl ParamGradients {
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn num_layers(&self) -> usize {
        self.spans.len()
    }

    /// Base-weight gradients of layer `l`, indexed like [`KanLayer::base_weights`].
    pub fn base(&self, l: usize) -> &[f64] {
        let (a, b, _) = self.spans[l];
        &self.values[a..b]
    }

    /// Spline-weight gradients of layer `l`, indexed like [`KanLayer::spline_weights`].
    pub fn spline(&self, l: usize) -> &[f64] {
        let (_, b, c) = self.spans[l];
        &self.values[b..c]
    }
}

/// Composition of KAN layers mapping `d` raw inputs to one scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr")]
pub struct KanNetwork {
    normalization: Normalization,
    layers: Vec<KanLayer>,
}

#[derive(Deserialize)]
struct NetworkRepr {
    normalization: Normalization,
    layers: Vec<KanLayer>,
}

impl TryFrom<NetworkRepr> for KanNetwork {
    type Error = GrnError;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        let layers = r
            .layers
            .into_iter()
            .map(|l| KanLayer::new(l.n_in, l.n_out, l.grid, l.base_weights, l.spline_weights))
            .collect::<Result<Vec<_>>>()?;
        KanNetwork::from_layers(layers, r.normalization)
    }
}

impl KanNetwork {
    pub fn from_layers(layers: Vec<KanLayer>, normalization: Normalization) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| GrnError::config("network needs at least one layer"))?;
        let d = first.n_in;
        for w in layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(GrnError::Shape {
                    expected: w[0].n_out,
                    got: w[1].n_in,
                });
            }
        }
        let last = layers.last().unwrap().n_out;
        if last != 1 {
            return Err(GrnError::Shape {
                expected: 1,
                got: last,
            });
        }
        if normalization.shift.len() != d || normalization.scale.len() != d {
            return Err(GrnError::Shape {
                expected: d,
                got: normalization.shift.len().min(normalization.scale.len()),
            });
        }
        Ok(KanNetwork {
            normalization,
            layers,
        })
    }

    /// Builds a freshly initialized network for `d` inputs with layer
    /// widths `hidden ++ [1]`. Deterministic for a given seed.
    pub fn init(d: usize, config: &KanConfig, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(GrnError::config("input dimension must be at least 1"));
        }
        let hidden = config
            .hidden_widths
            .clone()
            .unwrap_or_else(|| default_hidden_widths(d));
        if hidden.contains(&0) {
            return Err(GrnError::config("hidden widths must be positive"));
        }
        let input_grid = SplineGrid::uniform(
            config.input_range.0,
            config.input_range.1,
            config.grid_size,
            config.order,
        )?;
        let hidden_grid = SplineGrid::uniform(
            config.hidden_range.0,
            config.hidden_range.1,
            config.grid_size,
            config.order,
        )?;
        let nb = input_grid.num_basis();
        let s = config.spline_init_scale / (nb as f64).sqrt();
        let mut rng = rng_for(seed, 0);

        let mut widths = vec![d];
        widths.extend(hidden);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, w) in widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let grid = if l == 0 {
                input_grid.clone()
            } else {
                hidden_grid.clone()
            };
            let bound = 1.0 / (n_in as f64).sqrt();
            let base: Vec<f64> = (0..n_in * n_out)
                .map(|_| match config.base_init {
                    BaseInit::Constant(v) => v,
                    BaseInit::ScaledUniform => rng.random_range(-bound..=bound),
                })
                .collect();
            let spline: Vec<f64> = (0..n_in * n_out * nb)
                .map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 })
                .collect();
            layers.push(KanLayer::new(n_in, n_out, grid, base, spline)?);
        }
        Self::from_layers(layers, Normalization::identity(d))
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    /// Output widths of every layer, e.g. `[13, 27, 13, 1]` for `d = 6`.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.n_out).collect()
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn set_normalization(&mut self, normalization: Normalization) -> Result<()> {
        let d = self.input_dim();
        if normalization.shift.len() != d || normalization.scale.len() != d {
            return Err(GrnError::Shape {
                expected: d,
                got: normalization.shift.len(),
            });
        }
        self.normalization = normalization;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(KanLayer::num_params).sum()
    }

    /// All weights, layer by layer, base weights before spline weights.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.base_weights);
            out.extend_from_slice(&l.spline_weights);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(GrnError::Shape {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nb = l.base_weights.len();
            l.base_weights.copy_from_slice(&params[off..off + nb]);
            off += nb;
            let ns = l.spline_weights.len();
            l.spline_weights.copy_from_slice(&params[off..off + ns]);
            off += ns;
        }
        Ok(())
    }

    pub fn tape(&self) -> Tape {
        Tape {
            caches: vec![LayerCache::default(); self.layers.len()],
            activations: self.layers.iter().map(|l| vec![0.0; l.n_out]).collect(),
            delta_a: Vec::new(),
            delta_b: Vec::new(),
            normalized: vec![0.0; self.input_dim()],
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(GrnError::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GrnError::domain("non-finite network input"));
        }
        Ok(())
    }

    /// Scalar prediction for raw input `x`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut tape = self.tape();
        Ok(self.forward_tape(x, &mut tape))
    }

    /// Gradient of the prediction with respect to the raw (unnormalized) input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut tape = self.tape();
        let mut grad = vec![0.0; self.input_dim()];
        self.forward_tape(x, &mut tape);
        self.backprop(&mut tape, 1.0, None, Some(&mut grad));
        Ok(grad)
    }

    /// Gradients of `(f(x) - target)^2` with respect to every weight.
    pub fn parameter_gradients(&self, x: &[f64], target: f64) -> Result<ParamGradients> {
        self.check_input(x)?;
        let mut tape = self.tape();
        let mut values = vec![0.0; self.num_params()];
        let y = self.forward_tape(x, &mut tape);
        self.backprop(&mut tape, 2.0 * (y - target), Some(&mut values), None);
        let mut spans = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            let b = off + l.base_weights.len();
            let e = b + l.spline_weights.len();
            spans.push((off, b, e));
            off = e;
        }
        Ok(ParamGradients { values, spans })
    }

    /// Forward pass recording everything the backward pass needs.
    /// Input length and finiteness are the caller's responsibility.
    pub(crate) fn forward_tape(&self, x: &[f64], tape: &mut Tape) -> f64 {
        let Tape {
            caches,
            activations,
            normalized,
            ..
        } = tape;
        for (p, v) in normalized.iter_mut().enumerate() {
            *v = (x[p] - self.normalization.shift[p]) * self.normalization.scale[p];
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = activations.split_at_mut(l);
            let input: &[f64] = if l == 0 { normalized } else { &prev[l - 1] };
            layer.forward(input, &mut caches[l], &mut rest[0]);
        }
        activations.last().unwrap()[0]
    }

    /// Backward pass from `dloss = dL/df`. Accumulates parameter gradients
    /// into `param_grads` and writes the raw-input gradient into `input_grad`.
    pub(crate) fn backprop(
        &self,
        tape: &mut Tape,
        dloss: f64,
        mut param_grads: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    ) {
        let Tape {
            caches,
            delta_a,
            delta_b,
            ..
        } = tape;
        delta_a.clear();
        delta_a.push(dloss);
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.num_params();
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            delta_b.clear();
            delta_b.resize(layer.n_in, 0.0);
            let g = param_grads
                .as_deref_mut()
                .map(|g| &mut g[offsets[l]..offsets[l] + layer.num_params()]);
            layer.backward(&caches[l], delta_a, delta_b, g);
            std::mem::swap(delta_a, delta_b);
        }
        if let Some(out) = input_grad {
            for (p, o) in out.iter_mut().enumerate() {
                *o = delta_a[p] * self.normalization.scale[p];
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
