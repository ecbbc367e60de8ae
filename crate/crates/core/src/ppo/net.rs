//! Shared feature trunk with actor and critic heads, stored as one flat parameter vector.
//!
//! Trunk: `input -> h0` (ReLU), `h0 -> h1` (linear), `h1 -> h2` (ReLU). Actor: `h2 -> n_actions`
//! scores. Critic: `h2 -> 1`. Weights are row-major `[out][in]`, each followed by its bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [128, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: [usize; 3],
    pub n_actions: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, n_actions: usize) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN,
            n_actions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayout {
    pub name: &'static str,
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl DenseLayout {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let b = self.offset + self.inputs * self.outputs;
        b..b + self.outputs
    }

    pub fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const TRUNK_ACT: [Activation; 3] = [Activation::Relu, Activation::Linear, Activation::Relu];

fn layouts(arch: &Architecture) -> [DenseLayout; 5] {
    let dims = [
        ("state.0", arch.input_dim, arch.hidden[0]),
        ("state.1", arch.hidden[0], arch.hidden[1]),
        ("state.2", arch.hidden[1], arch.hidden[2]),
        ("actor", arch.hidden[2], arch.n_actions),
        ("critic", arch.hidden[2], 1),
    ];
    let mut offset = 0;
    dims.map(|(name, inputs, outputs)| {
        let l = DenseLayout { name, inputs, outputs, offset };
        offset += l.len();
        l
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    arch: Architecture,
    layers: [DenseLayout; 5],
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Input followed by the three trunk outputs (after activation).
    acts: [Vec<f64>; 4],
    pub logits: Vec<f64>,
    pub value: f64,
}

fn dense(params: &[f64], l: &DenseLayout, x: &[f64], out: &mut Vec<f64>) {
    let w = &params[l.weights()];
    let b = &params[l.bias()];
    out.clear();
    out.extend(b.iter().enumerate().map(|(o, &bo)| {
        let row = &w[o * l.inputs..(o + 1) * l.inputs];
        bo + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

/// Accumulates parameter gradients for `dz` (gradient wrt the pre-activation output) and, when
/// `dx` is given, adds the gradient wrt the layer input.
fn dense_back(
    params: &[f64],
    grad: &mut [f64],
    l: &DenseLayout,
    x: &[f64],
    dz: &[f64],
    dx: Option<&mut [f64]>,
) {
    let (wr, br) = (l.weights(), l.bias());
    for (o, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad[br.start + o] += g;
        let gw = &mut grad[wr.start + o * l.inputs..wr.start + (o + 1) * l.inputs];
        for (gwi, xi) in gw.iter_mut().zip(x) {
            *gwi += g * xi;
        }
    }
    if let Some(dx) = dx {
        let w = &params[wr];
        for (o, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &w[o * l.inputs..(o + 1) * l.inputs];
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += g * wi;
            }
        }
    }
}

impl PolicyNet {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let layers = layouts(&arch);
        let total: usize = layers.iter().map(DenseLayout::len).sum();
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layers {
            let bound = (1.0 / l.inputs.max(1) as f64).sqrt();
            for w in &mut params[l.weights()] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Self { arch, layers, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let layers = layouts(&arch);
        let total = layers.iter().map(DenseLayout::len).sum();
        Self {
            arch,
            layers,
            params: vec![0.0; total],
        }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(arch);
        if params.len() != net.params.len() {
            return Err(Error::ModelMismatch(format!(
                "expected {} parameters, found {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayout] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.arch.input_dim {
            return Err(Error::ModelMismatch(format!(
                "state has {} features, network expects {}",
                x.len(),
                self.arch.input_dim
            )));
        }
        let mut acts: [Vec<f64>; 4] = Default::default();
        acts[0] = x.to_vec();
        for i in 0..3 {
            let mut z = Vec::new();
            dense(&self.params, &self.layers[i], &acts[i], &mut z);
            if TRUNK_ACT[i] == Activation::Relu {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts[i + 1] = z;
        }
        let mut logits = Vec::new();
        dense(&self.params, &self.layers[3], &acts[3], &mut logits);
        let mut v = Vec::new();
        dense(&self.params, &self.layers[4], &acts[3], &mut v);
        Ok(Forward { acts, logits, value: v[0] })
    }

    /// Adds `d loss / d params` for the given output gradients into `grad`.
    pub fn backward(&self, fwd: &Forward, dlogits: &[f64], dvalue: f64, grad: &mut [f64]) {
        let top = &fwd.acts[3];
        let mut dh = vec![0.0; top.len()];
        dense_back(&self.params, grad, &self.layers[3], top, dlogits, Some(&mut dh));
        dense_back(&self.params, grad, &self.layers[4], top, &[dvalue], Some(&mut dh));
        for i in (0..3).rev() {
            if TRUNK_ACT[i] == Activation::Relu {
                // post-activation output is zero exactly where the unit is inactive
                for (g, a) in dh.iter_mut().zip(&fwd.acts[i + 1]) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let input = &fwd.acts[i];
            if i == 0 {
                dense_back(&self.params, grad, &self.layers[i], input, &dh, None);
            } else {
                let mut dx = vec![0.0; input.len()];
                dense_back(&self.params, grad, &self.layers[i], input, &dh, Some(&mut dx));
                dh = dx;
            }
        }
    }
}

/// Softmax over valid slots; masked slots get exactly zero.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoValidAction);
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

pub fn policy_forward(net: &PolicyNet, state: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != net.arch.n_actions {
        return Err(Error::ModelMismatch(format!(
            "mask has {} slots, network has {}",
            mask.len(),
            net.arch.n_actions
        )));
    }
    masked_softmax(&net.forward(state)?.logits, mask)
}

pub fn value_forward(net: &PolicyNet, state: &[f64]) -> Result<f64> {
    Ok(net.forward(state)?.value)
}
