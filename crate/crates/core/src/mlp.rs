//! Feed-forward ReLU network with inverted dropout, a softmax output and
//! softmax cross-entropy loss, trained with mini-batch Adam.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::{Rng, RngPlan};

/// Floor applied to the target-class probability inside the log.
pub const CE_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
    pub dropout: f64,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, dropout: f64) -> Self {
        Self {
            input_dim,
            hidden,
            n_classes: 2,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_classes == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("all layer sizes must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden);
        sizes.push(self.n_classes);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Fully connected layer. `weights[i * n_out + o]` connects input `i` to
/// output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    /// Active column indices of a 0/1 row, strictly increasing.
    Sparse(&'a [u32]),
    Dense(&'a [f64]),
}

/// Everything backpropagation needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    pub input: Vec<f64>,
    /// Active input columns when the input was sparse.
    pub sparse_input: Option<Vec<u32>>,
    /// Pre-activations `z` per layer, output layer last.
    pub pre: Vec<Vec<f64>>,
    /// Hidden activations after ReLU and dropout.
    pub hidden: Vec<Vec<f64>>,
    /// Dropout keep-masks per hidden layer (train mode only).
    pub masks: Vec<Option<Vec<bool>>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    fn scale(&mut self, f: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= f);
            l.bias.iter_mut().for_each(|b| *b *= f);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArchitecture,
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub fingerprint: Fingerprint,
    /// Bumped on every parameter update; caches from older versions are stale.
    #[serde(skip)]
    version: u64,
}

// The version counter is bookkeeping, not part of the model.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.layers == other.layers
            && self.seed == other.seed
            && self.fingerprint == other.fingerprint
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Summed cross-entropy `-sum_i sum_j y_ij ln p_ij` over one-hot targets, and
/// its per-sample mean.
pub fn cross_entropy(targets: &[usize], probs: &[Vec<f64>]) -> Result<(f64, f64)> {
    if targets.len() != probs.len() {
        return Err(Error::invalid("targets and probabilities differ in length"));
    }
    let mut sum = 0.0;
    for (&t, p) in targets.iter().zip(probs) {
        let pt = *p
            .get(t)
            .ok_or_else(|| Error::invalid(format!("target class {t} out of range")))?;
        sum -= pt.max(CE_EPS).ln();
    }
    let mean = if targets.is_empty() {
        0.0
    } else {
        sum / targets.len() as f64
    };
    Ok((sum, mean))
}

impl Mlp {
    /// He-normal weights (variance `2 / fan_in`), zero biases.
    pub fn init(arch: MlpArchitecture, seed: u64, fingerprint: Fingerprint) -> Result<Self> {
        arch.validate()?;
        let mut rng = Rng::seed_from_u64(seed);
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(n_in, n_out)| {
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("finite std");
                Layer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| normal.sample(&mut rng)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(Self {
            arch,
            layers,
            seed,
            fingerprint,
            version: 0,
        })
    }

    /// Network with explicit parameters, e.g. for hand-checked examples.
    pub fn from_layers(arch: MlpArchitecture, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let dims = arch.layer_dims();
        if dims.len() != layers.len()
            || dims.iter().zip(&layers).any(|(&(i, o), l)| {
                l.n_in != i || l.n_out != o || l.weights.len() != i * o || l.bias.len() != o
            })
        {
            return Err(Error::invalid("layer shapes do not chain"));
        }
        let fingerprint = Fingerprint::anonymous(arch.input_dim);
        Ok(Self {
            arch,
            layers,
            seed: 0,
            fingerprint,
            version: 0,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: Input) -> Result<()> {
        let dim = self.arch.input_dim;
        match x {
            Input::Dense(v) if v.len() != dim => Err(Error::invalid(format!(
                "input has {} features, network expects {dim}",
                v.len()
            ))),
            Input::Sparse(r) if r.last().is_some_and(|&j| j as usize >= dim) => Err(
                Error::invalid(format!("sparse input column out of range for {dim} inputs")),
            ),
            _ => Ok(()),
        }
    }

    /// Forward pass. In train mode each hidden unit is kept with probability
    /// `1 - dropout` and kept activations are scaled by `1 / (1 - dropout)`.
    pub fn forward(&self, x: Input, mode: Mode, rng: &mut Rng) -> Result<ForwardCache> {
        let keep = 1.0 - self.arch.dropout;
        let use_dropout = mode == Mode::Train && self.arch.dropout > 0.0;
        self.forward_masked(x, |n| {
            use_dropout.then(|| (0..n).map(|_| rng.random::<f64>() < keep).collect())
        })
    }

    /// Forward pass with caller-supplied dropout masks, one per hidden layer
    /// (`None` disables dropout on that layer).
    pub fn forward_with_masks(&self, x: Input, masks: &[Option<Vec<bool>>]) -> Result<ForwardCache> {
        if masks.len() != self.arch.hidden.len() {
            return Err(Error::invalid("one mask entry per hidden layer required"));
        }
        let mut it = masks.iter();
        self.forward_masked(x, |_| it.next().cloned().flatten())
    }

    fn forward_masked(
        &self,
        x: Input,
        mut mask_for: impl FnMut(usize) -> Option<Vec<bool>>,
    ) -> Result<ForwardCache> {
        self.check_input(x)?;
        let scale = 1.0 / (1.0 - self.arch.dropout);
        let n_layers = self.layers.len();
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        let mut masks: Vec<Option<Vec<bool>>> = Vec::with_capacity(n_layers - 1);

        let (input, sparse_input) = match x {
            Input::Dense(v) => (v.to_vec(), None),
            Input::Sparse(r) => (Vec::new(), Some(r.to_vec())),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            if l == 0 {
                match x {
                    Input::Sparse(r) => {
                        for &i in r {
                            let w = &layer.weights[i as usize * layer.n_out..][..layer.n_out];
                            z.iter_mut().zip(w).for_each(|(zo, wo)| *zo += wo);
                        }
                    }
                    Input::Dense(v) => affine_accumulate(layer, v, &mut z),
                }
            } else {
                affine_accumulate(layer, &hidden[l - 1], &mut z);
            }
            if l + 1 < n_layers {
                let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                let mask = mask_for(a.len());
                if let Some(m) = &mask {
                    if m.len() != a.len() {
                        return Err(Error::invalid("dropout mask has the wrong width"));
                    }
                    for (ai, &k) in a.iter_mut().zip(m) {
                        *ai = if k { *ai * scale } else { 0.0 };
                    }
                }
                masks.push(mask);
                hidden.push(a);
            }
            pre.push(z);
        }
        let probs = softmax(pre.last().expect("at least one layer"));
        Ok(ForwardCache {
            version: self.version,
            input,
            sparse_input,
            pre,
            hidden,
            masks,
            probs,
        })
    }

    /// Gradients of `-ln p_target` for the sample in `cache`.
    pub fn backward(&self, cache: &ForwardCache, target: usize) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, target, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients of one sample to `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, target: usize, grads: &mut Gradients) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::invalid(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        if target >= self.arch.n_classes {
            return Err(Error::invalid(format!("target class {target} out of range")));
        }
        let scale = 1.0 / (1.0 - self.arch.dropout);
        let mut dz = cache.probs.clone();
        dz[target] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            g.bias.iter_mut().zip(&dz).for_each(|(gb, d)| *gb += d);
            if l == 0 {
                match &cache.sparse_input {
                    Some(active) => {
                        for &i in active {
                            let gw = &mut g.weights[i as usize * layer.n_out..][..layer.n_out];
                            gw.iter_mut().zip(&dz).for_each(|(w, d)| *w += d);
                        }
                    }
                    None => outer_accumulate(&cache.input, &dz, &mut g.weights),
                }
                break;
            }
            let below = &cache.hidden[l - 1];
            outer_accumulate(below, &dz, &mut g.weights);
            // Back through the weights, dropout and ReLU of the layer below.
            let mut da = vec![0.0; layer.n_in];
            for (i, dai) in da.iter_mut().enumerate() {
                let w = &layer.weights[i * layer.n_out..][..layer.n_out];
                *dai = w.iter().zip(&dz).map(|(w, d)| w * d).sum();
            }
            if let Some(mask) = &cache.masks[l - 1] {
                for (d, &k) in da.iter_mut().zip(mask) {
                    *d = if k { *d * scale } else { 0.0 };
                }
            }
            let z_below = &cache.pre[l - 1];
            for (d, &z) in da.iter_mut().zip(z_below) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            dz = da;
        }
        Ok(())
    }

    /// Eval-mode probability of class 1.
    pub fn predict_proba(&self, x: Input) -> Result<f64> {
        let cache = self.forward_masked(x, |_| None)?;
        Ok(cache.probs[1])
    }

    pub fn predict_dataset(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.features
            .rows()
            .iter()
            .map(|r| self.predict_proba(Input::Sparse(r)))
            .collect()
    }

    /// Total summed cross-entropy of `data` in eval mode.
    pub fn loss(&self, inputs: &[Input], targets: &[usize]) -> Result<f64> {
        let probs = inputs
            .iter()
            .map(|&x| Ok(self.forward_masked(x, |_| None)?.probs))
            .collect::<Result<Vec<_>>>()?;
        Ok(cross_entropy(targets, &probs)?.0)
    }

    fn touch(&mut self) {
        self.version += 1;
    }
}

fn affine_accumulate(layer: &Layer, x: &[f64], z: &mut [f64]) {
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let w = &layer.weights[i * layer.n_out..][..layer.n_out];
        z.iter_mut().zip(w).for_each(|(zo, wo)| *zo += xi * wo);
    }
}

fn outer_accumulate(x: &[f64], dz: &[f64], gw: &mut [f64]) {
    let n_out = dz.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut gw[i * n_out..][..n_out];
        row.iter_mut().zip(dz).for_each(|(w, d)| *w += xi * d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, laid out like the network's layers.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<Layer> = net.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect();
        Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One Adam update of a parameter slice at step `t` (1-based):
///
/// ```text
/// m = b1 m + (1 - b1) g;   v = b2 v + (1 - b2) g^2
/// w -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
pub fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, c: &AdamConfig) {
    let bc1 = 1.0 - c.beta1.powi(t as i32);
    let bc2 = 1.0 - c.beta2.powi(t as i32);
    for (((w, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
    }
}

pub fn adam_step(state: &mut AdamState, net: &mut Mlp, grads: &Gradients) -> Result<()> {
    if grads.layers.len() != net.layers.len() {
        return Err(Error::invalid("gradient shapes do not match the network"));
    }
    state.t += 1;
    let t = state.t;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        if g.weights.len() != layer.weights.len() || g.bias.len() != layer.bias.len() {
            return Err(Error::invalid("gradient shapes do not match the network"));
        }
        let (m, v) = (&mut state.m[l], &mut state.v[l]);
        adam_update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights, t, &state.config);
        adam_update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias, t, &state.config);
    }
    net.touch();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256, 128, 64, 32],
            dropout: 0.3,
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedMlp {
    pub net: Mlp,
    /// Mean train-mode cross-entropy per epoch.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch training with a seeded shuffle per epoch. Each batch step uses
/// the mean of the per-sample gradients.
pub fn fit_mlp(data: &LabeledDataset, params: &MlpParams, plan: &RngPlan) -> Result<TrainedMlp> {
    data.require_both_classes()?;
    if params.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let arch = MlpArchitecture::new(data.n_features(), params.hidden.clone(), params.dropout);
    let mut net = Mlp::init(arch, plan.child_seed("init", 0), data.fingerprint.clone())?;
    let mut adam = AdamState::new(&net, params.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs as u64 {
        let mut shuffle_rng = plan.rng("shuffle", epoch);
        let mut dropout_rng = plan.rng("dropout", epoch);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            for &i in batch {
                let cache = net.forward(Input::Sparse(data.features.row(i)), Mode::Train, &mut dropout_rng)?;
                let target = data.labels[i] as usize;
                epoch_loss -= cache.probs[target].max(CE_EPS).ln();
                net.backward_into(&cache, target, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut adam, &mut net, &grads)?;
        }
        loss_trace.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainedMlp { net, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch(hidden: Vec<usize>, dropout: f64) -> MlpArchitecture {
        MlpArchitecture::new(2, hidden, dropout)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), [0.5, 0.5]);
        let s = softmax(&[1000.0, 0.0]);
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1] >= 0.0 && s[1] < 1e-300);
        let s = softmax(&[1.0, 2.0, 3.0]);
        let want = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_8];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let (sum, _) = cross_entropy(&[0], &[vec![1.0, 0.0]]).unwrap();
        assert!(sum.abs() < 1e-15);
        let (sum, mean) = cross_entropy(&[0, 1], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((mean - 2f64.ln()).abs() < 1e-15 && (sum - 2.0 * 2f64.ln()).abs() < 1e-15);
        let (sum, _) = cross_entropy(&[1], &[vec![0.2, 0.8]]).unwrap();
        assert!((sum - 0.223_143_551_314_209_76).abs() < 1e-15);
        let (sum, _) = cross_entropy(&[1], &[vec![1.0, 0.0]]).unwrap();
        assert!((sum + CE_EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_network_is_uniform() {
        let arch = tiny_arch(vec![3], 0.3);
        let net = Mlp::from_layers(arch, vec![Layer::zeros(2, 3), Layer::zeros(3, 2)]).unwrap();
        let mut rng = RngPlan::new(0).rng("t", 0);
        let c = net.forward(Input::Dense(&[0.4, -1.0]), Mode::Train, &mut rng).unwrap();
        assert_eq!(c.probs, [0.5, 0.5]);
        assert_eq!(net.predict_proba(Input::Dense(&[1.0, 1.0])).unwrap(), 0.5);
    }

    #[test]
    fn hand_computed_one_unit_network() {
        // x = (1, 2); hidden z = 0.5*1 - 0.25*2 + 0.3 = 0.3 -> relu 0.3
        // logits: (0.3*1.0 + 0.1, 0.3*(-2.0) + 0.2) = (0.4, -0.4)
        // p1 = sigmoid(-0.8)
        let arch = tiny_arch(vec![1], 0.0);
        let layers = vec![
            Layer { n_in: 2, n_out: 1, weights: vec![0.5, -0.25], bias: vec![0.3] },
            Layer { n_in: 1, n_out: 2, weights: vec![1.0, -2.0], bias: vec![0.1, 0.2] },
        ];
        let net = Mlp::from_layers(arch, layers).unwrap();
        let p = net.predict_proba(Input::Dense(&[1.0, 2.0])).unwrap();
        let want = 1.0 / (1.0 + 0.8f64.exp());
        assert!((p - want).abs() < 1e-15, "{p} vs {want}");
    }

    #[test]
    fn dropout_off_means_train_equals_eval() {
        let net = Mlp::init(tiny_arch(vec![8, 4], 0.0), 3, Fingerprint::anonymous(2)).unwrap();
        let mut rng = RngPlan::new(1).rng("t", 0);
        let train = net.forward(Input::Dense(&[0.3, 0.7]), Mode::Train, &mut rng).unwrap();
        let eval = net.forward(Input::Dense(&[0.3, 0.7]), Mode::Eval, &mut rng).unwrap();
        assert_eq!(train.probs, eval.probs);
    }

    #[test]
    fn sparse_and_dense_first_layer_agree() {
        let arch = MlpArchitecture::new(6, vec![5, 3], 0.0);
        let net = Mlp::init(arch, 11, Fingerprint::anonymous(6)).unwrap();
        let dense = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let a = net.forward_with_masks(Input::Dense(&dense), &[None, None]).unwrap();
        let b = net.forward_with_masks(Input::Sparse(&[1, 3, 4]), &[None, None]).unwrap();
        assert_eq!(a.probs, b.probs);
        let ga = net.backward(&a, 1).unwrap();
        let gb = net.backward(&b, 1).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn output_gradient_identity() {
        let arch = tiny_arch(vec![3], 0.0);
        let net = Mlp::from_layers(arch, vec![Layer::zeros(2, 3), Layer::zeros(3, 2)]).unwrap();
        let c = net.forward_with_masks(Input::Dense(&[1.0, 1.0]), &[None]).unwrap();
        let g = net.backward(&c, 0).unwrap();
        assert_eq!(g.layers[1].bias, [-0.5, 0.5]);
    }

    #[test]
    fn zero_input_kills_first_layer_weight_gradients() {
        let net = Mlp::init(tiny_arch(vec![4], 0.0), 5, Fingerprint::anonymous(2)).unwrap();
        let c = net.forward_with_masks(Input::Dense(&[0.0, 0.0]), &[None]).unwrap();
        let g = net.backward(&c, 1).unwrap();
        assert!(g.layers[0].weights.iter().all(|&w| w == 0.0));
        assert!(g.layers[1].bias.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = Mlp::init(tiny_arch(vec![2], 0.0), 5, Fingerprint::anonymous(2)).unwrap();
        let c = net.forward_with_masks(Input::Dense(&[1.0, 0.0]), &[None]).unwrap();
        let g = net.backward(&c, 0).unwrap();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        adam_step(&mut adam, &mut net, &g).unwrap();
        assert!(net.backward(&c, 0).is_err());
    }

    #[test]
    fn adam_examples() {
        let c = AdamConfig::default();
        let (mut w, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam_update(&mut w, &[1.0], &mut m, &mut v, 1, &c);
        assert!((w[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-12);
        let (mut w, mut m, mut v) = ([0.7], [0.0], [0.0]);
        adam_update(&mut w, &[0.0], &mut m, &mut v, 1, &c);
        assert_eq!(w, [0.7]);
        for g in [-3.5, 0.02, 17.0] {
            let (mut m, mut v) = ([0.0], [0.0]);
            adam_update(&mut [0.0], &[g], &mut m, &mut v, 1, &c);
            assert!((m[0] / (1.0 - c.beta1) - g).abs() <= 1e-12 * g.abs());
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let net = Mlp::init(tiny_arch(vec![2], 0.0), 0, Fingerprint::anonymous(2)).unwrap();
        assert!(net.predict_proba(Input::Dense(&[1.0])).is_err());
        assert!(net.predict_proba(Input::Sparse(&[2])).is_err());
        assert!(MlpArchitecture::new(2, vec![0], 0.1).validate().is_err());
        assert!(MlpArchitecture::new(2, vec![2], 1.0).validate().is_err());
    }

    fn separable_2d(n: usize) -> LabeledDataset {
        // Two binary features; label = feature 0.
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![];
                if i % 2 == 0 {
                    r.push(0);
                }
                if i % 3 == 0 {
                    r.push(1);
                }
                r
            })
            .collect();
        let labels = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        LabeledDataset::from_rows(2, rows, labels).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = separable_2d(20);
        let params = MlpParams { hidden: vec![4], epochs: 0, ..Default::default() };
        let plan = RngPlan::new(2);
        let t = fit_mlp(&d, &params, &plan).unwrap();
        let fresh = Mlp::init(t.net.arch.clone(), plan.child_seed("init", 0), d.fingerprint.clone()).unwrap();
        assert_eq!(t.net.layers, fresh.layers);
        assert!(t.loss_trace.is_empty());
    }

    #[test]
    fn learns_separable_data_deterministically() {
        let d = separable_2d(64);
        let params = MlpParams { hidden: vec![16, 8], epochs: 50, ..Default::default() };
        let a = fit_mlp(&d, &params, &RngPlan::new(4)).unwrap();
        let b = fit_mlp(&d, &params, &RngPlan::new(4)).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        let correct = d
            .features
            .rows()
            .iter()
            .zip(&d.labels)
            .filter(|(r, &y)| (a.net.predict_proba(Input::Sparse(r)).unwrap() >= 0.5) == (y == 1))
            .count();
        assert!(correct as f64 / d.len() as f64 >= 0.99);
    }
}
