//! Plain fully-connected network with manual reverse-mode gradients.
//!
//! Kept deliberately small: dense layers, ReLU between hidden layers, a
//! linear head, optional fixed per-unit masks. The loss-specific part of
//! backpropagation (the delta at the head) is supplied by the caller.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub(crate) struct Mlp {
    /// One weight matrix per layer, `[out × in]`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

pub(crate) struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

pub(crate) struct ForwardCache {
    /// Post-activation (and post-mask) input of each layer; `[0]` is the batch.
    activations: Vec<Array2<f64>>,
    /// Pre-activation values of the hidden layers.
    pre_activations: Vec<Array2<f64>>,
    /// Raw linear head output.
    pub output: Array2<f64>,
}

impl Mlp {
    /// He-uniform initialization: weights from `U(−√(6/fan_in), √(6/fan_in))`,
    /// biases zero. Entries are drawn row-major so the layout is reproducible.
    pub fn he_uniform(dims: &[usize], rng: &mut ChaCha12Rng) -> Self {
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-limit..limit)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Self { weights, biases }
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass keeping everything backward needs.
    pub fn forward_cached(
        &self,
        x: ArrayView2<f64>,
        masks: Option<&[Array1<f64>]>,
    ) -> ForwardCache {
        let layers = self.layer_count();
        let mut activations = Vec::with_capacity(layers);
        let mut pre_activations = Vec::with_capacity(layers - 1);
        let mut a = x.to_owned();
        for l in 0..layers - 1 {
            activations.push(a.clone());
            let z = a.dot(&self.weights[l].t()) + &self.biases[l];
            let mut h = z.mapv(|v| v.max(0.0));
            if let Some(masks) = masks {
                h = h * &masks[l];
            }
            pre_activations.push(z);
            a = h;
        }
        activations.push(a.clone());
        let output = a.dot(&self.weights[layers - 1].t()) + &self.biases[layers - 1];
        ForwardCache {
            activations,
            pre_activations,
            output,
        }
    }

    /// Forward pass without caches.
    pub fn forward(&self, x: ArrayView2<f64>, masks: Option<&[Array1<f64>]>) -> Array2<f64> {
        let layers = self.layer_count();
        let mut a = x.to_owned();
        for l in 0..layers - 1 {
            let z = a.dot(&self.weights[l].t()) + &self.biases[l];
            let mut h = z.mapv(|v| v.max(0.0));
            if let Some(masks) = masks {
                h = h * &masks[l];
            }
            a = h;
        }
        a.dot(&self.weights[layers - 1].t()) + &self.biases[layers - 1]
    }

    /// Reverse-mode accumulation from the head delta `∂L/∂output`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        head_delta: Array2<f64>,
        masks: Option<&[Array1<f64>]>,
    ) -> Gradients {
        let layers = self.layer_count();
        let mut g_w = vec![Array2::zeros((0, 0)); layers];
        let mut g_b = vec![Array1::zeros(0); layers];
        let mut delta = head_delta;
        for l in (0..layers).rev() {
            g_w[l] = delta.t().dot(&cache.activations[l]);
            g_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                if let Some(masks) = masks {
                    back = back * &masks[l - 1];
                }
                let gate = cache.pre_activations[l - 1].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
                delta = back * gate;
            }
        }
        Gradients {
            weights: g_w,
            biases: g_b,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened layer by layer: row-major weights, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        let mut cursor = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for entry in w.iter_mut() {
                *entry = values[cursor];
                cursor += 1;
            }
            for entry in b.iter_mut() {
                *entry = values[cursor];
                cursor += 1;
            }
        }
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Adam with bias correction, one moment pair per parameter tensor.
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(mlp: &Mlp, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m_w: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, beta1, beta2, epsilon) = (self.lr, self.beta1, self.beta2, self.epsilon);
        let update = move |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + epsilon);
        };
        for l in 0..mlp.layer_count() {
            Zip::from(&mut mlp.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .for_each(update);
            Zip::from(&mut mlp.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .for_each(update);
        }
    }
}
