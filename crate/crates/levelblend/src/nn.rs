//! Dense-network math: affine layers with ReLU, softmax cross-entropy,
//! Gaussian KL, reparameterization, manual backpropagation and Adam with
//! step decay. All arithmetic is f64 for reproducibility.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// [out x in]
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Layer {
        Layer { weight: Array2::zeros((out_dim, in_dim)), bias: Array1::zeros(out_dim) }
    }

    /// He-style uniform fan-in init, zero bias.
    pub fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Layer {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weight =
            Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-limit..limit));
        Layer { weight, bias: Array1::zeros(out_dim) }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Fully connected network: ReLU on all hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Result<DenseNet> {
        for w in layers.windows(2) {
            if w[1].in_dim() != w[0].out_dim() {
                return Err(Error::Dimension(format!(
                    "layer chain broken: {} -> {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Seeded network over the given dimension chain (input, hidden..., output).
    pub fn init<R: Rng>(dims: &[usize], rng: &mut R) -> DenseNet {
        let layers = dims
            .windows(2)
            .map(|w| Layer::init(w[1], w[0], rng))
            .collect();
        DenseNet { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    /// Batched forward pass. `input` is [batch x in_dim].
    pub fn forward_batch(&self, input: &Array2<f64>) -> Result<(Array2<f64>, Cache)> {
        if input.ncols() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "input width {} does not match network input {}",
                input.ncols(),
                self.in_dim()
            )));
        }
        let mut cache = Cache { activations: vec![input.clone()] };
        let mut x = input.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            if i != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            cache.activations.push(z.clone());
            x = z;
        }
        Ok((x, cache))
    }

    pub fn forward(&self, input: ArrayView1<f64>) -> Result<(Array1<f64>, Cache)> {
        let batched = input.insert_axis(Axis(0)).to_owned();
        let (out, cache) = self.forward_batch(&batched)?;
        Ok((out.row(0).to_owned(), cache))
    }

    /// Backpropagate `grad_out` [batch x out_dim] through a cached forward
    /// pass. Returns per-layer parameter gradients and the input gradient.
    pub fn backward_batch(&self, cache: &Cache, grad_out: &Array2<f64>) -> Result<(Grads, Array2<f64>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::Dimension("cache does not match network".into()));
        }
        if grad_out.dim() != cache.activations.last().unwrap().dim() {
            return Err(Error::Dimension("output gradient shape mismatch".into()));
        }
        let mut grads = Grads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        };
        let mut delta = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i != self.layers.len() - 1 {
                // ReLU: post-activation is cached, derivative is 1 where it is > 0
                let act = &cache.activations[i + 1];
                delta.zip_mut_with(act, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let input = &cache.activations[i];
            grads.layers[i].weight = delta.t().dot(input);
            grads.layers[i].bias = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.layers[i].weight);
        }
        Ok((grads, delta))
    }

    pub fn backward(&self, cache: &Cache, grad_out: ArrayView1<f64>) -> Result<(Grads, Array1<f64>)> {
        let g = grad_out.insert_axis(Axis(0)).to_owned();
        let (grads, dx) = self.backward_batch(cache, &g)?;
        Ok((grads, dx.row(0).to_owned()))
    }
}

/// Post-activation values per layer, index 0 being the input.
#[derive(Debug, Clone)]
pub struct Cache {
    pub activations: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Grads {
    pub layers: Vec<LayerGrad>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Grads {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight *= s;
            l.bias *= s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Array1<f64>,
    pub logvar: Array1<f64>,
}

/// KL(N(mu, exp(logvar)) || N(0, I)) and its gradients.
///
/// KL = 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)
pub fn kl_standard_normal(g: &GaussianParams) -> (f64, Array1<f64>, Array1<f64>) {
    let kl = 0.5
        * g.mu
            .iter()
            .zip(g.logvar.iter())
            .map(|(&m, &lv)| lv.exp() + m * m - 1.0 - lv)
            .sum::<f64>();
    let dmu = g.mu.clone();
    let dlogvar = g.logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0));
    (kl, dmu, dlogvar)
}

/// Numerically stable softmax cross-entropy against a class index.
/// Gradient is softmax(logits) - one_hot(target).
pub fn softmax_cross_entropy(logits: ArrayView1<f64>, target: usize) -> Result<(f64, Array1<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.mapv(|v| (v - max).exp());
    let sum: f64 = exps.sum();
    let loss = sum.ln() + max - logits[target];
    let mut grad = exps / sum;
    grad[target] -= 1.0;
    Ok((loss, grad))
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.mapv(|v| (v - max).exp());
    let sum: f64 = exps.sum();
    exps / sum
}

/// z = mu + exp(0.5 * logvar) * noise
pub fn reparameterize(g: &GaussianParams, noise: &Array1<f64>) -> Array1<f64> {
    &g.mu + &(g.logvar.mapv(|lv| (0.5 * lv).exp()) * noise)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayMode {
    /// lr = base * factor^(epoch / interval)
    Factor,
    /// lr = base - (epoch / interval) * factor * base, floored at 0
    Decrement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub factor: f64,
    pub interval_epochs: usize,
    pub mode: DecayMode,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { base: 0.001, factor: 0.01, interval_epochs: 2500, mode: DecayMode::Factor }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = (epoch / self.interval_epochs) as f64;
        match self.mode {
            DecayMode::Factor => self.base * self.factor.powf(k),
            DecayMode::Decrement => (self.base - k * self.factor * self.base).max(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: LrSchedule,
}

impl AdamState {
    pub fn new(net: &DenseNet, schedule: LrSchedule) -> AdamState {
        let zeros = || Grads::zeros_like(net).layers;
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule,
        }
    }

    /// One Adam update with bias correction at the given epoch's learning rate.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads, epoch: usize) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::Shape("gradient count does not match network".into()));
        }
        self.step += 1;
        let lr = self.schedule.lr_at(epoch);
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..net.layers.len() {
            if grads.layers[i].weight.dim() != net.layers[i].weight.dim() {
                return Err(Error::Shape(format!("gradient shape mismatch at layer {i}")));
            }
            update(
                &mut net.layers[i].weight,
                &grads.layers[i].weight,
                &mut self.m[i].weight,
                &mut self.v[i].weight,
                self.beta1,
                self.beta2,
                self.epsilon,
                lr,
                bc1,
                bc2,
            );
            update1(
                &mut net.layers[i].bias,
                &grads.layers[i].bias,
                &mut self.m[i].bias,
                &mut self.v[i].bias,
                self.beta1,
                self.beta2,
                self.epsilon,
                lr,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    b1: f64,
    b2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    });
}

#[allow(clippy::too_many_arguments)]
fn update1(
    p: &mut Array1<f64>,
    g: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    b1: f64,
    b2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = DenseNet::new(vec![Layer::zeros(3, 4), Layer::zeros(2, 3)]).unwrap();
        let (out, _) = net.forward(array![1.0, -2.0, 3.0, 0.5].view()).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::new(vec![Layer {
            weight: Array2::eye(3),
            bias: Array1::zeros(3),
        }])
        .unwrap();
        let x = array![1.5, -2.0, 0.25];
        let (out, _) = net.forward(x.view()).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn two_layer_fixture_matches_hand_computation() {
        // layer 1: W=[[1,2],[3,4]], b=[1,-10]; ReLU
        // layer 2: W=[[1,1]], b=[0.5]
        let net = DenseNet::new(vec![
            Layer { weight: array![[1.0, 2.0], [3.0, 4.0]], bias: array![1.0, -10.0] },
            Layer { weight: array![[1.0, 1.0]], bias: array![0.5] },
        ])
        .unwrap();
        let (out, _) = net.forward(array![1.0, 1.0].view()).unwrap();
        // pre1 = [4, -3] -> relu [4, 0]; out = 4 + 0 + 0.5
        assert!((out[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = DenseNet::new(vec![Layer::zeros(2, 3)]).unwrap();
        assert!(net.forward(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::init(&[3, 4, 2], &mut rng);
        let (_, cache) = net.forward(array![0.3, -0.1, 0.9].view()).unwrap();
        let (grads, dx) = net.backward(&cache, array![0.0, 0.0].view()).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        for l in grads.layers {
            assert!(l.weight.iter().all(|&v| v == 0.0));
            assert!(l.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        // first unit has large negative bias: dead for this input
        let net = DenseNet::new(vec![
            Layer { weight: array![[1.0], [1.0]], bias: array![-100.0, 0.0] },
            Layer { weight: array![[1.0, 1.0]], bias: array![0.0] },
        ])
        .unwrap();
        let (_, cache) = net.forward(array![1.0].view()).unwrap();
        let (grads, _) = net.backward(&cache, array![1.0].view()).unwrap();
        assert_eq!(grads.layers[0].weight[[0, 0]], 0.0);
        assert_ne!(grads.layers[0].weight[[1, 0]], 0.0);
    }

    /// Central finite-difference check of every parameter gradient against
    /// a scalar loss 0.5 * ||f(x)||^2.
    fn check_grads(net: &DenseNet, x: &Array1<f64>, tol: f64) {
        let loss = |n: &DenseNet| -> f64 {
            let (out, _) = n.forward(x.view()).unwrap();
            0.5 * out.iter().map(|v| v * v).sum::<f64>()
        };
        let (out, cache) = net.forward(x.view()).unwrap();
        let (grads, _) = net.backward(&cache, out.view()).unwrap();
        let eps = 1e-5;
        for li in 0..net.layers.len() {
            let dims = net.layers[li].weight.dim();
            for r in 0..dims.0 {
                for c in 0..dims.1 {
                    let mut plus = net.clone();
                    plus.layers[li].weight[[r, c]] += eps;
                    let mut minus = net.clone();
                    minus.layers[li].weight[[r, c]] -= eps;
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                    let an = grads.layers[li].weight[[r, c]];
                    let denom = fd.abs().max(an.abs()).max(1e-6);
                    assert!(
                        (fd - an).abs() / denom < tol,
                        "layer {li} w[{r},{c}]: fd={fd} analytic={an}"
                    );
                }
                let mut plus = net.clone();
                plus.layers[li].bias[r] += eps;
                let mut minus = net.clone();
                minus.layers[li].bias[r] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let an = grads.layers[li].bias[r];
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!((fd - an).abs() / denom < tol, "layer {li} b[{r}]");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = DenseNet::init(&[4, 6, 5, 3], &mut rng);
            let x = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
            check_grads(&net, &x, 1e-4);
        }
    }

    #[test]
    fn kl_values_and_gradients() {
        let g = GaussianParams { mu: array![0.0, 0.0], logvar: array![0.0, 0.0] };
        let (kl, _, _) = kl_standard_normal(&g);
        assert_eq!(kl, 0.0);

        let g = GaussianParams { mu: array![1.0, 0.0], logvar: array![0.0, 0.0] };
        let (kl, dmu, dlv) = kl_standard_normal(&g);
        assert!((kl - 0.5).abs() < 1e-12);

        // finite differences
        let eps = 1e-6;
        for i in 0..2 {
            let mut gp = g.clone();
            gp.mu[i] += eps;
            let mut gm = g.clone();
            gm.mu[i] -= eps;
            let fd = (kl_standard_normal(&gp).0 - kl_standard_normal(&gm).0) / (2.0 * eps);
            assert!((fd - dmu[i]).abs() < 1e-5);

            let mut gp = g.clone();
            gp.logvar[i] += eps;
            let mut gm = g.clone();
            gm.logvar[i] -= eps;
            let fd = (kl_standard_normal(&gp).0 - kl_standard_normal(&gm).0) / (2.0 * eps);
            assert!((fd - dlv[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn kl_nonnegative_on_random_gaussians() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let g = GaussianParams {
                mu: Array1::from_shape_fn(4, |_| rng.gen_range(-3.0..3.0)),
                logvar: Array1::from_shape_fn(4, |_| rng.gen_range(-3.0..3.0)),
            };
            assert!(kl_standard_normal(&g).0 >= 0.0);
        }
    }

    #[test]
    fn cross_entropy_uniform_and_peaked() {
        let (loss, grad) = softmax_cross_entropy(array![0.0, 0.0, 0.0, 0.0].view(), 2).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-12);
        assert!((grad[2] - (0.25 - 1.0)).abs() < 1e-12);

        let (loss, _) = softmax_cross_entropy(array![0.0, 50.0, 0.0].view(), 1).unwrap();
        assert!(loss < 1e-12);

        // closed-form fixture: logits [1, 2], target 0
        // loss = ln(e^1 + e^2) - 1
        let (loss, _) = softmax_cross_entropy(array![1.0, 2.0].view(), 0).unwrap();
        let expected = (1f64.exp() + 2f64.exp()).ln() - 1.0;
        assert!((loss - expected).abs() < 1e-12);

        assert!(softmax_cross_entropy(array![0.0, 0.0].view(), 2).is_err());
    }

    #[test]
    fn reparameterization_closed_form() {
        let g = GaussianParams { mu: array![1.0, 2.0], logvar: array![0.0, 2.0_f64.ln() * 2.0] };
        let z = reparameterize(&g, &array![0.0, 0.0]);
        assert_eq!(z, array![1.0, 2.0]);
        let z = reparameterize(&g, &array![1.0, 1.0]);
        assert!((z[0] - 2.0).abs() < 1e-12);
        assert!((z[1] - 4.0).abs() < 1e-12); // sigma = exp(ln 2) = 2
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut net = DenseNet::new(vec![Layer::zeros(2, 2)]).unwrap();
        net.layers[0].weight[[0, 0]] = 1.0;
        let before = net.clone();
        let mut state = AdamState::new(&net, LrSchedule::default());
        let grads = Grads::zeros_like(&net);
        state.step(&mut net, &grads, 0).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_about_lr() {
        // single scalar parameter, g=1: bias-corrected first step is
        // lr * 1 / (1 + eps) ~= lr
        let mut net = DenseNet::new(vec![Layer::zeros(1, 1)]).unwrap();
        let mut state = AdamState::new(&net, LrSchedule::default());
        let mut grads = Grads::zeros_like(&net);
        grads.layers[0].weight[[0, 0]] = 1.0;
        state.step(&mut net, &grads, 0).unwrap();
        let moved = net.layers[0].weight[[0, 0]];
        assert!((moved + 0.001).abs() < 1e-9, "moved {moved}");
    }

    #[test]
    fn lr_schedule_decays() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 0.001);
        assert_eq!(s.lr_at(2499), 0.001);
        assert!((s.lr_at(2500) - 1e-5).abs() < 1e-18);
        assert!((s.lr_at(5000) - 1e-7).abs() < 1e-19);

        let d = LrSchedule { mode: DecayMode::Decrement, ..LrSchedule::default() };
        assert!((d.lr_at(2500) - (0.001 - 0.01 * 0.001)).abs() < 1e-15);
    }

    #[test]
    fn adam_decreases_convex_quadratic() {
        // loss = 0.5 * w^2, gradient = w
        let mut net = DenseNet::new(vec![Layer::zeros(1, 1)]).unwrap();
        net.layers[0].weight[[0, 0]] = 1.0;
        let mut state = AdamState::new(&net, LrSchedule::default());
        let mut last = 0.5;
        for _ in 0..10 {
            let w = net.layers[0].weight[[0, 0]];
            let mut grads = Grads::zeros_like(&net);
            grads.layers[0].weight[[0, 0]] = w;
            state.step(&mut net, &grads, 0).unwrap();
            let loss = 0.5 * net.layers[0].weight[[0, 0]].powi(2);
            assert!(loss < last);
            last = loss;
        }
    }

    #[test]
    fn batched_and_single_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::init(&[3, 5, 2], &mut rng);
        let a = array![0.1, 0.2, -0.3];
        let b = array![1.0, -1.0, 0.5];
        let batch = ndarray::stack![Axis(0), a, b];
        let (out, _) = net.forward_batch(&batch).unwrap();
        let (oa, _) = net.forward(a.view()).unwrap();
        let (ob, _) = net.forward(b.view()).unwrap();
        assert_eq!(out.row(0).to_owned(), oa);
        assert_eq!(out.row(1).to_owned(), ob);
    }
}
