//! The Q-value function approximator: four fully connected layers
//! (input, two rectified hidden layers, linear output), stored as one flat
//! parameter vector for cheap cloning, optimisation and gradient checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Widths of the four layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl NetDims {
    fn w1(&self) -> usize {
        self.hidden * self.input
    }
    fn w2(&self) -> usize {
        self.hidden * self.hidden
    }
    fn w3(&self) -> usize {
        self.output * self.hidden
    }
    /// Parameter layout: `[W1, b1, W2, b2, W3, b3]`.
    pub fn param_count(&self) -> usize {
        self.w1() + self.hidden + self.w2() + self.hidden + self.w3() + self.output
    }
}

/// One sample of a training minibatch.
pub struct BatchItem<'a> {
    pub state: &'a [f32],
    pub action: usize,
    pub target: f64,
}

/// The evaluation (or target) network.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    dims: NetDims,
    params: Vec<f64>,
}

impl QNetwork {
    /// Fresh network with weights uniform in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`
    /// and zero biases.
    pub fn new(dims: NetDims, rng: &mut ChaCha8Rng) -> Self {
        let mut params = vec![0.0; dims.param_count()];
        let (mut offset, layers) = (
            0usize,
            [
                (dims.hidden, dims.input),
                (dims.hidden, dims.hidden),
                (dims.output, dims.hidden),
            ],
        );
        for (out_dim, in_dim) in layers {
            let bound = 1.0 / (in_dim as f64).sqrt();
            for p in params.iter_mut().skip(offset).take(out_dim * in_dim) {
                *p = rng.gen_range(-bound..=bound);
            }
            offset += out_dim * in_dim + out_dim; // biases stay zero
        }
        Self { dims, params }
    }

    /// All-zero network, mainly for tests.
    pub fn zeroed(dims: NetDims) -> Self {
        Self {
            params: vec![0.0; dims.param_count()],
            dims,
        }
    }

    pub fn dims(&self) -> NetDims {
        self.dims
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, idx: usize) -> f64 {
        self.params[idx]
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        self.params[idx] = value;
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Copies all parameters from `source` (same architecture).
    pub fn copy_from(&mut self, source: &QNetwork) {
        assert_eq!(self.dims, source.dims, "architecture mismatch");
        self.params.copy_from_slice(&source.params);
    }

    fn slices(&self) -> Layers<'_> {
        let d = &self.dims;
        let mut o = 0;
        let take = |o: &mut usize, n: usize| {
            let s = &self.params[*o..*o + n];
            *o += n;
            s
        };
        Layers {
            w1: take(&mut o, d.w1()),
            b1: take(&mut o, d.hidden),
            w2: take(&mut o, d.w2()),
            b2: take(&mut o, d.hidden),
            w3: take(&mut o, d.w3()),
            b3: take(&mut o, d.output),
        }
    }

    /// Q-values for every action.
    pub fn forward(&self, state: &[f32]) -> Vec<f64> {
        let (_, _, a2) = self.hidden_activations(state);
        let l = self.slices();
        (0..self.dims.output)
            .map(|o| l.b3[o] + dot(&l.w3[o * self.dims.hidden..(o + 1) * self.dims.hidden], &a2))
            .collect()
    }

    /// Q-values of `legal` action indices only; the hidden layers run in
    /// full but only the needed output rows are computed.
    pub fn q_values_for(&self, state: &[f32], legal: &[usize]) -> Vec<f64> {
        let (_, _, a2) = self.hidden_activations(state);
        let l = self.slices();
        legal
            .iter()
            .map(|&o| l.b3[o] + dot(&l.w3[o * self.dims.hidden..(o + 1) * self.dims.hidden], &a2))
            .collect()
    }

    /// Highest Q-value among `legal` actions.
    pub fn masked_max(&self, state: &[f32], legal: &[usize]) -> f64 {
        self.q_values_for(state, legal)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Legal action of maximum Q-value; ties break to the lowest index.
    pub fn masked_argmax(&self, state: &[f32], legal: &[usize]) -> usize {
        let qs = self.q_values_for(state, legal);
        let mut best = 0;
        for (i, &q) in qs.iter().enumerate() {
            if q > qs[best] {
                best = i;
            }
        }
        legal[best]
    }

    fn hidden_activations(&self, state: &[f32]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        assert_eq!(state.len(), self.dims.input, "feature length mismatch");
        let l = self.slices();
        let x: Vec<f64> = state.iter().map(|&v| v as f64).collect();
        let mut a1 = vec![0.0; self.dims.hidden];
        affine(l.w1, l.b1, &x, &mut a1, self.dims.input);
        relu(&mut a1);
        let mut a2 = vec![0.0; self.dims.hidden];
        affine(l.w2, l.b2, &a1, &mut a2, self.dims.hidden);
        relu(&mut a2);
        (x, a1, a2)
    }

    /// Mean squared TD error over the taken actions and its gradient.
    ///
    /// Only the taken action's output receives gradient; the rest of the
    /// output layer is untouched. Returns the pre-step loss.
    pub fn loss_and_grads(&self, batch: &[BatchItem]) -> (f64, Vec<f64>) {
        assert!(!batch.is_empty());
        let d = self.dims;
        let l = self.slices();
        let mut grads = vec![0.0; self.params.len()];
        let (g_w1, rest) = grads.split_at_mut(d.w1());
        let (g_b1, rest) = rest.split_at_mut(d.hidden);
        let (g_w2, rest) = rest.split_at_mut(d.w2());
        let (g_b2, rest) = rest.split_at_mut(d.hidden);
        let (g_w3, g_b3) = rest.split_at_mut(d.w3());

        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut da1 = vec![0.0; d.hidden];
        for item in batch {
            let (x, a1, a2) = self.hidden_activations(item.state);
            let row = &l.w3[item.action * d.hidden..(item.action + 1) * d.hidden];
            let q = l.b3[item.action] + dot(row, &a2);
            let err = q - item.target;
            loss += err * err;
            let dq = scale * err;

            // Output layer: one row.
            axpy(dq, &a2, &mut g_w3[item.action * d.hidden..(item.action + 1) * d.hidden]);
            g_b3[item.action] += dq;

            // dz2 = dq * W3_row, gated by the rectifier.
            da1.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..d.hidden {
                if a2[o] <= 0.0 {
                    continue;
                }
                let dz2 = dq * row[o];
                axpy(dz2, &a1, &mut g_w2[o * d.hidden..(o + 1) * d.hidden]);
                g_b2[o] += dz2;
                axpy(dz2, &l.w2[o * d.hidden..(o + 1) * d.hidden], &mut da1);
            }

            for o in 0..d.hidden {
                if a1[o] <= 0.0 || da1[o] == 0.0 {
                    continue;
                }
                let dz1 = da1[o];
                axpy(dz1, &x, &mut g_w1[o * d.input..(o + 1) * d.input]);
                g_b1[o] += dz1;
            }
        }
        (loss / batch.len() as f64, grads)
    }
}

struct Layers<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    w3: &'a [f64],
    b3: &'a [f64],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[o] = b[o] + w_row_o . x`
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64], in_dim: usize) {
    for (o, out_v) in out.iter_mut().enumerate() {
        *out_v = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x);
    }
}

fn relu(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// `out += a * x`
fn axpy(a: f64, x: &[f64], out: &mut [f64]) {
    for (o, &xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Straight-line re-implementation used as the forward-pass oracle.
    fn naive_forward(net: &QNetwork, state: &[f32]) -> Vec<f64> {
        let d = net.dims();
        let get = |idx: usize| net.param(idx);
        let w1_end = d.hidden * d.input;
        let b1_end = w1_end + d.hidden;
        let w2_end = b1_end + d.hidden * d.hidden;
        let b2_end = w2_end + d.hidden;
        let w3_end = b2_end + d.output * d.hidden;
        let mut a1 = vec![0.0f64; d.hidden];
        for o in 0..d.hidden {
            let mut acc = get(w1_end + o);
            for i in 0..d.input {
                acc += get(o * d.input + i) * state[i] as f64;
            }
            a1[o] = acc.max(0.0);
        }
        let mut a2 = vec![0.0f64; d.hidden];
        for o in 0..d.hidden {
            let mut acc = get(w2_end + o);
            for i in 0..d.hidden {
                acc += get(b1_end + o * d.hidden + i) * a1[i];
            }
            a2[o] = acc.max(0.0);
        }
        let mut q = vec![0.0f64; d.output];
        for (o, qo) in q.iter_mut().enumerate() {
            let mut acc = get(w3_end + o);
            for i in 0..d.hidden {
                acc += get(b2_end + o * d.hidden + i) * a2[i];
            }
            *qo = acc;
        }
        q
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeroed(NetDims {
            input: 12,
            hidden: 6,
            output: 6,
        });
        let q = net.forward(&[0.5; 12]);
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_identity_network_passes_positive_input_through() {
        let mut net = QNetwork::zeroed(NetDims {
            input: 1,
            hidden: 1,
            output: 1,
        });
        // W1 = W2 = W3 = 1, biases 0.
        net.set_param(0, 1.0);
        net.set_param(2, 1.0);
        net.set_param(4, 1.0);
        assert_eq!(net.forward(&[2.0]), vec![2.0]);
        // Rectifier clamps a negative pre-activation.
        assert_eq!(net.forward(&[-2.0]), vec![0.0]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let dims = NetDims {
            input: 17,
            hidden: 9,
            output: 9,
        };
        let mut r = rng(5);
        for trial in 0..20 {
            let net = QNetwork::new(dims, &mut r);
            let state: Vec<f32> = (0..dims.input)
                .map(|i| ((i as f32 + trial as f32) * 0.37).sin())
                .collect();
            let fast = net.forward(&state);
            let slow = naive_forward(&net, &state);
            for (a, b) in fast.iter().zip(&slow) {
                let rel = (a - b).abs() / b.abs().max(1e-9);
                assert!(rel < 1e-6, "forward mismatch: {a} vs {b}");
            }
        }
    }

    #[test]
    fn masked_views_agree_with_full_forward() {
        let dims = NetDims {
            input: 12,
            hidden: 6,
            output: 6,
        };
        let net = QNetwork::new(dims, &mut rng(9));
        let state = [0.3f32; 12];
        let full = net.forward(&state);
        let legal = vec![0, 2, 5];
        let masked = net.q_values_for(&state, &legal);
        for (i, &o) in legal.iter().enumerate() {
            assert_eq!(masked[i], full[o]);
        }
        let max = net.masked_max(&state, &legal);
        let best = net.masked_argmax(&state, &legal);
        assert_eq!(max, full[best]);
        assert!(legal.contains(&best));
    }

    #[test]
    fn argmax_ties_break_to_lowest_index() {
        let net = QNetwork::zeroed(NetDims {
            input: 4,
            hidden: 3,
            output: 5,
        });
        // All outputs are zero: the lowest legal index wins.
        assert_eq!(net.masked_argmax(&[1.0; 4], &[1, 3, 4]), 1);
    }

    #[test]
    fn loss_is_zero_when_targets_equal_outputs() {
        let dims = NetDims {
            input: 6,
            hidden: 4,
            output: 4,
        };
        let net = QNetwork::new(dims, &mut rng(3));
        let state = [0.25f32; 6];
        let q = net.forward(&state);
        let batch = [BatchItem {
            state: &state,
            action: 2,
            target: q[2],
        }];
        let (loss, grads) = net.loss_and_grads(&batch);
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn analytic_gradients_match_central_finite_differences() {
        let dims = NetDims {
            input: 12,
            hidden: 6,
            output: 6,
        };
        let mut r = rng(17);
        let net = QNetwork::new(dims, &mut r);
        let states: Vec<Vec<f32>> = (0..4)
            .map(|s| {
                (0..dims.input)
                    .map(|i| ((i * 7 + s * 13) as f32 * 0.11).cos())
                    .collect()
            })
            .collect();
        let batch: Vec<BatchItem> = states
            .iter()
            .enumerate()
            .map(|(i, st)| BatchItem {
                state: st,
                action: i % dims.output,
                target: 0.8 * i as f64 - 1.0,
            })
            .collect();
        let (_, grads) = net.loss_and_grads(&batch);
        let h = 1e-5;
        for idx in (0..net.param_count()).step_by(7) {
            let mut plus = net.clone();
            plus.set_param(idx, net.param(idx) + h);
            let mut minus = net.clone();
            minus.set_param(idx, net.param(idx) - h);
            let fd = (plus.loss_and_grads(&batch).0 - minus.loss_and_grads(&batch).0) / (2.0 * h);
            let denom = fd.abs().max(grads[idx].abs()).max(1e-8);
            assert!(
                (fd - grads[idx]).abs() / denom < 1e-4,
                "param {idx}: fd {fd} vs analytic {}",
                grads[idx]
            );
        }
    }
}
