//! Fully connected Q-network with rectified hidden layers and a linear head.
//!
//! Weights are stored row-major as `out x in`, so every output unit is one
//! contiguous dot product. Training only ever needs a handful of output units
//! per sample, so the head is evaluated per action instead of in full.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..=limit)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    #[inline]
    fn unit(&self, j: usize, x: &[f64]) -> f64 {
        dot(self.row(j), x) + self.biases[j]
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>, relu: bool) {
        out.clear();
        out.extend((0..self.outputs).map(|j| {
            let z = self.unit(j, x);
            if relu {
                z.max(0.0)
            } else {
                z
            }
        }));
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Independent partial sums let the compiler vectorize the loop.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Activations of every hidden layer for one input, kept for backprop.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    hidden: Vec<Vec<f64>>,
}

impl Activations {
    pub fn last(&self) -> &[f64] {
        self.hidden.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Hidden activations for a batch, one row per sample.
#[derive(Debug, Clone, Default)]
pub struct BatchActivations {
    rows: usize,
    hidden: Vec<Vec<f64>>,
}

impl BatchActivations {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Last hidden layer's activations for sample `row`.
    pub fn last_row(&self, row: usize) -> &[f64] {
        let h = self.hidden.last().map(Vec::as_slice).unwrap_or(&[]);
        let width = h.len() / self.rows.max(1);
        &h[row * width..(row + 1) * width]
    }
}

/// `c = alpha * a * b + beta * c` for an `m x k` by `k x n` product, with
/// every matrix described by its row and column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    (m, k, n): (usize, usize, usize),
    alpha: f64,
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    beta: f64,
    (c, rsc, csc): (&mut [f64], usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len());
    }
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: the asserts above keep every index the kernel touches in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

impl QNetwork {
    /// `sizes` lists every layer width, input first and output last.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 3, "network needs at least one hidden layer");
        let layers = sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        QNetwork { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        assert!(layers.len() >= 2, "network needs at least one hidden layer");
        for w in layers.windows(2) {
            assert_eq!(w[0].outputs, w[1].inputs, "layer widths do not chain");
        }
        QNetwork { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    #[cfg(test)]
    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    fn head(&self) -> &Dense {
        self.layers.last().expect("nonempty")
    }

    /// Run the hidden stack, leaving each layer's activations in `acts`.
    pub fn hidden_into(&self, x: &[f64], acts: &mut Activations) {
        assert_eq!(x.len(), self.input_dim(), "input width mismatch");
        let n_hidden = self.layers.len() - 1;
        acts.hidden.resize_with(n_hidden, Vec::new);
        for i in 0..n_hidden {
            let (prev, rest) = acts.hidden.split_at_mut(i);
            let input = if i == 0 { x } else { prev[i - 1].as_slice() };
            self.layers[i].forward_into(input, &mut rest[0], true);
        }
    }

    pub fn hidden(&self, x: &[f64]) -> Activations {
        let mut acts = Activations::default();
        self.hidden_into(x, &mut acts);
        acts
    }

    /// Q-value of one action given the hidden activations.
    #[inline]
    pub fn action_value(&self, acts: &Activations, action: usize) -> f64 {
        self.head().unit(action, acts.last())
    }

    pub fn value(&self, x: &[f64], action: usize) -> f64 {
        self.action_value(&self.hidden(x), action)
    }

    /// All Q-values for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        let acts = self.hidden(x);
        self.head().forward_into(acts.last(), &mut out, false);
        out
    }

    /// Highest-valued action among `actions`, lowest index on ties.
    pub fn best_action(&self, acts: &Activations, actions: &[usize]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &a in actions {
            let q = self.action_value(acts, a);
            if q > best.1 || (q == best.1 && a < best.0) {
                best = (a, q);
            }
        }
        best
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.outputs]))
                .collect(),
            touched_outputs: Vec::new(),
        }
    }

    /// Accumulate the gradient of `d_out * Q(x, action)` into `grads`.
    ///
    /// `acts` must come from `hidden_into(x)` on this network.
    pub fn accumulate_gradient(&self, x: &[f64], acts: &Activations, action: usize, d_out: f64, grads: &mut Gradients) {
        let n = self.layers.len();
        let head = &self.layers[n - 1];
        let h_last = acts.last();
        {
            let (gw, gb) = &mut grads.layers[n - 1];
            let inputs = head.inputs;
            axpy(d_out, h_last, &mut gw[action * inputs..(action + 1) * inputs]);
            gb[action] += d_out;
            grads.touched_outputs.push(action);
        }
        let mut delta: Vec<f64> = head.row(action).iter().map(|w| w * d_out).collect();
        for i in (0..n - 1).rev() {
            let out = &acts.hidden[i];
            for (d, &o) in delta.iter_mut().zip(out) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
            let layer = &self.layers[i];
            let input = if i == 0 { x } else { acts.hidden[i - 1].as_slice() };
            let (gw, gb) = &mut grads.layers[i];
            for (j, &dj) in delta.iter().enumerate() {
                if dj != 0.0 {
                    axpy(dj, input, &mut gw[j * layer.inputs..(j + 1) * layer.inputs]);
                    gb[j] += dj;
                }
            }
            if i > 0 {
                let mut next = vec![0.0; layer.inputs];
                for (j, &dj) in delta.iter().enumerate() {
                    if dj != 0.0 {
                        axpy(dj, layer.row(j), &mut next);
                    }
                }
                delta = next;
            }
        }
    }

    /// Hidden stack for `rows` samples stored row-major in `xs`.
    pub fn hidden_batch(&self, xs: &[f64], rows: usize, acts: &mut BatchActivations) {
        let n = self.layers.len() - 1;
        assert_eq!(xs.len(), rows * self.input_dim(), "batch shape");
        acts.rows = rows;
        acts.hidden.resize_with(n, Vec::new);
        for i in 0..n {
            let (prev, rest) = acts.hidden.split_at_mut(i);
            let input = if i == 0 { xs } else { prev[i - 1].as_slice() };
            let layer = &self.layers[i];
            let out = &mut rest[0];
            out.clear();
            for _ in 0..rows {
                out.extend_from_slice(&layer.biases);
            }
            gemm(
                (rows, layer.inputs, layer.outputs),
                1.0,
                (input, layer.inputs, 1),
                (&layer.weights, 1, layer.inputs),
                1.0,
                (out, layer.outputs, 1),
            );
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }

    /// Q-value of `action` for sample `row` of a batch.
    #[inline]
    pub fn batch_action_value(&self, acts: &BatchActivations, row: usize, action: usize) -> f64 {
        self.head().unit(action, acts.last_row(row))
    }

    /// Best action for sample `row` among `actions`, lowest index on ties.
    pub fn batch_best_action(&self, acts: &BatchActivations, row: usize, actions: &[usize]) -> (usize, f64) {
        let h = acts.last_row(row);
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &a in actions {
            let q = self.head().unit(a, h);
            if q > best.1 || (q == best.1 && a < best.0) {
                best = (a, q);
            }
        }
        best
    }

    /// Batched [`QNetwork::accumulate_gradient`]: adds the gradient of
    /// `sum_b d_out[b] * Q(x_b, actions[b])`.
    pub fn accumulate_batch_gradient(
        &self,
        xs: &[f64],
        acts: &BatchActivations,
        actions: &[usize],
        d_out: &[f64],
        grads: &mut Gradients,
    ) {
        let rows = acts.rows;
        assert!(actions.len() == rows && d_out.len() == rows, "batch shape");
        let n = self.layers.len();
        let head = &self.layers[n - 1];
        let width = head.inputs;
        let mut delta = vec![0.0; rows * width];
        {
            let (gw, gb) = &mut grads.layers[n - 1];
            for b in 0..rows {
                let a = actions[b];
                axpy(d_out[b], acts.last_row(b), &mut gw[a * width..(a + 1) * width]);
                gb[a] += d_out[b];
                grads.touched_outputs.push(a);
                let h = acts.last_row(b);
                for ((d, &w), &o) in delta[b * width..(b + 1) * width].iter_mut().zip(head.row(a)).zip(h) {
                    *d = if o > 0.0 { w * d_out[b] } else { 0.0 };
                }
            }
        }
        for i in (0..n - 1).rev() {
            let layer = &self.layers[i];
            let input = if i == 0 { xs } else { acts.hidden[i - 1].as_slice() };
            let (gw, gb) = &mut grads.layers[i];
            gemm(
                (layer.outputs, rows, layer.inputs),
                1.0,
                (&delta, 1, layer.outputs),
                (input, layer.inputs, 1),
                1.0,
                (gw, layer.inputs, 1),
            );
            for row in delta.chunks_exact(layer.outputs) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; rows * layer.inputs];
                gemm(
                    (rows, layer.outputs, layer.inputs),
                    1.0,
                    (&delta, layer.outputs, 1),
                    (&layer.weights, layer.inputs, 1),
                    0.0,
                    (&mut prev, layer.inputs, 1),
                );
                for (d, &o) in prev.iter_mut().zip(&acts.hidden[i - 1]) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Plain gradient descent step: `theta -= lr * grad`.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) {
        let n = self.layers.len();
        for (i, (layer, (gw, gb))) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            if i == n - 1 {
                let mut rows = grads.touched_outputs.clone();
                rows.sort_unstable();
                rows.dedup();
                for j in rows {
                    let r = j * layer.inputs..(j + 1) * layer.inputs;
                    axpy(-lr, &gw[r.clone()], &mut layer.weights[r]);
                    layer.biases[j] -= lr * gb[j];
                }
            } else {
                axpy(-lr, gw, &mut layer.weights);
                axpy(-lr, gb, &mut layer.biases);
            }
        }
    }

    /// Overwrite every parameter with `other`'s.
    pub fn copy_from(&mut self, other: &QNetwork) {
        assert_eq!(self.sizes(), other.sizes(), "architecture mismatch");
        self.layers.clone_from(&other.layers);
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}

/// Parameter gradients matching a [`QNetwork`]'s layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
    touched_outputs: Vec<usize>,
}

impl Gradients {
    pub fn weight(&self, layer: usize) -> &[f64] {
        &self.layers[layer].0
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.layers[layer].1
    }
}
