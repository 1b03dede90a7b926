use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{NeuralError, Scalar};

/// Dense network with rectifier hidden layers and a linear output layer.
///
/// Parameters live in one flat vector; layer `l` stores its weights
/// input-major (`w[i * out + j]` connects input `i` to output `j`)
/// followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    dims: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations of a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    rows: usize,
    /// `acts[0]` is the input, `acts[L]` the output; row-major per layer.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an output layer")
    }
}

impl<T: Scalar> Mlp<T> {
    /// All-zero network.
    pub fn zeros(dims: &[usize]) -> Result<Self, NeuralError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NeuralError::Shape(format!("layer sizes {dims:?} need at least two non-zero entries")));
        }
        let count = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { dims: dims.to_vec(), params: vec![T::zero(); count] })
    }

    /// Gaussian weights with variance `2 / fan_in`, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(dims)?;
        for l in 0..net.layers() {
            let (w, _) = net.layer_ranges(l);
            let std = (2.0 / dims[l] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut net.params[w] {
                *p = T::from_f64(normal.sample(rng));
            }
        }
        Ok(net)
    }

    pub fn from_params(dims: &[usize], params: Vec<T>) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(dims)?;
        if params.len() != net.params.len() {
            return Err(NeuralError::Shape(format!("expected {} parameters, got {}", net.params.len(), params.len())));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Ranges of layer `l`'s weights and biases in the flat vector.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mut start = 0;
        for k in 0..l {
            start += self.dims[k] * self.dims[k + 1] + self.dims[k + 1];
        }
        let w_end = start + self.dims[l] * self.dims[l + 1];
        (start..w_end, w_end..w_end + self.dims[l + 1])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, NeuralError> {
        self.forward_batch(x, 1)
    }

    /// Forward pass over `rows` inputs laid out row-major.
    pub fn forward_batch(&self, xs: &[T], rows: usize) -> Result<Vec<T>, NeuralError> {
        self.check_input(xs.len(), rows)?;
        let mut cur = xs.to_vec();
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (wr, br) = self.layer_ranges(l);
            let (w, b) = (&self.params[wr], &self.params[br]);
            let mut next = vec![T::zero(); rows * n_out];
            for r in 0..rows {
                let out = &mut next[r * n_out..(r + 1) * n_out];
                out.copy_from_slice(b);
                for (i, &a) in cur[r * n_in..(r + 1) * n_in].iter().enumerate() {
                    if a != T::zero() {
                        for (o, &wij) in out.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                            *o = *o + a * wij;
                        }
                    }
                }
                if l + 1 < self.layers() {
                    for o in out.iter_mut() {
                        *o = o.max(T::zero());
                    }
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    fn check_input(&self, len: usize, rows: usize) -> Result<(), NeuralError> {
        if len != rows * self.input_dim() {
            return Err(NeuralError::Dimension { expected: rows * self.input_dim(), got: len });
        }
        Ok(())
    }

    /// Forward pass in 64-bit arithmetic, keeping every layer's activations.
    pub fn trace(&self, xs: &[T], rows: usize) -> Result<Trace, NeuralError> {
        self.check_input(xs.len(), rows)?;
        let params: Vec<f64> = self.params.iter().map(|p| p.as_f64()).collect();
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(xs.iter().map(|x| x.as_f64()).collect::<Vec<f64>>());
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (wr, br) = self.layer_ranges(l);
            let (w, b) = (&params[wr], &params[br]);
            let cur = &acts[l];
            let mut next = vec![0.0; rows * n_out];
            for r in 0..rows {
                let out = &mut next[r * n_out..(r + 1) * n_out];
                out.copy_from_slice(b);
                for (i, &a) in cur[r * n_in..(r + 1) * n_in].iter().enumerate() {
                    if a != 0.0 {
                        for (o, &wij) in out.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                            *o += a * wij;
                        }
                    }
                }
                if l + 1 < self.layers() {
                    for o in out.iter_mut() {
                        *o = o.max(0.0);
                    }
                }
            }
            acts.push(next);
        }
        Ok(Trace { rows, acts })
    }

    /// Gradient of a loss with respect to every parameter, given the
    /// loss gradient `d_out` with respect to the traced outputs.
    pub fn backward(&self, trace: &Trace, d_out: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let rows = trace.rows;
        if d_out.len() != rows * self.output_dim() {
            return Err(NeuralError::Dimension { expected: rows * self.output_dim(), got: d_out.len() });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = d_out.to_vec();
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (wr, br) = self.layer_ranges(l);
            let input = &trace.acts[l];
            {
                let (gw, gb) = grads[wr.start..br.end].split_at_mut(n_in * n_out);
                for r in 0..rows {
                    let d = &delta[r * n_out..(r + 1) * n_out];
                    for (g, &dj) in gb.iter_mut().zip(d) {
                        *g += dj;
                    }
                    for (i, &a) in input[r * n_in..(r + 1) * n_in].iter().enumerate() {
                        if a != 0.0 {
                            for (g, &dj) in gw[i * n_out..(i + 1) * n_out].iter_mut().zip(d) {
                                *g += a * dj;
                            }
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            // propagate through the weights, then the rectifier of layer l-1
            let w = &self.params[wr];
            let mut prev = vec![0.0; rows * n_in];
            for r in 0..rows {
                let d = &delta[r * n_out..(r + 1) * n_out];
                for i in 0..n_in {
                    if input[r * n_in + i] > 0.0 {
                        let row = &w[i * n_out..(i + 1) * n_out];
                        prev[r * n_in + i] = row.iter().zip(d).map(|(&wij, &dj)| wij.as_f64() * dj).sum();
                    }
                }
            }
            delta = prev;
        }
        Ok(grads)
    }

    /// `self <- rho * train + (1 - rho) * self`, elementwise.
    pub fn polyak_update(&mut self, train: &Mlp<T>, rho: f64) -> Result<(), NeuralError> {
        if self.dims != train.dims {
            return Err(NeuralError::Shape(format!("polyak between {:?} and {:?}", self.dims, train.dims)));
        }
        for (t, &p) in self.params.iter_mut().zip(&train.params) {
            *t = T::from_f64(rho * p.as_f64() + (1.0 - rho) * t.as_f64());
        }
        Ok(())
    }

    /// Converts parameters to another element type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp { dims: self.dims.clone(), params: self.params.iter().map(|p| U::from_f64(p.as_f64())).collect() }
    }
}

/// Loss and gradients of `mean_r sum_j mask[r,j] * (y[r,j] - target[r,j])^2`.
///
/// Without a mask every output is supervised.
pub fn mse_loss_and_grads<T: Scalar>(
    net: &Mlp<T>,
    xs: &[T],
    rows: usize,
    targets: &[f64],
    mask: Option<&[bool]>,
) -> Result<(f64, Vec<f64>), NeuralError> {
    if rows == 0 {
        return Err(NeuralError::Shape("empty batch".into()));
    }
    let trace = net.trace(xs, rows)?;
    let y = trace.output();
    if targets.len() != y.len() || mask.is_some_and(|m| m.len() != y.len()) {
        return Err(NeuralError::Dimension { expected: y.len(), got: targets.len() });
    }
    let mut loss = 0.0;
    let mut d_out = vec![0.0; y.len()];
    for k in 0..y.len() {
        if mask.map_or(true, |m| m[k]) {
            let e = y[k] - targets[k];
            loss += e * e;
            d_out[k] = 2.0 * e / rows as f64;
        }
    }
    let grads = net.backward(&trace, &d_out)?;
    Ok((loss / rows as f64, grads))
}
