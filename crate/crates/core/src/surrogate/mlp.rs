//! Multilayer perceptron vector field: tanh hidden layers, identity output.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    rows: usize,
    cols: usize,
    /// Row-major rows × cols.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpVectorField {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Intermediate activations from a forward pass, consumed by `vjp`.
pub struct ForwardCache {
    /// acts[0] is the input; acts[l+1] is layer l's post-activation output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty cache")
    }
}

impl MlpVectorField {
    /// Uniform initialization scaled by 1/sqrt(fan-in); zero biases.
    pub fn new_seeded<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|p| {
                let (cols, rows) = (p[0], p[1]);
                let scale = 1.0 / (cols as f64).sqrt();
                Layer {
                    rows,
                    cols,
                    w: (0..rows * cols)
                        .map(|_| rng.gen_range(-scale..scale))
                        .collect(),
                    b: vec![0.0; rows],
                }
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes
            .windows(2)
            .map(|p| Layer {
                rows: p[1],
                cols: p[0],
                w: vec![0.0; p[0] * p[1]],
                b: vec![0.0; p[1]],
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.w);
            p.extend_from_slice(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut a = layer.apply(acts.last().unwrap());
            if l != last {
                for v in &mut a {
                    *v = v.tanh();
                }
            }
            acts.push(a);
        }
        ForwardCache { acts }
    }

    /// Pulls `out_bar` back through the network. Returns the gradient with
    /// respect to the input; parameter gradients are accumulated into
    /// `param_bar` (flat layout matching `params`).
    pub fn vjp(&self, cache: &ForwardCache, out_bar: &[f64], param_bar: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(param_bar.len(), self.n_params());
        let last = self.layers.len() - 1;
        // Flat offsets of each layer's weight block.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.w.len() + l.b.len();
        }
        let mut bar = out_bar.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            // Pre-activation gradient: identity on the output layer, tanh'
            // elsewhere (tanh' = 1 - y^2 with y the stored activation).
            if l != last {
                let y = &cache.acts[l + 1];
                for (b, yi) in bar.iter_mut().zip(y) {
                    *b *= 1.0 - yi * yi;
                }
            }
            let input = &cache.acts[l];
            let woff = offsets[l];
            let boff = woff + layer.w.len();
            for r in 0..layer.rows {
                param_bar[boff + r] += bar[r];
                let wrow = &mut param_bar[woff + r * layer.cols..woff + (r + 1) * layer.cols];
                for (w, xi) in wrow.iter_mut().zip(input) {
                    *w += bar[r] * xi;
                }
            }
            let mut in_bar = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for (ib, wv) in in_bar.iter_mut().zip(row) {
                    *ib += bar[r] * wv;
                }
            }
            bar = in_bar;
        }
        bar
    }
}
