//! Small fully connected network: tanh hidden layers, linear output.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Weight and bias gradients (or moments), one pair per layer.
pub type LayerGrads = Vec<(DMatrix<f64>, DVector<f64>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|s| {
                let (n_in, n_out) = (s[0], s[1]);
                let lim = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    w: DMatrix::from_fn(n_out, n_in, |_, _| rng.random_range(-lim..lim)),
                    b: DVector::zeros(n_out),
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.ncols()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Activations of every layer for a batch stored column-wise; `[0]` is the input.
    pub fn forward_all(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_all(x).pop().unwrap()
    }

    /// Mean squared error over all entries and its gradient per layer `(dW, db)`.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, LayerGrads) {
        let acts = self.forward_all(x);
        let out = acts.last().unwrap();
        let diff = out - y;
        let n = diff.len() as f64;
        let loss = diff.norm_squared() / n;
        let mut dz = diff * (2.0 / n);
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let a_prev = &acts[i];
            let dw = &dz * a_prev.transpose();
            let db = dz.column_sum();
            if i > 0 {
                let mut da = self.layers[i].w.transpose() * &dz;
                da.zip_apply(a_prev, |g, a| *g *= 1.0 - a * a);
                dz = da;
            }
            grads.push((dw, db));
        }
        grads.reverse();
        (loss, grads)
    }

    /// Parameters flattened layer by layer (weights row-major, then biases).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                out.extend(l.w.row(r).iter());
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn from_flat(sizes: &[usize], flat: &[f64]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Format(format!("invalid layer sizes {sizes:?}")));
        }
        let need: usize = sizes.windows(2).map(|s| s[0] * s[1] + s[1]).sum();
        if flat.len() != need {
            return Err(Error::Format(format!(
                "expected {need} parameters, found {}",
                flat.len()
            )));
        }
        let mut pos = 0;
        let layers = sizes
            .windows(2)
            .map(|s| {
                let (n_in, n_out) = (s[0], s[1]);
                let w = DMatrix::from_row_slice(n_out, n_in, &flat[pos..pos + n_in * n_out]);
                pos += n_in * n_out;
                let b = DVector::from_column_slice(&flat[pos..pos + n_out]);
                pos += n_out;
                Dense { w, b }
            })
            .collect();
        Ok(Mlp { layers })
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: LayerGrads,
    v: LayerGrads,
}

impl Adam {
    pub fn new(net: &Mlp) -> Self {
        let zeros: Vec<_> = net
            .layers
            .iter()
            .map(|l| {
                (
                    DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                    DVector::zeros(l.b.len()),
                )
            })
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &[(DMatrix<f64>, DVector<f64>)], lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in
            net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v)
        {
            for i in 0..gw.len() {
                upd(&mut layer.w[i], gw[i], &mut mw[i], &mut vw[i]);
            }
            for i in 0..gb.len() {
                upd(&mut layer.b[i], gb[i], &mut mb[i], &mut vb[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[2, 4, 3], &mut rng).unwrap();
        let x = DMatrix::from_fn(2, 5, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.2);
        let y = DMatrix::from_fn(3, 5, |i, j| (i * j) as f64 * 0.1);
        let (_, g) = net.loss_and_grad(&x, &y);
        let h = 1e-6;
        for (li, idx) in [(0, 3), (1, 5)] {
            let mut p = net.clone();
            p.layers[li].w[idx] += h;
            let mut m = net.clone();
            m.layers[li].w[idx] -= h;
            let fd = (p.loss_and_grad(&x, &y).0 - m.loss_and_grad(&x, &y).0) / (2.0 * h);
            assert!((fd - g[li].0[idx]).abs() < 1e-7, "{fd} vs {}", g[li].0[idx]);
        }
    }

    #[test]
    fn flat_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[1, 20, 20, 20, 7], &mut rng).unwrap();
        let back = Mlp::from_flat(&net.sizes(), &net.to_flat()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_flat(&net.sizes(), &[0.0; 3]).is_err());
    }
}
