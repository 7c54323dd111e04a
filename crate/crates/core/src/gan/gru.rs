//! Single-layer gated recurrent network with a per-step output map.
//!
//! Cell (Cho et al. form, reset applied before the recurrent product):
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)
//! r = sigmoid(Wr x + Ur h + br)
//! n = tanh(Wn x + Un (r * h) + bn)
//! h' = (1 - z) * n + z * h
//! y = act(Wo h' + bo)
//! ```
//!
//! Parameters live in one flat vector laid out as `[W | U | b | Wo | bo]`
//! with the gate blocks ordered z, r, n, so optimizers and the gradient
//! checker can treat every network uniformly.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(a),
            Activation::Linear => a,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruNet {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// Forward activations of one sequence, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruTrace {
    steps: usize,
    xs: Vec<f64>,
    /// `(steps + 1) * hidden`, row 0 is the zero initial state.
    hs: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
    ys: Vec<f64>,
}

impl GruTrace {
    pub fn outputs(&self) -> &[f64] {
        &self.ys
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
    3 * hidden * input + 3 * hidden * hidden + 3 * hidden + output * hidden + output
}

struct Layout {
    w: std::ops::Range<usize>,
    u: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
    wo: std::ops::Range<usize>,
    bo: std::ops::Range<usize>,
}

impl GruNet {
    /// Uniform Glorot-style init for input and output maps, scaled uniform
    /// for the recurrent block, zero biases.
    pub fn new(input: usize, hidden: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let mut net = GruNet::zeros(input, hidden, output, activation);
        let l = net.layout();
        let wa = (6.0 / (input + hidden) as f64).sqrt();
        let ua = 1.0 / (hidden as f64).sqrt();
        let oa = (6.0 / (hidden + output) as f64).sqrt();
        for v in &mut net.params[l.w] {
            *v = rng.random_range(-wa..wa);
        }
        for v in &mut net.params[l.u] {
            *v = rng.random_range(-ua..ua);
        }
        for v in &mut net.params[l.wo] {
            *v = rng.random_range(-oa..oa);
        }
        net
    }

    pub fn zeros(input: usize, hidden: usize, output: usize, activation: Activation) -> Self {
        GruNet {
            input,
            hidden,
            output,
            activation,
            params: vec![0.0; param_count(input, hidden, output)],
        }
    }

    fn layout(&self) -> Layout {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let w_end = 3 * h * i;
        let u_end = w_end + 3 * h * h;
        let b_end = u_end + 3 * h;
        let wo_end = b_end + o * h;
        Layout {
            w: 0..w_end,
            u: w_end..u_end,
            b: u_end..b_end,
            wo: b_end..wo_end,
            bo: wo_end..wo_end + o,
        }
    }

    /// Zero the output map (weights and bias).
    pub fn zero_output_map(&mut self) {
        let l = self.layout();
        self.params[l.wo.start..l.bo.end].iter_mut().for_each(|v| *v = 0.0);
    }

    /// Name of the parameter at flat index `k`, e.g. `U[z][3,1]`.
    pub fn param_name(&self, k: usize) -> String {
        let l = self.layout();
        let h = self.hidden;
        let gate = |row: usize| ["z", "r", "n"][row / h];
        if l.w.contains(&k) {
            let (row, col) = (k / self.input, k % self.input);
            format!("W[{}][{},{}]", gate(row), row % h, col)
        } else if l.u.contains(&k) {
            let k = k - l.u.start;
            let (row, col) = (k / h, k % h);
            format!("U[{}][{},{}]", gate(row), row % h, col)
        } else if l.b.contains(&k) {
            let row = k - l.b.start;
            format!("b[{}][{}]", gate(row), row % h)
        } else if l.wo.contains(&k) {
            let k = k - l.wo.start;
            format!("Wo[{},{}]", k / h, k % h)
        } else {
            format!("bo[{}]", k - l.bo.start)
        }
    }

    pub fn output_bias_range(&self) -> std::ops::Range<usize> {
        self.layout().bo
    }

    /// Run the network over `xs` (`steps * input`, row-major by step).
    pub fn forward(&self, xs: &[f64]) -> GruTrace {
        let (ni, nh, no) = (self.input, self.hidden, self.output);
        debug_assert_eq!(xs.len() % ni, 0);
        let steps = xs.len() / ni;
        let l = self.layout();
        let (w, u, b) = (&self.params[l.w], &self.params[l.u], &self.params[l.b]);
        let (wo, bo) = (&self.params[l.wo], &self.params[l.bo]);

        let mut tr = GruTrace {
            steps,
            xs: xs.to_vec(),
            hs: vec![0.0; (steps + 1) * nh],
            z: vec![0.0; steps * nh],
            r: vec![0.0; steps * nh],
            n: vec![0.0; steps * nh],
            rh: vec![0.0; steps * nh],
            ys: vec![0.0; steps * no],
        };
        let mut pre = vec![0.0; 3 * nh];
        for t in 0..steps {
            let x = &xs[t * ni..(t + 1) * ni];
            let (past, future) = tr.hs.split_at_mut((t + 1) * nh);
            let hp = &past[t * nh..];
            let h = &mut future[..nh];
            for j in 0..3 * nh {
                pre[j] = b[j] + dot(&w[j * ni..(j + 1) * ni], x);
            }
            for j in 0..2 * nh {
                pre[j] += dot(&u[j * nh..(j + 1) * nh], hp);
            }
            let z = &mut tr.z[t * nh..(t + 1) * nh];
            let r = &mut tr.r[t * nh..(t + 1) * nh];
            let rh = &mut tr.rh[t * nh..(t + 1) * nh];
            for j in 0..nh {
                z[j] = sigmoid(pre[j]);
                r[j] = sigmoid(pre[nh + j]);
                rh[j] = r[j] * hp[j];
            }
            let n = &mut tr.n[t * nh..(t + 1) * nh];
            for j in 0..nh {
                let row = 2 * nh + j;
                n[j] = (pre[row] + dot(&u[row * nh..(row + 1) * nh], rh)).tanh();
                h[j] = (1.0 - z[j]) * n[j] + z[j] * hp[j];
            }
            let y = &mut tr.ys[t * no..(t + 1) * no];
            for k in 0..no {
                y[k] = self.activation.apply(bo[k] + dot(&wo[k * nh..(k + 1) * nh], h));
            }
        }
        tr
    }

    /// Backpropagate `dys` (gradient of the loss w.r.t. every output) through
    /// a trace. Parameter gradients are accumulated into `grads` when given;
    /// the gradient w.r.t. the inputs is returned when `want_dx` is set.
    pub fn backward(&self, tr: &GruTrace, dys: &[f64], mut grads: Option<&mut [f64]>, want_dx: bool) -> Option<Vec<f64>> {
        let (ni, nh, no) = (self.input, self.hidden, self.output);
        let steps = tr.steps;
        debug_assert_eq!(dys.len(), steps * no);
        let l = self.layout();
        let (w, u, wo) = (&self.params[l.w.clone()], &self.params[l.u.clone()], &self.params[l.wo.clone()]);

        let mut dx = want_dx.then(|| vec![0.0; steps * ni]);
        let mut dh = vec![0.0; nh];
        let mut dh_prev = vec![0.0; nh];
        let mut da = vec![0.0; 3 * nh];
        let mut drh = vec![0.0; nh];

        for t in (0..steps).rev() {
            let h = &tr.hs[(t + 1) * nh..(t + 2) * nh];
            let hp = &tr.hs[t * nh..(t + 1) * nh];
            let x = &tr.xs[t * ni..(t + 1) * ni];
            let (z, r, n, rh) = (
                &tr.z[t * nh..(t + 1) * nh],
                &tr.r[t * nh..(t + 1) * nh],
                &tr.n[t * nh..(t + 1) * nh],
                &tr.rh[t * nh..(t + 1) * nh],
            );
            let y = &tr.ys[t * no..(t + 1) * no];
            let dy = &dys[t * no..(t + 1) * no];

            // Output map.
            for k in 0..no {
                let dao = dy[k] * self.activation.derivative(y[k]);
                if dao == 0.0 {
                    continue;
                }
                if let Some(g) = grads.as_deref_mut() {
                    g[l.bo.start + k] += dao;
                    axpy(dao, h, &mut g[l.wo.start + k * nh..l.wo.start + (k + 1) * nh]);
                }
                axpy(dao, &wo[k * nh..(k + 1) * nh], &mut dh);
            }

            // Cell.
            for j in 0..nh {
                let dn = dh[j] * (1.0 - z[j]);
                let dz = dh[j] * (hp[j] - n[j]);
                dh_prev[j] = dh[j] * z[j];
                da[j] = dz * z[j] * (1.0 - z[j]);
                da[2 * nh + j] = dn * (1.0 - n[j] * n[j]);
            }
            drh.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..nh {
                let row = 2 * nh + j;
                axpy(da[row], &u[row * nh..(row + 1) * nh], &mut drh);
                if let Some(g) = grads.as_deref_mut() {
                    let off = l.u.start + row * nh;
                    axpy(da[row], rh, &mut g[off..off + nh]);
                }
            }
            for j in 0..nh {
                dh_prev[j] += drh[j] * r[j];
                da[nh + j] = drh[j] * hp[j] * r[j] * (1.0 - r[j]);
            }
            for j in 0..2 * nh {
                axpy(da[j], &u[j * nh..(j + 1) * nh], &mut dh_prev);
                if let Some(g) = grads.as_deref_mut() {
                    let off = l.u.start + j * nh;
                    axpy(da[j], hp, &mut g[off..off + nh]);
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                for j in 0..3 * nh {
                    g[l.b.start + j] += da[j];
                    let off = l.w.start + j * ni;
                    axpy(da[j], x, &mut g[off..off + ni]);
                }
            }
            if let Some(dx) = dx.as_mut() {
                let dxt = &mut dx[t * ni..(t + 1) * ni];
                for j in 0..3 * nh {
                    axpy(da[j], &w[j * ni..(j + 1) * ni], dxt);
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        dx
    }
}
