//! The five TimeGAN networks and their losses with analytic gradients.
//!
//! Sequences are flat `steps * dim` vectors. Every loss function returns
//! the loss value and the parameter gradients it is responsible for; the
//! trainer and the finite-difference checker share these functions.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gru::{sigmoid, Activation, GruNet, GruTrace};
use crate::rng::Rng;

/// Speed shape is the only per-step feature.
pub const FEATURE_DIM: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetId {
    Embedder,
    Recovery,
    Generator,
    Supervisor,
    Discriminator,
}

impl NetId {
    pub const ALL: [NetId; 5] = [
        NetId::Embedder,
        NetId::Recovery,
        NetId::Generator,
        NetId::Supervisor,
        NetId::Discriminator,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NetId::Embedder => "embedder",
            NetId::Recovery => "recovery",
            NetId::Generator => "generator",
            NetId::Supervisor => "supervisor",
            NetId::Discriminator => "discriminator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Networks {
    pub embedder: GruNet,
    pub recovery: GruNet,
    pub generator: GruNet,
    pub supervisor: GruNet,
    pub discriminator: GruNet,
}

/// Per-network gradient buffers; `None` where a loss does not reach.
#[derive(Debug, Clone, Default)]
pub struct Grads(pub [Option<Vec<f64>>; 5]);

impl Grads {
    pub fn get(&self, id: NetId) -> Option<&[f64]> {
        self.0[id.index()].as_deref()
    }

    fn slot(&mut self, id: NetId, len: usize) -> &mut [f64] {
        self.0[id.index()].get_or_insert_with(|| vec![0.0; len])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the supervised term in the generator loss.
    pub supervised: f64,
    /// Weight of the moment-matching term in the generator loss.
    pub moment: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            supervised: 1.0,
            moment: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    pub supervised: f64,
    pub moment: f64,
    pub grads: Grads,
    /// Supervised synthetic latents `S(G(z))`, the discriminator's fake input.
    pub fake_latents: Vec<Vec<f64>>,
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

impl Networks {
    pub fn new(latent_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        Networks {
            embedder: GruNet::new(FEATURE_DIM, hidden_dim, latent_dim, Activation::Sigmoid, rng),
            recovery: GruNet::new(latent_dim, hidden_dim, FEATURE_DIM, Activation::Linear, rng),
            generator: GruNet::new(latent_dim, hidden_dim, latent_dim, Activation::Sigmoid, rng),
            supervisor: GruNet::new(latent_dim, hidden_dim, latent_dim, Activation::Sigmoid, rng),
            discriminator: GruNet::new(latent_dim, hidden_dim, 1, Activation::Linear, rng),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.embedder.output
    }

    pub fn get(&self, id: NetId) -> &GruNet {
        match id {
            NetId::Embedder => &self.embedder,
            NetId::Recovery => &self.recovery,
            NetId::Generator => &self.generator,
            NetId::Supervisor => &self.supervisor,
            NetId::Discriminator => &self.discriminator,
        }
    }

    pub fn get_mut(&mut self, id: NetId) -> &mut GruNet {
        match id {
            NetId::Embedder => &mut self.embedder,
            NetId::Recovery => &mut self.recovery,
            NetId::Generator => &mut self.generator,
            NetId::Supervisor => &mut self.supervisor,
            NetId::Discriminator => &mut self.discriminator,
        }
    }

    /// Uniform `[0, 1)` generator input for `batch` sequences of `steps`.
    pub fn draw_noise(&self, batch: usize, steps: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        let dim = self.generator.input;
        (0..batch)
            .map(|_| (0..steps * dim).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    /// `R(S(G(z)))` for each noise sequence.
    pub fn synthesize(&self, zs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        zs.iter()
            .map(|z| {
                let e = self.generator.forward(z);
                let h = self.supervisor.forward(e.outputs());
                self.recovery.forward(h.outputs()).outputs().to_vec()
            })
            .collect()
    }

    pub fn embed(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.embedder.forward(x).outputs().to_vec()).collect()
    }

    /// Reconstruction loss `mean (x - R(E(x)))^2` with gradients for E and R.
    /// Also returns the latents `E(x)`.
    pub fn reconstruction(&self, xs: &[Vec<f64>]) -> (f64, Grads, Vec<Vec<f64>>) {
        let count = (xs.len() * xs[0].len()) as f64;
        let mut grads = Grads::default();
        let mut loss = 0.0;
        let mut latents = Vec::with_capacity(xs.len());
        for x in xs {
            let e_tr = self.embedder.forward(x);
            let r_tr = self.recovery.forward(e_tr.outputs());
            let dy: Vec<f64> = r_tr
                .outputs()
                .iter()
                .zip(x)
                .map(|(y, t)| {
                    loss += (y - t) * (y - t);
                    2.0 * (y - t) / count
                })
                .collect();
            let gr = grads.slot(NetId::Recovery, self.recovery.params.len());
            let dh = self.recovery.backward(&r_tr, &dy, Some(gr), true).expect("dx requested");
            let ge = grads.slot(NetId::Embedder, self.embedder.params.len());
            self.embedder.backward(&e_tr, &dh, Some(ge), false);
            latents.push(e_tr.outputs().to_vec());
        }
        (loss / count, grads, latents)
    }

    /// One-step-ahead latent prediction loss on given latents,
    /// `mean (h[t+1] - S(h)[t])^2`. Gradients for S; when `want_dh` the
    /// gradient w.r.t. the latents themselves is returned too.
    pub fn supervised_on(&self, hs: &[Vec<f64>], want_dh: bool) -> (f64, Grads, Option<Vec<Vec<f64>>>) {
        let l = self.latent_dim();
        let steps = hs[0].len() / l;
        let count = (hs.len() * (steps - 1) * l) as f64;
        let mut grads = Grads::default();
        let mut loss = 0.0;
        let mut dhs = want_dh.then(Vec::new);
        for h in hs {
            let s_tr = self.supervisor.forward(h);
            let (ds, dtarget) = supervised_residual(s_tr.outputs(), h, l, count, &mut loss);
            let gs = grads.slot(NetId::Supervisor, self.supervisor.params.len());
            let dx = self.supervisor.backward(&s_tr, &ds, Some(gs), want_dh);
            if let (Some(dhs), Some(mut dx)) = (dhs.as_mut(), dx) {
                dx.iter_mut().zip(&dtarget).for_each(|(a, b)| *a += b);
                dhs.push(dx);
            }
        }
        (loss / count, grads, dhs)
    }

    /// Supervised loss on `E(x)`, differentiated through the embedder too.
    pub fn supervised(&self, xs: &[Vec<f64>]) -> (f64, Grads) {
        let traces: Vec<GruTrace> = xs.iter().map(|x| self.embedder.forward(x)).collect();
        let hs: Vec<Vec<f64>> = traces.iter().map(|t| t.outputs().to_vec()).collect();
        let (loss, mut grads, dhs) = self.supervised_on(&hs, true);
        for (tr, dh) in traces.iter().zip(dhs.expect("requested")) {
            let ge = grads.slot(NetId::Embedder, self.embedder.params.len());
            self.embedder.backward(tr, &dh, Some(ge), false);
        }
        (loss, grads)
    }

    /// Discriminator loss: real latents labeled 1, fake latents labeled 0,
    /// per-step logits, each term averaged over its batch and steps.
    pub fn discriminator_loss(&self, real: &[Vec<f64>], fake: &[Vec<f64>]) -> (f64, Grads) {
        let mut grads = Grads::default();
        let mut loss = 0.0;
        for (set, target) in [(real, 1.0), (fake, 0.0)] {
            let steps = set[0].len() / self.latent_dim();
            let count = (set.len() * steps) as f64;
            for h in set {
                let tr = self.discriminator.forward(h);
                let dy: Vec<f64> = tr
                    .outputs()
                    .iter()
                    .map(|&logit| {
                        loss += bce_with_logit(logit, target) / count;
                        (sigmoid(logit) - target) / count
                    })
                    .collect();
                let gd = grads.slot(NetId::Discriminator, self.discriminator.params.len());
                self.discriminator.backward(&tr, &dy, Some(gd), false);
            }
        }
        (loss, grads)
    }

    /// Generator loss: adversarial BCE of `D(S(G(z)))` against the real
    /// label, plus the supervised loss on the synthetic latents, plus
    /// per-step mean/variance matching of `R(S(G(z)))` against `xs`.
    ///
    /// Gradients always cover the generator; with `all_nets` they also
    /// cover supervisor, recovery and discriminator (for checking).
    pub fn generator_loss(&self, xs: &[Vec<f64>], zs: &[Vec<f64>], weights: LossWeights, all_nets: bool) -> GeneratorLoss {
        let l = self.latent_dim();
        let batch = zs.len();
        let steps = zs[0].len() / self.generator.input;
        let count_adv = (batch * steps) as f64;
        let count_sup = (batch * (steps - 1) * l) as f64;

        let g_trs: Vec<GruTrace> = zs.iter().map(|z| self.generator.forward(z)).collect();
        let s_trs: Vec<GruTrace> = g_trs.iter().map(|g| self.supervisor.forward(g.outputs())).collect();
        let r_trs: Vec<GruTrace> = s_trs.iter().map(|s| self.recovery.forward(s.outputs())).collect();

        // Moments per step and feature over the batch.
        let width = steps * FEATURE_DIM;
        let (mu_real, var_real) = moments(xs, width);
        let fakes: Vec<Vec<f64>> = r_trs.iter().map(|r| r.outputs().to_vec()).collect();
        let (mu_fake, var_fake) = moments(&fakes, width);
        let mut moment = 0.0;
        for k in 0..width {
            moment += (mu_fake[k] - mu_real[k]).powi(2) + (var_fake[k] - var_real[k]).powi(2);
        }
        moment /= width as f64;

        let mut grads = Grads::default();
        let mut adversarial = 0.0;
        let mut supervised = 0.0;
        let nb = batch as f64;
        for b in 0..batch {
            // Moment term through the recovery network.
            let dx: Vec<f64> = (0..width)
                .map(|k| {
                    let dmu = 2.0 * (mu_fake[k] - mu_real[k]) / nb;
                    let dvar = 2.0 * (var_fake[k] - var_real[k]) * 2.0 * (fakes[b][k] - mu_fake[k]) / nb;
                    weights.moment * (dmu + dvar) / width as f64
                })
                .collect();
            let gr = all_nets.then(|| grads.slot(NetId::Recovery, self.recovery.params.len()));
            let mut dh = self.recovery.backward(&r_trs[b], &dx, gr, true).expect("dx");

            // Adversarial term through the discriminator.
            let d_tr = self.discriminator.forward(s_trs[b].outputs());
            let dlogit: Vec<f64> = d_tr
                .outputs()
                .iter()
                .map(|&logit| {
                    adversarial += bce_with_logit(logit, 1.0) / count_adv;
                    (sigmoid(logit) - 1.0) / count_adv
                })
                .collect();
            let gd = all_nets.then(|| grads.slot(NetId::Discriminator, self.discriminator.params.len()));
            let dh_adv = self.discriminator.backward(&d_tr, &dlogit, gd, true).expect("dx");
            dh.iter_mut().zip(&dh_adv).for_each(|(a, b)| *a += b);

            // Supervised term on synthetic latents: S(e)[t] predicts e[t+1].
            let e = g_trs[b].outputs();
            let mut sup = 0.0;
            let (ds, de_target) = supervised_residual(s_trs[b].outputs(), e, l, count_sup, &mut sup);
            supervised += sup / count_sup;
            dh.iter_mut().zip(&ds).for_each(|(a, b)| *a += weights.supervised * b);

            let gs = all_nets.then(|| grads.slot(NetId::Supervisor, self.supervisor.params.len()));
            let mut de = self.supervisor.backward(&s_trs[b], &dh, gs, true).expect("dx");
            de.iter_mut().zip(&de_target).for_each(|(a, b)| *a += weights.supervised * b);

            let gg = grads.slot(NetId::Generator, self.generator.params.len());
            self.generator.backward(&g_trs[b], &de, Some(gg), false);
        }
        GeneratorLoss {
            total: adversarial + weights.supervised * supervised + weights.moment * moment,
            adversarial,
            supervised,
            moment,
            grads,
            fake_latents: s_trs.iter().map(|s| s.outputs().to_vec()).collect(),
        }
    }
}

/// Residuals of `pred[t]` against `target[t+1]`. Accumulates the squared
/// error into `loss` and returns `(d/dpred, d/dtarget)` scaled by `1/count`.
fn supervised_residual(pred: &[f64], target: &[f64], dim: usize, count: f64, loss: &mut f64) -> (Vec<f64>, Vec<f64>) {
    let steps = pred.len() / dim;
    let mut dpred = vec![0.0; pred.len()];
    let mut dtarget = vec![0.0; target.len()];
    for t in 0..steps - 1 {
        for k in 0..dim {
            let diff = pred[t * dim + k] - target[(t + 1) * dim + k];
            *loss += diff * diff;
            dpred[t * dim + k] = 2.0 * diff / count;
            dtarget[(t + 1) * dim + k] = -2.0 * diff / count;
        }
    }
    (dpred, dtarget)
}

/// Elementwise batch mean and population variance.
fn moments(seqs: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = seqs.len() as f64;
    let mut mu = vec![0.0; width];
    for s in seqs {
        mu.iter_mut().zip(s).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; width];
    for s in seqs {
        var.iter_mut().zip(s).zip(&mu).for_each(|((acc, v), m)| *acc += (v - m) * (v - m) / n);
    }
    (mu, var)
}
