use std::path::Path;

use rand::Rng as _;

use super::adam::Adam;
use super::timegan::{NetId, Networks};
use super::{GanConfig, GanModel, LossRecord, MinMax, NormStats, Phase, StaticHead, TrainingExample, MIN_TRAINING_EXAMPLES};
use crate::error::{Error, Result};
use crate::kinematics::{CarefulnessClass, VelocityProfile};
use crate::rng::{self, Rng};

struct Optimizers([Adam; 5]);

impl Optimizers {
    fn new(nets: &Networks, lr: f64) -> Self {
        Optimizers(NetId::ALL.map(|id| Adam::new(nets.get(id).params.len(), lr)))
    }

    fn apply(&mut self, nets: &mut Networks, id: NetId, grads: &[f64]) {
        self.0[id.index()].step(&mut nets.get_mut(id).params, grads);
    }
}

struct Logger {
    every: usize,
    last_step: usize,
    records: Vec<LossRecord>,
}

impl Logger {
    fn record(&mut self, step: usize, phase: Phase, losses: &[(&'static str, f64)]) -> Result<()> {
        for &(name, value) in losses {
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    phase: phase.name(),
                    step,
                    loss: name,
                });
            }
        }
        if step % self.every == 0 || step == self.last_step {
            self.records.extend(losses.iter().map(|&(name, value)| LossRecord {
                step,
                phase,
                loss: name.to_string(),
                value,
            }));
        }
        Ok(())
    }
}

fn draw_batch(shapes: &[Vec<f64>], batch: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..batch).map(|_| shapes[rng.random_range(0..shapes.len())].clone()).collect()
}

/// Train the model of one class on the profiles labeled with it.
///
/// Three phases run in sequence: the embedder/recovery autoencoder on
/// reconstruction loss; the supervisor on one-step latent prediction; then
/// joint adversarial training, where each step updates the generator, then
/// the autoencoder and supervisor, then the discriminator.
pub fn train(profiles: &[VelocityProfile], class: CarefulnessClass, config: &GanConfig) -> Result<GanModel> {
    config.validate()?;
    let examples: Vec<TrainingExample> = profiles
        .iter()
        .filter(|p| p.label() == Some(class))
        .map(|p| TrainingExample::from_profile(p, config.seq_len))
        .collect::<Result<_>>()?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument(format!("no training profiles labeled {class}")));
    }
    if examples.len() < MIN_TRAINING_EXAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRAINING_EXAMPLES} {class} profiles, got {}",
            examples.len()
        )));
    }

    let stats = NormStats {
        shape: MinMax::fit(examples.iter().flat_map(|e| e.shape.iter().copied())),
        duration: MinMax::fit(examples.iter().map(|e| e.duration)),
        peak: MinMax::fit(examples.iter().map(|e| e.peak)),
    };
    let tempo: Vec<[f64; 2]> = examples
        .iter()
        .map(|e| [stats.duration.normalize(e.duration), stats.peak.normalize(e.peak)])
        .collect();
    let shapes: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| e.shape.iter().map(|&v| stats.shape.normalize(v)).collect())
        .collect();

    let mut model = GanModel::untrained(class, config.clone())?;
    model.stats = stats;
    model.static_head = StaticHead::fit(&tempo);

    let nets = &mut model.nets;
    let mut opt = Optimizers::new(nets, config.learning_rate);
    let mut rng = rng::substream(config.seed, "gan-train", 0);
    let steps = config.phase_steps;
    let mut log = Logger {
        every: config.log_every,
        last_step: steps.total().saturating_sub(1),
        records: Vec::new(),
    };
    let batch = config.batch_size;
    let mut step = 0;

    for _ in 0..steps.embed {
        let xs = draw_batch(&shapes, batch, &mut rng);
        let (loss, grads, _) = nets.reconstruction(&xs);
        log.record(step, Phase::Embed, &[("recon", loss)])?;
        opt.apply(nets, NetId::Embedder, grads.get(NetId::Embedder).expect("embedder grads"));
        opt.apply(nets, NetId::Recovery, grads.get(NetId::Recovery).expect("recovery grads"));
        step += 1;
    }

    for _ in 0..steps.supervise {
        let xs = draw_batch(&shapes, batch, &mut rng);
        let hs = nets.embed(&xs);
        let (loss, grads, _) = nets.supervised_on(&hs, false);
        log.record(step, Phase::Supervise, &[("supervised", loss)])?;
        opt.apply(nets, NetId::Supervisor, grads.get(NetId::Supervisor).expect("supervisor grads"));
        step += 1;
    }

    for _ in 0..steps.joint {
        let xs = draw_batch(&shapes, batch, &mut rng);
        let zs = nets.draw_noise(batch, config.seq_len, &mut rng);

        let g = nets.generator_loss(&xs, &zs, config.weights, false);
        opt.apply(nets, NetId::Generator, g.grads.get(NetId::Generator).expect("generator grads"));

        let (recon, er_grads, real_latents) = nets.reconstruction(&xs);
        let (sup, s_grads, _) = nets.supervised_on(&real_latents, false);
        opt.apply(nets, NetId::Embedder, er_grads.get(NetId::Embedder).expect("embedder grads"));
        opt.apply(nets, NetId::Recovery, er_grads.get(NetId::Recovery).expect("recovery grads"));
        opt.apply(nets, NetId::Supervisor, s_grads.get(NetId::Supervisor).expect("supervisor grads"));

        let (d_loss, d_grads) = nets.discriminator_loss(&real_latents, &g.fake_latents);
        opt.apply(nets, NetId::Discriminator, d_grads.get(NetId::Discriminator).expect("discriminator grads"));

        log.record(
            step,
            Phase::Joint,
            &[
                ("g_adversarial", g.adversarial),
                ("g_supervised", g.supervised),
                ("g_moment", g.moment),
                ("g_total", g.total),
                ("recon", recon),
                ("supervised", sup),
                ("d_loss", d_loss),
            ],
        )?;
        step += 1;
    }

    model.trained_steps = step;
    model.loss_curve = log.records;
    Ok(model)
}

/// Export the loss curve as CSV `step,phase,loss_name,value`.
pub fn write_loss_curve(model: &GanModel, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let io = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["step", "phase", "loss_name", "value"]).map_err(io)?;
    for r in &model.loss_curve {
        w.write_record([r.step.to_string(), r.phase.name().to_string(), r.loss.clone(), r.value.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::PhaseSteps;
    use crate::surrogate::{build_dataset, ProfileFamilyParams};

    fn quick(embed: usize, supervise: usize, joint: usize) -> GanConfig {
        GanConfig {
            seq_len: 32,
            hidden_dim: 12,
            latent_dim: 4,
            batch_size: 16,
            learning_rate: 5e-3,
            phase_steps: PhaseSteps { embed, supervise, joint },
            log_every: 1,
            ..GanConfig::default()
        }
    }

    #[test]
    fn rejects_small_or_empty_class() {
        let d = build_dataset(8, &ProfileFamilyParams::default(), 1).unwrap();
        let err = train(&d.profiles, CarefulnessClass::Careful, &quick(1, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("at least"), "{err}");
        let only_nc: Vec<_> = d.of_class(CarefulnessClass::NotCareful).cloned().collect();
        let err = train(&only_nc, CarefulnessClass::Careful, &quick(1, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("no training profiles"), "{err}");
    }

    #[test]
    fn deterministic_given_seed() {
        let d = build_dataset(32, &ProfileFamilyParams::default(), 2).unwrap();
        let a = train(&d.profiles, CarefulnessClass::Careful, &quick(3, 3, 3)).unwrap();
        let b = train(&d.profiles, CarefulnessClass::Careful, &quick(3, 3, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trained_steps, 9);
    }

    #[test]
    fn loss_curve_csv() {
        let d = build_dataset(32, &ProfileFamilyParams::default(), 2).unwrap();
        let m = train(&d.profiles, CarefulnessClass::Careful, &quick(2, 2, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_curve(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,phase,loss_name,value\n0,embed,recon,"));
        assert!(text.contains(",joint,d_loss,"));
    }
}
