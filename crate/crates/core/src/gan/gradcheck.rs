//! Central finite-difference check of every analytic gradient.

use rand::Rng as _;
use serde::Serialize;

use super::timegan::{Grads, LossWeights, NetId, Networks};
use super::GanConfig;
use crate::error::{Error, Result};
use crate::rng;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;
/// Denominator floor. A central difference with step 1e-5 carries about
/// 1e-10 of round-off, so gradients below this magnitude are compared on
/// absolute error (1e-9 at the tolerance) instead of dividing by noise.
const DENOM_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCheck {
    pub loss: String,
    pub parameters: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub losses: Vec<LossCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

type LossFn<'a> = dyn Fn(&Networks) -> (f64, Grads) + 'a;

fn check_loss(name: &str, nets: &Networks, nets_checked: &[NetId], f: &LossFn<'_>) -> LossCheck {
    let (_, grads) = f(nets);
    let mut worst = (0.0, String::new());
    let mut count = 0;
    for &id in nets_checked {
        let analytic = grads.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; nets.get(id).params.len()]);
        for k in 0..analytic.len() {
            let mut probe = nets.clone();
            probe.get_mut(id).params[k] += STEP;
            let up = f(&probe).0;
            probe.get_mut(id).params[k] -= 2.0 * STEP;
            let down = f(&probe).0;
            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(analytic[k], numeric);
            count += 1;
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, format!("{name}/{}/{}", id.name(), nets.get(id).param_name(k)));
            }
        }
    }
    LossCheck {
        loss: name.to_string(),
        parameters: count,
        max_relative_error: worst.0,
        worst_parameter: worst.1,
    }
}

/// Compare analytic and central-difference gradients of the reconstruction,
/// supervised, discriminator and generator losses on a random small model.
///
/// Fails with the offending parameter path when any relative error reaches
/// [`GRADCHECK_TOLERANCE`].
pub fn gradient_check(config: &GanConfig, seed: u64) -> Result<GradCheckReport> {
    config.validate()?;
    if config.hidden_dim > 8 || config.seq_len > 32 || config.batch_size > 8 || config.latent_dim > 8 {
        return Err(Error::InvalidArgument(
            "gradient check expects a tiny config (hidden <= 8, seq_len <= 32, batch <= 8, latent <= 8)".into(),
        ));
    }
    let mut rng = rng::substream(seed, "gradcheck", 0);
    let nets = Networks::new(config.latent_dim, config.hidden_dim, &mut rng);
    let (b, t) = (config.batch_size, config.seq_len);
    let xs: Vec<Vec<f64>> = (0..b).map(|_| (0..t).map(|_| rng.random::<f64>()).collect()).collect();
    let zs = nets.draw_noise(b, t, &mut rng);
    let weights = LossWeights {
        supervised: config.weights.supervised,
        moment: config.weights.moment,
    };
    let real = nets.embed(&xs);
    let fake = nets.generator_loss(&xs, &zs, weights, false).fake_latents;

    let losses = vec![
        check_loss("reconstruction", &nets, &[NetId::Embedder, NetId::Recovery], &|n| {
            let (l, g, _) = n.reconstruction(&xs);
            (l, g)
        }),
        check_loss("supervised", &nets, &[NetId::Embedder, NetId::Supervisor], &|n| n.supervised(&xs)),
        check_loss("discriminator", &nets, &[NetId::Discriminator], &|n| n.discriminator_loss(&real, &fake)),
        check_loss(
            "generator",
            &nets,
            &[NetId::Generator, NetId::Supervisor, NetId::Recovery, NetId::Discriminator],
            &|n| {
                let g = n.generator_loss(&xs, &zs, weights, true);
                (g.total, g.grads)
            },
        ),
    ];
    let worst = losses
        .iter()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
        .expect("four losses");
    let report = GradCheckReport {
        max_relative_error: worst.max_relative_error,
        worst_parameter: worst.worst_parameter.clone(),
        losses: losses.clone(),
    };
    if report.max_relative_error >= GRADCHECK_TOLERANCE {
        return Err(Error::GradCheck {
            parameter: report.worst_parameter,
            relative_error: report.max_relative_error,
        });
    }
    Ok(report)
}
