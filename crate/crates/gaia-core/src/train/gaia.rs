//! One adversarial training step for the paired-autoencoder model.
//!
//! Per step, with generator G = G_d ∘ G_e and discriminator D = D_d ∘ D_e:
//! the generator encodes the batch, interpolates latent rows, and decodes
//! both; the discriminator re-autoencodes the real batch, the generated
//! batch, and the decoded interpolations. The generator is pulled toward
//! samples the discriminator reconstructs well, the discriminator toward
//! reconstructing real data well and generated data badly, and both updates
//! are throttled by logistic balance weights computed from the losses.

use ndarray::s;
use rand::Rng;

use super::interp::Interpolation;
use super::losses::{balance_sigmoid, distance_loss, distance_loss_with_grad, pixel_loss_grad};
use super::{StepLosses, TrainConfig};
use crate::error::{CoreError, Result};
use crate::model::GaiaModel;
use crate::tensor::{adam_step, vstack, AdamState, Matrix, NetworkGrads, Tape};

/// Adam states for the four networks of a [`GaiaModel`].
#[derive(Debug, Clone)]
pub struct GaiaOptimizers {
    pub gen_encoder: AdamState,
    pub gen_decoder: AdamState,
    pub disc_encoder: AdamState,
    pub disc_decoder: AdamState,
}

impl GaiaOptimizers {
    pub fn new(model: &GaiaModel) -> Self {
        GaiaOptimizers {
            gen_encoder: AdamState::new(&model.generator.encoder),
            gen_decoder: AdamState::new(&model.generator.decoder),
            disc_encoder: AdamState::new(&model.discriminator.encoder),
            disc_decoder: AdamState::new(&model.discriminator.decoder),
        }
    }
}

/// Everything produced by one forward sweep: intermediate batches, the four
/// losses, and the tapes needed to backpropagate either player's loss.
///
/// The generator decoder runs once on `[z; z_int]` stacked and the
/// discriminator once on `[x; x_int; x_gen]` stacked, so each network pays
/// for a single gemm pass and a single tape.
pub struct GaiaForward {
    pub z: Matrix,
    pub z_int: Matrix,
    pub x_gen: Matrix,
    pub x_int: Matrix,
    pub d_x: Matrix,
    pub d_x_int: Matrix,
    pub d_x_gen: Matrix,
    pub l_x: f64,
    pub l_x_gen: f64,
    pub l_x_int: f64,
    pub l_distance: f64,
    ge_tape: Tape,
    gd_tape: Tape,
    de_tape: Tape,
    dd_tape: Tape,
}

/// Runs the full forward sweep for one batch under a fixed interpolation
/// plan. Pure with respect to the model; no parameters change.
pub fn gaia_forward(model: &GaiaModel, x: &Matrix, interp: &Interpolation) -> Result<GaiaForward> {
    let b = x.nrows();
    if interp.betas.len() != b {
        return Err(CoreError::ShapeMismatch {
            context: "gaia_forward",
            expected: format!("interpolation plan for {b} rows"),
            got: format!("{} rows", interp.betas.len()),
        });
    }

    let (z, ge_tape) = model.generator.encoder.forward(x)?;
    let z_int = interp.apply(&z)?;

    let (gd_out, gd_tape) = model.generator.decoder.forward(&vstack(&[&z, &z_int])?)?;
    let x_gen = gd_out.slice(s![..b, ..]).to_owned();
    let x_int = gd_out.slice(s![b.., ..]).to_owned();

    let (d_out, de_latent_tapes) = {
        let stacked = vstack(&[x, &x_int, &x_gen])?;
        let (latent, de_tape) = model.discriminator.encoder.forward(&stacked)?;
        let (out, dd_tape) = model.discriminator.decoder.forward(&latent)?;
        (out, (de_tape, dd_tape))
    };
    let (de_tape, dd_tape) = de_latent_tapes;
    let d_x = d_out.slice(s![..b, ..]).to_owned();
    let d_x_int = d_out.slice(s![b..2 * b, ..]).to_owned();
    let d_x_gen = d_out.slice(s![2 * b.., ..]).to_owned();

    let (l_x, _) = pixel_loss_grad(&d_x, x)?;
    let (l_x_gen, _) = pixel_loss_grad(&d_x_gen, x)?;
    let (l_x_int, _) = pixel_loss_grad(&d_x_int, &x_int)?;
    let l_distance = distance_loss(x, &z)?;

    Ok(GaiaForward {
        z,
        z_int,
        x_gen,
        x_int,
        d_x,
        d_x_int,
        d_x_gen,
        l_x,
        l_x_gen,
        l_x_int,
        l_distance,
        ge_tape,
        gd_tape,
        de_tape,
        dd_tape,
    })
}

/// Gradients of the generator objective
/// `L_x_gen * w_gen_gen + L_x_int * w_gen_int + L_distance * alpha`
/// with respect to the generator's encoder and decoder parameters. The
/// discriminator is treated as a frozen function the loss flows through.
pub fn generator_gradients(
    model: &GaiaModel,
    fwd: &GaiaForward,
    x: &Matrix,
    interp: &Interpolation,
    w_gen_gen: f64,
    w_gen_int: f64,
    alpha: f64,
) -> Result<(NetworkGrads, NetworkGrads)> {
    let b = x.nrows();
    let d = x.ncols();

    // Seeds at the discriminator output, per stream: L_x_gen reaches
    // d_x_gen, L_x_int reaches d_x_int, and the real stream gets nothing.
    let (_, g_dxgen) = pixel_loss_grad(&fwd.d_x_gen, x)?;
    let (_, g_dxint) = pixel_loss_grad(&fwd.d_x_int, &fwd.x_int)?;
    let mut d_seed = Matrix::zeros((3 * b, d));
    d_seed
        .slice_mut(s![b..2 * b, ..])
        .assign(&g_dxint.mapv(|v| v * w_gen_int));
    d_seed
        .slice_mut(s![2 * b.., ..])
        .assign(&g_dxgen.mapv(|v| v * w_gen_gen));

    // Through the frozen discriminator back to its inputs.
    let g_latent = model.discriminator.decoder.backward_input(&fwd.dd_tape, &d_seed)?;
    let g_d_input = model.discriminator.encoder.backward_input(&fwd.de_tape, &g_latent)?;

    // L_x_int also touches x_int directly (it is the target of its own
    // reconstruction term), with gradient opposite to the d_x_int side.
    let mut g_x_int = g_d_input.slice(s![b..2 * b, ..]).to_owned();
    g_x_int -= &g_dxint.mapv(|v| v * w_gen_int);
    let g_x_gen = g_d_input.slice(s![2 * b.., ..]).to_owned();

    // Through the generator decoder (one stacked pass: [z; z_int]).
    let gd_seed = vstack(&[&g_x_gen, &g_x_int])?;
    let (gd_grads, g_z_stacked) = model.generator.decoder.backward(&fwd.gd_tape, &gd_seed)?;
    let g_z_direct = g_z_stacked.slice(s![..b, ..]).to_owned();
    let g_z_int = g_z_stacked.slice(s![b.., ..]).to_owned();

    // Collect dL/dz: the decode-of-z path, the interpolation path, and the
    // distance regularizer.
    let mut g_z = g_z_direct + interp.backward(&g_z_int)?;
    if alpha != 0.0 {
        let (_, g_dist) = distance_loss_with_grad(x, &fwd.z)?;
        g_z += &g_dist.mapv(|v| v * alpha);
    }

    let (ge_grads, _) = model.generator.encoder.backward(&fwd.ge_tape, &g_z)?;
    Ok((ge_grads, gd_grads))
}

/// Gradients of the discriminator objective
/// `L_x - mean(L_x_gen, L_x_int) * w_disc_fake`
/// with respect to the discriminator's encoder and decoder parameters: it
/// descends the real-data reconstruction loss and ascends the generated and
/// interpolated ones.
pub fn discriminator_gradients(
    model: &GaiaModel,
    fwd: &GaiaForward,
    x: &Matrix,
    w_disc_fake: f64,
) -> Result<(NetworkGrads, NetworkGrads)> {
    let b = x.nrows();
    let d = x.ncols();

    let (_, g_dx) = pixel_loss_grad(&fwd.d_x, x)?;
    let (_, g_dxint) = pixel_loss_grad(&fwd.d_x_int, &fwd.x_int)?;
    let (_, g_dxgen) = pixel_loss_grad(&fwd.d_x_gen, x)?;

    // mean(L_x_gen, L_x_int) contributes -w/2 to each generated stream.
    let fake_scale = -0.5 * w_disc_fake;
    let mut d_seed = Matrix::zeros((3 * b, d));
    d_seed.slice_mut(s![..b, ..]).assign(&g_dx);
    d_seed
        .slice_mut(s![b..2 * b, ..])
        .assign(&g_dxint.mapv(|v| v * fake_scale));
    d_seed
        .slice_mut(s![2 * b.., ..])
        .assign(&g_dxgen.mapv(|v| v * fake_scale));

    let (dd_grads, g_latent) = model.discriminator.decoder.backward(&fwd.dd_tape, &d_seed)?;
    let (de_grads, _) = model.discriminator.encoder.backward(&fwd.de_tape, &g_latent)?;
    Ok((de_grads, dd_grads))
}

/// One full training iteration: forward sweep, balance weights, one Adam
/// update per network. Returns the per-step loss record.
///
/// Balance weights scale each player's effective learning rate for the
/// step. As published, the generator's rate is scaled by δ_Disc and the
/// discriminator's by δ_Gen; `config.swap_balance` applies each weight to
/// its namesake instead.
pub fn gaia_step<R: Rng>(
    model: &mut GaiaModel,
    x: &Matrix,
    config: &TrainConfig,
    rng: &mut R,
    opt: &mut GaiaOptimizers,
) -> Result<StepLosses> {
    let interp = Interpolation::sample(x.nrows(), config.interp_mu, config.interp_sigma, rng)?;
    let fwd = gaia_forward(model, x, &interp)?;

    let losses = [fwd.l_x, fwd.l_x_gen, fwd.l_x_int, fwd.l_distance];
    if !losses.iter().all(|l| l.is_finite()) {
        return Err(CoreError::Diverged {
            step: 0,
            detail: format!(
                "non-finite loss (L_x={}, L_x_gen={}, L_x_int={}, L_distance={})",
                fwd.l_x, fwd.l_x_gen, fwd.l_x_int, fwd.l_distance
            ),
        });
    }

    let fake_mean = 0.5 * (fwd.l_x_gen + fwd.l_x_int);
    let delta_disc = balance_sigmoid(fwd.l_x - fake_mean, config.sigmoid_slope);
    let delta_gen = 1.0 - delta_disc;
    let w_gen_int = balance_sigmoid(fwd.l_x_int - fwd.l_x_gen, config.sigmoid_slope);
    let w_gen_gen = 1.0 - w_gen_int;
    let w_disc_fake = balance_sigmoid(fake_mean * config.gamma - fwd.l_x, config.sigmoid_slope);

    let (ge_grads, gd_grads) =
        generator_gradients(model, &fwd, x, &interp, w_gen_gen, w_gen_int, config.alpha)?;
    let (de_grads, dd_grads) = discriminator_gradients(model, &fwd, x, w_disc_fake)?;

    let (gen_rate, disc_rate) = if config.swap_balance {
        (delta_gen, delta_disc)
    } else {
        (delta_disc, delta_gen)
    };
    let gen_lr = config.lr * gen_rate;
    let disc_lr = config.lr * disc_rate;

    adam_step(&mut model.generator.encoder, &ge_grads, &mut opt.gen_encoder, gen_lr)?;
    adam_step(&mut model.generator.decoder, &gd_grads, &mut opt.gen_decoder, gen_lr)?;
    adam_step(&mut model.discriminator.encoder, &de_grads, &mut opt.disc_encoder, disc_lr)?;
    adam_step(&mut model.discriminator.decoder, &dd_grads, &mut opt.disc_decoder, disc_lr)?;

    Ok(StepLosses {
        l_x: fwd.l_x,
        l_x_gen: fwd.l_x_gen,
        l_x_int: fwd.l_x_int,
        l_distance: fwd.l_distance,
        delta_disc,
        delta_gen,
        w_gen_int,
        w_gen_gen,
        w_disc_fake,
    })
}
