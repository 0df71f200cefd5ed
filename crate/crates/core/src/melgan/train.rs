//! Alternating adversarial training: a fixed cycle of generator(+siamese)
//! updates followed by one discriminator update, deterministic given the
//! seed.

use super::loss::{hinge_values, siamese_margin_loss_embeddings, travel_loss_embeddings};
use super::{batch_tensor, MelganError, MelganModel, SpectrogramSegment};
use crate::autograd::{AdamState, Tensor};
use crate::classifier::EmotionLabel;
use crate::config::{DspSection, MelganSection};
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

/// Per-step loss record; all four values are logged on every step, whichever
/// network the step updated.
#[derive(Debug, Clone, Copy)]
pub struct GanLosses<F> {
    pub loss_d: F,
    pub loss_g_adv: F,
    pub loss_travel: F,
    pub loss_margin: F,
}

impl<F: Real> GanLosses<F> {
    pub fn is_finite(&self) -> bool {
        self.loss_d.is_finite()
            && self.loss_g_adv.is_finite()
            && self.loss_travel.is_finite()
            && self.loss_margin.is_finite()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport<F> {
    pub history: Vec<GanLosses<F>>,
    pub gen_updates: usize,
    pub disc_updates: usize,
}

/// Trains one source-to-target model on pre-segmented pools. `on_epoch` runs
/// after each epoch (checkpointing hook). With `epochs = 0` the initialized
/// model is returned untouched with an empty history.
pub fn train_pair<F: Real>(
    source: &[SpectrogramSegment<F>],
    target: &[SpectrogramSegment<F>],
    pair: (EmotionLabel, EmotionLabel),
    melgan: &MelganSection,
    dsp: &DspSection,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &MelganModel<F>) -> Result<(), MelganError>,
) -> Result<(MelganModel<F>, TrainReport<F>), MelganError> {
    if source.is_empty() {
        return Err(MelganError::EmptyPool("source"));
    }
    if target.is_empty() {
        return Err(MelganError::EmptyPool("target"));
    }
    let expected = (dsp.n_mels, melgan.seg_frames);
    for seg in source.iter().chain(target.iter()) {
        let got = (seg.n_mels(), seg.n_frames());
        if got != expected {
            return Err(MelganError::SegmentShape { expected, got });
        }
    }

    let model = MelganModel::new(melgan, dsp, pair, seed)?;
    let mut g_params = model.generator.params();
    g_params.extend(model.siamese.params());
    let d_params = model.discriminator.params();

    let lr = real::<F>(melgan.learning_rate);
    let beta1 = real::<F>(melgan.beta1);
    let beta2 = real::<F>(melgan.beta2);
    let mut adam_g = AdamState::new(lr, beta1, beta2, &g_params);
    let mut adam_d = AdamState::new(lr, beta1, beta2, &d_params);

    let w_travel = real::<F>(melgan.travel_weight);
    let w_margin = real::<F>(melgan.margin_weight);
    let margin = real::<F>(melgan.margin);
    let cycle = melgan.gen_updates_per_disc + 1;
    let batch = melgan.batch_size;

    let mut report = TrainReport::default();
    let mut step = 0usize;
    let mut capped = false;

    for epoch in 0..melgan.epochs {
        let mut src_order: Vec<usize> = (0..source.len()).collect();
        let mut tgt_order: Vec<usize> = (0..target.len()).collect();
        SeededRng::derive(seed, 0x5000 + epoch as u64).shuffle(&mut src_order);
        SeededRng::derive(seed, 0x9000 + epoch as u64).shuffle(&mut tgt_order);
        let n_batches = src_order.len().min(tgt_order.len()) / batch;

        for b in 0..n_batches {
            if melgan.max_steps > 0 && step >= melgan.max_steps {
                capped = true;
                break;
            }
            let src_batch: Vec<&SpectrogramSegment<F>> = src_order[b * batch..(b + 1) * batch]
                .iter()
                .map(|&i| &source[i])
                .collect();
            let tgt_batch: Vec<&SpectrogramSegment<F>> = tgt_order[b * batch..(b + 1) * batch]
                .iter()
                .map(|&i| &target[i])
                .collect();
            let src_t = batch_tensor(&src_batch);
            let tgt_t = batch_tensor(&tgt_batch);

            for p in g_params.iter().chain(d_params.iter()) {
                p.zero_grad();
            }

            let losses = if step % cycle < melgan.gen_updates_per_disc {
                let l = generator_step(&model, &src_t, &tgt_t, w_travel, w_margin, margin)?;
                adam_g.step(&g_params)?;
                report.gen_updates += 1;
                l
            } else {
                let l = discriminator_step(&model, &src_t, &tgt_t, margin)?;
                adam_d.step(&d_params)?;
                report.disc_updates += 1;
                l
            };

            if !losses.is_finite() {
                return Err(MelganError::NanLoss { step });
            }
            report.history.push(losses);
            step += 1;
        }

        on_epoch(epoch, &model)?;
        if capped {
            break;
        }
    }
    Ok((model, report))
}

/// Generator + siamese update. Returns all four losses; `loss_d` is
/// evaluated without gradients for the log.
fn generator_step<F: Real>(
    model: &MelganModel<F>,
    src_t: &Tensor<F>,
    tgt_t: &Tensor<F>,
    w_travel: F,
    w_margin: F,
    margin: F,
) -> Result<GanLosses<F>, MelganError> {
    let gen_out = model.generator.forward(src_t)?;
    let d_gen = model.discriminator.forward(&gen_out)?;
    let loss_g_adv = d_gen.mean().neg();

    let src_emb = model.siamese.forward(src_t)?;
    let gen_emb = model.siamese.forward(&gen_out)?;
    let loss_travel = travel_loss_embeddings(&src_emb, &gen_emb)?;
    let loss_margin = siamese_margin_loss_embeddings(&src_emb, margin)?;

    let total = loss_g_adv
        .add(&loss_travel.scale(w_travel))?
        .add(&loss_margin.scale(w_margin))?;
    total.backward()?;

    // loss_d for the log only: fresh scores on the real batch plus the
    // generated scores already at hand.
    let d_real_vals = model.discriminator.forward(tgt_t)?.values();
    let (loss_d, _) = hinge_values(&d_real_vals, &d_gen.values());

    Ok(GanLosses {
        loss_d,
        loss_g_adv: loss_g_adv.item(),
        loss_travel: loss_travel.item(),
        loss_margin: loss_margin.item(),
    })
}

/// Discriminator update on real targets vs detached generator output.
fn discriminator_step<F: Real>(
    model: &MelganModel<F>,
    src_t: &Tensor<F>,
    tgt_t: &Tensor<F>,
    margin: F,
) -> Result<GanLosses<F>, MelganError> {
    let gen_detached = model.generator.forward(src_t)?.detach();
    let d_real = model.discriminator.forward(tgt_t)?;
    let d_fake = model.discriminator.forward(&gen_detached)?;

    let one = F::one();
    let real_term = d_real.neg().add_scalar(one).relu().mean();
    let fake_term = d_fake.add_scalar(one).relu().mean();
    let loss_d = real_term.add(&fake_term)?;
    loss_d.backward()?;

    // Remaining losses for the log, gradient-free.
    let src_emb = model.siamese.forward(src_t)?.detach();
    let gen_emb = model.siamese.forward(&gen_detached)?.detach();
    let loss_travel = travel_loss_embeddings(&src_emb, &gen_emb)?;
    let loss_margin = siamese_margin_loss_embeddings(&src_emb, margin)?;
    let (_, loss_g_adv) = hinge_values(&d_real.values(), &d_fake.values());

    Ok(GanLosses {
        loss_d: loss_d.item(),
        loss_g_adv,
        loss_travel: loss_travel.item(),
        loss_margin: loss_margin.item(),
    })
}
