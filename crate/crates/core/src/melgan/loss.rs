//! The three training losses: hinge adversarial, embedding-difference
//! preservation (keeps linguistic content), and a margin term that stops the
//! siamese embeddings from collapsing.

use super::{batch_tensor, Discriminator, MelganError, Siamese, SpectrogramSegment};
use crate::autograd::Tensor;
use crate::scalar::{real, Real};

/// Guard under the square root when taking row norms; reached only on an
/// exactly collapsed difference vector.
const NORM_GUARD: f64 = 1e-16;
/// Guard on the cosine denominator.
const COS_GUARD: f64 = 1e-8;

/// Constant `[n(n-1) x n]` matrix mapping a batch of embeddings to all
/// ordered pairwise differences: row (i, j) is `e_i - e_j`.
fn pair_difference_matrix<F: Real>(n: usize) -> Tensor<F> {
    let pairs = n * (n - 1);
    let mut vals = vec![F::zero(); pairs * n];
    let mut row = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            vals[row * n + i] = F::one();
            vals[row * n + j] = -F::one();
            row += 1;
        }
    }
    Tensor::constant(vals, &[pairs, n]).expect("pair matrix shape")
}

fn check_batch<F: Real>(emb: &Tensor<F>) -> Result<(usize, usize), MelganError> {
    let shape = emb.shape();
    if shape.len() != 2 {
        return Err(MelganError::Config(format!(
            "embeddings must be [batch, dim], got {shape:?}"
        )));
    }
    if shape[0] < 2 {
        return Err(MelganError::BatchTooSmall(shape[0]));
    }
    Ok((shape[0], shape[1]))
}

/// Transformation-vector preservation: for every ordered pair, compare the
/// source embedding difference `t` with the generated-side difference `t'`
/// via `||t - t'||^2 + (1 - cos(t, t'))`, averaged over pairs. Zero when the
/// differences are preserved exactly; invariant to adding a constant vector
/// to all generated embeddings.
pub fn travel_loss_embeddings<F: Real>(
    src_emb: &Tensor<F>,
    gen_emb: &Tensor<F>,
) -> Result<Tensor<F>, MelganError> {
    let (n, d) = check_batch(src_emb)?;
    if gen_emb.shape() != vec![n, d] {
        return Err(MelganError::Config(format!(
            "embedding batches differ: {:?} vs {:?}",
            src_emb.shape(),
            gen_emb.shape()
        )));
    }
    let pairs = pair_difference_matrix::<F>(n);
    let t_src = pairs.matmul(src_emb)?;
    let t_gen = pairs.matmul(gen_emb)?;

    let diff = t_src.sub(&t_gen)?;
    let sq = diff.mul(&diff)?.row_sum()?;

    let dot = t_src.mul(&t_gen)?.row_sum()?;
    let n_src = t_src
        .mul(&t_src)?
        .row_sum()?
        .clamp_min(real::<F>(NORM_GUARD))
        .sqrt();
    let n_gen = t_gen
        .mul(&t_gen)?
        .row_sum()?
        .clamp_min(real::<F>(NORM_GUARD))
        .sqrt();
    let cos = dot.div(&n_src.mul(&n_gen)?.clamp_min(real::<F>(COS_GUARD)))?;

    let per_pair = sq.add(&cos.neg().add_scalar(F::one()))?;
    Ok(per_pair.mean())
}

/// Mean over ordered pairs of `max(0, margin - ||e_i - e_j||)`; keeps the
/// embedding cloud spread out.
pub fn siamese_margin_loss_embeddings<F: Real>(
    emb: &Tensor<F>,
    margin: F,
) -> Result<Tensor<F>, MelganError> {
    let (n, _) = check_batch(emb)?;
    let pairs = pair_difference_matrix::<F>(n);
    let t = pairs.matmul(emb)?;
    let dist = t
        .mul(&t)?
        .row_sum()?
        .clamp_min(real::<F>(NORM_GUARD))
        .sqrt();
    Ok(dist.neg().add_scalar(margin).relu().mean())
}

/// [`travel_loss_embeddings`] on segment batches run through the siamese
/// encoder; returns the scalar value.
pub fn travel_loss<F: Real>(
    siamese: &Siamese<F>,
    src_batch: &[SpectrogramSegment<F>],
    gen_batch: &[SpectrogramSegment<F>],
) -> Result<F, MelganError> {
    if src_batch.len() < 2 || src_batch.len() != gen_batch.len() {
        return Err(MelganError::BatchTooSmall(src_batch.len().min(gen_batch.len())));
    }
    let src = siamese.forward(&batch_tensor(&src_batch.iter().collect::<Vec<_>>()))?;
    let gen = siamese.forward(&batch_tensor(&gen_batch.iter().collect::<Vec<_>>()))?;
    Ok(travel_loss_embeddings(&src, &gen)?.item())
}

/// [`siamese_margin_loss_embeddings`] on a segment batch; returns the value.
pub fn siamese_margin_loss<F: Real>(
    siamese: &Siamese<F>,
    batch: &[SpectrogramSegment<F>],
    margin: F,
) -> Result<F, MelganError> {
    if batch.len() < 2 {
        return Err(MelganError::BatchTooSmall(batch.len()));
    }
    let emb = siamese.forward(&batch_tensor(&batch.iter().collect::<Vec<_>>()))?;
    Ok(siamese_margin_loss_embeddings(&emb, margin)?.item())
}

/// Hinge GAN objectives evaluated on segment batches:
/// `loss_d = mean(relu(1 - D(real))) + mean(relu(1 + D(gen)))`,
/// `loss_g_adv = -mean(D(gen))`.
pub fn adversarial_losses<F: Real>(
    disc: &Discriminator<F>,
    real_batch: &[SpectrogramSegment<F>],
    gen_batch: &[SpectrogramSegment<F>],
) -> Result<(F, F), MelganError> {
    if real_batch.is_empty() || gen_batch.is_empty() {
        return Err(MelganError::BatchTooSmall(0));
    }
    let d_real = disc.forward(&batch_tensor(&real_batch.iter().collect::<Vec<_>>()))?;
    let d_gen = disc.forward(&batch_tensor(&gen_batch.iter().collect::<Vec<_>>()))?;
    Ok(hinge_values(&d_real.values(), &d_gen.values()))
}

/// Hinge losses from raw discriminator scores.
pub fn hinge_values<F: Real>(d_real: &[F], d_gen: &[F]) -> (F, F) {
    let one = F::one();
    let mean = |xs: &[F]| xs.iter().fold(F::zero(), |a, &v| a + v) / real::<F>(xs.len() as f64);
    let real_term = mean(
        &d_real
            .iter()
            .map(|&v| (one - v).max(F::zero()))
            .collect::<Vec<_>>(),
    );
    let gen_term = mean(
        &d_gen
            .iter()
            .map(|&v| (one + v).max(F::zero()))
            .collect::<Vec<_>>(),
    );
    let loss_d = real_term + gen_term;
    let loss_g_adv = -mean(d_gen);
    (loss_d, loss_g_adv)
}
