//! Hand-written forward and backward passes.
//!
//! The forward pass records every intermediate needed for an exact backward
//! pass; the backward pass accumulates gradients into a zero-initialized
//! [`ModelParameters`] of the same shape. The casing loss flows back through
//! the punctuation softmax into the punctuation head and the encoder, which
//! is what makes the conditional coupling trainable.

use alloc::vec::Vec;

use super::math::{
    gelu, gelu_grad, layer_norm_backward, layer_norm_forward, log_sum_exp, softmax_slice, Matrix,
};
use super::{concat_cols, JointLoss, LinearParams, ModelError, ModelParameters};
use crate::corpus::{CASE_CLASSES, PUNCT_CLASSES};
use crate::rng::Rng;

/// Dropout configuration for a training-time forward pass.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

struct LayerTrace {
    ln1_normalized: Matrix,
    ln1_rstd: Vec<f64>,
    ln1_out: Matrix,
    queries: Matrix,
    keys: Matrix,
    values: Matrix,
    attn_probs: Vec<Matrix>,
    attn_concat: Matrix,
    attn_dropout: Option<Vec<f64>>,
    ln2_normalized: Matrix,
    ln2_rstd: Vec<f64>,
    ln2_out: Matrix,
    ff_pre: Matrix,
    ff_act: Matrix,
    ff_dropout: Option<Vec<f64>>,
}

pub struct ForwardTrace {
    pub ids: Vec<u32>,
    pub valid_len: usize,
    emb_dropout: Option<Vec<f64>>,
    layers: Vec<LayerTrace>,
    final_normalized: Matrix,
    final_rstd: Vec<f64>,
    pub hidden: Matrix,
}

fn dropout_mask(len: usize, dropout: &mut Option<&mut Dropout>) -> Option<Vec<f64>> {
    match dropout {
        Some(d) if d.rate > 0.0 => {
            let keep_scale = 1.0 / (1.0 - d.rate);
            Some(
                (0..len)
                    .map(|_| {
                        if d.rng.next_f64() < d.rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

fn apply_mask(m: &mut Matrix, mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        for (v, &s) in m.data.iter_mut().zip(mask) {
            *v *= s;
        }
    }
}

/// Full encoder forward pass over one (possibly padded) piece sequence.
pub fn forward(
    params: &ModelParameters,
    piece_ids: &[u32],
    valid_len: usize,
    mut dropout: Option<&mut Dropout>,
) -> Result<ForwardTrace, ModelError> {
    let config = &params.config;
    let n = piece_ids.len();
    if n == 0 || valid_len == 0 {
        return Err(ModelError::EmptySequence);
    }
    if n > config.max_seq_len {
        return Err(ModelError::ChunkingRequired {
            len: n,
            max: config.max_seq_len,
        });
    }
    debug_assert!(valid_len <= n);
    let d = config.hidden_dim;

    let mut embedded = Matrix::zeros(n, d);
    for (pos, &id) in piece_ids.iter().enumerate() {
        if id as usize >= config.vocab_size {
            return Err(ModelError::InvalidTokenId {
                id,
                vocab_size: config.vocab_size,
            });
        }
        let tok = params.token_embedding.row(id as usize);
        let posv = params.position_embedding.row(pos);
        for (out, (t, p)) in embedded.row_mut(pos).iter_mut().zip(tok.iter().zip(posv)) {
            *out = t + p;
        }
    }
    let emb_dropout = dropout_mask(n * d, &mut dropout);
    apply_mask(&mut embedded, &emb_dropout);

    let num_heads = config.num_heads;
    let head_dim = config.head_dim();
    let scale = 1.0 / libm::sqrt(head_dim as f64);

    let mut x = embedded.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let input = x.clone();
        let (ln1_out, ln1_normalized, ln1_rstd) =
            layer_norm_forward(&input, &layer.attn_norm.gain, &layer.attn_norm.bias);
        let queries = layer.query.forward(&ln1_out);
        let keys = layer.key.forward(&ln1_out);
        let values = layer.value.forward(&ln1_out);

        let mut attn_concat = Matrix::zeros(n, d);
        let mut attn_probs = Vec::with_capacity(num_heads);
        for h in 0..num_heads {
            let offset = h * head_dim;
            let mut probs = Matrix::zeros(n, n);
            for qi in 0..n {
                let q_row = &queries.row(qi)[offset..offset + head_dim];
                let scores = probs.row_mut(qi);
                for (kj, score) in scores.iter_mut().enumerate() {
                    if kj >= valid_len {
                        *score = f64::NEG_INFINITY;
                        continue;
                    }
                    let k_row = &keys.row(kj)[offset..offset + head_dim];
                    let mut dot = 0.0;
                    for (q, k) in q_row.iter().zip(k_row) {
                        dot += q * k;
                    }
                    *score = dot * scale;
                }
                softmax_slice(scores);
            }
            for qi in 0..n {
                let out_row = attn_concat.row_mut(qi);
                for kj in 0..valid_len {
                    let w = probs.at(qi, kj);
                    let v_row = &values.row(kj)[offset..offset + head_dim];
                    for (o, v) in out_row[offset..offset + head_dim].iter_mut().zip(v_row) {
                        *o += w * v;
                    }
                }
            }
            attn_probs.push(probs);
        }

        let mut attn_out = layer.output.forward(&attn_concat);
        let attn_dropout = dropout_mask(n * d, &mut dropout);
        apply_mask(&mut attn_out, &attn_dropout);

        let mut after_attn = input.clone();
        after_attn.add_assign(&attn_out);

        let (ln2_out, ln2_normalized, ln2_rstd) =
            layer_norm_forward(&after_attn, &layer.ff_norm.gain, &layer.ff_norm.bias);
        let ff_pre = layer.ff_in.forward(&ln2_out);
        let mut ff_act = ff_pre.clone();
        for v in ff_act.data.iter_mut() {
            *v = gelu(*v);
        }
        let mut ff_out = layer.ff_out.forward(&ff_act);
        let ff_dropout = dropout_mask(n * d, &mut dropout);
        apply_mask(&mut ff_out, &ff_dropout);

        let mut x_next = after_attn.clone();
        x_next.add_assign(&ff_out);

        layers.push(LayerTrace {
            ln1_normalized,
            ln1_rstd,
            ln1_out,
            queries,
            keys,
            values,
            attn_probs,
            attn_concat,
            attn_dropout,
            ln2_normalized,
            ln2_rstd,
            ln2_out,
            ff_pre,
            ff_act,
            ff_dropout,
        });
        x = x_next;
    }

    let (hidden, final_normalized, final_rstd) =
        layer_norm_forward(&x, &params.final_norm.gain, &params.final_norm.bias);

    Ok(ForwardTrace {
        ids: piece_ids.to_vec(),
        valid_len,
        emb_dropout,
        layers,
        final_normalized,
        final_rstd,
        hidden,
    })
}

/// Backward pass from a gradient w.r.t. the final hidden states, accumulating
/// into `grads` (same shapes as the parameters).
pub fn backward_from_hidden(
    params: &ModelParameters,
    trace: &ForwardTrace,
    grad_hidden: &Matrix,
    grads: &mut ModelParameters,
) {
    let config = &params.config;
    let n = trace.ids.len();
    let num_heads = config.num_heads;
    let head_dim = config.head_dim();
    let scale = 1.0 / libm::sqrt(head_dim as f64);

    let mut grad_x = layer_norm_backward(
        grad_hidden,
        &trace.final_normalized,
        &trace.final_rstd,
        &params.final_norm.gain,
        &mut grads.final_norm.gain,
        &mut grads.final_norm.bias,
    );

    for (l, layer_trace) in trace.layers.iter().enumerate().rev() {
        let layer = &params.layers[l];
        let layer_grads = &mut grads.layers[l];

        // Feed-forward block.
        let mut grad_ff_out = grad_x.clone();
        apply_mask(&mut grad_ff_out, &layer_trace.ff_dropout);
        layer_grads
            .ff_out
            .weight
            .add_assign(&layer_trace.ff_act.matmul_tn(&grad_ff_out));
        add_to(&mut layer_grads.ff_out.bias, &grad_ff_out.column_sums());
        let mut grad_ff_pre = grad_ff_out.matmul_nt(&layer.ff_out.weight);
        for (g, &pre) in grad_ff_pre.data.iter_mut().zip(&layer_trace.ff_pre.data) {
            *g *= gelu_grad(pre);
        }
        layer_grads
            .ff_in
            .weight
            .add_assign(&layer_trace.ln2_out.matmul_tn(&grad_ff_pre));
        add_to(&mut layer_grads.ff_in.bias, &grad_ff_pre.column_sums());
        let grad_ln2_out = grad_ff_pre.matmul_nt(&layer.ff_in.weight);

        let mut grad_after_attn = layer_norm_backward(
            &grad_ln2_out,
            &layer_trace.ln2_normalized,
            &layer_trace.ln2_rstd,
            &layer.ff_norm.gain,
            &mut layer_grads.ff_norm.gain,
            &mut layer_grads.ff_norm.bias,
        );
        grad_after_attn.add_assign(&grad_x); // residual path

        // Attention block.
        let mut grad_attn_out = grad_after_attn.clone();
        apply_mask(&mut grad_attn_out, &layer_trace.attn_dropout);
        layer_grads
            .output
            .weight
            .add_assign(&layer_trace.attn_concat.matmul_tn(&grad_attn_out));
        add_to(&mut layer_grads.output.bias, &grad_attn_out.column_sums());
        let grad_concat = grad_attn_out.matmul_nt(&layer.output.weight);

        let mut grad_queries = Matrix::zeros(n, config.hidden_dim);
        let mut grad_keys = Matrix::zeros(n, config.hidden_dim);
        let mut grad_values = Matrix::zeros(n, config.hidden_dim);
        for h in 0..num_heads {
            let offset = h * head_dim;
            let probs = &trace.layers[l].attn_probs[h];
            // dP and dV.
            let mut grad_probs = Matrix::zeros(n, n);
            for qi in 0..n {
                let go = &grad_concat.row(qi)[offset..offset + head_dim];
                for kj in 0..trace.valid_len {
                    let v_row = &layer_trace.values.row(kj)[offset..offset + head_dim];
                    let mut dot = 0.0;
                    for (g, v) in go.iter().zip(v_row) {
                        dot += g * v;
                    }
                    *grad_probs.at_mut(qi, kj) = dot;
                    let w = probs.at(qi, kj);
                    let gv = &mut grad_values.row_mut(kj)[offset..offset + head_dim];
                    for (dst, g) in gv.iter_mut().zip(go) {
                        *dst += w * g;
                    }
                }
            }
            // Softmax backward, then dQ and dK.
            for qi in 0..n {
                let p = probs.row(qi);
                let g = grad_probs.row_mut(qi);
                let mut dot = 0.0;
                for (gi, pi) in g.iter().zip(p) {
                    dot += gi * pi;
                }
                for (gi, pi) in g.iter_mut().zip(p) {
                    *gi = pi * (*gi - dot);
                }
            }
            for qi in 0..n {
                for kj in 0..trace.valid_len {
                    let ds = grad_probs.at(qi, kj) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let k_row = &layer_trace.keys.row(kj)[offset..offset + head_dim];
                    let q_row = &layer_trace.queries.row(qi)[offset..offset + head_dim];
                    {
                        let gq = &mut grad_queries.row_mut(qi)[offset..offset + head_dim];
                        for (dst, k) in gq.iter_mut().zip(k_row) {
                            *dst += ds * k;
                        }
                    }
                    let gk = &mut grad_keys.row_mut(kj)[offset..offset + head_dim];
                    for (dst, q) in gk.iter_mut().zip(q_row) {
                        *dst += ds * q;
                    }
                }
            }
        }

        layer_grads
            .query
            .weight
            .add_assign(&layer_trace.ln1_out.matmul_tn(&grad_queries));
        add_to(&mut layer_grads.query.bias, &grad_queries.column_sums());
        layer_grads
            .key
            .weight
            .add_assign(&layer_trace.ln1_out.matmul_tn(&grad_keys));
        add_to(&mut layer_grads.key.bias, &grad_keys.column_sums());
        layer_grads
            .value
            .weight
            .add_assign(&layer_trace.ln1_out.matmul_tn(&grad_values));
        add_to(&mut layer_grads.value.bias, &grad_values.column_sums());

        let mut grad_ln1_out = grad_queries.matmul_nt(&layer.query.weight);
        grad_ln1_out.add_assign(&grad_keys.matmul_nt(&layer.key.weight));
        grad_ln1_out.add_assign(&grad_values.matmul_nt(&layer.value.weight));

        let mut grad_input = layer_norm_backward(
            &grad_ln1_out,
            &layer_trace.ln1_normalized,
            &layer_trace.ln1_rstd,
            &layer.attn_norm.gain,
            &mut layer_grads.attn_norm.gain,
            &mut layer_grads.attn_norm.bias,
        );
        grad_input.add_assign(&grad_after_attn); // residual path
        grad_x = grad_input;
    }

    apply_mask(&mut grad_x, &trace.emb_dropout);
    for (pos, &id) in trace.ids.iter().enumerate() {
        let g = grad_x.row(pos);
        let tok = grads.token_embedding.row_mut(id as usize);
        for (t, gi) in tok.iter_mut().zip(g) {
            *t += gi;
        }
        let posv = grads.position_embedding.row_mut(pos);
        for (p, gi) in posv.iter_mut().zip(g) {
            *p += gi;
        }
    }
}

fn add_to(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Linear + softmax forward returning `(logits, probs)`.
fn head_forward(head: &LinearParams, input: &Matrix) -> (Matrix, Matrix) {
    let logits = head.forward(input);
    let mut probs = logits.clone();
    for r in 0..probs.rows {
        softmax_slice(probs.row_mut(r));
    }
    (logits, probs)
}

/// Mean cross-entropy over supervised positions, computed from logits via
/// log-sum-exp. Adds `(probs - onehot) * weight / count` into `grad_logits`
/// at supervised rows.
fn ce_from_logits(
    logits: &Matrix,
    probs: &Matrix,
    labels: &[Option<usize>],
    grad_logits: &mut Matrix,
    weight: f64,
) -> Result<f64, ModelError> {
    let count = labels.iter().filter(|l| l.is_some()).count();
    if count == 0 {
        return Err(ModelError::NoSupervision);
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    for (r, label) in labels.iter().enumerate() {
        let Some(class) = label else { continue };
        loss += log_sum_exp(logits.row(r)) - logits.at(r, *class);
        let grad = grad_logits.row_mut(r);
        for (g, &p) in grad.iter_mut().zip(probs.row(r)) {
            *g += weight * inv * p;
        }
        grad[*class] -= weight * inv;
    }
    Ok(loss * inv)
}

/// Joint forward + backward over one encoded sequence. Labels are per piece;
/// `None` marks ignored (unsupervised or padding) positions. Returns the loss
/// and the full gradient, accumulated into `grads`.
#[allow(clippy::too_many_arguments)]
pub fn joint_forward_backward(
    params: &ModelParameters,
    piece_ids: &[u32],
    valid_len: usize,
    punct_labels: &[Option<usize>],
    case_labels: &[Option<usize>],
    alpha: f64,
    dropout: Option<&mut Dropout>,
    grads: &mut ModelParameters,
) -> Result<JointLoss, ModelError> {
    debug_assert_eq!(piece_ids.len(), punct_labels.len());
    debug_assert_eq!(piece_ids.len(), case_labels.len());
    let trace = forward(params, piece_ids, valid_len, dropout)?;
    let n = piece_ids.len();

    let (punct_logits, punct_probs) = head_forward(&params.punct_head, &trace.hidden);
    let joined = concat_cols(&punct_probs, &trace.hidden);
    let (case_logits, case_probs) = head_forward(&params.case_head, &joined);

    let mut grad_case_logits = Matrix::zeros(n, CASE_CLASSES);
    let case_loss = ce_from_logits(
        &case_logits,
        &case_probs,
        case_labels,
        &mut grad_case_logits,
        1.0,
    )?;

    grads
        .case_head
        .weight
        .add_assign(&joined.matmul_tn(&grad_case_logits));
    add_to(&mut grads.case_head.bias, &grad_case_logits.column_sums());

    let grad_joined = grad_case_logits.matmul_nt(&params.case_head.weight);

    // The casing loss reaches the punctuation logits through the softmax that
    // produced the concatenated probabilities.
    let mut grad_punct_logits = Matrix::zeros(n, PUNCT_CLASSES);
    for r in 0..n {
        let p = punct_probs.row(r);
        let gp = &grad_joined.row(r)[..PUNCT_CLASSES];
        let mut dot = 0.0;
        for (g, pi) in gp.iter().zip(p) {
            dot += g * pi;
        }
        for (c, (g, pi)) in gp.iter().zip(p).enumerate() {
            *grad_punct_logits.at_mut(r, c) = pi * (g - dot);
        }
    }
    let punct_loss = ce_from_logits(
        &punct_logits,
        &punct_probs,
        punct_labels,
        &mut grad_punct_logits,
        alpha,
    )?;

    grads
        .punct_head
        .weight
        .add_assign(&trace.hidden.matmul_tn(&grad_punct_logits));
    add_to(&mut grads.punct_head.bias, &grad_punct_logits.column_sums());

    let mut grad_hidden = grad_punct_logits.matmul_nt(&params.punct_head.weight);
    for r in 0..n {
        let gh = &grad_joined.row(r)[PUNCT_CLASSES..];
        for (dst, g) in grad_hidden.row_mut(r).iter_mut().zip(gh) {
            *dst += g;
        }
    }

    backward_from_hidden(params, &trace, &grad_hidden, grads);

    Ok(JointLoss {
        total: alpha * punct_loss + case_loss,
        punct: punct_loss,
        case: case_loss,
    })
}

/// Masked-token forward + backward. `targets[i]` is the original piece id at
/// masked positions, `None` elsewhere. Returns the mean masked cross-entropy.
pub fn mlm_forward_backward(
    params: &ModelParameters,
    piece_ids: &[u32],
    valid_len: usize,
    targets: &[Option<u32>],
    dropout: Option<&mut Dropout>,
    grads: &mut ModelParameters,
) -> Result<f64, ModelError> {
    debug_assert_eq!(piece_ids.len(), targets.len());
    let trace = forward(params, piece_ids, valid_len, dropout)?;
    let n = piece_ids.len();

    let (logits, probs) = head_forward(&params.mlm_head, &trace.hidden);
    let labels: Vec<Option<usize>> = targets.iter().map(|t| t.map(|id| id as usize)).collect();
    let mut grad_logits = Matrix::zeros(n, params.config.vocab_size);
    let loss = ce_from_logits(&logits, &probs, &labels, &mut grad_logits, 1.0)?;

    grads
        .mlm_head
        .weight
        .add_assign(&trace.hidden.matmul_tn(&grad_logits));
    add_to(&mut grads.mlm_head.bias, &grad_logits.column_sums());
    let grad_hidden = grad_logits.matmul_nt(&params.mlm_head.weight);
    backward_from_hidden(params, &trace, &grad_hidden, grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EncoderConfig;
    use alloc::vec;

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            num_layers: 2,
            hidden_dim: 16,
            num_heads: 2,
            ff_dim: 32,
            max_seq_len: 16,
            vocab_size: 24,
            dropout_rate: 0.0,
        }
    }

    fn sample_labels(n: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let punct: Vec<Option<usize>> = (0..n)
            .map(|i| if i % 3 == 2 { None } else { Some(i % 4) })
            .collect();
        let case: Vec<Option<usize>> = (0..n)
            .map(|i| if i % 3 == 2 { None } else { Some((i + 1) % 4) })
            .collect();
        (punct, case)
    }

    #[test]
    fn joint_backward_matches_public_loss() {
        let config = tiny_config();
        let params = ModelParameters::init(&config, 21).unwrap();
        let ids: Vec<u32> = (3..11).collect();
        let (punct, case) = sample_labels(ids.len());
        let mut grads = ModelParameters::zeros(&config);
        let loss = joint_forward_backward(
            &params,
            &ids,
            ids.len(),
            &punct,
            &case,
            0.6,
            None,
            &mut grads,
        )
        .unwrap();

        let h = params.encode(&ids).unwrap();
        let p = params.punct_head_probs(&h);
        let c = params.case_head_probs(&h, &p);
        let reference = crate::model::joint_loss(&p, &c, &punct, &case, 0.6).unwrap();
        assert!((loss.total - reference.total).abs() < 1e-10);
        assert!((loss.punct - reference.punct).abs() < 1e-10);
        assert!((loss.case - reference.case).abs() < 1e-10);
    }

    #[test]
    fn padded_prefix_matches_unpadded() {
        let config = tiny_config();
        let params = ModelParameters::init(&config, 22).unwrap();
        let ids = [3u32, 4, 5, 6, 7];
        let plain = params.encode(&ids).unwrap();
        let mut padded_ids = ids.to_vec();
        padded_ids.extend([0u32; 4]); // PAD
        let padded = params.encode_padded(&padded_ids, ids.len()).unwrap();
        for r in 0..ids.len() {
            for c in 0..config.hidden_dim {
                assert!(
                    (plain.states.at(r, c) - padded.states.at(r, c)).abs() < 1e-12,
                    "row {r} col {c}"
                );
            }
        }
    }

    // Spot finite-difference check on a few tensors; the full sweep over
    // every tensor lives in the acceptance suite.
    #[test]
    fn finite_difference_spot_check() {
        let config = tiny_config();
        let mut params = ModelParameters::init(&config, 23).unwrap();
        let ids: Vec<u32> = vec![3, 9, 4, 12, 7, 5];
        let (punct, case) = sample_labels(ids.len());

        let loss_of = |p: &ModelParameters| {
            let mut sink = ModelParameters::zeros(&config);
            joint_forward_backward(p, &ids, ids.len(), &punct, &case, 0.6, None, &mut sink)
                .unwrap()
                .total
        };

        let mut grads = ModelParameters::zeros(&config);
        joint_forward_backward(
            &params,
            &ids,
            ids.len(),
            &punct,
            &case,
            0.6,
            None,
            &mut grads,
        )
        .unwrap();

        let eps = 1e-5;
        // token embedding of an id in the batch, one attention weight, the
        // coupling-carrying punct head, and a norm gain.
        let probes = [
            (0usize, 3 * 16 + 2),
            (2 + 2, 5),                     // layer.0 query.weight
            (2 + 16 + 8, 7),                // layer.1 output.weight
            (params.tensor_count() - 6, 9), // punct_head.weight
            (2 + 2 * 16, 3),                // final_norm.gain
        ];
        for (t, i) in probes {
            let orig = params.tensor(t)[i];
            params.tensor_mut(t)[i] = orig + eps;
            let plus = loss_of(&params);
            params.tensor_mut(t)[i] = orig - eps;
            let minus = loss_of(&params);
            params.tensor_mut(t)[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensor(t)[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-3,
                "tensor {} [{i}]: analytic {analytic} numeric {numeric}",
                params.tensor_name(t)
            );
        }
    }

    #[test]
    fn case_loss_reaches_punct_head() {
        let config = tiny_config();
        let params = ModelParameters::init(&config, 24).unwrap();
        let ids: Vec<u32> = vec![3, 9, 4, 12];
        let (punct, case) = sample_labels(ids.len());
        let mut grads = ModelParameters::zeros(&config);
        let loss = joint_forward_backward(
            &params,
            &ids,
            ids.len(),
            &punct,
            &case,
            0.0,
            None,
            &mut grads,
        )
        .unwrap();
        assert_eq!(loss.total, loss.case);
        let norm: f64 = grads
            .punct_head
            .weight
            .data
            .iter()
            .map(|g| g * g)
            .sum::<f64>();
        assert!(norm > 0.0, "case loss must reach the punctuation head");
    }

    #[test]
    fn mlm_backward_spot_check() {
        let config = tiny_config();
        let mut params = ModelParameters::init(&config, 25).unwrap();
        let ids: Vec<u32> = vec![3, 2, 4, 2, 7];
        let targets: Vec<Option<u32>> = vec![None, Some(9), None, Some(11), None];

        let loss_of = |p: &ModelParameters| {
            let mut sink = ModelParameters::zeros(&config);
            mlm_forward_backward(p, &ids, ids.len(), &targets, None, &mut sink).unwrap()
        };

        let mut grads = ModelParameters::zeros(&config);
        let loss =
            mlm_forward_backward(&params, &ids, ids.len(), &targets, None, &mut grads).unwrap();
        assert!(loss > 0.0);

        let eps = 1e-5;
        let mlm_w = params.tensor_count() - 2;
        for (t, i) in [(mlm_w, 4), (0usize, 3 * 16 + 1), (2 + 12, 10)] {
            let orig = params.tensor(t)[i];
            params.tensor_mut(t)[i] = orig + eps;
            let plus = loss_of(&params);
            params.tensor_mut(t)[i] = orig - eps;
            let minus = loss_of(&params);
            params.tensor_mut(t)[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensor(t)[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-3,
                "tensor {}: analytic {analytic} numeric {numeric}",
                params.tensor_name(t)
            );
        }
    }

    #[test]
    fn dropout_is_seeded_and_reproducible() {
        let config = EncoderConfig {
            dropout_rate: 0.2,
            ..tiny_config()
        };
        let params = ModelParameters::init(&config, 26).unwrap();
        let ids: Vec<u32> = vec![3, 9, 4, 12, 7];
        let (punct, case) = sample_labels(ids.len());
        let run = |seed: u64| {
            let mut rng = Rng::seed(seed);
            let mut dropout = Dropout {
                rate: 0.2,
                rng: &mut rng,
            };
            let mut grads = ModelParameters::zeros(&config);
            joint_forward_backward(
                &params,
                &ids,
                ids.len(),
                &punct,
                &case,
                0.6,
                Some(&mut dropout),
                &mut grads,
            )
            .unwrap()
            .total
        };
        assert_eq!(run(5).to_bits(), run(5).to_bits());
        assert_ne!(run(5).to_bits(), run(6).to_bits());
    }
}
