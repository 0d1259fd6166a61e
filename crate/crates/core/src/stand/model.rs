//! Forward pass, BCE objective and the analytic backward pass (BPTT).

use crate::ndcore::{
    gelu, gelu_grad, layernorm_backward, layernorm_forward, sigmoid, LayerNormCache, Matrix,
    LAYERNORM_EPS,
};
use crate::{Error, Result};

use super::params::{EmbedLayer, LstmCell};
use super::{StandConfig, StandGradients, StandParams};

#[derive(Clone, Debug)]
pub struct EmbedLayerTrace {
    pub input: Matrix,
    pub pre: Matrix,
    pub ln: Vec<LayerNormCache>,
}

/// Cached activations of one LSTM direction, indexed by timestep.
#[derive(Clone, Debug)]
pub struct DirectionTrace {
    pub reverse: bool,
    /// Gate activations `[i, f, g, o]`, `T x 4d`.
    pub gates: Matrix,
    pub cells: Matrix,
    pub tanh_cells: Matrix,
    pub hidden: Matrix,
}

#[derive(Clone, Debug)]
pub struct LstmLayerTrace {
    pub input: Matrix,
    pub fwd: DirectionTrace,
    pub bwd: Option<DirectionTrace>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub embed: Vec<EmbedLayerTrace>,
    pub embeddings: Matrix,
    pub lstm: Vec<LstmLayerTrace>,
    pub encodings: Matrix,
    pub logits: Vec<f64>,
}

fn embed_layer_forward(layer: &EmbedLayer, input: &Matrix) -> (Matrix, EmbedLayerTrace) {
    let d = layer.weight.rows();
    let steps = input.rows();
    let mut pre = Matrix::zeros(steps, d);
    let mut out = Matrix::zeros(steps, d);
    let mut ln = Vec::with_capacity(steps);
    for t in 0..steps {
        let z = pre.row_mut(t);
        z.copy_from_slice(layer.bias.as_slice());
        layer.weight.matvec_acc(input.row(t), z);
        let act: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
        let (y, cache) = layernorm_forward(
            &act,
            layer.ln_gain.as_slice(),
            layer.ln_bias.as_slice(),
            LAYERNORM_EPS,
        );
        out.row_mut(t).copy_from_slice(&y);
        ln.push(cache);
    }
    (
        out,
        EmbedLayerTrace {
            input: input.clone(),
            pre,
            ln,
        },
    )
}

/// Per-timestep `LayerNorm(GELU(W h + b))` blocks; identity when the
/// embedding is disabled.
pub fn embed_forward(
    x: &Matrix,
    params: &StandParams,
    config: &StandConfig,
) -> Result<(Matrix, Vec<EmbedLayerTrace>)> {
    if x.cols() != config.channels {
        return Err(Error::config(format!(
            "input has {} channels, model expects {}",
            x.cols(),
            config.channels
        )));
    }
    if !config.use_embedding {
        return Ok((x.clone(), Vec::new()));
    }
    let mut h = x.clone();
    let mut traces = Vec::with_capacity(params.embed.len());
    for layer in &params.embed {
        let (next, trace) = embed_layer_forward(layer, &h);
        traces.push(trace);
        h = next;
    }
    Ok((h, traces))
}

fn lstm_direction_forward(cell: &LstmCell, input: &Matrix, reverse: bool) -> DirectionTrace {
    let steps = input.rows();
    let d = cell.w_hh.cols();
    let mut gates = Matrix::zeros(steps, 4 * d);
    let mut cells = Matrix::zeros(steps, d);
    let mut tanh_cells = Matrix::zeros(steps, d);
    let mut hidden = Matrix::zeros(steps, d);
    let mut h_prev = vec![0.0; d];
    let mut c_prev = vec![0.0; d];
    let mut z = vec![0.0; 4 * d];
    for k in 0..steps {
        let t = if reverse { steps - 1 - k } else { k };
        z.copy_from_slice(cell.bias.as_slice());
        cell.w_ih.matvec_acc(input.row(t), &mut z);
        cell.w_hh.matvec_acc(&h_prev, &mut z);
        let g_row = gates.row_mut(t);
        for j in 0..d {
            g_row[j] = sigmoid(z[j]);
            g_row[d + j] = sigmoid(z[d + j]);
            g_row[2 * d + j] = z[2 * d + j].tanh();
            g_row[3 * d + j] = sigmoid(z[3 * d + j]);
        }
        for j in 0..d {
            let (i, f, g, o) = (g_row[j], g_row[d + j], g_row[2 * d + j], g_row[3 * d + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            cells[(t, j)] = c;
            tanh_cells[(t, j)] = tc;
            hidden[(t, j)] = o * tc;
            c_prev[j] = c;
            h_prev[j] = o * tc;
        }
    }
    DirectionTrace {
        reverse,
        gates,
        cells,
        tanh_cells,
        hidden,
    }
}

/// Stacked (bi)directional LSTM with zero initial states; identity when the
/// temporal encoder is disabled. The bidirectional output at `t` is
/// `[forward h_t ; backward h_t]`.
pub fn bilstm_forward(
    h_e: &Matrix,
    params: &StandParams,
    config: &StandConfig,
) -> Result<(Matrix, Vec<LstmLayerTrace>)> {
    if !config.use_tem {
        return Ok((h_e.clone(), Vec::new()));
    }
    let d = config.d_model;
    let mut h = h_e.clone();
    let mut traces = Vec::with_capacity(params.lstm.len());
    for layer in &params.lstm {
        if h.cols() != layer.fwd.w_ih.cols() {
            return Err(Error::config(format!(
                "LSTM layer expects width {}, got {}",
                layer.fwd.w_ih.cols(),
                h.cols()
            )));
        }
        let fwd = lstm_direction_forward(&layer.fwd, &h, false);
        let bwd = layer
            .bwd
            .as_ref()
            .map(|cell| lstm_direction_forward(cell, &h, true));
        let width = if bwd.is_some() { 2 * d } else { d };
        let mut out = Matrix::zeros(h.rows(), width);
        for t in 0..h.rows() {
            let row = out.row_mut(t);
            row[..d].copy_from_slice(fwd.hidden.row(t));
            if let Some(b) = &bwd {
                row[d..].copy_from_slice(b.hidden.row(t));
            }
        }
        traces.push(LstmLayerTrace {
            input: std::mem::replace(&mut h, out),
            fwd,
            bwd,
        });
    }
    Ok((h, traces))
}

/// `s_t = W_c h_t + b_c` for every row of `h_enc`.
pub fn score_forward(h_enc: &Matrix, params: &StandParams) -> Result<Vec<f64>> {
    let w = &params.classifier_weight;
    if h_enc.cols() != w.cols() {
        return Err(Error::config(format!(
            "classifier expects width {}, encodings have {}",
            w.cols(),
            h_enc.cols()
        )));
    }
    let b = params.classifier_bias[(0, 0)];
    Ok((0..h_enc.rows())
        .map(|t| crate::ndcore::dot(w.as_slice(), h_enc.row(t)) + b)
        .collect())
}

/// Full model: embedding, temporal encoder, scorer.
pub fn forward(
    x: &Matrix,
    params: &StandParams,
    config: &StandConfig,
) -> Result<(Vec<f64>, ForwardTrace)> {
    if !x.is_finite() {
        return Err(Error::config("input contains non-finite values"));
    }
    let (embeddings, embed) = embed_forward(x, params, config)?;
    let (encodings, lstm) = bilstm_forward(&embeddings, params, config)?;
    let logits = score_forward(&encodings, params)?;
    Ok((
        logits.clone(),
        ForwardTrace {
            embed,
            embeddings,
            lstm,
            encodings,
            logits,
        },
    ))
}

/// Logits only, no trace retained beyond the call.
pub fn predict_logits(x: &Matrix, params: &StandParams, config: &StandConfig) -> Result<Vec<f64>> {
    forward(x, params, config).map(|(s, _)| s)
}

/// Mean BCE-with-logits, fused form `max(s,0) - s*y + ln(1 + e^-|s|)`.
pub fn bce_loss(logits: &[f64], labels: &[u8]) -> Result<f64> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::config(format!(
            "bce_loss needs equal non-zero lengths, got {} logits and {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&s, &y)| s.max(0.0) - s * y as f64 + (-s.abs()).exp().ln_1p())
        .sum();
    Ok(sum / logits.len() as f64)
}

fn lstm_direction_backward(
    cell: &LstmCell,
    grad: &mut LstmCell,
    input: &Matrix,
    trace: &DirectionTrace,
    d_hidden: &Matrix,
    d_input: &mut Matrix,
) {
    let steps = input.rows();
    let d = cell.w_hh.cols();
    let mut dh_next = vec![0.0; d];
    let mut dc_next = vec![0.0; d];
    let mut dz = vec![0.0; 4 * d];
    let zero = vec![0.0; d];
    for k in 0..steps {
        // reverse of processing order
        let t = if trace.reverse { k } else { steps - 1 - k };
        let prev = if trace.reverse {
            (t + 1 < steps).then(|| t + 1)
        } else {
            t.checked_sub(1)
        };
        let (h_prev, c_prev) = match prev {
            Some(p) => (trace.hidden.row(p), trace.cells.row(p)),
            None => (zero.as_slice(), zero.as_slice()),
        };
        let gates = trace.gates.row(t);
        let tanh_c = trace.tanh_cells.row(t);
        let dh_out = d_hidden.row(t);
        for j in 0..d {
            let (i, f, g, o) = (gates[j], gates[d + j], gates[2 * d + j], gates[3 * d + j]);
            let dh = dh_out[j] + dh_next[j];
            let d_o = dh * tanh_c[j];
            let dc = dh * o * (1.0 - tanh_c[j] * tanh_c[j]) + dc_next[j];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[d + j] = d_f * f * (1.0 - f);
            dz[2 * d + j] = d_g * (1.0 - g * g);
            dz[3 * d + j] = d_o * o * (1.0 - o);
        }
        grad.w_ih.add_outer(&dz, input.row(t));
        grad.w_hh.add_outer(&dz, h_prev);
        crate::ndcore::axpy(1.0, &dz, grad.bias.as_mut_slice());
        cell.w_ih.matvec_t_acc(&dz, d_input.row_mut(t));
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        cell.w_hh.matvec_t_acc(&dz, &mut dh_next);
    }
}

fn check_trace(trace: &ForwardTrace, params: &StandParams, config: &StandConfig) -> Result<()> {
    let stale = |m: &str| Err(Error::config(format!("stale forward trace: {m}")));
    if trace.encodings.cols() != params.classifier_weight.cols() {
        return stale("encoding width differs from classifier");
    }
    if trace.encodings.rows() != trace.logits.len() {
        return stale("logit count differs from encodings");
    }
    if trace.embed.len() != params.embed.len() || trace.lstm.len() != params.lstm.len() {
        return stale("layer count differs from parameters");
    }
    if config.use_embedding && params.embed.is_empty() {
        return stale("embedding enabled but parameters have none");
    }
    for (lt, layer) in trace.lstm.iter().zip(&params.lstm) {
        if lt.input.cols() != layer.fwd.w_ih.cols() || lt.bwd.is_some() != layer.bwd.is_some() {
            return stale("LSTM shapes differ from parameters");
        }
    }
    for (et, layer) in trace.embed.iter().zip(&params.embed) {
        if et.input.cols() != layer.weight.cols() {
            return stale("embedding shapes differ from parameters");
        }
    }
    Ok(())
}

/// Gradient of `scale * bce_loss(forward(x), labels)` accumulated into `grads`.
pub(crate) fn backward_into(
    trace: &ForwardTrace,
    labels: &[u8],
    params: &StandParams,
    config: &StandConfig,
    scale: f64,
    grads: &mut StandGradients,
) -> Result<()> {
    check_trace(trace, params, config)?;
    let steps = trace.logits.len();
    if labels.len() != steps || steps == 0 {
        return Err(Error::config(format!(
            "{} labels for a trace of length {steps}",
            labels.len()
        )));
    }
    let per_step = scale / steps as f64;
    let d_logits: Vec<f64> = trace
        .logits
        .iter()
        .zip(labels)
        .map(|(&s, &y)| (sigmoid(s) - y as f64) * per_step)
        .collect();

    // scorer
    let w_c = params.classifier_weight.as_slice();
    let mut d_h = Matrix::zeros(steps, w_c.len());
    for t in 0..steps {
        let ds = d_logits[t];
        crate::ndcore::axpy(
            ds,
            trace.encodings.row(t),
            grads.classifier_weight.as_mut_slice(),
        );
        grads.classifier_bias[(0, 0)] += ds;
        crate::ndcore::axpy(ds, w_c, d_h.row_mut(t));
    }

    // temporal encoder
    let d = config.d_model;
    for ((layer, lt), g) in params
        .lstm
        .iter()
        .zip(&trace.lstm)
        .zip(grads.lstm.iter_mut())
        .rev()
    {
        let mut d_in = Matrix::zeros(steps, lt.input.cols());
        let split = |from: usize| Matrix::from_fn(steps, d, |t, j| d_h[(t, from + j)]);
        lstm_direction_backward(
            &layer.fwd,
            &mut g.fwd,
            &lt.input,
            &lt.fwd,
            &split(0),
            &mut d_in,
        );
        if let (Some(cell), Some(gcell), Some(bt)) = (&layer.bwd, g.bwd.as_mut(), &lt.bwd) {
            lstm_direction_backward(cell, gcell, &lt.input, bt, &split(d), &mut d_in);
        }
        d_h = d_in;
    }

    // embedding
    for ((layer, et), g) in params
        .embed
        .iter()
        .zip(&trace.embed)
        .zip(grads.embed.iter_mut())
        .rev()
    {
        let mut d_in = Matrix::zeros(steps, et.input.cols());
        for t in 0..steps {
            let d_act = layernorm_backward(
                d_h.row(t),
                &et.ln[t],
                layer.ln_gain.as_slice(),
                g.ln_gain.as_mut_slice(),
                g.ln_bias.as_mut_slice(),
            );
            let d_pre: Vec<f64> = d_act
                .iter()
                .zip(et.pre.row(t))
                .map(|(da, &z)| da * gelu_grad(z))
                .collect();
            g.weight.add_outer(&d_pre, et.input.row(t));
            crate::ndcore::axpy(1.0, &d_pre, g.bias.as_mut_slice());
            layer.weight.matvec_t_acc(&d_pre, d_in.row_mut(t));
        }
        d_h = d_in;
    }
    Ok(())
}

/// Exact gradient of `bce_loss(forward(x), labels)` for one sequence.
pub fn backward(
    trace: &ForwardTrace,
    labels: &[u8],
    params: &StandParams,
    config: &StandConfig,
) -> Result<StandGradients> {
    let mut grads = params.zeros_like();
    backward_into(trace, labels, params, config, 1.0, &mut grads)?;
    Ok(grads)
}

/// Loss and gradient for one labeled sequence.
pub fn loss_and_gradient(
    x: &Matrix,
    labels: &[u8],
    params: &StandParams,
    config: &StandConfig,
) -> Result<(f64, StandGradients)> {
    let (logits, trace) = forward(x, params, config)?;
    let loss = bce_loss(&logits, labels)?;
    let grads = backward(&trace, labels, params, config)?;
    Ok((loss, grads))
}

/// Mean loss and mean gradient over a batch of sequences. Per-sequence work
/// may run in parallel; the reduction is sequential in batch order.
pub fn batch_loss_and_gradient(
    batch: &[(&Matrix, &[u8])],
    params: &StandParams,
    config: &StandConfig,
) -> Result<(f64, StandGradients)> {
    if batch.is_empty() {
        return Err(Error::config("empty batch"));
    }
    let per_sample = crate::par::map(batch, |(x, y)| loss_and_gradient(x, y, params, config));
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for r in per_sample {
        let (l, g) = r?;
        loss += l;
        grads.add_assign(&g);
    }
    let n = batch.len() as f64;
    grads.scale_in_place(1.0 / n);
    Ok((loss / n, grads))
}
