use super::*;
use crate::data::make_windows;
use crate::ndcore::{gelu, layernorm, sigmoid, Matrix, Rng, LAYERNORM_EPS};

fn tiny_config() -> StandConfig {
    StandConfig {
        d_model: 4,
        mlp_layers: 2,
        tem_layers: 1,
        window: 6,
        stride: 6,
        train_stride: 6,
        ..StandConfig::new(3)
    }
}

fn random_input(t: usize, c: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(t, c, |_, _| rng.normal())
}

/// Perturbs every parameter away from the structured init (LN gains of 1,
/// zero biases) so that no gradient entry is trivially zero.
fn jittered_params(config: &StandConfig, seed: u64) -> StandParams {
    let mut rng = Rng::new(seed);
    let mut p = StandParams::init(config, &mut rng);
    for t in p.tensors_mut() {
        t.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v += 0.3 * rng.normal());
    }
    p
}

// ---------------------------------------------------------------- embedding

#[test]
fn embedding_is_timestep_independent() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 1);
    let mut rng = Rng::new(2);
    let mut x = random_input(8, 3, &mut rng);
    let row = x.row(1).to_vec();
    x.row_mut(7).copy_from_slice(&row);
    let (h, _) = embed_forward(&x, &p, &cfg).unwrap();
    assert_eq!(h.row(1), h.row(7));
}

#[test]
fn embedding_bypass_is_identity() {
    let cfg = StandConfig {
        use_embedding: false,
        ..tiny_config()
    };
    let p = StandParams::init(&cfg, &mut Rng::new(0));
    let x = random_input(5, 3, &mut Rng::new(1));
    let (h, trace) = embed_forward(&x, &p, &cfg).unwrap();
    assert_eq!(h, x);
    assert!(trace.is_empty());
}

#[test]
fn single_identity_layer_is_layernorm_of_gelu() {
    let cfg = StandConfig {
        d_model: 3,
        mlp_layers: 1,
        ..tiny_config()
    };
    let mut p = StandParams::zeros(&cfg);
    p.embed[0].weight = Matrix::identity(3);
    p.embed[0].ln_gain.fill(1.0);
    let x = random_input(4, 3, &mut Rng::new(5));
    let (h, _) = embed_forward(&x, &p, &cfg).unwrap();
    for t in 0..4 {
        let act: Vec<f64> = x.row(t).iter().map(|&v| gelu(v)).collect();
        let want = layernorm(&act, &[1.0; 3], &[0.0; 3], LAYERNORM_EPS);
        for (a, b) in h.row(t).iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn embedding_rejects_wrong_channel_count() {
    let cfg = tiny_config();
    let p = StandParams::zeros(&cfg);
    assert!(embed_forward(&Matrix::zeros(4, 5), &p, &cfg).is_err());
}

// ---------------------------------------------------------------- LSTM

#[test]
fn zero_lstm_gives_zero_states() {
    let cfg = tiny_config();
    let p = StandParams::zeros(&cfg);
    let h_e = random_input(6, 4, &mut Rng::new(3));
    let (h, _) = bilstm_forward(&h_e, &p, &cfg).unwrap();
    assert!(h.as_slice().iter().all(|v| *v == 0.0));
    assert_eq!(h.cols(), 8);
}

#[test]
fn unidirectional_is_forward_half() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 4);
    let uni_cfg = StandConfig {
        bidirectional: false,
        ..cfg.clone()
    };
    let mut uni = StandParams::zeros(&uni_cfg);
    uni.lstm[0].fwd = p.lstm[0].fwd.clone();
    let h_e = random_input(7, 4, &mut Rng::new(5));
    let (bi, _) = bilstm_forward(&h_e, &p, &cfg).unwrap();
    let (one, _) = bilstm_forward(&h_e, &uni, &uni_cfg).unwrap();
    assert_eq!(one.cols(), 4);
    for t in 0..7 {
        assert_eq!(&bi.row(t)[..4], one.row(t));
    }
}

/// Scalar gate-by-gate LSTM, written independently of the vectorised path.
fn naive_lstm(cell: &LstmCell, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let d = cell.w_hh.cols();
    let n_in = cell.w_ih.cols();
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut out = vec![vec![0.0; d]; xs.len()];
    let order: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in order {
        let pre = |gate: usize, j: usize| {
            let row = gate * d + j;
            let mut s = cell.bias[(0, row)];
            for k in 0..n_in {
                s += cell.w_ih[(row, k)] * xs[t][k];
            }
            for k in 0..d {
                s += cell.w_hh[(row, k)] * h[k];
            }
            s
        };
        let mut new_h = vec![0.0; d];
        let mut new_c = vec![0.0; d];
        for j in 0..d {
            let i = 1.0 / (1.0 + (-pre(0, j)).exp());
            let f = 1.0 / (1.0 + (-pre(1, j)).exp());
            let g = pre(2, j).tanh();
            let o = 1.0 / (1.0 + (-pre(3, j)).exp());
            new_c[j] = f * c[j] + i * g;
            new_h[j] = o * new_c[j].tanh();
        }
        h = new_h;
        c = new_c;
        out[t] = h.clone();
    }
    out
}

#[test]
fn bilstm_matches_scalar_reference() {
    let cfg = StandConfig {
        d_model: 2,
        ..tiny_config()
    };
    let p = jittered_params(&cfg, 6);
    let h_e = random_input(3, 2, &mut Rng::new(7));
    let xs: Vec<Vec<f64>> = (0..3).map(|t| h_e.row(t).to_vec()).collect();
    let f = naive_lstm(&p.lstm[0].fwd, &xs, false);
    let b = naive_lstm(p.lstm[0].bwd.as_ref().unwrap(), &xs, true);
    let (h, _) = bilstm_forward(&h_e, &p, &cfg).unwrap();
    for t in 0..3 {
        let want: Vec<f64> = f[t].iter().chain(&b[t]).copied().collect();
        for (a, w) in h.row(t).iter().zip(&want) {
            assert!((a - w).abs() < 1e-14, "t={t}: {a} vs {w}");
        }
    }
}

#[test]
fn stacked_layers_consume_concatenated_output() {
    let cfg = StandConfig {
        d_model: 2,
        tem_layers: 2,
        ..tiny_config()
    };
    let p = jittered_params(&cfg, 8);
    let h_e = random_input(4, 2, &mut Rng::new(9));
    let xs: Vec<Vec<f64>> = (0..4).map(|t| h_e.row(t).to_vec()).collect();
    let f0 = naive_lstm(&p.lstm[0].fwd, &xs, false);
    let b0 = naive_lstm(p.lstm[0].bwd.as_ref().unwrap(), &xs, true);
    let mid: Vec<Vec<f64>> = (0..4)
        .map(|t| f0[t].iter().chain(&b0[t]).copied().collect())
        .collect();
    let f1 = naive_lstm(&p.lstm[1].fwd, &mid, false);
    let b1 = naive_lstm(p.lstm[1].bwd.as_ref().unwrap(), &mid, true);
    let (h, _) = bilstm_forward(&h_e, &p, &cfg).unwrap();
    for t in 0..4 {
        let want: Vec<f64> = f1[t].iter().chain(&b1[t]).copied().collect();
        for (a, w) in h.row(t).iter().zip(&want) {
            assert!((a - w).abs() < 1e-14);
        }
    }
}

#[test]
fn disabled_tem_is_identity() {
    let cfg = StandConfig {
        use_tem: false,
        ..tiny_config()
    };
    let p = StandParams::init(&cfg, &mut Rng::new(0));
    let h_e = random_input(5, 4, &mut Rng::new(1));
    let (h, _) = bilstm_forward(&h_e, &p, &cfg).unwrap();
    assert_eq!(h, h_e);
}

// ---------------------------------------------------------------- scorer

#[test]
fn scorer_properties() {
    let cfg = tiny_config();
    let mut p = StandParams::zeros(&cfg);
    p.classifier_bias[(0, 0)] = 0.7;
    let h = random_input(5, 8, &mut Rng::new(2));
    assert!(score_forward(&h, &p).unwrap().iter().all(|s| *s == 0.7));

    let p = jittered_params(&cfg, 3);
    let base = score_forward(&h, &p).unwrap();
    let mut doubled = p.clone();
    doubled.classifier_weight = p.classifier_weight.scale(2.0);
    doubled.classifier_bias = p.classifier_bias.scale(2.0);
    for (a, b) in score_forward(&h, &doubled).unwrap().iter().zip(&base) {
        assert!((a - 2.0 * b).abs() < 1e-14);
    }
    for t in 0..5 {
        let mut s = p.classifier_bias[(0, 0)];
        for k in 0..8 {
            s += p.classifier_weight[(0, k)] * h[(t, k)];
        }
        assert!((base[t] - s).abs() < 1e-14);
    }
    assert!(score_forward(&Matrix::zeros(5, 3), &p).is_err());
}

// ---------------------------------------------------------------- full forward

#[test]
fn zero_params_give_bias_logits() {
    let cfg = tiny_config();
    let mut p = StandParams::zeros(&cfg);
    p.classifier_bias[(0, 0)] = -1.25;
    let x = random_input(6, 3, &mut Rng::new(4));
    let (s, _) = forward(&x, &p, &cfg).unwrap();
    assert!(s.iter().all(|v| *v == -1.25));
}

#[test]
fn fully_ablated_model_is_affine() {
    let cfg = StandConfig {
        use_embedding: false,
        use_tem: false,
        ..tiny_config()
    };
    let p = StandParams::init(&cfg, &mut Rng::new(5));
    let mut rng = Rng::new(6);
    let x = random_input(6, 3, &mut rng);
    let y = random_input(6, 3, &mut rng);
    let a = 0.3;
    let mix = Matrix::from_fn(6, 3, |t, c| a * x[(t, c)] + (1.0 - a) * y[(t, c)]);
    let (sx, _) = forward(&x, &p, &cfg).unwrap();
    let (sy, _) = forward(&y, &p, &cfg).unwrap();
    let (sm, _) = forward(&mix, &p, &cfg).unwrap();
    for t in 0..6 {
        assert!((sm[t] - (a * sx[t] + (1.0 - a) * sy[t])).abs() < 1e-12);
    }
}

#[test]
fn forward_equals_chained_stages() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 7);
    let x = random_input(6, 3, &mut Rng::new(8));
    let (e, _) = embed_forward(&x, &p, &cfg).unwrap();
    let (h, _) = bilstm_forward(&e, &p, &cfg).unwrap();
    let s = score_forward(&h, &p).unwrap();
    let (full, trace) = forward(&x, &p, &cfg).unwrap();
    assert_eq!(full, s);
    assert_eq!(trace.embeddings, e);
    assert_eq!(trace.encodings, h);
}

#[test]
fn forward_rejects_non_finite_input() {
    let cfg = tiny_config();
    let p = StandParams::zeros(&cfg);
    let mut x = Matrix::zeros(6, 3);
    x[(2, 1)] = f64::NAN;
    assert!(forward(&x, &p, &cfg).is_err());
}

// ---------------------------------------------------------------- loss

#[test]
fn bce_known_values() {
    let l = bce_loss(&[0.0; 5], &[0, 1, 1, 0, 1]).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    let l = bce_loss(&[40.0, -40.0, 40.0], &[1, 0, 1]).unwrap();
    assert!(l < 1e-15 && l.is_finite());
    assert!(bce_loss(&[0.0; 3], &[0, 1]).is_err());
}

#[test]
fn bce_matches_unfused_form() {
    let mut rng = Rng::new(10);
    let s: Vec<f64> = (0..16).map(|_| rng.normal() * 3.0).collect();
    let y: Vec<u8> = (0..16).map(|_| (rng.uniform() < 0.4) as u8).collect();
    let direct: f64 = -s
        .iter()
        .zip(&y)
        .map(|(&si, &yi)| {
            let p = 1.0 / (1.0 + (-si).exp());
            yi as f64 * p.ln() + (1.0 - yi as f64) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / 16.0;
    let fused = bce_loss(&s, &y).unwrap();
    assert!(((fused - direct) / direct).abs() < 1e-9);
}

// ---------------------------------------------------------------- backward

fn total_loss(x: &Matrix, y: &[u8], p: &StandParams, cfg: &StandConfig) -> f64 {
    let (s, _) = forward(x, p, cfg).unwrap();
    bce_loss(&s, y).unwrap()
}

/// Max over tensors of `||analytic - numeric|| / max(||analytic||, ||numeric||)`
/// with central differences of step `h`.
pub(crate) fn max_relative_gradient_error(
    cfg: &StandConfig,
    seed: u64,
    steps: usize,
    h: f64,
) -> f64 {
    let p = jittered_params(cfg, seed);
    let mut rng = Rng::new(seed + 100);
    let x = random_input(steps, cfg.channels, &mut rng);
    let y: Vec<u8> = (0..steps).map(|t| (t % 3 == 1) as u8).collect();
    let (_, grads) = loss_and_gradient(&x, &y, &p, cfg).unwrap();
    let mut worst: f64 = 0.0;
    let n_tensors = p.tensors().len();
    for ti in 0..n_tensors {
        let len = p.tensors()[ti].len();
        let analytic = grads.tensors()[ti].as_slice().to_vec();
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for k in 0..len {
            let mut plus = p.clone();
            plus.tensors_mut()[ti].as_mut_slice()[k] += h;
            let mut minus = p.clone();
            minus.tensors_mut()[ti].as_mut_slice()[k] -= h;
            let numeric =
                (total_loss(&x, &y, &plus, cfg) - total_loss(&x, &y, &minus, cfg)) / (2.0 * h);
            diff2 += (analytic[k] - numeric).powi(2);
            a2 += analytic[k].powi(2);
            n2 += numeric.powi(2);
        }
        let denom = a2.sqrt().max(n2.sqrt()).max(1e-12);
        worst = worst.max(diff2.sqrt() / denom);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let err = max_relative_gradient_error(&tiny_config(), 11, 6, 1e-4);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn gradients_match_for_ablations_and_depth() {
    for cfg in [
        StandConfig {
            bidirectional: false,
            ..tiny_config()
        },
        StandConfig {
            use_tem: false,
            ..tiny_config()
        },
        StandConfig {
            use_embedding: false,
            ..tiny_config()
        },
        StandConfig {
            tem_layers: 2,
            mlp_layers: 1,
            ..tiny_config()
        },
    ] {
        let err = max_relative_gradient_error(&cfg, 12, 5, 1e-4);
        assert!(err < 1e-4, "{cfg:?}: {err}");
    }
}

#[test]
fn classifier_gradient_closed_form() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 13);
    let x = random_input(6, 3, &mut Rng::new(14));
    let y = [0u8, 1, 1, 0, 0, 1];
    let (s, trace) = forward(&x, &p, &cfg).unwrap();
    let g = backward(&trace, &y, &p, &cfg).unwrap();
    for k in 0..8 {
        let want: f64 = (0..6)
            .map(|t| (sigmoid(s[t]) - y[t] as f64) * trace.encodings[(t, k)])
            .sum::<f64>()
            / 6.0;
        assert!((g.classifier_weight[(0, k)] - want).abs() < 1e-15);
    }
}

#[test]
fn gradient_vanishes_as_logits_saturate_correctly() {
    let cfg = tiny_config();
    let x = random_input(6, 3, &mut Rng::new(15));
    let y = [1u8; 6];
    let mut last = f64::INFINITY;
    for bias in [0.0, 2.0, 5.0, 10.0, 20.0] {
        let mut p = jittered_params(&cfg, 16);
        p.classifier_weight.fill(0.0);
        p.classifier_bias[(0, 0)] = bias;
        let (_, g) = loss_and_gradient(&x, &y, &p, &cfg).unwrap();
        let n = g.l2_norm();
        assert!(n < last);
        last = n;
    }
    assert!(last < 1e-8);
}

#[test]
fn stale_trace_rejected() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 17);
    let x = random_input(6, 3, &mut Rng::new(18));
    let (_, trace) = forward(&x, &p, &cfg).unwrap();
    let other_cfg = StandConfig {
        bidirectional: false,
        ..cfg.clone()
    };
    let other = StandParams::zeros(&other_cfg);
    assert!(backward(&trace, &[0; 6], &other, &other_cfg).is_err());
    assert!(backward(&trace, &[0; 5], &p, &cfg).is_err());
}

// ---------------------------------------------------------------- training

fn toy_windows(n: usize, seed: u64) -> crate::data::WindowSet {
    let mut rng = Rng::new(seed);
    let len = n * 6;
    let mut y = vec![0u8; len];
    let x = Matrix::from_fn(len, 3, |t, _| {
        if (t / 3) % 4 == 1 {
            2.0 + 0.1 * rng.normal()
        } else {
            0.1 * rng.normal()
        }
    });
    for t in 0..len {
        y[t] = ((t / 3) % 4 == 1) as u8;
    }
    make_windows(&x, Some(&y), 6, 6).unwrap()
}

#[test]
fn one_epoch_full_batch_is_one_step() {
    let ws = toy_windows(8, 1);
    let cfg = StandConfig {
        epochs: 1,
        batch_size: 8,
        ..tiny_config()
    };
    assert_eq!(train(&ws, &cfg).unwrap().optimizer_steps, 1);
    let cfg = StandConfig {
        epochs: 3,
        batch_size: 3,
        ..tiny_config()
    };
    let out = train(&ws, &cfg).unwrap();
    assert_eq!(out.optimizer_steps, 9);
    assert_eq!(out.loss_history.len(), 3);
}

#[test]
fn training_is_deterministic() {
    let ws = toy_windows(10, 2);
    let cfg = StandConfig {
        epochs: 3,
        batch_size: 4,
        ..tiny_config()
    };
    let a = train(&ws, &cfg).unwrap();
    let b = train(&ws, &cfg).unwrap();
    let bits = |p: &StandParams| -> Vec<u64> {
        p.tensors()
            .iter()
            .flat_map(|t| t.as_slice().iter().map(|v| v.to_bits()))
            .collect()
    };
    assert_eq!(bits(&a.params), bits(&b.params));
    assert_eq!(a.loss_history, b.loss_history);
}

#[test]
fn training_reduces_loss() {
    let ws = toy_windows(16, 3);
    let cfg = StandConfig {
        epochs: 30,
        batch_size: 4,
        learning_rate: 1e-2,
        ..tiny_config()
    };
    let out = train(&ws, &cfg).unwrap();
    assert!(out.loss_history.last().unwrap() < &(0.5 * out.loss_history[0]));
}

#[test]
fn unlabeled_windows_rejected() {
    let x = Matrix::zeros(12, 3);
    let ws = make_windows(&x, None, 6, 6).unwrap();
    let err = train(&ws, &tiny_config()).unwrap_err();
    assert!(matches!(err, crate::Error::Contract(_)));
}

#[test]
fn small_step_gd_descends_monotonically() {
    let ws = toy_windows(6, 4);
    let cfg = StandConfig {
        optimizer: OptimizerKind::Gd,
        ..tiny_config()
    };
    let losses = gd_loss_trajectory(&ws, &cfg, 30, 0.05).unwrap();
    for pair in losses.windows(2) {
        assert!(pair[1] <= pair[0], "{pair:?}");
    }
}

// ---------------------------------------------------------------- inference

#[test]
fn inference_with_stride_w_reproduces_forward() {
    let cfg = tiny_config();
    let p = jittered_params(&cfg, 19);
    let x = random_input(18, 3, &mut Rng::new(20));
    let scores = infer(&x, &p, &cfg).unwrap();
    for start in [0, 6, 12] {
        let (s, _) = forward(&x.slice_rows(start, start + 6), &p, &cfg).unwrap();
        assert_eq!(&scores[start..start + 6], s.as_slice());
    }
}

#[test]
fn inference_independent_of_batch_grouping() {
    let cfg = StandConfig {
        stride: 2,
        ..tiny_config()
    };
    let p = jittered_params(&cfg, 21);
    let x = random_input(40, 3, &mut Rng::new(22));
    let ws = make_windows(&x, None, 6, 2).unwrap();
    let rows: Vec<Vec<f64>> = crate::par::map_sequential(&ws.windows, |w| {
        predict_logits(&w.values, &p, &cfg).unwrap()
    });
    let seq = crate::data::reassemble(&ws, &rows).unwrap();
    let par = infer(&x, &p, &cfg).unwrap();
    assert_eq!(seq, par);
    // scoring halves separately and stitching windows gives the same rows
    let (a, b) = ws.windows.split_at(ws.len() / 2);
    let mut split_rows: Vec<Vec<f64>> = a
        .iter()
        .map(|w| predict_logits(&w.values, &p, &cfg).unwrap())
        .collect();
    split_rows.extend(
        b.iter()
            .map(|w| predict_logits(&w.values, &p, &cfg).unwrap()),
    );
    assert_eq!(split_rows, rows);
}

#[test]
fn inference_checks_channels() {
    let cfg = tiny_config();
    let p = StandParams::zeros(&cfg);
    assert!(infer(&Matrix::zeros(10, 4), &p, &cfg).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let cfg = tiny_config();
    let model = StandModel {
        config: cfg.clone(),
        params: jittered_params(&cfg, 23),
    };
    let ck = model.to_checkpoint().unwrap();
    let mut buf = Vec::new();
    ck.write_to(&mut buf).unwrap();
    let back =
        StandModel::from_checkpoint(&Checkpoint::read_from(buf.as_slice()).unwrap()).unwrap();
    assert_eq!(back, model);
}
