//! Forward steps with saved activations, and backpropagation through time.

use super::{CellKind, RecurrentModel, SeqnetError};
use crate::domain::Level;
use crate::metrics::{cross_entropy, softmax};
use crate::par;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn concat(h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(h.len() + x.len());
    z.extend_from_slice(h);
    z.extend_from_slice(x);
    z
}

/// Activations of one LSTM step.
pub(super) struct LstmTrace {
    z: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    pub(super) c: Vec<f64>,
    tanh_c: Vec<f64>,
    pub(super) h: Vec<f64>,
}

pub(super) fn lstm_forward(
    m: &RecurrentModel,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> LstmTrace {
    let z = concat(h_prev, x);
    let f: Vec<f64> = m.gates[0].affine(&z).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = m.gates[1].affine(&z).into_iter().map(sigmoid).collect();
    let o: Vec<f64> = m.gates[2].affine(&z).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = m.gates[3].affine(&z).into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..m.hidden_size)
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    LstmTrace {
        z,
        c_prev: c_prev.to_vec(),
        f,
        i,
        o,
        g,
        c,
        tanh_c,
        h,
    }
}

/// Activations of one GRU step.
pub(super) struct GruTrace {
    z: Vec<f64>,
    h_prev: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    /// `[r * h_prev; x]`, the candidate's input.
    zr: Vec<f64>,
    n: Vec<f64>,
    pub(super) h: Vec<f64>,
}

pub(super) fn gru_forward(m: &RecurrentModel, x: &[f64], h_prev: &[f64]) -> GruTrace {
    let z = concat(h_prev, x);
    let u: Vec<f64> = m.gates[0].affine(&z).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = m.gates[1].affine(&z).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let zr = concat(&rh, x);
    let n: Vec<f64> = m.gates[2].affine(&zr).into_iter().map(f64::tanh).collect();
    let h = (0..m.hidden_size)
        .map(|k| (1.0 - u[k]) * h_prev[k] + u[k] * n[k])
        .collect();
    GruTrace {
        z,
        h_prev: h_prev.to_vec(),
        u,
        r,
        zr,
        n,
        h,
    }
}

enum Trace {
    Lstm(Vec<LstmTrace>),
    Gru(Vec<GruTrace>),
}

impl Trace {
    fn last_hidden(&self, hidden: usize) -> Vec<f64> {
        match self {
            Trace::Lstm(t) => t.last().map_or(vec![0.0; hidden], |s| s.h.clone()),
            Trace::Gru(t) => t.last().map_or(vec![0.0; hidden], |s| s.h.clone()),
        }
    }
}

fn run(m: &RecurrentModel, window: &[f64]) -> Trace {
    let hsz = m.hidden_size;
    let inputs = window.chunks_exact(m.input_size);
    match m.kind {
        CellKind::Lstm => {
            let mut out: Vec<LstmTrace> = Vec::with_capacity(window.len());
            let (mut h, mut c) = (vec![0.0; hsz], vec![0.0; hsz]);
            for x in inputs {
                let t = lstm_forward(m, x, &h, &c);
                h.clone_from(&t.h);
                c.clone_from(&t.c);
                out.push(t);
            }
            Trace::Lstm(out)
        }
        CellKind::Gru => {
            let mut out: Vec<GruTrace> = Vec::with_capacity(window.len());
            let mut h = vec![0.0; hsz];
            for x in inputs {
                let t = gru_forward(m, x, &h);
                h.clone_from(&t.h);
                out.push(t);
            }
            Trace::Gru(out)
        }
    }
}

pub(super) fn final_hidden(m: &RecurrentModel, window: &[f64]) -> Vec<f64> {
    run(m, window).last_hidden(m.hidden_size)
}

/// Backpropagates `dh` (gradient at the last hidden state) through the trace.
fn bptt(m: &RecurrentModel, trace: &Trace, mut dh: Vec<f64>, grad: &mut RecurrentModel) {
    let hsz = m.hidden_size;
    match trace {
        Trace::Lstm(steps) => {
            let mut dc_next = vec![0.0; hsz];
            for s in steps.iter().rev() {
                let mut da = [
                    vec![0.0; hsz],
                    vec![0.0; hsz],
                    vec![0.0; hsz],
                    vec![0.0; hsz],
                ];
                let mut dc_prev = vec![0.0; hsz];
                for k in 0..hsz {
                    let d_o = dh[k] * s.tanh_c[k];
                    let dc = dc_next[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                    let d_f = dc * s.c_prev[k];
                    let d_i = dc * s.g[k];
                    let d_g = dc * s.i[k];
                    dc_prev[k] = dc * s.f[k];
                    da[0][k] = d_f * s.f[k] * (1.0 - s.f[k]);
                    da[1][k] = d_i * s.i[k] * (1.0 - s.i[k]);
                    da[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                    da[3][k] = d_g * (1.0 - s.g[k] * s.g[k]);
                }
                let mut dz = vec![0.0; s.z.len()];
                for (gate, (g, a)) in m.gates.iter().zip(grad.gates.iter_mut().zip(&da)) {
                    g.weight.outer_acc(a, &s.z);
                    g.bias.iter_mut().zip(a).for_each(|(b, v)| *b += v);
                    gate.weight.tmatvec_acc(a, &mut dz);
                }
                dh = dz[..hsz].to_vec();
                dc_next = dc_prev;
            }
        }
        Trace::Gru(steps) => {
            for s in steps.iter().rev() {
                let mut dh_prev = vec![0.0; hsz];
                let mut da_u = vec![0.0; hsz];
                let mut da_n = vec![0.0; hsz];
                for k in 0..hsz {
                    let dn = dh[k] * s.u[k];
                    let du = dh[k] * (s.n[k] - s.h_prev[k]);
                    dh_prev[k] = dh[k] * (1.0 - s.u[k]);
                    da_n[k] = dn * (1.0 - s.n[k] * s.n[k]);
                    da_u[k] = du * s.u[k] * (1.0 - s.u[k]);
                }
                let cand = &mut grad.gates[2];
                cand.weight.outer_acc(&da_n, &s.zr);
                cand.bias.iter_mut().zip(&da_n).for_each(|(b, v)| *b += v);
                let mut dzr = vec![0.0; s.zr.len()];
                m.gates[2].weight.tmatvec_acc(&da_n, &mut dzr);
                let mut da_r = vec![0.0; hsz];
                for k in 0..hsz {
                    // dzr[k] is the gradient w.r.t. (r * h_prev)[k]
                    let dr = dzr[k] * s.h_prev[k];
                    dh_prev[k] += dzr[k] * s.r[k];
                    da_r[k] = dr * s.r[k] * (1.0 - s.r[k]);
                }
                let mut dz = vec![0.0; s.z.len()];
                for (idx, a) in [(0, &da_u), (1, &da_r)] {
                    let g = &mut grad.gates[idx];
                    g.weight.outer_acc(a, &s.z);
                    g.bias.iter_mut().zip(a.iter()).for_each(|(b, v)| *b += v);
                    m.gates[idx].weight.tmatvec_acc(a, &mut dz);
                }
                for k in 0..hsz {
                    dh_prev[k] += dz[k];
                }
                dh = dh_prev;
            }
        }
    }
}

/// Loss and parameter gradient of one labeled window.
fn sample_gradient(
    m: &RecurrentModel,
    window: &[f64],
    label: Level,
    mask: Option<&[f64]>,
) -> (f64, RecurrentModel) {
    let trace = run(m, window);
    let h = trace.last_hidden(m.hidden_size);
    let dropped: Vec<f64> = match mask {
        Some(mk) => h.iter().zip(mk).map(|(a, b)| a * b).collect(),
        None => h,
    };
    let mut logits = m.out_bias.clone();
    m.out_weight.matvec_acc(&dropped, &mut logits);
    let p = softmax(&logits);
    let loss = cross_entropy(&p, label.index());

    let mut grad = m.zeros_like();
    let mut dlogits = p;
    dlogits[label.index()] -= 1.0;
    grad.out_weight.outer_acc(&dlogits, &dropped);
    grad.out_bias
        .iter_mut()
        .zip(&dlogits)
        .for_each(|(b, v)| *b += v);
    let mut dh = vec![0.0; m.hidden_size];
    m.out_weight.tmatvec_acc(&dlogits, &mut dh);
    if let Some(mk) = mask {
        dh.iter_mut().zip(mk).for_each(|(d, k)| *d *= k);
    }
    bptt(m, &trace, dh, &mut grad);
    (loss, grad)
}

fn check_batch(
    m: &RecurrentModel,
    windows: &[Vec<f64>],
    labels: &[Level],
) -> Result<(), SeqnetError> {
    if windows.is_empty() {
        return Err(SeqnetError::EmptyBatch);
    }
    if windows.len() != labels.len() {
        return Err(SeqnetError::ShapeMismatch(format!(
            "{} windows but {} labels",
            windows.len(),
            labels.len()
        )));
    }
    for w in windows {
        m.steps(w)?;
    }
    Ok(())
}

/// Exact gradient of the mean cross-entropy over a batch, without dropout.
pub fn backward(
    m: &RecurrentModel,
    windows: &[Vec<f64>],
    labels: &[Level],
) -> Result<RecurrentModel, SeqnetError> {
    backward_with_masks(m, windows, labels, None).map(|(_, g)| g)
}

/// Mean loss and its gradient, with optional per-sample dropout masks on
/// the final hidden state. Samples are processed in parallel and summed in
/// batch order.
pub fn backward_with_masks(
    m: &RecurrentModel,
    windows: &[Vec<f64>],
    labels: &[Level],
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, RecurrentModel), SeqnetError> {
    check_batch(m, windows, labels)?;
    if let Some(ms) = masks {
        if ms.len() != windows.len() || ms.iter().any(|k| k.len() != m.hidden_size) {
            return Err(SeqnetError::ShapeMismatch(
                "dropout masks do not match batch".into(),
            ));
        }
    }
    let per_sample = par::map_range(windows.len(), |i| {
        sample_gradient(m, &windows[i], labels[i], masks.map(|ms| ms[i].as_slice()))
    });
    let mut total = m.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        total.add_scaled(1.0, g);
    }
    let scale = 1.0 / windows.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

/// Mean inference-mode cross-entropy over a set of windows.
pub fn mean_loss(
    m: &RecurrentModel,
    windows: &[Vec<f64>],
    labels: &[Level],
) -> Result<f64, SeqnetError> {
    check_batch(m, windows, labels)?;
    let losses = par::map_range(windows.len(), |i| {
        let p = m.predict_proba(&windows[i]).expect("shape checked");
        cross_entropy(&p, labels[i].index())
    });
    Ok(losses.iter().sum::<f64>() / windows.len() as f64)
}
