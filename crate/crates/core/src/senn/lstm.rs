//! Stacked LSTM with a scalar linear head.
//!
//! Parameters are one flat vector. Per layer with input size n and hidden
//! size h: W (4h×n), U (4h×h), bias (4h), gate rows ordered input, forget,
//! cell, output. The head is h_last weights followed by one bias.

use rand::Rng;

use crate::diffprob::tape::{sigmoid, Tape, Var};

use super::SennError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmShape {
    pub input: usize,
    pub hidden: Vec<usize>,
}

impl LstmShape {
    pub fn new(input: usize, hidden: Vec<usize>) -> Result<Self, SennError> {
        if input == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(SennError::Config(format!("invalid LSTM shape: input {input}, hidden {hidden:?}")));
        }
        Ok(Self { input, hidden })
    }

    /// (input size, hidden size, parameter offset) per layer.
    fn layers(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.hidden.len());
        let mut n_in = self.input;
        let mut offset = 0;
        for &h in &self.hidden {
            out.push((n_in, h, offset));
            offset += 4 * h * (n_in + h + 1);
            n_in = h;
        }
        out
    }

    fn head_offset(&self) -> usize {
        self.layers().iter().map(|&(n, h, _)| 4 * h * (n + h + 1)).sum()
    }

    fn last_hidden(&self) -> usize {
        *self.hidden.last().expect("non-empty hidden sizes")
    }

    pub fn n_params(&self) -> usize {
        self.head_offset() + self.last_hidden() + 1
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_params());
        for (l, &(n, h, _)) in self.layers().iter().enumerate() {
            for r in 0..4 * h {
                names.extend((0..n).map(|c| format!("theta.l{l}.w.{r}.{c}")));
            }
            for r in 0..4 * h {
                names.extend((0..h).map(|c| format!("theta.l{l}.u.{r}.{c}")));
            }
            names.extend((0..4 * h).map(|r| format!("theta.l{l}.b.{r}")));
        }
        names.extend((0..self.last_hidden()).map(|j| format!("theta.head.w.{j}")));
        names.push("theta.head.b".into());
        names
    }

    /// Uniform(±1/√h) recurrent weights and a zero head, so an untrained
    /// network outputs exactly 0.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        for &(n, h, _) in &self.layers() {
            let k = 1.0 / (h as f64).sqrt();
            theta.extend((0..4 * h * (n + h + 1)).map(|_| rng.random_range(-k..k)));
        }
        theta.extend(std::iter::repeat_n(0.0, self.last_hidden() + 1));
        theta
    }

    fn check(&self, theta_len: usize, window: &[Vec<f64>]) -> Result<(), SennError> {
        if window.is_empty() {
            return Err(SennError::Argument("empty LSTM input window".into()));
        }
        if theta_len != self.n_params() {
            return Err(SennError::Argument(format!(
                "LSTM expects {} parameters, got {theta_len}",
                self.n_params()
            )));
        }
        if let Some(x) = window.iter().find(|x| x.len() != self.input) {
            return Err(SennError::Argument(format!("LSTM input has {} channels, expected {}", x.len(), self.input)));
        }
        Ok(())
    }
}

/// Per-step activations of one layer, kept for the backward pass.
struct LayerTrace {
    /// Gate activations i, f, g, o per step, each 4h long.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

fn layer_forward(theta: &[f64], n: usize, h: usize, offset: usize, xs: &[Vec<f64>]) -> LayerTrace {
    let w = &theta[offset..offset + 4 * h * n];
    let u = &theta[offset + 4 * h * n..offset + 4 * h * (n + h)];
    let b = &theta[offset + 4 * h * (n + h)..offset + 4 * h * (n + h + 1)];
    let mut trace = LayerTrace { gates: Vec::new(), cells: Vec::new(), hidden: Vec::new() };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for x in xs {
        let mut z = b.to_vec();
        for r in 0..4 * h {
            let wr = &w[r * n..(r + 1) * n];
            let ur = &u[r * h..(r + 1) * h];
            z[r] += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + ur.iter().zip(&h_prev).map(|(a, b)| a * b).sum::<f64>();
        }
        for j in 0..h {
            z[j] = sigmoid(z[j]);
            z[h + j] = sigmoid(z[h + j]);
            z[2 * h + j] = z[2 * h + j].tanh();
            z[3 * h + j] = sigmoid(z[3 * h + j]);
        }
        let c: Vec<f64> = (0..h).map(|j| z[h + j] * c_prev[j] + z[j] * z[2 * h + j]).collect();
        let hid: Vec<f64> = (0..h).map(|j| z[3 * h + j] * c[j].tanh()).collect();
        trace.gates.push(z);
        trace.cells.push(c.clone());
        trace.hidden.push(hid.clone());
        h_prev = hid;
        c_prev = c;
    }
    trace
}

fn forward_traces(shape: &LstmShape, theta: &[f64], window: &[Vec<f64>]) -> Vec<LayerTrace> {
    let mut traces: Vec<LayerTrace> = Vec::with_capacity(shape.hidden.len());
    for &(n, h, offset) in &shape.layers() {
        let xs = traces.last().map_or(window, |t| t.hidden.as_slice());
        let next = layer_forward(theta, n, h, offset, xs);
        traces.push(next);
    }
    traces
}

fn head(shape: &LstmShape, theta: &[f64], last: &[f64]) -> f64 {
    let off = shape.head_offset();
    let hl = shape.last_hidden();
    theta[off + hl] + theta[off..off + hl].iter().zip(last).map(|(a, b)| a * b).sum::<f64>()
}

/// Scalar output of the network over `window` (oldest step first).
pub fn lstm_forward(shape: &LstmShape, theta: &[f64], window: &[Vec<f64>]) -> Result<f64, SennError> {
    shape.check(theta.len(), window)?;
    let traces = forward_traces(shape, theta, window);
    let last = traces.last().expect("at least one layer").hidden.last().expect("non-empty window");
    Ok(head(shape, theta, last))
}

/// Output and its gradient with respect to every parameter, by
/// backpropagation through time.
pub fn lstm_forward_grad(
    shape: &LstmShape,
    theta: &[f64],
    window: &[Vec<f64>],
) -> Result<(f64, Vec<f64>), SennError> {
    shape.check(theta.len(), window)?;
    let traces = forward_traces(shape, theta, window);
    let steps = window.len();
    let mut grad = vec![0.0; theta.len()];
    let off = shape.head_offset();
    let hl = shape.last_hidden();
    let top = traces.last().expect("at least one layer");
    let value = head(shape, theta, &top.hidden[steps - 1]);
    grad[off..off + hl].copy_from_slice(&top.hidden[steps - 1]);
    grad[off + hl] = 1.0;

    // dL/dh for each step of the layer being processed, from the layer above.
    let mut dh_ext: Vec<Vec<f64>> = vec![vec![0.0; hl]; steps];
    dh_ext[steps - 1] = theta[off..off + hl].to_vec();

    let layers = shape.layers();
    for (l, &(n, h, offset)) in layers.iter().enumerate().rev() {
        let tr = &traces[l];
        let xs = if l == 0 { window } else { traces[l - 1].hidden.as_slice() };
        let w_off = offset;
        let u_off = offset + 4 * h * n;
        let b_off = offset + 4 * h * (n + h);
        let mut dx_all: Vec<Vec<f64>> = vec![vec![0.0; n]; steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zeros = vec![0.0; h];
        for s in (0..steps).rev() {
            let g = &tr.gates[s];
            let c = &tr.cells[s];
            let c_prev = if s > 0 { &tr.cells[s - 1] } else { &zeros };
            let h_prev = if s > 0 { &tr.hidden[s - 1] } else { &zeros };
            let mut dz = vec![0.0; 4 * h];
            for j in 0..h {
                let dh = dh_ext[s][j] + dh_next[j];
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = c[j].tanh();
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                dz[j] = dc * gg * i * (1.0 - i);
                dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - gg * gg);
                dz[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let x = &xs[s];
            let dx = &mut dx_all[s];
            for r in 0..4 * h {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                grad[b_off + r] += d;
                let wr = w_off + r * n;
                for c in 0..n {
                    grad[wr + c] += d * x[c];
                    dx[c] += d * theta[wr + c];
                }
                let ur = u_off + r * h;
                for c in 0..h {
                    grad[ur + c] += d * h_prev[c];
                    dh_next[c] += d * theta[ur + c];
                }
            }
        }
        dh_ext = dx_all;
    }
    Ok((value, grad))
}

/// The fused network as a single tape node over all parameters.
pub fn lstm_node<'t>(
    tape: &'t Tape,
    shape: &LstmShape,
    theta: &[Var<'t>],
    window: &[Vec<f64>],
) -> Result<Var<'t>, SennError> {
    let values: Vec<f64> = theta.iter().map(|v| v.value()).collect();
    let (value, grad) = lstm_forward_grad(shape, &values, window)?;
    Ok(tape.custom(value, theta, &grad))
}

/// The same network built from scalar tape primitives.
pub fn lstm_forward_tape<'t>(
    tape: &'t Tape,
    shape: &LstmShape,
    theta: &[Var<'t>],
    window: &[Vec<f64>],
) -> Result<Var<'t>, SennError> {
    shape.check(theta.len(), window)?;
    let mut xs: Vec<Vec<Var<'t>>> =
        window.iter().map(|x| x.iter().map(|&v| tape.constant(v)).collect()).collect();
    for &(n, h, offset) in &shape.layers() {
        let w = &theta[offset..offset + 4 * h * n];
        let u = &theta[offset + 4 * h * n..offset + 4 * h * (n + h)];
        let b = &theta[offset + 4 * h * (n + h)..offset + 4 * h * (n + h + 1)];
        let mut h_prev: Vec<Var<'t>> = (0..h).map(|_| tape.constant(0.0)).collect();
        let mut c_prev: Vec<Var<'t>> = h_prev.clone();
        let mut outputs = Vec::with_capacity(xs.len());
        for x in &xs {
            let pre = |r: usize| tape.dot(&w[r * n..(r + 1) * n], x) + tape.dot(&u[r * h..(r + 1) * h], &h_prev) + b[r];
            let mut c_new = Vec::with_capacity(h);
            let mut h_new = Vec::with_capacity(h);
            for j in 0..h {
                let i = pre(j).sigmoid();
                let f = pre(h + j).sigmoid();
                let g = pre(2 * h + j).tanh();
                let o = pre(3 * h + j).sigmoid();
                let c = f * c_prev[j] + i * g;
                h_new.push(o * c.tanh());
                c_new.push(c);
            }
            outputs.push(h_new.clone());
            h_prev = h_new;
            c_prev = c_new;
        }
        xs = outputs;
    }
    let off = shape.head_offset();
    let hl = shape.last_hidden();
    let last = xs.last().expect("non-empty window");
    Ok(tape.dot(&theta[off..off + hl], last) + theta[off + hl])
}
