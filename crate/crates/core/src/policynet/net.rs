use super::{Linear, PolicyParams};
use crate::error::{Error, Result};

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn linear(theta: &[f64], l: &Linear, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), l.inp);
    for (o, yo) in y.iter_mut().enumerate().take(l.out) {
        *yo = theta[l.b + o] + dot(&theta[l.w + o * l.inp..l.w + (o + 1) * l.inp], x);
    }
}

fn linear_vec(theta: &[f64], l: &Linear, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; l.out];
    linear(theta, l, x, &mut y);
    y
}

fn linear_back(theta: &[f64], grad: &mut [f64], l: &Linear, x: &[f64], dy: &[f64], mut dx: Option<&mut [f64]>) {
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad[l.b + o] += g;
        let row = l.w + o * l.inp;
        axpy(g, x, &mut grad[row..row + l.inp]);
        if let Some(dx) = dx.as_deref_mut() {
            axpy(g, &theta[row..row + l.inp], dx);
        }
    }
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn relu_back(out: &[f64], d: &mut [f64]) {
    for (di, &o) in d.iter_mut().zip(out) {
        if o <= 0.0 {
            *di = 0.0;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Raw network outputs for one step. Masks are applied by [`super::PolicyDist`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// One logit vector per policy head.
    pub logits: Vec<Vec<f64>>,
    pub value: f64,
    pub collision_logit: Option<f64>,
}

/// Loss gradient with respect to one step's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad {
    pub logits: Vec<Vec<f64>>,
    pub value: f64,
    pub collision: f64,
}

impl OutputGrad {
    pub fn zeros(out: &StepOutput) -> Self {
        Self { logits: out.logits.iter().map(|l| vec![0.0; l.len()]).collect(), value: 0.0, collision: 0.0 }
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    obs: Vec<f64>,
    e_scan: Vec<f64>,
    e_local: Vec<f64>,
    e_global: Vec<f64>,
    stag_hidden: Vec<f64>,
    x: Vec<f64>,
    gh: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    h_prev: Vec<f64>,
    h: Vec<f64>,
    reset: bool,
}

/// Activations recorded by [`PolicyParams::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct Tape {
    steps: Vec<StepCache>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hidden state after the last recorded step.
    pub fn final_state(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.h.as_slice())
    }
}

impl PolicyParams {
    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.config.hidden]
    }

    fn forward_step(&self, obs: &[f64], h_prev: &[f64], reset: bool) -> (StepOutput, StepCache) {
        let th = &self.theta;
        let lay = &self.layout;
        let cfg = &self.config;
        let [scan_o, local_o, global_o, action_o, stag_o, end] = cfg.layout.offsets();
        let hdim = cfg.hidden;

        let e_scan = match &lay.scan {
            Some(l) => {
                let mut e = linear_vec(th, l, &obs[scan_o..local_o]);
                relu(&mut e);
                e
            }
            None => Vec::new(),
        };
        let mut e_local = linear_vec(th, &lay.local, &obs[local_o..global_o]);
        relu(&mut e_local);
        let mut e_global = linear_vec(th, &lay.global, &obs[global_o..action_o]);
        relu(&mut e_global);
        let e_action = linear_vec(th, &lay.action, &obs[action_o..stag_o]);
        let mut stag_hidden = linear_vec(th, &lay.stag1, &obs[stag_o..end]);
        relu(&mut stag_hidden);
        let e_stag = linear_vec(th, &lay.stag2, &stag_hidden);

        let mut x = Vec::with_capacity(cfg.core_input());
        x.extend_from_slice(&e_scan);
        x.extend_from_slice(&e_local);
        x.extend_from_slice(&e_global);
        x.extend_from_slice(&e_action);
        x.extend_from_slice(&e_stag);

        let h_prev = if reset { vec![0.0; hdim] } else { h_prev.to_vec() };
        let gx = linear_vec(th, &lay.gru_x, &x);
        let gh = linear_vec(th, &lay.gru_h, &h_prev);
        let mut r = vec![0.0; hdim];
        let mut z = vec![0.0; hdim];
        let mut n = vec![0.0; hdim];
        let mut h = vec![0.0; hdim];
        for i in 0..hdim {
            r[i] = sigmoid(gx[i] + gh[i]);
            z[i] = sigmoid(gx[hdim + i] + gh[hdim + i]);
            n[i] = (gx[2 * hdim + i] + r[i] * gh[2 * hdim + i]).tanh();
            h[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
        }

        let logits = lay.heads.iter().map(|l| linear_vec(th, l, &h)).collect();
        let value = linear_vec(th, &lay.value, &h)[0];
        let collision_logit = lay.collision.as_ref().map(|l| linear_vec(th, l, &e_scan)[0]);
        let out = StepOutput { logits, value, collision_logit };
        let cache =
            StepCache { obs: obs.to_vec(), e_scan, e_local, e_global, stag_hidden, x, gh, r, z, n, h_prev, h, reset };
        (out, cache)
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        let d = self.config.layout.dim();
        if obs.len() != d {
            return Err(Error::Dimension { expected: d, got: obs.len() });
        }
        Ok(())
    }

    /// One recurrent step without recording; returns the new hidden state.
    pub fn step(&self, obs: &[f64], h: &[f64]) -> Result<(StepOutput, Vec<f64>)> {
        self.check_obs(obs)?;
        if h.len() != self.config.hidden {
            return Err(Error::Dimension { expected: self.config.hidden, got: h.len() });
        }
        let (out, cache) = self.forward_step(obs, h, false);
        Ok((out, cache.h))
    }

    /// Runs a sequence from `h0`. `resets[t]` zeroes the hidden state before
    /// step `t` (an episode start); no gradient crosses a reset.
    pub fn forward(&self, obs: &[Vec<f64>], h0: &[f64], resets: &[bool]) -> Result<(Vec<StepOutput>, Tape)> {
        if resets.len() != obs.len() {
            return Err(Error::Dimension { expected: obs.len(), got: resets.len() });
        }
        if h0.len() != self.config.hidden {
            return Err(Error::Dimension { expected: self.config.hidden, got: h0.len() });
        }
        let mut outs = Vec::with_capacity(obs.len());
        let mut steps: Vec<StepCache> = Vec::with_capacity(obs.len());
        for (t, o) in obs.iter().enumerate() {
            self.check_obs(o)?;
            let h_prev = steps.last().map_or(h0, |c| c.h.as_slice());
            let (out, cache) = self.forward_step(o, h_prev, resets[t]);
            outs.push(out);
            steps.push(cache);
        }
        Ok((outs, Tape { steps }))
    }

    /// Accumulates parameter gradients into `grad` by backpropagation through time.
    pub fn backward(&self, tape: &Tape, dout: &[OutputGrad], grad: &mut [f64]) -> Result<()> {
        if dout.len() != tape.steps.len() {
            return Err(Error::Dimension { expected: tape.steps.len(), got: dout.len() });
        }
        if grad.len() != self.theta.len() {
            return Err(Error::Dimension { expected: self.theta.len(), got: grad.len() });
        }
        let th = &self.theta;
        let lay = &self.layout;
        let cfg = &self.config;
        let hdim = cfg.hidden;
        let e = cfg.encoder_dim;
        let [scan_o, local_o, global_o, action_o, stag_o, end] = cfg.layout.offsets();
        let mut dh_next = vec![0.0; hdim];

        for (c, g) in tape.steps.iter().zip(dout).rev() {
            let mut dh = dh_next.clone();
            for (l, dl) in lay.heads.iter().zip(&g.logits) {
                linear_back(th, grad, l, &c.h, dl, Some(&mut dh));
            }
            linear_back(th, grad, &lay.value, &c.h, &[g.value], Some(&mut dh));

            let mut dgx = vec![0.0; 3 * hdim];
            let mut dgh = vec![0.0; 3 * hdim];
            let mut dh_prev = vec![0.0; hdim];
            for i in 0..hdim {
                let (r, z, n) = (c.r[i], c.z[i], c.n[i]);
                let dn_pre = dh[i] * (1.0 - z) * (1.0 - n * n);
                let dz_pre = dh[i] * (c.h_prev[i] - n) * z * (1.0 - z);
                let dr_pre = dn_pre * c.gh[2 * hdim + i] * r * (1.0 - r);
                dh_prev[i] = dh[i] * z;
                dgx[i] = dr_pre;
                dgx[hdim + i] = dz_pre;
                dgx[2 * hdim + i] = dn_pre;
                dgh[i] = dr_pre;
                dgh[hdim + i] = dz_pre;
                dgh[2 * hdim + i] = dn_pre * r;
            }
            let mut dx = vec![0.0; c.x.len()];
            linear_back(th, grad, &lay.gru_x, &c.x, &dgx, Some(&mut dx));
            linear_back(th, grad, &lay.gru_h, &c.h_prev, &dgh, Some(&mut dh_prev));
            dh_next = if c.reset { vec![0.0; hdim] } else { dh_prev };

            let mut off = 0;
            let mut de_scan = Vec::new();
            if lay.scan.is_some() {
                de_scan = dx[..e].to_vec();
                off = e;
            }
            let mut de_local = dx[off..off + e].to_vec();
            let mut de_global = dx[off + e..off + 2 * e].to_vec();
            let de_action = &dx[off + 2 * e..off + 2 * e + cfg.action_embed];
            let de_stag = &dx[off + 2 * e + cfg.action_embed..];

            if let (Some(l), Some(_)) = (&lay.collision, &lay.scan) {
                linear_back(th, grad, l, &c.e_scan, &[g.collision], Some(&mut de_scan));
            }
            if let Some(l) = &lay.scan {
                relu_back(&c.e_scan, &mut de_scan);
                linear_back(th, grad, l, &c.obs[scan_o..local_o], &de_scan, None);
            }
            relu_back(&c.e_local, &mut de_local);
            linear_back(th, grad, &lay.local, &c.obs[local_o..global_o], &de_local, None);
            relu_back(&c.e_global, &mut de_global);
            linear_back(th, grad, &lay.global, &c.obs[global_o..action_o], &de_global, None);
            linear_back(th, grad, &lay.action, &c.obs[action_o..stag_o], de_action, None);
            let mut ds_hidden = vec![0.0; cfg.stag_hidden];
            linear_back(th, grad, &lay.stag2, &c.stag_hidden, de_stag, Some(&mut ds_hidden));
            relu_back(&c.stag_hidden, &mut ds_hidden);
            linear_back(th, grad, &lay.stag1, &c.obs[stag_o..end], &ds_hidden, None);
        }
        Ok(())
    }
}
