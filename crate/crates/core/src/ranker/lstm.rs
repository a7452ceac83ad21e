//! Single-layer LSTM over a flat parameter vector, with backpropagation through time.
//!
//! Weights are stored column-major: column `j` of the `4H x (I + H)` matrix holds the
//! contributions of input `j` to the gates `[i, f, g, o]`.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmLayout {
    pub input: usize,
    pub hidden: usize,
    pub w: usize,
    pub b: usize,
}

impl LstmLayout {
    pub fn new(input: usize, hidden: usize, offset: usize) -> Self {
        let w = offset;
        let b = w + 4 * hidden * (input + hidden);
        LstmLayout { input, hidden, w, b }
    }

    pub fn size(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden) + 4 * self.hidden
    }

    pub fn end(&self) -> usize {
        self.w + self.size()
    }
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub steps: usize,
    /// `[x_t ; h_{t-1}]` per step.
    z: Vec<f64>,
    /// Gate activations `[i, f, g, o]` per step.
    gates: Vec<f64>,
    /// Cell states, `c_0` first.
    c: Vec<f64>,
    /// Hidden states, `h_0` first.
    h: Vec<f64>,
}

impl Trace {
    pub fn last_h(&self, hidden: usize) -> &[f64] {
        &self.h[self.steps * hidden..(self.steps + 1) * hidden]
    }

    pub fn last_c(&self, hidden: usize) -> &[f64] {
        &self.c[self.steps * hidden..(self.steps + 1) * hidden]
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl LstmLayout {
    /// Runs the LSTM from `(h0, c0)` over inputs written by `fill(t, x)`.
    pub fn forward(
        &self,
        params: &[f64],
        steps: usize,
        h0: &[f64],
        c0: &[f64],
        mut fill: impl FnMut(usize, &mut [f64]),
    ) -> Trace {
        let (ni, nh) = (self.input, self.hidden);
        let nz = ni + nh;
        let g4 = 4 * nh;
        let mut tr = Trace {
            steps,
            z: vec![0.0; steps * nz],
            gates: vec![0.0; steps * g4],
            c: Vec::with_capacity((steps + 1) * nh),
            h: Vec::with_capacity((steps + 1) * nh),
        };
        tr.c.extend_from_slice(c0);
        tr.h.extend_from_slice(h0);
        let w = &params[self.w..self.b];
        let b = &params[self.b..self.b + g4];
        let mut pre = vec![0.0; g4];
        for t in 0..steps {
            let z = &mut tr.z[t * nz..(t + 1) * nz];
            fill(t, &mut z[..ni]);
            z[ni..].copy_from_slice(&tr.h[t * nh..(t + 1) * nh]);
            pre.copy_from_slice(b);
            for (j, &zj) in z.iter().enumerate() {
                if zj != 0.0 {
                    axpy(&mut pre, zj, &w[j * g4..(j + 1) * g4]);
                }
            }
            let gates = &mut tr.gates[t * g4..(t + 1) * g4];
            for k in 0..nh {
                gates[k] = sigmoid(pre[k]);
                gates[nh + k] = sigmoid(pre[nh + k]);
                gates[2 * nh + k] = pre[2 * nh + k].tanh();
                gates[3 * nh + k] = sigmoid(pre[3 * nh + k]);
            }
            for k in 0..nh {
                let c_prev = tr.c[t * nh + k];
                let c = gates[nh + k] * c_prev + gates[k] * gates[2 * nh + k];
                tr.c.push(c);
            }
            for k in 0..nh {
                let c = tr.c[(t + 1) * nh + k];
                tr.h.push(gates[3 * nh + k] * c.tanh());
            }
        }
        tr
    }

    /// Backpropagates `(dh, dc)` at the last step. Adds parameter gradients to
    /// `grad`, calls `dx(t, d_input)` for steps where `want_dx(t)` holds, and returns
    /// the gradients with respect to `(h0, c0)`.
    pub fn backward(
        &self,
        params: &[f64],
        grad: &mut [f64],
        tr: &Trace,
        dh_last: &[f64],
        dc_last: &[f64],
        want_dx: impl Fn(usize) -> bool,
        mut dx: impl FnMut(usize, &[f64]),
    ) -> (Vec<f64>, Vec<f64>) {
        let (ni, nh) = (self.input, self.hidden);
        let nz = ni + nh;
        let g4 = 4 * nh;
        let w = &params[self.w..self.b];
        let mut dh = dh_last.to_vec();
        let mut dc = dc_last.to_vec();
        let mut dg = vec![0.0; g4];
        let mut dxbuf = vec![0.0; ni];
        for t in (0..tr.steps).rev() {
            let gates = &tr.gates[t * g4..(t + 1) * g4];
            for k in 0..nh {
                let (i, f, g, o) = (gates[k], gates[nh + k], gates[2 * nh + k], gates[3 * nh + k]);
                let c = tr.c[(t + 1) * nh + k];
                let c_prev = tr.c[t * nh + k];
                let tc = c.tanh();
                let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
                dg[k] = dct * g * i * (1.0 - i);
                dg[nh + k] = dct * c_prev * f * (1.0 - f);
                dg[2 * nh + k] = dct * i * (1.0 - g * g);
                dg[3 * nh + k] = dh[k] * tc * o * (1.0 - o);
                dc[k] = dct * f;
            }
            {
                let gb = &mut grad[self.b..self.b + g4];
                axpy(gb, 1.0, &dg);
            }
            let z = &tr.z[t * nz..(t + 1) * nz];
            let gw = &mut grad[self.w..self.b];
            for (j, &zj) in z.iter().enumerate() {
                if zj != 0.0 {
                    axpy(&mut gw[j * g4..(j + 1) * g4], zj, &dg);
                }
            }
            for k in 0..nh {
                let j = ni + k;
                dh[k] = dot(&w[j * g4..(j + 1) * g4], &dg);
            }
            if ni > 0 && want_dx(t) {
                for (j, d) in dxbuf.iter_mut().enumerate() {
                    *d = dot(&w[j * g4..(j + 1) * g4], &dg);
                }
                dx(t, &dxbuf);
            }
        }
        (dh, dc)
    }
}
