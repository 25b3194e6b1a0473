use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    Layout, NetworkConfig, NnError, NoiseMode, NoiseSampling, CONV_B, CONV_W, D1_B, D1_W, D2_B, D2_W, LSTM_B,
    LSTM_HH, LSTM_IH, NOISE_W,
};
use crate::rng;

/// Source of the Gaussian noise input (and of dropout masks while training).
pub struct NoiseChannel {
    pub width: usize,
    pub mode: NoiseMode,
    pub sampling: NoiseSampling,
    rng: ChaCha8Rng,
}

impl NoiseChannel {
    pub fn new(width: usize, seed: u64, mode: NoiseMode) -> Self {
        Self::from_rng(width, rng::stream(seed, &[]), mode)
    }

    pub fn from_rng(width: usize, rng: ChaCha8Rng, mode: NoiseMode) -> Self {
        Self {
            width,
            mode,
            sampling: NoiseSampling::PerStep,
            rng,
        }
    }

    pub fn with_sampling(mut self, sampling: NoiseSampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// A channel that always yields zeros.
    pub fn zeroed(width: usize) -> Self {
        Self::from_rng(width, rng::stream(0, &[]), NoiseMode::Zeroed)
    }

    /// `steps * width` values, time-major. Training always samples; outside
    /// training the channel's mode decides.
    pub fn draw(&mut self, steps: usize, training: bool) -> Vec<f64> {
        if !training && self.mode == NoiseMode::Zeroed {
            return vec![0.0; steps * self.width];
        }
        match self.sampling {
            NoiseSampling::PerStep => (0..steps * self.width)
                .map(|_| self.rng.sample::<f64, _>(StandardNormal))
                .collect(),
            NoiseSampling::PerWindow => {
                let v: Vec<f64> = (0..self.width).map(|_| self.rng.sample::<f64, _>(StandardNormal)).collect();
                v.repeat(steps)
            }
        }
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Inverted-dropout mask: each entry is `1 / (1 - p)` with probability
/// `1 - p`, else 0.
pub fn dropout_mask(rng: &mut impl RngCore, len: usize, p: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
pub(crate) struct Cache {
    /// Dropped-out concatenated inputs, `T x (F + n)`.
    z: Vec<f64>,
    conv_pre: Vec<f64>,
    conv: Vec<f64>,
    /// Gate activations, `L x 4H`.
    gates: Vec<f64>,
    /// Cell and hidden states, `(L + 1) x H` with a zero initial row.
    cell: Vec<f64>,
    hidden: Vec<f64>,
    d1_pre: Vec<f64>,
    d1: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Network {
    /// Fan-in scaled uniform initialization from `seed`. LSTM biases start
    /// at zero except the forget gate, which starts at one.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.len];
        let mut r = rng::stream(seed, &[0x1417]);
        let k = config.effective_kernel();
        let fan_in = [
            k * (config.input_features + config.noise_width),
            k * (config.input_features + config.noise_width),
            k * (config.input_features + config.noise_width),
            config.conv_filters,
            config.lstm_hidden,
            0,
            config.lstm_hidden,
            config.lstm_hidden,
            config.dense_hidden,
            config.dense_hidden,
        ];
        for (t, fan) in layout.tensors.iter().zip(fan_in) {
            if fan == 0 {
                continue;
            }
            let bound = 1.0 / (fan as f64).sqrt();
            for p in &mut params[t.range()] {
                *p = r.random_range(-bound..bound);
            }
        }
        let h = config.lstm_hidden;
        let b = layout.tensors[LSTM_B].offset;
        params[b + h..b + 2 * h].fill(1.0);
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn p(&self, tensor: usize) -> &[f64] {
        &self.params[self.layout.tensors[tensor].range()]
    }

    pub(crate) fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        let expected = self.config.input_len();
        if input.len() != expected {
            return Err(NnError::Shape {
                expected,
                actual: input.len(),
            });
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput(i));
        }
        Ok(())
    }

    /// Forward pass. With `training` the channel supplies noise and dropout
    /// masks; otherwise there is no dropout and noise follows the channel's
    /// mode.
    pub fn forward(&self, input: &[f64], noise: &mut NoiseChannel, training: bool) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        Ok(self.forward_stochastic(input, noise, training).out)
    }

    /// Eval-mode forward with zeroed noise.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        let noise = vec![0.0; self.config.seq_len * self.config.noise_width];
        Ok(self.forward_cached(input, &noise, None).out)
    }

    pub(crate) fn forward_stochastic(&self, input: &[f64], noise: &mut NoiseChannel, training: bool) -> Cache {
        let c = &self.config;
        let eps = if c.noise_width == 0 {
            Vec::new()
        } else {
            noise.draw(c.seq_len, training)
        };
        let mask = (training && c.dropout > 0.0)
            .then(|| dropout_mask(noise.rng(), c.seq_len * (c.input_features + c.noise_width), c.dropout));
        self.forward_cached(input, &eps, mask.as_deref())
    }

    /// `noise` is `T x n`, `mask` (if any) covers the concatenated inputs.
    pub(crate) fn forward_cached(&self, input: &[f64], noise: &[f64], mask: Option<&[f64]>) -> Cache {
        let c = &self.config;
        let (t_len, f, n) = (c.seq_len, c.input_features, c.noise_width);
        let fz = f + n;
        let k = c.effective_kernel();
        let l_len = c.conv_len();
        let (ch, h, d, o) = (c.conv_filters, c.lstm_hidden, c.dense_hidden, c.output_len);

        let mut z = Vec::with_capacity(t_len * fz);
        for t in 0..t_len {
            z.extend_from_slice(&input[t * f..(t + 1) * f]);
            z.extend_from_slice(&noise[t * n..(t + 1) * n]);
        }
        if let Some(m) = mask {
            for (v, m) in z.iter_mut().zip(m) {
                *v *= m;
            }
        }

        let (cw, nw, cb) = (self.p(CONV_W), self.p(NOISE_W), self.p(CONV_B));
        let mut conv_pre = vec![0.0; l_len * ch];
        for l in 0..l_len {
            for q in 0..ch {
                let mut acc = cb[q];
                for j in 0..k {
                    let zt = &z[(l + j) * fz..(l + j + 1) * fz];
                    let wf = &cw[(q * k + j) * f..(q * k + j + 1) * f];
                    acc += wf.iter().zip(&zt[..f]).map(|(a, b)| a * b).sum::<f64>();
                    let wn = &nw[(q * k + j) * n..(q * k + j + 1) * n];
                    acc += wn.iter().zip(&zt[f..]).map(|(a, b)| a * b).sum::<f64>();
                }
                conv_pre[l * ch + q] = acc;
            }
        }
        let conv: Vec<f64> = conv_pre.iter().map(|v| v.max(0.0)).collect();

        let (wih, whh, lb) = (self.p(LSTM_IH), self.p(LSTM_HH), self.p(LSTM_B));
        let mut gates = vec![0.0; l_len * 4 * h];
        let mut cell = vec![0.0; (l_len + 1) * h];
        let mut hidden = vec![0.0; (l_len + 1) * h];
        let mut a = vec![0.0; 4 * h];
        for l in 0..l_len {
            let x = &conv[l * ch..(l + 1) * ch];
            let hp = &hidden[l * h..(l + 1) * h];
            for r in 0..4 * h {
                let wi = &wih[r * ch..(r + 1) * ch];
                let wh = &whh[r * h..(r + 1) * h];
                a[r] = lb[r]
                    + wi.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                    + wh.iter().zip(hp).map(|(w, v)| w * v).sum::<f64>();
            }
            let g = &mut gates[l * 4 * h..(l + 1) * 4 * h];
            for u in 0..h {
                g[u] = sigmoid(a[u]);
                g[h + u] = sigmoid(a[h + u]);
                g[2 * h + u] = a[2 * h + u].tanh();
                g[3 * h + u] = sigmoid(a[3 * h + u]);
            }
            for u in 0..h {
                let s = g[h + u] * cell[l * h + u] + g[u] * g[2 * h + u];
                cell[(l + 1) * h + u] = s;
                hidden[(l + 1) * h + u] = g[3 * h + u] * s.tanh();
            }
        }

        let h_last = &hidden[l_len * h..];
        let (w1, b1) = (self.p(D1_W), self.p(D1_B));
        let d1_pre: Vec<f64> = (0..d)
            .map(|r| b1[r] + w1[r * h..(r + 1) * h].iter().zip(h_last).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let d1: Vec<f64> = d1_pre.iter().map(|v| v.max(0.0)).collect();
        let (w2, b2) = (self.p(D2_W), self.p(D2_B));
        let out: Vec<f64> = (0..o)
            .map(|r| b2[r] + w2[r * d..(r + 1) * d].iter().zip(&d1).map(|(w, v)| w * v).sum::<f64>())
            .collect();

        Cache {
            z,
            conv_pre,
            conv,
            gates,
            cell,
            hidden,
            d1_pre,
            d1,
            out,
        }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d out`.
    pub(crate) fn backward(&self, cache: &Cache, dout: &[f64], grad: &mut [f64]) {
        let c = &self.config;
        let (f, n) = (c.input_features, c.noise_width);
        let fz = f + n;
        let k = c.effective_kernel();
        let l_len = c.conv_len();
        let (ch, h, d, o) = (c.conv_filters, c.lstm_hidden, c.dense_hidden, c.output_len);
        let off = |t: usize| self.layout.tensors[t].offset;

        // output layer
        let w2 = self.p(D2_W);
        let mut dd1 = vec![0.0; d];
        for r in 0..o {
            let g = dout[r];
            if g == 0.0 {
                continue;
            }
            grad[off(D2_B) + r] += g;
            let row = off(D2_W) + r * d;
            for j in 0..d {
                grad[row + j] += g * cache.d1[j];
                dd1[j] += g * w2[r * d + j];
            }
        }
        // hidden dense layer
        let w1 = self.p(D1_W);
        let h_last = &cache.hidden[l_len * h..];
        let mut dh = vec![0.0; h];
        for r in 0..d {
            if cache.d1_pre[r] <= 0.0 {
                continue;
            }
            let g = dd1[r];
            grad[off(D1_B) + r] += g;
            let row = off(D1_W) + r * h;
            for j in 0..h {
                grad[row + j] += g * h_last[j];
                dh[j] += g * w1[r * h + j];
            }
        }

        // LSTM, backwards through time
        let (wih, whh) = (self.p(LSTM_IH), self.p(LSTM_HH));
        let mut ds = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        let mut dconv = vec![0.0; l_len * ch];
        for l in (0..l_len).rev() {
            let g = &cache.gates[l * 4 * h..(l + 1) * 4 * h];
            let s_prev = &cache.cell[l * h..(l + 1) * h];
            let s = &cache.cell[(l + 1) * h..(l + 2) * h];
            for u in 0..h {
                let (i, fg, cg, og) = (g[u], g[h + u], g[2 * h + u], g[3 * h + u]);
                let ts = s[u].tanh();
                let d_o = dh[u] * ts;
                let d_s = ds[u] + dh[u] * og * (1.0 - ts * ts);
                da[u] = d_s * cg * i * (1.0 - i);
                da[h + u] = d_s * s_prev[u] * fg * (1.0 - fg);
                da[2 * h + u] = d_s * i * (1.0 - cg * cg);
                da[3 * h + u] = d_o * og * (1.0 - og);
                ds[u] = d_s * fg;
            }
            let x = &cache.conv[l * ch..(l + 1) * ch];
            let hp = &cache.hidden[l * h..(l + 1) * h];
            dh.fill(0.0);
            let dx = &mut dconv[l * ch..(l + 1) * ch];
            for r in 0..4 * h {
                let g = da[r];
                if g == 0.0 {
                    continue;
                }
                grad[off(LSTM_B) + r] += g;
                let ri = off(LSTM_IH) + r * ch;
                for j in 0..ch {
                    grad[ri + j] += g * x[j];
                    dx[j] += g * wih[r * ch + j];
                }
                let rh = off(LSTM_HH) + r * h;
                for j in 0..h {
                    grad[rh + j] += g * hp[j];
                    dh[j] += g * whh[r * h + j];
                }
            }
        }

        // convolution
        for l in 0..l_len {
            for q in 0..ch {
                if cache.conv_pre[l * ch + q] <= 0.0 {
                    continue;
                }
                let g = dconv[l * ch + q];
                if g == 0.0 {
                    continue;
                }
                grad[off(CONV_B) + q] += g;
                for j in 0..k {
                    let zt = &cache.z[(l + j) * fz..(l + j + 1) * fz];
                    let rf = off(CONV_W) + (q * k + j) * f;
                    for m in 0..f {
                        grad[rf + m] += g * zt[m];
                    }
                    let rn = off(NOISE_W) + (q * k + j) * n;
                    for m in 0..n {
                        grad[rn + m] += g * zt[f + m];
                    }
                }
            }
        }
    }

    /// First tensor holding a non-finite parameter.
    pub fn non_finite_tensor(&self) -> Option<&str> {
        first_non_finite(&self.layout, &self.params)
    }
}

pub(crate) fn first_non_finite<'a>(layout: &'a Layout, values: &[f64]) -> Option<&'a str> {
    values.iter().position(|v| !v.is_finite()).map(|i| layout.tensor_of(i))
}
