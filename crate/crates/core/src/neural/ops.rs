//! Forward and backward kernels for every differentiable operation.
//!
//! The kernels are pure functions over [`Tensor`]s and slices. The tape in
//! [`super::tape`] records which kernel produced each node and calls the
//! matching backward kernel during reverse accumulation.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Lower bound applied to probabilities before taking the log in the loss.
pub const LOG_CLAMP: f64 = 1e-12;

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::Dimension(format!(
            "{what} expects rank {rank}, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Spatial output size of a sliding window, or a configuration error when
/// the window does not fit.
pub fn window_output(input: usize, window: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 || window == 0 {
        return Err(Error::Config("window and stride must be positive".into()));
    }
    let padded = input + 2 * padding;
    if padded < window {
        return Err(Error::Config(format!(
            "window {window} does not fit input {input} with padding {padding}"
        )));
    }
    Ok((padded - window) / stride + 1)
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    expect_rank(a, 2, "matmul")?;
    expect_rank(b, 2, "matmul")?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Returns `(dA, dB)` for `C = A·B` given `dC`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, dout: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let (ad, bd) = (a.data(), b.data());
    let mut da = vec![0.0; m * k];
    let mut db = vec![0.0; k * n];
    for i in 0..m {
        let g = &dout[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &bd[p * n..(p + 1) * n];
            da[i * k + p] = g.iter().zip(brow).map(|(x, y)| x * y).sum();
            let av = ad[i * k + p];
            for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(g) {
                *d += av * gv;
            }
        }
    }
    (da, db)
}

/// Adds a length-`n` bias to every row of a `rows × n` matrix.
pub fn add_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    expect_rank(x, 2, "add_bias")?;
    let n = x.shape()[1];
    if bias.len() != n {
        return Err(Error::Dimension(format!(
            "bias of length {} for rows of width {n}",
            bias.len()
        )));
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(n.max(1)) {
        for (o, b) in row.iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub fn add_bias_backward(n: usize, dout: &[f64]) -> Vec<f64> {
    let mut db = vec![0.0; n];
    for row in dout.chunks(n.max(1)) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    db
}

/// Geometry of a 2-D convolution, resolved against a concrete input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn resolve(x: &Tensor, w: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        expect_rank(x, 4, "conv2d input")?;
        expect_rank(w, 4, "conv2d weight")?;
        let [batch, in_channels, height, width] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let [out_channels, wc, kh, kw] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
        if wc != in_channels {
            return Err(Error::Dimension(format!(
                "conv2d weight {:?} against input {:?}",
                w.shape(),
                x.shape()
            )));
        }
        if kh != kw {
            return Err(Error::Config(format!("non-square kernel {kh}x{kw}")));
        }
        let out_height = window_output(height, kh, stride, padding)?;
        let out_width = window_output(width, kh, stride, padding)?;
        Ok(ConvGeometry {
            batch,
            in_channels,
            out_channels,
            height,
            width,
            kernel: kh,
            stride,
            padding,
            out_height,
            out_width,
        })
    }

    /// Valid output index range along one axis for kernel offset `k`.
    fn valid_range(&self, k: usize, input: usize, output: usize) -> (usize, usize) {
        // need 0 <= o*stride + k - pad < input
        let mut lo = 0;
        while lo < output && lo * self.stride + k < self.padding {
            lo += 1;
        }
        let mut hi = lo;
        while hi < output && hi * self.stride + k < input + self.padding {
            hi += 1;
        }
        (lo, hi)
    }
}

/// Cross-correlation (no kernel flip) with per-output-channel bias.
pub fn conv2d(x: &Tensor, w: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::resolve(x, w, stride, padding)?;
    if bias.len() != g.out_channels {
        return Err(Error::Dimension(format!(
            "conv2d bias of length {} for {} output channels",
            bias.len(),
            g.out_channels
        )));
    }
    let (xd, wd) = (x.data(), w.data());
    let (oh, ow) = (g.out_height, g.out_width);
    let k = g.kernel;
    let mut out = vec![0.0; g.batch * g.out_channels * oh * ow];
    for b in 0..g.batch {
        for o in 0..g.out_channels {
            let plane = &mut out[(b * g.out_channels + o) * oh * ow..][..oh * ow];
            plane.iter_mut().for_each(|v| *v = bias.data()[o]);
            for c in 0..g.in_channels {
                let xplane = &xd[(b * g.in_channels + c) * g.height * g.width..][..g.height * g.width];
                for ky in 0..k {
                    let (ylo, yhi) = g.valid_range(ky, g.height, oh);
                    for kx in 0..k {
                        let wv = wd[((o * g.in_channels + c) * k + ky) * k + kx];
                        let (xlo, xhi) = g.valid_range(kx, g.width, ow);
                        for oy in ylo..yhi {
                            let iy = oy * g.stride + ky - g.padding;
                            let xrow = &xplane[iy * g.width..(iy + 1) * g.width];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            for ox in xlo..xhi {
                                orow[ox] += wv * xrow[ox * g.stride + kx - g.padding];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.batch, g.out_channels, oh, ow], out)
}

/// Returns `(dx, dw, dbias)`.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    padding: usize,
    dout: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let g = ConvGeometry::resolve(x, w, stride, padding)?;
    let (xd, wd) = (x.data(), w.data());
    let (oh, ow) = (g.out_height, g.out_width);
    let k = g.kernel;
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; g.out_channels];
    for b in 0..g.batch {
        for o in 0..g.out_channels {
            let gplane = &dout[(b * g.out_channels + o) * oh * ow..][..oh * ow];
            db[o] += gplane.iter().sum::<f64>();
            for c in 0..g.in_channels {
                let base = (b * g.in_channels + c) * g.height * g.width;
                for ky in 0..k {
                    let (ylo, yhi) = g.valid_range(ky, g.height, oh);
                    for kx in 0..k {
                        let widx = ((o * g.in_channels + c) * k + ky) * k + kx;
                        let wv = wd[widx];
                        let (xlo, xhi) = g.valid_range(kx, g.width, ow);
                        let mut acc = 0.0;
                        for oy in ylo..yhi {
                            let iy = oy * g.stride + ky - g.padding;
                            let row = base + iy * g.width;
                            for ox in xlo..xhi {
                                let ix = row + ox * g.stride + kx - g.padding;
                                let gv = gplane[oy * ow + ox];
                                acc += gv * xd[ix];
                                dx[ix] += gv * wv;
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// Max pooling over `window × window` patches. Returns the pooled tensor and,
/// for every output element, the flat input index it was taken from. Ties
/// resolve to the first maximum in row-major scan order.
pub fn maxpool2d(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    expect_rank(x, 4, "maxpool2d")?;
    let [batch, channels, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    if window > h || window > w {
        return Err(Error::Config(format!(
            "pool window {window} larger than input {h}x{w}"
        )));
    }
    let oh = window_output(h, window, stride, 0)?;
    let ow = window_output(w, window, stride, 0)?;
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * channels * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for plane in 0..batch * channels {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = base + (oy * stride + dy) * w + ox * stride + dx;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![batch, channels, oh, ow], out)?, argmax))
}

pub fn maxpool2d_backward(input_len: usize, argmax: &[usize], dout: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&i, &g) in argmax.iter().zip(dout) {
        dx[i] += g;
    }
    dx
}

/// Mean over the spatial axes: `[B, C, H, W] -> [B, C]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    expect_rank(x, 4, "global_avg_pool")?;
    let [b, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let area = (h * w) as f64;
    let out = x
        .data()
        .chunks(h * w)
        .map(|p| p.iter().sum::<f64>() / area)
        .collect();
    Tensor::new(vec![b, c], out)
}

pub fn global_avg_pool_backward(input_shape: &[usize], dout: &[f64]) -> Vec<f64> {
    let area = input_shape[2] * input_shape[3];
    let scale = 1.0 / area as f64;
    dout.iter()
        .flat_map(|&g| std::iter::repeat(g * scale).take(area))
        .collect()
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

pub fn relu_backward(x: &Tensor, dout: &[f64]) -> Vec<f64> {
    x.data()
        .iter()
        .zip(dout)
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect()
}

/// Row-wise softmax over a `batch × C` matrix, computed after subtracting
/// each row's maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    expect_rank(logits, 2, "softmax")?;
    let c = logits.shape()[1];
    if c < 2 {
        return Err(Error::Dimension(format!("softmax over {c} classes")));
    }
    logits.ensure_finite("softmax input")?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

pub fn softmax_backward(probs: &Tensor, dout: &[f64]) -> Vec<f64> {
    let c = probs.shape()[1];
    let mut dx = vec![0.0; probs.len()];
    for ((s, g), d) in probs
        .data()
        .chunks(c)
        .zip(dout.chunks(c))
        .zip(dx.chunks_mut(c))
    {
        let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
        for i in 0..c {
            d[i] = s[i] * (g[i] - dot);
        }
    }
    dx
}

/// Row-wise concatenation `[B×A] ++ [B×B'] -> [B×(A+B')]`.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    expect_rank(a, 2, "concat")?;
    expect_rank(b, 2, "concat")?;
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "concat of batches {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (wa, wb) = (a.shape()[1], b.shape()[1]);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for r in 0..a.rows() {
        out.extend_from_slice(&a.data()[r * wa..(r + 1) * wa]);
        out.extend_from_slice(&b.data()[r * wb..(r + 1) * wb]);
    }
    Tensor::new(vec![a.rows(), wa + wb], out)
}

/// Splits the gradient of a concatenation back at column `wa`.
pub fn concat_backward(rows: usize, wa: usize, wb: usize, dout: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut da = Vec::with_capacity(rows * wa);
    let mut db = Vec::with_capacity(rows * wb);
    for row in dout.chunks(wa + wb).take(rows) {
        da.extend_from_slice(&row[..wa]);
        db.extend_from_slice(&row[wa..]);
    }
    (da, db)
}

fn check_targets(probs: &Tensor, targets: &[usize], weights: &[f64]) -> Result<usize> {
    expect_rank(probs, 2, "cross-entropy")?;
    let (batch, c) = (probs.shape()[0], probs.shape()[1]);
    if targets.len() != batch {
        return Err(Error::Dimension(format!(
            "{} targets for a batch of {batch}",
            targets.len()
        )));
    }
    if weights.len() != c {
        return Err(Error::Dimension(format!(
            "{} class weights for {c} classes",
            weights.len()
        )));
    }
    if batch == 0 {
        return Err(Error::Dimension("cross-entropy over an empty batch".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::Index(format!("target class {bad} with {c} classes")));
    }
    Ok(c)
}

/// Mean over the batch of `w[y] · −ln(max(p[y], LOG_CLAMP))`.
pub fn weighted_cross_entropy(probs: &Tensor, targets: &[usize], weights: &[f64]) -> Result<f64> {
    let c = check_targets(probs, targets, weights)?;
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| weights[t] * -probs.data()[i * c + t].max(LOG_CLAMP).ln())
        .sum();
    Ok(total / targets.len() as f64)
}

pub fn weighted_cross_entropy_backward(
    probs: &Tensor,
    targets: &[usize],
    weights: &[f64],
    dout: f64,
) -> Vec<f64> {
    let c = probs.shape()[1];
    let batch = targets.len() as f64;
    let mut dp = vec![0.0; probs.len()];
    for (i, &t) in targets.iter().enumerate() {
        let p = probs.data()[i * c + t];
        if p >= LOG_CLAMP {
            dp[i * c + t] = -dout * weights[t] / (batch * p);
        }
    }
    dp
}
