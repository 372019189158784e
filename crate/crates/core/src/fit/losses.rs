//! Image losses and metrics over the RGB channels, with analytic gradients.

use crate::error::{Error, Result};
use crate::render::ImageF64;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// A scalar loss and its gradient with respect to the prediction.
///
/// The gradient has the prediction's shape; channels past RGB are zero.
#[derive(Debug, Clone)]
pub struct Loss {
    pub value: f64,
    pub grad: ImageF64,
}

fn check_pair(pred: &ImageF64, target: &ImageF64) -> Result<()> {
    if pred.width() != target.width() || pred.height() != target.height() {
        return Err(Error::Dimension(format!(
            "prediction {}×{} vs target {}×{}",
            pred.width(),
            pred.height(),
            target.width(),
            target.height()
        )));
    }
    if pred.channels() < 3 || target.channels() < 3 {
        return Err(Error::Dimension("images need at least three channels".into()));
    }
    Ok(())
}

/// Mean absolute error over RGB.
pub fn loss_l1(pred: &ImageF64, target: &ImageF64) -> Result<Loss> {
    check_pair(pred, target)?;
    let n = (pred.width() * pred.height() * 3) as f64;
    let mut grad = ImageF64::new(pred.width(), pred.height(), pred.channels());
    let mut sum = 0.0;
    let (pc, tc) = (pred.channels(), target.channels());
    for ((p, t), g) in pred
        .data()
        .chunks_exact(pc)
        .zip(target.data().chunks_exact(tc))
        .zip(grad.data_mut().chunks_exact_mut(pc))
    {
        for c in 0..3 {
            let d = p[c] - t[c];
            sum += d.abs();
            g[c] = if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            };
        }
    }
    Ok(Loss { value: sum / n, grad })
}

/// Mean squared error over RGB.
pub fn mse(pred: &ImageF64, target: &ImageF64) -> Result<f64> {
    check_pair(pred, target)?;
    let (pc, tc) = (pred.channels(), target.channels());
    let sum: f64 = pred
        .data()
        .chunks_exact(pc)
        .zip(target.data().chunks_exact(tc))
        .map(|(p, t)| (0..3).map(|c| (p[c] - t[c]).powi(2)).sum::<f64>())
        .sum();
    Ok(sum / (pred.width() * pred.height() * 3) as f64)
}

/// `10 log₁₀(1 / MSE)` for unit dynamic range; `+∞` for identical images.
pub fn psnr(pred: &ImageF64, target: &ImageF64) -> Result<f64> {
    Ok(psnr_from_mse(mse(pred, target)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// `½ Σ (μ² + σ² − log σ² − 1) / n` with gradients for `μ` and `log σ²`.
#[derive(Debug, Clone)]
pub struct KlLoss {
    pub value: f64,
    pub grad_mean: Vec<f64>,
    pub grad_log_variance: Vec<f64>,
}

pub fn loss_kl(mean: &[f64], log_variance: &[f64]) -> Result<KlLoss> {
    if mean.len() != log_variance.len() {
        return Err(Error::Dimension(format!(
            "{} means vs {} log-variances",
            mean.len(),
            log_variance.len()
        )));
    }
    if mean.is_empty() {
        return Err(Error::Dimension("empty latent statistics".into()));
    }
    if mean.iter().chain(log_variance).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("latent statistics".into()));
    }
    let n = mean.len() as f64;
    let mut value = 0.0;
    let mut grad_mean = Vec::with_capacity(mean.len());
    let mut grad_log_variance = Vec::with_capacity(mean.len());
    for (&m, &lv) in mean.iter().zip(log_variance) {
        let var = lv.exp();
        value += m * m + var - lv - 1.0;
        grad_mean.push(m / n);
        grad_log_variance.push(0.5 * (var - 1.0) / n);
    }
    Ok(KlLoss {
        value: 0.5 * value / n,
        grad_mean,
        grad_log_variance,
    })
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Valid-mode separable filtering of a `w×h` plane to `(w−10)×(h−10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let row = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (o, r) in out[y * ow..(y + 1) * ow].iter_mut().zip(row) {
                *o += kv * r;
            }
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: spreads a `(w−10)×(h−10)` map back to `w×h`.
fn filter_adjoint(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let row = &mut rows[(y + i) * ow..(y + i + 1) * ow];
            for (r, s) in row.iter_mut().zip(&src[y * ow..(y + 1) * ow]) {
                *r += kv * s;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &rows[y * ow..(y + 1) * ow];
        let dst = &mut out[y * w..(y + 1) * w];
        for (i, kv) in k.iter().enumerate() {
            for (o, r) in dst[i..i + ow].iter_mut().zip(row) {
                *o += kv * r;
            }
        }
    }
    out
}

fn plane(img: &ImageF64, c: usize) -> Vec<f64> {
    img.data().chunks_exact(img.channels()).map(|p| p[c]).collect()
}

fn ssim_impl(pred: &ImageF64, target: &ImageF64, with_grad: bool) -> Result<(f64, Option<ImageF64>)> {
    check_pair(pred, target)?;
    let (w, h) = (pred.width(), pred.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "{w}×{h} image is smaller than the {SSIM_WINDOW}×{SSIM_WINDOW} SSIM window"
        )));
    }
    let k = gaussian_kernel();
    let count = ((w + 1 - SSIM_WINDOW) * (h + 1 - SSIM_WINDOW) * 3) as f64;
    let mut total = 0.0;
    let mut grad = with_grad.then(|| ImageF64::new(w, h, pred.channels()));
    for c in 0..3 {
        let x = plane(pred, c);
        let y = plane(target, c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let exx = filter_valid(&xx, w, h, &k);
        let eyy = filter_valid(&yy, w, h, &k);
        let exy = filter_valid(&xy, w, h, &k);
        let m = mx.len();
        let (mut d_mx, mut d_exx, mut d_exy) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let (ux, uy) = (mx[i], my[i]);
            let sx = exx[i] - ux * ux;
            let sy = eyy[i] - uy * uy;
            let sxy = exy[i] - ux * uy;
            let a1 = 2.0 * ux * uy + SSIM_C1;
            let a2 = 2.0 * sxy + SSIM_C2;
            let b1 = ux * ux + uy * uy + SSIM_C1;
            let b2 = sx + sy + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if with_grad {
                let bb = b1 * b2;
                d_mx[i] = (2.0 * uy * a2 - 2.0 * uy * a1) / bb - s * (2.0 * ux / b1 - 2.0 * ux / b2);
                d_exx[i] = -s / b2;
                d_exy[i] = 2.0 * a1 / bb;
            }
        }
        if let Some(g) = grad.as_mut() {
            let gm = filter_adjoint(&d_mx, w, h, &k);
            let gxx = filter_adjoint(&d_exx, w, h, &k);
            let gxy = filter_adjoint(&d_exy, w, h, &k);
            let ch = g.channels();
            for (p, px) in g.data_mut().chunks_exact_mut(ch).enumerate() {
                // d(1 − mean SSIM)
                px[c] = -(gm[p] + 2.0 * x[p] * gxx[p] + y[p] * gxy[p]) / count;
            }
        }
    }
    Ok((total / count, grad))
}

/// Mean SSIM over RGB (valid 11×11 Gaussian windows, σ = 1.5).
pub fn ssim(pred: &ImageF64, target: &ImageF64) -> Result<f64> {
    Ok(ssim_impl(pred, target, false)?.0)
}

/// `1 − SSIM` and its gradient.
pub fn loss_ssim(pred: &ImageF64, target: &ImageF64) -> Result<Loss> {
    let (s, grad) = ssim_impl(pred, target, true)?;
    Ok(Loss {
        value: 1.0 - s,
        grad: grad.expect("gradient requested"),
    })
}
