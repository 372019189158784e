//! Numeric building blocks of the diffusion transformer.

use crate::error::{Error, Result};

pub const ROPE_BASE: f64 = 10000.0;

/// `x / √(mean(x²) + eps) · gain`.
pub fn rmsnorm(x: &[f64], gain: &[f64], eps: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Dimension("rmsnorm of an empty vector".into()));
    }
    if gain.len() != x.len() {
        return Err(Error::Dimension(format!("{} gains for {} features", gain.len(), x.len())));
    }
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / (ms + eps).sqrt();
    Ok(x.iter().zip(gain).map(|(v, g)| v * inv * g).collect())
}

fn rotate_half(v: &mut [f64], pos: f64) {
    let half = v.len();
    for (i, pair) in v.chunks_exact_mut(2).enumerate() {
        let freq = ROPE_BASE.powf(-((2 * i) as f64) / half as f64);
        let (s, c) = (pos * freq).sin_cos();
        let (a, b) = (pair[0], pair[1]);
        pair[0] = a * c - b * s;
        pair[1] = a * s + b * c;
    }
}

/// 2D rotary embedding: the first half of each token rotates by its row,
/// the second half by its column, pairwise with frequencies
/// `10000^(−2i/d_half)`.
pub fn rope_2d(tokens: &[Vec<f64>], positions: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    if tokens.len() != positions.len() {
        return Err(Error::Dimension(format!(
            "{} tokens for {} positions",
            tokens.len(),
            positions.len()
        )));
    }
    tokens
        .iter()
        .zip(positions)
        .map(|(tok, &(row, col))| {
            if tok.is_empty() || tok.len() % 4 != 0 {
                return Err(Error::Dimension(format!("feature dimension {} is not a positive multiple of 4", tok.len())));
            }
            let mut out = tok.clone();
            let (r, c) = out.split_at_mut(tok.len() / 2);
            rotate_half(r, row);
            rotate_half(c, col);
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsnorm_of_unit_rms_vector_is_identity() {
        let x = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(rmsnorm(&x, &[1.0; 4], 0.0).unwrap(), x.to_vec());
        assert!(rmsnorm(&[], &[], 1e-6).is_err());
        assert!(rmsnorm(&[1.0], &[1.0, 2.0], 1e-6).is_err());
    }

    #[test]
    fn rope_origin_is_identity_and_bad_dims_fail() {
        let t = vec![vec![0.3, -1.0, 2.0, 0.5, 0.1, 0.2, 0.3, 0.4]];
        assert_eq!(rope_2d(&t, &[(0.0, 0.0)]).unwrap(), t);
        assert!(rope_2d(&[vec![1.0; 6]], &[(1.0, 1.0)]).is_err());
        assert!(rope_2d(&t, &[]).is_err());
    }
}
