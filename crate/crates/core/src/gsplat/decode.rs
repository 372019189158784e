use nalgebra::Vector3;

use super::gaussians::{covariance_backward, CanonicalGaussians, GaussianGrads};
use super::uvmap::{channel, UvAttributeMap, RAW_CHANNELS};
use crate::body::{SkinWeights, SkinnedTemplate};
use crate::error::{Error, Result};
use crate::math::{axis_angle_matrix_jacobian, axis_angle_to_matrix, axis_angle_to_quat, sigmoid};

/// Clamp applied to the per-texel base scale, meters.
pub const BASE_SCALE_RANGE: (f64, f64) = (1e-4, 0.05);

/// Per-Gaussian T-pose priors: surface point, base scale and blended
/// skinning weights. Decoding adds the raw offsets on top of these.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeBasis {
    pub base_positions: Vec<Vector3<f64>>,
    pub base_scales: Vec<Vector3<f64>>,
    pub skin_weights: Vec<SkinWeights>,
}

impl DecodeBasis {
    pub fn new(map: &UvAttributeMap, template: &SkinnedTemplate) -> Result<Self> {
        let texel_side = 1.0 / ((map.width() * map.height()) as f64).sqrt();
        let mut base_positions = Vec::with_capacity(map.valid_count());
        let mut base_scales = Vec::with_capacity(map.valid_count());
        let mut skin_weights = Vec::with_capacity(map.valid_count());
        for binding in map.bindings().iter().flatten() {
            if binding.face >= template.faces().len() {
                return Err(Error::Index(format!(
                    "binding face {} >= face count {}",
                    binding.face,
                    template.faces().len()
                )));
            }
            let corners = template.face_vertices(binding.face);
            let p = corners[0] * binding.bary[0] + corners[1] * binding.bary[1] + corners[2] * binding.bary[2];
            base_positions.push(p);

            let world_area = 0.5 * (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).norm();
            let [a, b, c] = template.uv_coords()[binding.face];
            let uv_area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
            let footprint = if uv_area > 0.0 {
                (world_area / uv_area).sqrt() * texel_side
            } else {
                BASE_SCALE_RANGE.0
            };
            let s = footprint.clamp(BASE_SCALE_RANGE.0, BASE_SCALE_RANGE.1);
            base_scales.push(Vector3::repeat(s));

            let face = template.faces()[binding.face];
            let pairs = face.iter().zip(binding.bary).flat_map(|(&v, b)| {
                template.skin_weights()[v as usize]
                    .entries()
                    .iter()
                    .map(move |&(j, w)| (j, w * b))
            });
            skin_weights.push(SkinWeights::from_pairs(pairs)?);
        }
        Ok(Self {
            base_positions,
            base_scales,
            skin_weights,
        })
    }

    pub fn from_parts(
        base_positions: Vec<Vector3<f64>>,
        base_scales: Vec<Vector3<f64>>,
        skin_weights: Vec<SkinWeights>,
    ) -> Result<Self> {
        if base_scales.len() != base_positions.len() || skin_weights.len() != base_positions.len() {
            return Err(Error::Dimension("decode basis arrays differ in length".into()));
        }
        if base_scales.iter().flat_map(|s| s.iter()).any(|s| !(*s > 0.0)) {
            return Err(Error::Domain("base scales must be positive".into()));
        }
        Ok(Self {
            base_positions,
            base_scales,
            skin_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.base_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_positions.is_empty()
    }

    fn check_raw(&self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.len() * RAW_CHANNELS {
            return Err(Error::Dimension(format!(
                "{} raw values for {} gaussians",
                raw.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Activates raw channels (concatenated per Gaussian) into canonical Gaussians.
    pub fn decode(&self, raw: &[f64]) -> Result<CanonicalGaussians> {
        self.check_raw(raw)?;
        let n = self.len();
        let mut g = CanonicalGaussians {
            positions: Vec::with_capacity(n),
            scales: Vec::with_capacity(n),
            rotations: Vec::with_capacity(n),
            opacities: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            skin_weights: self.skin_weights.clone(),
        };
        for (i, t) in raw.chunks_exact(RAW_CHANNELS).enumerate() {
            let v3 = |c: usize| Vector3::new(t[c], t[c + 1], t[c + 2]);
            g.positions.push(self.base_positions[i] + v3(channel::POSITION));
            g.scales
                .push(self.base_scales[i].component_mul(&v3(channel::SCALE).map(f64::exp)));
            g.rotations.push(axis_angle_to_quat(&v3(channel::ROTATION)));
            g.opacities.push(sigmoid(t[channel::OPACITY]));
            g.colors.push(v3(channel::COLOR).map(sigmoid));
        }
        Ok(g)
    }

    /// Chains covariance-level canonical gradients back to the raw channels.
    pub fn backward(&self, raw: &[f64], grads: &GaussianGrads) -> Result<Vec<f64>> {
        self.check_raw(raw)?;
        if grads.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} gradients for {} gaussians",
                grads.len(),
                self.len()
            )));
        }
        let mut out = vec![0.0; raw.len()];
        for (i, (t, o)) in raw
            .chunks_exact(RAW_CHANNELS)
            .zip(out.chunks_exact_mut(RAW_CHANNELS))
            .enumerate()
        {
            let v3 = |c: usize| Vector3::new(t[c], t[c + 1], t[c + 2]);
            let dpos = grads.position[i];
            o[channel::POSITION..channel::POSITION + 3].copy_from_slice(dpos.as_slice());

            let scale = self.base_scales[i].component_mul(&v3(channel::SCALE).map(f64::exp));
            let r = v3(channel::ROTATION);
            let rot = axis_angle_to_matrix(&r);
            let (dscale, drot) = covariance_backward(&scale, &rot, &grads.covariance[i]);
            let dlog = dscale.component_mul(&scale);
            o[channel::SCALE..channel::SCALE + 3].copy_from_slice(dlog.as_slice());
            let jac = axis_angle_matrix_jacobian(&r);
            for (k, jk) in jac.iter().enumerate() {
                o[channel::ROTATION + k] = drot.component_mul(jk).sum();
            }

            let op = sigmoid(t[channel::OPACITY]);
            o[channel::OPACITY] = grads.opacity[i] * op * (1.0 - op);
            for k in 0..3 {
                let c = sigmoid(t[channel::COLOR + k]);
                o[channel::COLOR + k] = grads.color[i][k] * c * (1.0 - c);
            }
        }
        Ok(out)
    }
}

/// Canonical Gaussians of every valid texel, in row-major texel order.
pub fn decode_uv(map: &UvAttributeMap, template: &SkinnedTemplate) -> Result<CanonicalGaussians> {
    DecodeBasis::new(map, template)?.decode(&map.gather_valid())
}
