//! Built-in capsule humanoid used as a stand-in for licensed body models.
//!
//! Y is up, the figure faces +z, left is +x and the feet rest on y ≈ 0.
//! Every limb segment is a capsule with its own rectangular UV chart.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{Joint, SkinWeights, SkinnedTemplate};

#[derive(Debug, Clone, Copy)]
pub struct HumanoidParams {
    /// Vertices around each capsule ring.
    pub segments: usize,
    /// Ring intervals from pole to pole.
    pub rings: usize,
    /// Half width of the weight blending zone around each joint, meters.
    pub blend_half_width: f64,
}

impl Default for HumanoidParams {
    fn default() -> Self {
        Self {
            segments: 16,
            rings: 12,
            blend_half_width: 0.04,
        }
    }
}

const JOINTS: [(&str, [f64; 3], Option<usize>); 12] = [
    ("pelvis", [0.0, 0.95, 0.0], None),
    ("spine", [0.0, 1.10, 0.0], Some(0)),
    ("chest", [0.0, 1.30, 0.0], Some(1)),
    ("neck", [0.0, 1.50, 0.0], Some(2)),
    ("l_shoulder", [0.18, 1.45, 0.0], Some(2)),
    ("l_elbow", [0.46, 1.45, 0.0], Some(4)),
    ("r_shoulder", [-0.18, 1.45, 0.0], Some(2)),
    ("r_elbow", [-0.46, 1.45, 0.0], Some(6)),
    ("l_hip", [0.10, 0.92, 0.0], Some(0)),
    ("l_knee", [0.10, 0.50, 0.0], Some(8)),
    ("r_hip", [-0.10, 0.92, 0.0], Some(0)),
    ("r_knee", [-0.10, 0.50, 0.0], Some(10)),
];

/// Weights along a chain of joints measured by the coordinate `p · axis`.
/// Knot 0 owns everything below knot 1.
struct Chain {
    axis: [f64; 3],
    knots: &'static [(usize, f64)],
}

struct Part {
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
    /// u0, v0, u1, v1
    chart: [f64; 4],
    chain: Chain,
}

const TORSO_CHAIN: Chain = Chain {
    axis: [0.0, 1.0, 0.0],
    knots: &[(0, f64::NEG_INFINITY), (1, 1.10), (2, 1.30), (3, 1.50)],
};
const HEAD_CHAIN: Chain = Chain {
    axis: [0.0, 1.0, 0.0],
    knots: &[(2, f64::NEG_INFINITY), (3, 1.50)],
};
const L_ARM: Chain = Chain {
    axis: [1.0, 0.0, 0.0],
    knots: &[(2, f64::NEG_INFINITY), (4, 0.18), (5, 0.46)],
};
const R_ARM: Chain = Chain {
    axis: [-1.0, 0.0, 0.0],
    knots: &[(2, f64::NEG_INFINITY), (6, 0.18), (7, 0.46)],
};
const L_LEG: Chain = Chain {
    axis: [0.0, -1.0, 0.0],
    knots: &[(0, f64::NEG_INFINITY), (8, -0.92), (9, -0.50)],
};
const R_LEG: Chain = Chain {
    axis: [0.0, -1.0, 0.0],
    knots: &[(0, f64::NEG_INFINITY), (10, -0.92), (11, -0.50)],
};

const SIXTH: f64 = 1.0 / 6.0;

const PARTS: [Part; 10] = [
    Part { a: [0.0, 0.92, 0.0], b: [0.0, 1.40, 0.0], radius: 0.16, chart: [0.0, 0.0, 0.5, 0.5], chain: TORSO_CHAIN },
    Part { a: [0.0, 1.60, 0.0], b: [0.0, 1.72, 0.0], radius: 0.10, chart: [0.5, 0.0, 0.75, 0.5], chain: HEAD_CHAIN },
    Part { a: [0.10, 0.85, 0.0], b: [0.10, 0.55, 0.0], radius: 0.075, chart: [0.75, 0.0, 0.875, 0.5], chain: L_LEG },
    Part { a: [-0.10, 0.85, 0.0], b: [-0.10, 0.55, 0.0], radius: 0.075, chart: [0.875, 0.0, 1.0, 0.5], chain: R_LEG },
    Part { a: [0.10, 0.45, 0.0], b: [0.10, 0.09, 0.0], radius: 0.055, chart: [0.0, 0.5, SIXTH, 1.0], chain: L_LEG },
    Part { a: [-0.10, 0.45, 0.0], b: [-0.10, 0.09, 0.0], radius: 0.055, chart: [SIXTH, 0.5, 2.0 * SIXTH, 1.0], chain: R_LEG },
    Part { a: [0.20, 1.45, 0.0], b: [0.44, 1.45, 0.0], radius: 0.05, chart: [2.0 * SIXTH, 0.5, 3.0 * SIXTH, 1.0], chain: L_ARM },
    Part { a: [-0.20, 1.45, 0.0], b: [-0.44, 1.45, 0.0], radius: 0.05, chart: [3.0 * SIXTH, 0.5, 4.0 * SIXTH, 1.0], chain: R_ARM },
    Part { a: [0.50, 1.45, 0.0], b: [0.72, 1.45, 0.0], radius: 0.04, chart: [4.0 * SIXTH, 0.5, 5.0 * SIXTH, 1.0], chain: L_ARM },
    Part { a: [-0.50, 1.45, 0.0], b: [-0.72, 1.45, 0.0], radius: 0.04, chart: [5.0 * SIXTH, 0.5, 1.0, 1.0], chain: R_ARM },
];

/// Gap left between neighbouring UV charts.
const CHART_INSET: f64 = 0.004;

fn chain_weights(chain: &Chain, p: &Vector3<f64>, half_width: f64) -> SkinWeights {
    let c = p.dot(&Vector3::from(chain.axis));
    for m in 1..chain.knots.len() {
        let cm = chain.knots[m].1;
        if (c - cm).abs() < half_width {
            let w = (c - (cm - half_width)) / (2.0 * half_width);
            return SkinWeights::from_pairs([(chain.knots[m - 1].0, 1.0 - w), (chain.knots[m].0, w)])
                .expect("blend weights are positive");
        }
    }
    let owner = chain
        .knots
        .iter()
        .rev()
        .find(|(_, ck)| *ck <= c)
        .map(|(j, _)| *j)
        .unwrap_or(chain.knots[0].0);
    SkinWeights::single(owner)
}

fn perpendicular_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if d.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = helper.cross(d).normalize();
    let e2 = d.cross(&e1);
    (e1, e2)
}

/// Generates the test humanoid: 12 joints, ten capsule parts.
pub fn procedural_humanoid(params: &HumanoidParams) -> SkinnedTemplate {
    let segs = params.segments.max(3);
    let rings = params.rings.max(2);
    let mut vertices = Vec::new();
    let mut weights = Vec::new();
    let mut faces = Vec::new();
    let mut uvs = Vec::new();

    for part in &PARTS {
        let a = Vector3::from(part.a);
        let b = Vector3::from(part.b);
        let len = (b - a).norm();
        let d = (b - a) / len;
        let (e1, e2) = perpendicular_basis(&d);
        let r = part.radius;
        let profile = len + PI * r;
        let [u0, v0, u1, v1] = part.chart;
        let (u0, v0, u1, v1) = (u0 + CHART_INSET, v0 + CHART_INSET, u1 - CHART_INSET, v1 - CHART_INSET);
        let uv_at = |ring: f64, seg: f64| -> [f64; 2] {
            [u0 + (u1 - u0) * seg / segs as f64, v0 + (v1 - v0) * ring / rings as f64]
        };

        let base = vertices.len() as u32;
        let push = |p: Vector3<f64>, vertices: &mut Vec<Vector3<f64>>, weights: &mut Vec<SkinWeights>| {
            weights.push(chain_weights(&part.chain, &p, params.blend_half_width));
            vertices.push(p);
        };
        push(a - d * r, &mut vertices, &mut weights);
        for i in 1..rings {
            let s = profile * i as f64 / rings as f64;
            let (axial, radius) = if s < 0.5 * PI * r {
                let phi = s / r;
                (-r * phi.cos(), r * phi.sin())
            } else if s <= 0.5 * PI * r + len {
                (s - 0.5 * PI * r, r)
            } else {
                let phi = (s - 0.5 * PI * r - len) / r;
                (len + r * phi.sin(), r * phi.cos())
            };
            for k in 0..segs {
                let ang = 2.0 * PI * k as f64 / segs as f64;
                let p = a + d * axial + (e1 * ang.cos() + e2 * ang.sin()) * radius;
                push(p, &mut vertices, &mut weights);
            }
        }
        push(b + d * r, &mut vertices, &mut weights);

        let bottom = base;
        let top = base + 1 + ((rings - 1) * segs) as u32;
        let ring_vertex = |i: usize, k: usize| base + 1 + ((i - 1) * segs + k % segs) as u32;

        for k in 0..segs {
            faces.push([bottom, ring_vertex(1, k + 1), ring_vertex(1, k)]);
            uvs.push([uv_at(0.0, k as f64 + 0.5), uv_at(1.0, (k + 1) as f64), uv_at(1.0, k as f64)]);
        }
        for i in 1..rings - 1 {
            for k in 0..segs {
                let (kf, kn) = (k as f64, (k + 1) as f64);
                let (fi, fn_) = (i as f64, (i + 1) as f64);
                faces.push([ring_vertex(i, k), ring_vertex(i, k + 1), ring_vertex(i + 1, k)]);
                uvs.push([uv_at(fi, kf), uv_at(fi, kn), uv_at(fn_, kf)]);
                faces.push([ring_vertex(i, k + 1), ring_vertex(i + 1, k + 1), ring_vertex(i + 1, k)]);
                uvs.push([uv_at(fi, kn), uv_at(fn_, kn), uv_at(fn_, kf)]);
            }
        }
        let last = rings - 1;
        for k in 0..segs {
            faces.push([ring_vertex(last, k), ring_vertex(last, k + 1), top]);
            uvs.push([
                uv_at(last as f64, k as f64),
                uv_at(last as f64, (k + 1) as f64),
                uv_at(rings as f64, k as f64 + 0.5),
            ]);
        }
    }

    let joints = JOINTS
        .iter()
        .map(|(name, rest, parent)| Joint {
            name: (*name).to_string(),
            rest_position: *rest,
            parent: *parent,
        })
        .collect();
    SkinnedTemplate::new(vertices, faces, uvs, joints, weights)
        .expect("procedural humanoid satisfies template invariants")
}
