use nalgebra::Vector3;

use super::camera::Camera;

/// Per-pixel Plücker coordinates `(d, o × d)` of the camera rays.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerGrid {
    pub width: usize,
    pub height: usize,
    pub rays: Vec<[f64; 6]>,
}

impl PluckerGrid {
    pub fn at(&self, x: usize, y: usize) -> &[f64; 6] {
        &self.rays[y * self.width + x]
    }
}

pub fn plucker_embedding(camera: &Camera) -> PluckerGrid {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let origin = camera.center();
    let mut rays = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = camera.ray_direction(x as f64, y as f64);
            let m: Vector3<f64> = origin.cross(&d);
            rays.push([d.x, d.y, d.z, m.x, m.y, m.z]);
        }
    }
    PluckerGrid {
        width: w,
        height: h,
        rays,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn down_minus_z(center: Vector3<f64>) -> Camera {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        Camera::new(50.0, 50.0, 4.0, 4.0, 8, 8, &r, &(-(r * center))).unwrap()
    }

    #[test]
    fn principal_ray_from_origin_has_zero_moment() {
        let grid = plucker_embedding(&down_minus_z(Vector3::zeros()));
        let p = grid.at(4, 4);
        assert!((p[0]).abs() < 1e-15 && (p[1]).abs() < 1e-15 && (p[2] + 1.0).abs() < 1e-15);
        assert!(p[3..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn offset_camera_moment_is_cross_product() {
        let grid = plucker_embedding(&down_minus_z(Vector3::new(1.0, 0.0, 0.0)));
        let p = grid.at(4, 4);
        // (1,0,0) × (0,0,-1) = (0,1,0)
        assert!((p[3]).abs() < 1e-15 && (p[4] - 1.0).abs() < 1e-15 && (p[5]).abs() < 1e-15);
    }

    #[test]
    fn sliding_along_ray_keeps_embedding() {
        let cam = Camera::look_at(&Vector3::new(1.0, 2.0, 3.0), &Vector3::zeros(), &Vector3::y(), 40.0, 40.0, 6, 6).unwrap();
        let (x, y) = (1usize, 5usize);
        let d = cam.ray_direction(x as f64, y as f64);
        let moved_center = cam.center() + d * 0.7;
        let r = cam.rotation_matrix();
        let moved = Camera::new(cam.fx, cam.fy, cam.cx, cam.cy, 6, 6, &r, &(-(r * moved_center))).unwrap();
        let a = plucker_embedding(&cam);
        let b = plucker_embedding(&moved);
        for k in 0..6 {
            assert!((a.at(x, y)[k] - b.at(x, y)[k]).abs() < 1e-12);
        }
    }
}
