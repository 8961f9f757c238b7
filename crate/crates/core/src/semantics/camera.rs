use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Pinhole camera with a world-to-camera rigid transform `p_c = R p + t`.
/// Camera looks along +z, x to the right, y down.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidInput("focal lengths must be positive".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > 1e-9 || rotation.determinant() < 0.0 {
            return Err(Error::InvalidInput(format!("extrinsic rotation is not orthonormal (err {err:.2e})")));
        }
        Ok(Self { fx, fy, cx, cy, width, height, rotation, translation })
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    InFrame {
        u: f64,
        v: f64,
    },
    /// In front of the camera but outside the image bounds.
    OutOfFrame {
        u: f64,
        v: f64,
    },
    BehindCamera,
}

pub fn project_point(camera: &Camera, p: &Vec3) -> Result<Projection> {
    if !p.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let pc = camera.to_camera(p);
    if pc.z.abs() <= 1e-9 {
        return Err(Error::OnCameraPlane(pc.z));
    }
    if pc.z < 0.0 {
        return Ok(Projection::BehindCamera);
    }
    let u = camera.fx * pc.x / pc.z + camera.cx;
    let v = camera.fy * pc.y / pc.z + camera.cy;
    let inside = u >= 0.0 && v >= 0.0 && u < camera.width as f64 && v < camera.height as f64;
    Ok(if inside { Projection::InFrame { u, v } } else { Projection::OutOfFrame { u, v } })
}
