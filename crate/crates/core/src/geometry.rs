//! Pixel density of a face region and the filtering gate.
//!
//! Densities are in pixels per centimetre of real-world face extent. All angles
//! are radians.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average bitragion breadth of an adult face, in cm.
pub const FACE_WIDTH_CM: f64 = 15.45;
/// Average menton-crinion length of an adult face, in cm.
pub const FACE_HEIGHT_CM: f64 = 20.75;

/// Intrinsics and pose of the airborne camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Focal length, cm.
    pub f: f64,
    /// Horizontal pixel pitch, cm/px.
    pub p_h: f64,
    /// Vertical pixel pitch, cm/px.
    pub p_v: f64,
    /// Altitude above ground, cm.
    pub h1: f64,
    /// Tilt of the principal axis from nadir.
    pub theta_p: f64,
}

impl CameraModel {
    pub fn new(f: f64, p_h: f64, p_v: f64, h1: f64, theta_p: f64) -> Result<Self> {
        let cam = Self {
            f,
            p_h,
            p_v,
            h1,
            theta_p,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("f", self.f), ("p_h", self.p_h), ("p_v", self.p_v), ("h1", self.h1)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..FRAC_PI_2).contains(&self.theta_p) {
            return Err(Error::Geometry(format!(
                "theta_p must lie in [0, pi/2), got {}",
                self.theta_p
            )));
        }
        Ok(())
    }
}

/// A rectangular sensitive region of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceRegion {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    /// View angle; falls back to the camera tilt when absent.
    #[serde(default)]
    pub theta_r: Option<f64>,
    /// Height of the face above ground, cm.
    #[serde(default)]
    pub h2: f64,
}

impl FaceRegion {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
            theta_r: None,
            h2: 0.0,
        }
    }

    /// Region covering a whole `width` x `height` image.
    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn with_view(mut self, theta_r: f64, h2: f64) -> Self {
        self.theta_r = Some(theta_r);
        self.h2 = h2;
        self
    }

    /// Midpoint of the region in image coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.width as f64 / 2.0,
            self.y as f64 + self.height as f64 / 2.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDensity {
    pub rho_h: f64,
    pub rho_v: f64,
}

impl PixelDensity {
    pub fn new(rho_h: f64, rho_v: f64) -> Result<Self> {
        if !(rho_h >= 0.0 && rho_v >= 0.0 && rho_h.is_finite() && rho_v.is_finite()) {
            return Err(Error::Argument(format!(
                "densities must be finite and non-negative, got ({rho_h}, {rho_v})"
            )));
        }
        Ok(Self { rho_h, rho_v })
    }
}

/// Densities above which a face recogniser starts to work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityThreshold {
    pub rho_h_o: f64,
    pub rho_v_o: f64,
}

impl DensityThreshold {
    pub fn new(rho_h_o: f64, rho_v_o: f64) -> Result<Self> {
        if !(rho_h_o > 0.0 && rho_v_o > 0.0 && rho_h_o.is_finite() && rho_v_o.is_finite()) {
            return Err(Error::Argument(format!(
                "thresholds must be strictly positive, got ({rho_h_o}, {rho_v_o})"
            )));
        }
        Ok(Self { rho_h_o, rho_v_o })
    }

    pub fn uniform(rho_o: f64) -> Result<Self> {
        Self::new(rho_o, rho_o)
    }
}

/// Densities around the centre of `face` seen by `cam`.
///
/// The vertical density uses the small-angle approximation, so `rho_v / rho_h`
/// is exactly `sin(theta_r)` when both pixel pitches agree.
pub fn density_from_camera(cam: &CameraModel, face: &FaceRegion) -> Result<PixelDensity> {
    cam.validate()?;
    let theta_r = face.theta_r.unwrap_or(cam.theta_p);
    if !(0.0..FRAC_PI_2).contains(&theta_r) {
        return Err(Error::Geometry(format!(
            "theta_r must lie in [0, pi/2), got {theta_r}"
        )));
    }
    let dh = cam.h1 - face.h2;
    if dh.is_nan() || dh <= 0.0 {
        return Err(Error::Geometry(format!(
            "face at {} cm is not below the camera at {} cm",
            face.h2, cam.h1
        )));
    }
    let c = theta_r.cos();
    Ok(PixelDensity {
        rho_h: cam.f * c / (cam.p_h * dh),
        rho_v: cam.f * c * theta_r.sin() / (cam.p_v * dh),
    })
}

/// Densities of a cropped face of `s_c` pixels at pitch `gamma`, given the
/// physical face width `s_h` and height `s_v` in cm.
pub fn density_from_face_size(s_c: f64, gamma: f64, s_h: f64, s_v: f64) -> Result<PixelDensity> {
    if !(s_c > 0.0 && s_h > 0.0 && s_v > 0.0) {
        return Err(Error::Argument(format!(
            "face size and dimensions must be positive (s_c={s_c}, s_h={s_h}, s_v={s_v})"
        )));
    }
    if !(0.0..FRAC_PI_2).contains(&gamma) {
        return Err(Error::Argument(format!(
            "pitch must lie in [0, pi/2), got {gamma}"
        )));
    }
    Ok(PixelDensity {
        rho_h: s_c / s_h,
        rho_v: s_c * gamma.cos() / s_v,
    })
}

/// [`density_from_face_size`] with the average adult face dimensions.
pub fn density_from_face_pixels(s_c: f64, gamma: f64) -> Result<PixelDensity> {
    density_from_face_size(s_c, gamma, FACE_WIDTH_CM, FACE_HEIGHT_CM)
}

/// True when the face is resolved finely enough on both axes to need filtering.
pub fn gate(density: &PixelDensity, thr: &DensityThreshold) -> bool {
    density.rho_h > thr.rho_h_o && density.rho_v > thr.rho_v_o
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit_cam(theta: f64) -> CameraModel {
        CameraModel::new(1.0, 1.0, 1.0, 2.0, theta).unwrap()
    }

    #[test]
    fn nadir_face_has_zero_vertical_density() {
        let face = FaceRegion::new(0, 0, 4, 4).with_view(0.0, 1.0);
        let d = density_from_camera(&unit_cam(0.0), &face).unwrap();
        assert_eq!(d.rho_v, 0.0);
        assert_eq!(d.rho_h, 1.0);
    }

    #[test]
    fn forty_five_degrees() {
        let face = FaceRegion::new(0, 0, 4, 4).with_view(FRAC_PI_4, 1.0);
        let d = density_from_camera(&unit_cam(0.3), &face).unwrap();
        assert!((d.rho_h - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d.rho_v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn view_angle_defaults_to_tilt() {
        let face = FaceRegion::new(0, 0, 4, 4).with_view(FRAC_PI_4, 1.0);
        let mut implicit = face;
        implicit.theta_r = None;
        let cam = unit_cam(FRAC_PI_4);
        assert_eq!(
            density_from_camera(&cam, &face).unwrap(),
            density_from_camera(&cam, &implicit).unwrap()
        );
    }

    #[test]
    fn doubling_distance_halves_density() {
        let near = CameraModel::new(2.0, 0.01, 0.01, 301.0, 0.7).unwrap();
        let far = CameraModel { h1: 601.0, ..near };
        let face = FaceRegion::new(0, 0, 1, 1).with_view(0.7, 1.0);
        let a = density_from_camera(&near, &face).unwrap();
        let b = density_from_camera(&far, &face).unwrap();
        assert!((a.rho_h / b.rho_h - 2.0).abs() < 1e-12);
        assert!((a.rho_v / b.rho_v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn face_above_camera_is_rejected() {
        let face = FaceRegion::new(0, 0, 1, 1).with_view(0.2, 5.0);
        let cam = CameraModel::new(1.0, 1.0, 1.0, 5.0, 0.2).unwrap();
        assert!(matches!(
            density_from_camera(&cam, &face),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn face_size_ladder_labels() {
        let d = density_from_face_pixels(96.0, 0.0).unwrap();
        assert_eq!(
            (format!("{:.2}", d.rho_h), format!("{:.2}", d.rho_v)),
            ("6.21".into(), "4.63".into())
        );
        let d = density_from_face_pixels(96.0, 10f64.to_radians()).unwrap();
        assert_eq!(format!("{:.2}", d.rho_v), "4.56");
        let d = density_from_face_pixels(48.0, 70f64.to_radians()).unwrap();
        assert_eq!(
            (format!("{:.2}", d.rho_h), format!("{:.2}", d.rho_v)),
            ("3.11".into(), "0.79".into())
        );
        assert!(density_from_face_pixels(0.0, 0.0).is_err());
        assert!(density_from_face_size(10.0, 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gate_is_strict() {
        let thr = DensityThreshold::uniform(0.5).unwrap();
        assert!(!gate(&PixelDensity { rho_h: 0.4, rho_v: 0.4 }, &thr));
        assert!(gate(&PixelDensity { rho_h: 6.21, rho_v: 4.63 }, &thr));
        assert!(!gate(&PixelDensity { rho_h: 0.6, rho_v: 0.5 }, &thr));
        assert!(!gate(&PixelDensity { rho_h: 0.5, rho_v: 0.6 }, &thr));
    }

    #[test]
    fn invalid_camera_is_rejected() {
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(CameraModel::new(1.0, 1.0, 1.0, 1.0, FRAC_PI_2).is_err());
        assert!(DensityThreshold::new(0.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn ratio_is_sine_of_view_angle(theta in 0.0f64..1.5, dh in 1.0f64..1e4, f in 0.1f64..10.0, p in 1e-4f64..1e-2) {
            let cam = CameraModel::new(f, p, p, dh + 10.0, 0.1).unwrap();
            let face = FaceRegion::new(0, 0, 1, 1).with_view(theta, 10.0);
            let d = density_from_camera(&cam, &face).unwrap();
            proptest::prop_assert!(d.rho_v <= d.rho_h);
            if d.rho_h > 0.0 {
                proptest::prop_assert!((d.rho_v / d.rho_h - theta.sin()).abs() < 1e-12);
            }
        }

        #[test]
        fn density_decreases_with_distance(theta in 0.05f64..1.5, dh in 1.0f64..1e4, extra in 1.0f64..1e3) {
            let cam = CameraModel::new(1.0, 0.001, 0.001, dh, 0.1).unwrap();
            let farther = CameraModel { h1: dh + extra, ..cam };
            let face = FaceRegion::new(0, 0, 1, 1).with_view(theta, 0.0);
            let a = density_from_camera(&cam, &face).unwrap();
            let b = density_from_camera(&farther, &face).unwrap();
            proptest::prop_assert!(b.rho_h < a.rho_h && b.rho_v < a.rho_v);
        }
    }
}
