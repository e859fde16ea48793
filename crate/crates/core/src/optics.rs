//! Physical parameters of the two-crystal setup and the closed-form optics
//! derived from them: magnification, edge-spread widths, the far-field
//! momentum-to-position mapping and the Gaussian pump-transfer kernel.
//!
//! All lengths are SI metres and all wave vectors rad/m. Wavelengths are
//! vacuum wavelengths.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SetupError {
    #[error("{name} must be finite and strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Non-fatal findings raised while validating a setup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SetupWarning {
    /// The pump waist is larger than the smaller crystal half-extent.
    PumpExceedsCrystal { w_p: f64, half_extent: f64 },
}

impl fmt::Display for SetupWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetupWarning::PumpExceedsCrystal { w_p, half_extent } => write!(
                f,
                "pump waist {:.1} um exceeds crystal half-extent {:.1} um",
                w_p * 1e6,
                half_extent * 1e6
            ),
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, SetupError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SetupError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetupConfig {
    lambda_d: f64,
    lambda_u: f64,
    f_c: f64,
    f_u: f64,
    w_p: f64,
    crystal_half_extent: Option<(f64, f64)>,
}

impl SetupConfig {
    /// `lambda_d`/`lambda_u`: detected/undetected wavelengths, `f_c`: camera
    /// lens focal length, `f_u`: undetected-arm lens focal length, `w_p`: pump
    /// waist at the crystals.
    pub fn new(lambda_d: f64, lambda_u: f64, f_c: f64, f_u: f64, w_p: f64) -> Result<Self, SetupError> {
        Ok(Self {
            lambda_d: positive("lambda_d", lambda_d)?,
            lambda_u: positive("lambda_u", lambda_u)?,
            f_c: positive("f_c", f_c)?,
            f_u: positive("f_u", f_u)?,
            w_p: positive("w_p", w_p)?,
            crystal_half_extent: None,
        })
    }

    /// 810 nm detected, 1550 nm undetected, f_c = 150 mm, f_u = 75 mm.
    pub fn setup1(w_p: f64) -> Result<Self, SetupError> {
        Self::new(810e-9, 1550e-9, 150e-3, 75e-3, w_p)
    }

    /// 842 nm detected, 780 nm undetected, f_c = 150 mm, f_u = 75 mm.
    pub fn setup2(w_p: f64) -> Result<Self, SetupError> {
        Self::new(842e-9, 780e-9, 150e-3, 75e-3, w_p)
    }

    /// Attach the transverse crystal half-size. A pump waist larger than the
    /// smaller half-extent is reported through [`SetupConfig::warnings`].
    pub fn with_crystal_half_extent(mut self, hx: f64, hy: f64) -> Result<Self, SetupError> {
        self.crystal_half_extent = Some((positive("crystal_half_extent_x", hx)?, positive("crystal_half_extent_y", hy)?));
        for w in self.warnings() {
            log::warn!("{w}");
        }
        Ok(self)
    }

    pub fn with_pump_waist(self, w_p: f64) -> Result<Self, SetupError> {
        let next = Self {
            w_p: positive("w_p", w_p)?,
            ..self
        };
        for w in next.warnings() {
            log::warn!("{w}");
        }
        Ok(next)
    }

    pub fn with_wavelengths(self, lambda_d: f64, lambda_u: f64) -> Result<Self, SetupError> {
        Ok(Self {
            lambda_d: positive("lambda_d", lambda_d)?,
            lambda_u: positive("lambda_u", lambda_u)?,
            ..self
        })
    }

    pub fn warnings(&self) -> Vec<SetupWarning> {
        match self.crystal_half_extent {
            Some((hx, hy)) if self.w_p > hx.min(hy) => {
                vec![SetupWarning::PumpExceedsCrystal {
                    w_p: self.w_p,
                    half_extent: hx.min(hy),
                }]
            }
            _ => Vec::new(),
        }
    }

    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }
    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }
    pub fn f_c(&self) -> f64 {
        self.f_c
    }
    pub fn f_u(&self) -> f64 {
        self.f_u
    }
    pub fn w_p(&self) -> f64 {
        self.w_p
    }
    pub fn crystal_half_extent(&self) -> Option<(f64, f64)> {
        self.crystal_half_extent
    }
}

/// Transverse wave vector (rad/m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MomentumVector {
    pub qx: f64,
    pub qy: f64,
}

impl MomentumVector {
    pub const ZERO: Self = Self { qx: 0.0, qy: 0.0 };

    pub fn new(qx: f64, qy: f64) -> Self {
        debug_assert!(qx.is_finite() && qy.is_finite());
        Self { qx, qy }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }
}

impl Add for MomentumVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.qx + o.qx, self.qy + o.qy)
    }
}

impl Sub for MomentumVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.qx - o.qx, self.qy - o.qy)
    }
}

impl Neg for MomentumVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.qx, -self.qy)
    }
}

impl Mul<MomentumVector> for f64 {
    type Output = MomentumVector;
    fn mul(self, q: MomentumVector) -> MomentumVector {
        MomentumVector::new(self * q.qx, self * q.qy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Plane {
    Object,
    Camera,
}

/// A transverse position tagged with the plane it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
    pub plane: Plane,
}

/// Scale `f * lambda / (2 pi)` linking wave vector to far-field position.
fn far_field_scale(plane: Plane, setup: &SetupConfig) -> f64 {
    match plane {
        Plane::Camera => setup.f_c * setup.lambda_d / (2.0 * PI),
        Plane::Object => setup.f_u * setup.lambda_u / (2.0 * PI),
    }
}

/// Image-to-object scale factor `f_c lambda_d / (f_u lambda_u)`.
pub fn magnification(setup: &SetupConfig) -> f64 {
    setup.f_c * setup.lambda_d / (setup.f_u * setup.lambda_u)
}

/// Camera-plane edge-spread width `f_c lambda_d / (sqrt(2) pi w_p)`.
///
/// A knife edge images to `(1 - erf(x / sigma)) / 2`, which rises from 24% to
/// 76% over a distance of `sigma`.
pub fn sigma_camera(setup: &SetupConfig) -> f64 {
    setup.f_c * setup.lambda_d / (SQRT_2 * PI * setup.w_p)
}

/// Object-plane resolution `f_u lambda_u / (sqrt(2) pi w_p)`, i.e. the camera
/// width divided by the magnification.
pub fn sigma_object(setup: &SetupConfig) -> f64 {
    setup.f_u * setup.lambda_u / (SQRT_2 * PI * setup.w_p)
}

/// 1/e half-width of the object-plane kernel `exp(-dx^2 / sigma_o^2)`.
pub fn object_kernel_width(setup: &SetupConfig) -> f64 {
    sigma_object(setup)
}

/// Far-field lens mapping `r = f lambda q / (2 pi)`, using `(f_c, lambda_d)` on
/// the camera and `(f_u, lambda_u)` on the object.
pub fn position_from_momentum(q: MomentumVector, plane: Plane, setup: &SetupConfig) -> PlanePoint {
    let s = far_field_scale(plane, setup);
    PlanePoint {
        x: s * q.qx,
        y: s * q.qy,
        plane,
    }
}

/// Inverse of [`position_from_momentum`].
pub fn momentum_from_position(p: PlanePoint, setup: &SetupConfig) -> MomentumVector {
    let s = far_field_scale(p.plane, setup);
    MomentumVector::new(p.x / s, p.y / s)
}

/// Unnormalized conditional density of `q_u` given `q_d`:
/// `exp(-|q_d + q_u|^2 w_p^2 / 2)`, equal to 1 at perfect anti-correlation.
pub fn conditional_momentum_pdf(q_d: MomentumVector, q_u: MomentumVector, setup: &SetupConfig) -> f64 {
    let qp = q_d + q_u;
    (-0.5 * qp.norm_sqr() * setup.w_p * setup.w_p).exp()
}

/// The conditional density evaluated on a discrete `q_u` set and normalized to
/// unit sum.
pub fn normalized_kernel(q_d: MomentumVector, q_us: &[MomentumVector], setup: &SetupConfig) -> Vec<f64> {
    let mut w: Vec<f64> = q_us.iter().map(|&q| conditional_momentum_pdf(q_d, q, setup)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    }
    w
}
