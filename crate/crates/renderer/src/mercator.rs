//! The Mercator chart from receiver-relative directions to the perception
//! plane.
//!
//! A direction's azimuth maps linearly to u; its latitude maps through
//! v = alpha * atanh(sin(phi)), with alpha normalized so the configured
//! latitude range always fills v in [-60, 60] degrees. The default range
//! is the one where alpha equals 180/pi, which makes the chart conformal
//! (locally shape-preserving) — wider ranges trade conformality for sky
//! coverage and are used when supervising full-hemisphere spectra.

use crate::RenderError;
use std::f64::consts::PI;

/// Degrees per radian; also the u-stretch of the chart.
const DEG_PER_RAD: f64 = 180.0 / PI;

/// Half-height of the perception plane in v-degrees.
pub const V_HALF_SPAN: f64 = 60.0;

/// Latitude range and derived v-scaling of the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MercatorConfig {
    latitude_max_deg: f64,
    /// sin(latitude_max), cached for the in-view test.
    sin_lat_max: f64,
    /// v = alpha * atanh(sin phi).
    alpha: f64,
}

impl MercatorConfig {
    /// Chart over |phi| <= latitude_max (degrees, in (0, 90) exclusive).
    pub fn with_latitude_max(latitude_max_deg: f64) -> Result<Self, RenderError> {
        if !(latitude_max_deg > 0.0 && latitude_max_deg < 90.0) {
            return Err(RenderError::InvalidLatitudeRange(latitude_max_deg));
        }
        let sin_lat_max = latitude_max_deg.to_radians().sin();
        let alpha = V_HALF_SPAN / sin_lat_max.atanh();
        Ok(Self { latitude_max_deg, sin_lat_max, alpha })
    }

    /// The latitude range over which the chart is conformal: alpha comes
    /// out to exactly 180/pi, so u and v stretch local angles equally.
    pub fn conformal() -> Self {
        let latitude_max_deg = (PI / 3.0).tanh().asin().to_degrees();
        Self::with_latitude_max(latitude_max_deg).expect("conformal latitude is in range")
    }

    pub fn latitude_max_deg(&self) -> f64 {
        self.latitude_max_deg
    }

    /// v-degrees per unit of atanh(sin phi).
    pub fn alpha_scale(&self) -> f64 {
        self.alpha
    }

    /// Chart image of a latitude in degrees.
    pub fn v_of_latitude(&self, latitude_deg: f64) -> f64 {
        self.alpha * latitude_deg.to_radians().sin().atanh()
    }

    /// Inverse of [`Self::v_of_latitude`].
    pub fn latitude_of_v(&self, v: f64) -> f64 {
        (v / self.alpha).tanh().asin().to_degrees()
    }

    /// Projects a receiver-relative direction. `Ok(None)` marks a
    /// direction outside the latitude range (culled), `Err` a zero vector.
    pub fn project(&self, direction: [f64; 3]) -> Result<Option<(f64, f64)>, RenderError> {
        let [x, y, z] = direction;
        let r = (x * x + y * y + z * z).sqrt();
        if r == 0.0 || !r.is_finite() {
            return Err(RenderError::ZeroDirection);
        }
        let sin_phi = z / r;
        if sin_phi.abs() > self.sin_lat_max {
            return Ok(None);
        }
        let mut u = y.atan2(x) * DEG_PER_RAD;
        if u >= 180.0 {
            u -= 360.0;
        }
        let v = self.alpha * sin_phi.atanh();
        Ok(Some((u, v)))
    }

    /// Analytic 2x3 Jacobian d(u, v)/d(direction). The map ignores radial
    /// motion, so the Jacobian annihilates the direction itself.
    pub fn jacobian(&self, direction: [f64; 3]) -> [[f64; 3]; 2] {
        let [x, y, z] = direction;
        let rho_sq = x * x + y * y;
        let r = (rho_sq + z * z).sqrt();
        let du = [
            -DEG_PER_RAD * y / rho_sq,
            DEG_PER_RAD * x / rho_sq,
            0.0,
        ];
        let w = 1.0 / (rho_sq * r);
        let dv = [-self.alpha * z * x * w, -self.alpha * z * y * w, self.alpha / r];
        [du, dv]
    }

    /// Analytic Hessians (d^2 u, d^2 v) by direction component — the
    /// derivative of [`Self::jacobian`], needed when chaining gradients
    /// through the projected covariance.
    pub fn hessians(&self, direction: [f64; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
        let [x, y, z] = direction;
        let rho_sq = x * x + y * y;
        let r_sq = rho_sq + z * z;
        let r = r_sq.sqrt();
        let rho4 = rho_sq * rho_sq;

        let hu_xy = DEG_PER_RAD * (y * y - x * x) / rho4;
        let hu = [
            [2.0 * DEG_PER_RAD * x * y / rho4, hu_xy, 0.0],
            [hu_xy, -2.0 * DEG_PER_RAD * x * y / rho4, 0.0],
            [0.0, 0.0, 0.0],
        ];

        let a = self.alpha;
        let w = 1.0 / (rho_sq * r);
        let r3 = r_sq * r;
        // d w / d x = -x (2 r^2 + rho^2) / (rho^4 r^3), similarly for y.
        let lever = (2.0 * r_sq + rho_sq) / (rho4 * r3);
        let hv_xx = a * z * (-w + x * x * lever);
        let hv_yy = a * z * (-w + y * y * lever);
        let hv_xy = a * z * x * y * lever;
        let hv_xz = -a * x / r3;
        let hv_yz = -a * y / r3;
        let hv_zz = -a * z / r3;
        let hv = [
            [hv_xx, hv_xy, hv_xz],
            [hv_xy, hv_yy, hv_yz],
            [hv_xz, hv_yz, hv_zz],
        ];
        (hu, hv)
    }
}

impl Default for MercatorConfig {
    fn default() -> Self {
        Self::conformal()
    }
}
