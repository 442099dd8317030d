//! The receiver perception plane: the pixel grid splats composite onto.
//!
//! Pixels live at explicit (u, v) coordinates, both axes strictly
//! increasing, so one type covers both the uniform chart and the
//! spectrum-supervision grid whose rows sit at Mercator images of integer
//! elevations. Pixel storage is row-major with v as the row axis.

use crate::{MercatorConfig, RenderError};
use signal_model::{AngularSpectrum, AZIMUTH_BINS, ELEVATION_BINS};

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionPlane {
    u_coords: Vec<f64>,
    v_coords: Vec<f64>,
}

impl PerceptionPlane {
    /// Uniform pixel centers covering u in [-180, 180) and v in [-60, 60].
    pub fn uniform(width: usize, height: usize) -> Result<Self, RenderError> {
        if width == 0 || height == 0 {
            return Err(RenderError::EmptyPlane);
        }
        let du = 360.0 / width as f64;
        let dv = 120.0 / height as f64;
        Ok(Self {
            u_coords: (0..width).map(|i| -180.0 + (i as f64 + 0.5) * du).collect(),
            v_coords: (0..height).map(|j| -60.0 + (j as f64 + 0.5) * dv).collect(),
        })
    }

    /// Grid matching a 360x90 angular spectrum: one column per integer
    /// azimuth (reordered into u in [-180, 180)), one row per integer
    /// elevation mapped through the chart. The chart must cover elevation
    /// 89.
    pub fn spectrum_grid(mercator: &MercatorConfig) -> Result<Self, RenderError> {
        if mercator.latitude_max_deg() < (ELEVATION_BINS - 1) as f64 {
            return Err(RenderError::LatitudeRangeTooNarrow {
                needed: (ELEVATION_BINS - 1) as f64,
                actual: mercator.latitude_max_deg(),
            });
        }
        Ok(Self {
            u_coords: (0..AZIMUTH_BINS).map(|c| c as f64 - 180.0).collect(),
            v_coords: (0..ELEVATION_BINS)
                .map(|el| mercator.v_of_latitude(el as f64))
                .collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.u_coords.len()
    }

    pub fn height(&self) -> usize {
        self.v_coords.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn u_coords(&self) -> &[f64] {
        &self.u_coords
    }

    pub fn v_coords(&self) -> &[f64] {
        &self.v_coords
    }

    /// Flat index of pixel (column, row).
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width() + col
    }

    /// Spectrum cell (azimuth, elevation) feeding the pixel at (col, row)
    /// of a spectrum grid: columns are azimuth rotated by half a turn.
    pub fn spectrum_cell_of_pixel(col: usize, row: usize) -> (usize, usize) {
        ((col + 180) % AZIMUTH_BINS, row)
    }

    /// Reorders a spectrum into this plane's pixel layout. Only valid for
    /// planes built by [`Self::spectrum_grid`].
    pub fn spectrum_to_pixels(&self, spectrum: &AngularSpectrum) -> Vec<f64> {
        debug_assert_eq!(self.width(), AZIMUTH_BINS);
        debug_assert_eq!(self.height(), ELEVATION_BINS);
        let mut pixels = vec![0.0; self.pixel_count()];
        for row in 0..self.height() {
            for col in 0..self.width() {
                let (az, el) = Self::spectrum_cell_of_pixel(col, row);
                pixels[self.index(col, row)] = spectrum.get(az, el);
            }
        }
        pixels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use signal_model::GRID_CELLS;

    #[test]
    fn uniform_plane_centers_cover_the_chart() {
        let plane = PerceptionPlane::uniform(360, 120).unwrap();
        assert_eq!(plane.width(), 360);
        assert_eq!(plane.height(), 120);
        assert_abs_diff_eq!(plane.u_coords()[0], -179.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plane.u_coords()[359], 179.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plane.v_coords()[0], -59.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plane.v_coords()[119], 59.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_planes_are_rejected() {
        assert!(PerceptionPlane::uniform(0, 4).is_err());
        assert!(PerceptionPlane::uniform(4, 0).is_err());
    }

    #[test]
    fn spectrum_grid_requires_a_wide_chart() {
        assert!(PerceptionPlane::spectrum_grid(&MercatorConfig::conformal()).is_err());
        let wide = MercatorConfig::with_latitude_max(89.0).unwrap();
        let plane = PerceptionPlane::spectrum_grid(&wide).unwrap();
        assert_eq!(plane.width(), 360);
        assert_eq!(plane.height(), 90);
        // Row v-positions are the Mercator images of integer elevations.
        assert_eq!(plane.v_coords()[0], 0.0);
        assert_abs_diff_eq!(plane.v_coords()[89], 60.0, epsilon = 1e-9);
        // Columns ascend strictly in u.
        for w in plane.u_coords().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn spectrum_reordering_rotates_azimuth() {
        let wide = MercatorConfig::with_latitude_max(89.0).unwrap();
        let plane = PerceptionPlane::spectrum_grid(&wide).unwrap();
        let mut values = vec![0.0; GRID_CELLS];
        values[3 * 360 + 17] = 5.0; // az 17, el 3
        let spectrum = AngularSpectrum::from_values(values).unwrap();
        let pixels = plane.spectrum_to_pixels(&spectrum);
        // az 17 sits at u = 17, i.e. column 197.
        assert_eq!(PerceptionPlane::spectrum_cell_of_pixel(197, 3), (17, 3));
        assert_eq!(pixels[plane.index(197, 3)], 5.0);
        assert_eq!(pixels.iter().filter(|&&v| v != 0.0).count(), 1);
    }
}
