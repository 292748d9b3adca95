//! Frequency-entangled photon pairs from spontaneous parametric down-conversion.
//!
//! The two-photon state is `∫ φ(ω) φ(ω₀−ω) e^{−iωΔt} |ω⟩_a |ω₀−ω⟩_b dω` for a
//! monochromatic pump at `ω₀` and identical filters `φ` on both arms. Angular
//! frequencies are in rad/ps and delays in ps; wavelengths (nm) are converted
//! once, at construction of a [`FilterShape`].
//!
//! `D(Δt)` is evaluated by the midpoint rule on a [`SpectralGrid`] that is
//! symmetric about the degenerate frequency `ω₀/2`, so that every bin has a
//! mirror bin carrying the partner photon.

mod hom;
pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::environment::EnvState;
use crate::error::{Error, Result};

pub use hom::{beam_splitter_coincidence, hom_scan, HomPoint, REFERENCE_TOL};

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT: f64 = 299_792.458;

/// Minimum ratio between the grid half-span and the filter support half-width.
pub const GRID_MARGIN: f64 = 1.5;

/// Gaussian filters are treated as supported on `±GAUSSIAN_SUPPORT_SIGMAS · σ`
/// of `|φ|²` when sizing grids.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Rectangular,
    Gaussian,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangular" => Ok(FilterKind::Rectangular),
            "gauss" | "gaussian" => Ok(FilterKind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown filter shape '{other}'"))),
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterKind::Rectangular => "rectangular",
            FilterKind::Gaussian => "gaussian",
        })
    }
}

/// Band-pass filter shared by both photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterShape {
    pub kind: FilterKind,
    pub center_wavelength_nm: f64,
    pub fwhm_nm: f64,
    center: f64,
    width: f64,
}

impl FilterShape {
    pub fn new(kind: FilterKind, center_wavelength_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let (center, width) = wavelength_to_angular(center_wavelength_nm, fwhm_nm)?;
        Ok(Self {
            kind,
            center_wavelength_nm,
            fwhm_nm,
            center,
            width,
        })
    }

    pub fn rectangular(center_wavelength_nm: f64, fwhm_nm: f64) -> Result<Self> {
        Self::new(FilterKind::Rectangular, center_wavelength_nm, fwhm_nm)
    }

    pub fn gaussian(center_wavelength_nm: f64, fwhm_nm: f64) -> Result<Self> {
        Self::new(FilterKind::Gaussian, center_wavelength_nm, fwhm_nm)
    }

    /// Central angular frequency `ω_c = ω₀/2` (rad/ps).
    pub fn center(&self) -> f64 {
        self.center
    }

    /// Width `v` (rad/ps): full width of the rectangle, or FWHM of `|φ|²`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Standard deviation of `|φ|²` for the Gaussian shape.
    pub fn sigma(&self) -> f64 {
        self.width / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    pub fn support_half_width(&self) -> f64 {
        match self.kind {
            FilterKind::Rectangular => 0.5 * self.width,
            FilterKind::Gaussian => GAUSSIAN_SUPPORT_SIGMAS * self.sigma(),
        }
    }
}

/// `(ω_c, v)` in rad/ps from a center wavelength and a wavelength FWHM in nm,
/// using the first-order dispersion `dω = 2πc dλ / λ²`.
pub fn wavelength_to_angular(center_wavelength_nm: f64, fwhm_nm: f64) -> Result<(f64, f64)> {
    if !(center_wavelength_nm > 0.0) || !center_wavelength_nm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "center wavelength must be positive, got {center_wavelength_nm}"
        )));
    }
    if !(fwhm_nm > 0.0) || !fwhm_nm.is_finite() {
        return Err(Error::InvalidParameter(format!("FWHM must be positive, got {fwhm_nm}")));
    }
    let two_pi_c = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT;
    let center = two_pi_c / center_wavelength_nm;
    let width = two_pi_c * fwhm_nm / (center_wavelength_nm * center_wavelength_nm);
    Ok((center, width))
}

/// Spectral amplitude `φ(ω)`, normalized so that `∫|φ|² dω = 1`.
///
/// Rectangular edges are inclusive at full height.
pub fn filter_amplitude(filter: &FilterShape, omega: f64) -> Complex64 {
    let x = omega - filter.center;
    let re = match filter.kind {
        FilterKind::Rectangular => {
            if x.abs() <= 0.5 * filter.width {
                1.0 / filter.width.sqrt()
            } else {
                0.0
            }
        }
        FilterKind::Gaussian => {
            let s = filter.sigma();
            let density = (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            density.sqrt()
        }
    };
    Complex64::new(re, 0.0)
}

/// Uniform grid of `n_bins` bins over `[omega_min, omega_max]`, sampled at bin centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub n_bins: usize,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl SpectralGrid {
    pub fn new(n_bins: usize, omega_min: f64, omega_max: f64) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 bins, got {n_bins}"
            )));
        }
        if !(omega_max > omega_min) {
            return Err(Error::InvalidParameter(format!(
                "empty grid range [{omega_min}, {omega_max}]"
            )));
        }
        Ok(Self {
            n_bins,
            omega_min,
            omega_max,
        })
    }

    /// Grid centered on the filter with margin of at least [`GRID_MARGIN`].
    ///
    /// For a rectangular filter the support edges fall exactly on bin
    /// boundaries: the support spans an integer number of bins and the number
    /// of bins outside it is even.
    pub fn covering(filter: &FilterShape, n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 bins, got {n_bins}"
            )));
        }
        let center = filter.center();
        let half = match filter.kind {
            FilterKind::Rectangular => {
                let mut inside = (n_bins as f64 / GRID_MARGIN).floor() as usize;
                if (n_bins - inside) % 2 == 1 {
                    inside -= 1;
                }
                if inside == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "{n_bins} bins cannot resolve the filter support"
                    )));
                }
                let bin = filter.width() / inside as f64;
                0.5 * bin * n_bins as f64
            }
            FilterKind::Gaussian => GRID_MARGIN * filter.support_half_width(),
        };
        Self::new(n_bins, center - half, center + half)
    }

    pub fn bin_width(&self) -> f64 {
        (self.omega_max - self.omega_min) / self.n_bins as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.omega_min + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(|i| self.bin_center(i))
    }

    /// Fails unless the grid extends at least `GRID_MARGIN` support half-widths
    /// on both sides of the filter center and is symmetric about it.
    pub fn check_covers(&self, filter: &FilterShape) -> Result<()> {
        let c = filter.center();
        let need = GRID_MARGIN * filter.support_half_width();
        let slack = 1e-9 * need;
        let lo = c - self.omega_min;
        let hi = self.omega_max - c;
        if lo + slack < need || hi + slack < need {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] does not cover the filter support ±{} around {} with margin {}",
                self.omega_min,
                self.omega_max,
                filter.support_half_width(),
                c,
                GRID_MARGIN
            )));
        }
        if (lo - hi).abs() > 1e-9 * (lo + hi) {
            return Err(Error::InvalidParameter(
                "grid must be symmetric about the degenerate frequency".into(),
            ));
        }
        Ok(())
    }
}

/// Discretized two-photon spectral state. `amplitudes[i]` belongs to photon `a`
/// at the `i`-th bin center, photon `b` sitting at the mirror bin `ω₀ − ω_i`.
#[derive(Debug, Clone)]
pub struct SpdcState {
    pub filter: FilterShape,
    pub pump_frequency: f64,
    pub delay: f64,
    pub grid: SpectralGrid,
    pub amplitudes: Vec<Complex64>,
}

impl SpdcState {
    /// `Σ |a_i|² Δω`
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.bin_width()
    }

    /// Number of bins carrying nonzero amplitude.
    pub fn rank(&self) -> usize {
        self.amplitudes.iter().filter(|a| a.norm_sqr() > 0.0).count()
    }

    fn joint_amplitude(&self, omega: f64) -> Complex64 {
        joint_amplitude(&self.filter, self.pump_frequency, self.delay, omega)
    }
}

fn joint_amplitude(filter: &FilterShape, pump: f64, delay: f64, omega: f64) -> Complex64 {
    filter_amplitude(filter, omega)
        * filter_amplitude(filter, pump - omega)
        * Complex64::from_polar(1.0, -omega * delay)
}

pub fn build_spdc(filter: &FilterShape, delay: f64, grid: &SpectralGrid) -> Result<SpdcState> {
    if !delay.is_finite() {
        return Err(Error::InvalidParameter(format!("delay must be finite, got {delay}")));
    }
    grid.check_covers(filter)?;
    let pump = 2.0 * filter.center();
    let mut amplitudes: Vec<Complex64> = grid
        .centers()
        .map(|w| joint_amplitude(filter, pump, delay, w))
        .collect();
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.bin_width();
    if !(norm > 0.0) {
        return Err(Error::Numerical("SPDC amplitude vanishes on the grid".into()));
    }
    let scale = norm.sqrt();
    for a in &mut amplitudes {
        *a /= scale;
    }
    Ok(SpdcState {
        filter: *filter,
        pump_frequency: pump,
        delay,
        grid: *grid,
        amplitudes,
    })
}

/// `D = ⟨ψ|F|ψ⟩ = ∫ a*(ω₀−ω) a(ω) dω / ∫ |a|² dω`, midpoint rule on the grid.
pub fn spdc_flip_expectation(state: &SpdcState) -> f64 {
    let a = &state.amplitudes;
    let n = a.len();
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut norm = 0.0;
    for i in 0..n {
        overlap += a[n - 1 - i].conj() * a[i];
        norm += a[i].norm_sqr();
    }
    overlap.re / norm
}

/// `sin(x)/x` at `x = vΔt`, equal to 1 at the origin.
pub fn sinc_closed_form(delay: f64, width: f64) -> f64 {
    let x = delay * width;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Discretizes the two-photon state into `d` spectral modes per photon.
///
/// Mode `k` is the frequency cell of a `d`-point Gauss rule adapted to the
/// filter (Legendre on the rectangle, Hermite for the Gaussian) and carries the
/// amplitude `√w_k · a(ω_k)` sampled at its node. Photon `b` occupies the
/// mirror cell `d−1−k`, so both photons share one orthonormal mode basis and
/// the flip expectation of the result is the `d`-point Gauss quadrature of the
/// overlap integral.
pub fn spdc_to_env(state: &SpdcState, d: usize) -> Result<EnvState> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "truncation dimension must be at least 2, got {d}"
        )));
    }
    let rank = state.rank();
    if d > rank {
        return Err(Error::InvalidParameter(format!(
            "truncation dimension {d} exceeds the grid rank {rank}"
        )));
    }
    let filter = &state.filter;
    let c = filter.center();
    let cells: Vec<(f64, f64)> = match filter.kind {
        FilterKind::Rectangular => {
            let rule = quadrature::gauss_legendre(d);
            let h = 0.5 * filter.width();
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| (c + h * s, h * w))
                .collect()
        }
        FilterKind::Gaussian => {
            // |a(ω)|² ∝ exp(−(ω−ω_c)²/σ²)
            let sigma = filter.sigma();
            let rule = quadrature::gauss_hermite(d);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| (c + sigma * s, sigma * w * (s * s).exp()))
                .collect()
        }
    };
    let mut psi = vec![Complex64::new(0.0, 0.0); d * d];
    for (k, &(omega, weight)) in cells.iter().enumerate() {
        psi[k * d + (d - 1 - k)] = weight.sqrt() * state.joint_amplitude(omega);
    }
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Numerical("truncated SPDC state vanishes".into()));
    }
    for a in &mut psi {
        *a /= norm;
    }
    EnvState::pure(d, d, &psi)
}

/// Filter plus the numerical and imperfection settings used to evaluate `D(Δt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub filter: FilterShape,
    pub grid: SpectralGrid,
    /// Mode-overlap factor `m ∈ [0, 1]` multiplying `D`; 1 for ideal optics.
    pub mode_overlap: f64,
}

impl SpectralModel {
    pub fn new(filter: FilterShape, n_bins: usize, mode_overlap: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mode_overlap) {
            return Err(Error::InvalidParameter(format!(
                "mode overlap must lie in [0, 1], got {mode_overlap}"
            )));
        }
        Ok(Self {
            filter,
            grid: SpectralGrid::covering(&filter, n_bins)?,
            mode_overlap,
        })
    }

    pub fn state(&self, delay: f64) -> Result<SpdcState> {
        build_spdc(&self.filter, delay, &self.grid)
    }

    /// `m · D(Δt)` by quadrature.
    pub fn flip_expectation(&self, delay: f64) -> Result<f64> {
        Ok(self.mode_overlap * spdc_flip_expectation(&self.state(delay)?))
    }
}
