//! Satellite-to-ground channel: effective photon transmission probability and
//! the classical heralding latency between the two ground stations.
//!
//! Three ways to obtain `p_T` are supported:
//!
//! * `Direct`: a fixed value injected from configuration.
//! * `Interpolated`: log-linear interpolation of `(ground separation, p_T)`
//!   anchors, so a distance sweep can be driven by a handful of known values.
//! * `Parametric`: a far-field Gaussian-beam budget. The satellite sits above
//!   the midpoint of the two stations; geometric collection is averaged over
//!   Gaussian pointing jitter and the atmosphere is scaled by air mass.

use crate::error::{invalid, Issues, Result};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mean Earth radius, m.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Direct,
    Interpolated,
    Parametric,
}

impl LinkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkMode::Direct => "direct",
            LinkMode::Interpolated => "interpolated",
            LinkMode::Parametric => "parametric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(LinkMode::Direct),
            "interpolated" => Some(LinkMode::Interpolated),
            "parametric" => Some(LinkMode::Parametric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub mode: LinkMode,
    /// Transmission probability used in direct mode.
    pub p_t_direct: f64,
    /// `(ground separation [m], p_T)` anchors for interpolated mode, sorted by separation.
    pub p_t_anchors: Vec<(f64, f64)>,
    /// m
    pub satellite_altitude: f64,
    /// Straight-line distance between the ground stations, m.
    pub ground_separation: f64,
    /// m
    pub transmitter_aperture: f64,
    /// m
    pub receiver_aperture: f64,
    /// m
    pub wavelength: f64,
    /// RMS pointing error per axis, rad.
    pub pointing_jitter: f64,
    pub atmospheric_transmittance_zenith: f64,
    /// Replaces the light-time heralding delay when set, s.
    pub heralding_time_override: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            mode: LinkMode::Direct,
            p_t_direct: 8e-3,
            p_t_anchors: vec![(200e3, 8e-3), (1200e3, 2e-3)],
            satellite_altitude: 500e3,
            ground_separation: 200e3,
            transmitter_aperture: 0.18,
            receiver_aperture: 1.2,
            wavelength: 810e-9,
            pointing_jitter: 2e-6,
            atmospheric_transmittance_zenith: 0.8,
            heralding_time_override: None,
        }
    }
}

impl LinkConfig {
    /// Same link with the stations `separation` metres apart.
    pub fn with_separation(&self, separation: f64) -> Self {
        Self {
            ground_separation: separation,
            ..self.clone()
        }
    }

    pub(crate) fn collect_issues(&self, issues: &mut Issues, section: &str) {
        let p = |k: &str| format!("{section}.{k}");
        issues.positive(&p("ground_separation"), self.ground_separation);
        if let Some(t) = self.heralding_time_override {
            if !(t >= 0.0 && t.is_finite()) {
                issues.push(p("heralding_time_override"), format!("must be >= 0, got {t}"));
            }
        }
        match self.mode {
            LinkMode::Direct => issues.probability(&p("p_t_direct"), self.p_t_direct),
            LinkMode::Interpolated => {
                if self.p_t_anchors.is_empty() {
                    issues.push(p("p_t_anchors"), "interpolated mode needs at least one anchor");
                }
                for (i, &(d, pt)) in self.p_t_anchors.iter().enumerate() {
                    if !(d > 0.0 && d.is_finite()) {
                        issues.push(format!("{}[{i}]", p("p_t_anchors")), format!("separation must be > 0, got {d}"));
                    }
                    if !(pt > 0.0 && pt <= 1.0) {
                        issues.push(format!("{}[{i}]", p("p_t_anchors")), format!("p_T must be in (0, 1], got {pt}"));
                    }
                }
                if self.p_t_anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
                    issues.push(p("p_t_anchors"), "anchors must be strictly increasing in separation");
                }
            }
            LinkMode::Parametric => {
                issues.positive(&p("satellite_altitude"), self.satellite_altitude);
                issues.positive(&p("transmitter_aperture"), self.transmitter_aperture);
                issues.positive(&p("receiver_aperture"), self.receiver_aperture);
                issues.positive(&p("wavelength"), self.wavelength);
                if !(self.pointing_jitter >= 0.0 && self.pointing_jitter.is_finite()) {
                    issues.push(p("pointing_jitter"), format!("must be >= 0, got {}", self.pointing_jitter));
                }
                issues.probability(&p("atmospheric_transmittance_zenith"), self.atmospheric_transmittance_zenith);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.collect_issues(&mut issues, "link");
        issues.into_result().map_err(Into::into)
    }

    /// Central half-angle subtended by the station chord.
    fn half_angle(&self) -> Result<f64> {
        let s = self.ground_separation / (2.0 * EARTH_RADIUS);
        if s > 1.0 {
            return Err(invalid("ground_separation", "exceeds the Earth's diameter"));
        }
        Ok(s.asin())
    }

    /// Distance from a station to a satellite hovering over the midpoint, m.
    pub fn slant_range(&self) -> Result<f64> {
        let phi = self.half_angle()?;
        let r = EARTH_RADIUS;
        let rs = EARTH_RADIUS + self.satellite_altitude;
        Ok((r * r + rs * rs - 2.0 * r * rs * phi.cos()).sqrt())
    }

    /// Elevation of the satellite seen from either station, rad. Negative
    /// values mean the satellite is below the horizon.
    pub fn elevation(&self) -> Result<f64> {
        let phi = self.half_angle()?;
        let rs = EARTH_RADIUS + self.satellite_altitude;
        let range = self.slant_range()?;
        Ok(((rs * phi.cos() - EARTH_RADIUS) / range).asin())
    }

    /// Effective single-photon transmission probability over `slant_range` metres.
    pub fn transmission_probability(&self, slant_range: f64) -> Result<f64> {
        if !(slant_range > 0.0 && slant_range.is_finite()) {
            return Err(invalid("slant_range", format!("must be > 0, got {slant_range}")));
        }
        match self.mode {
            LinkMode::Direct => Ok(self.p_t_direct),
            LinkMode::Interpolated => interpolate_log(&self.p_t_anchors, self.ground_separation),
            LinkMode::Parametric => self.budget(slant_range),
        }
    }

    /// `p_T` for this configuration's own geometry.
    pub fn effective_transmission(&self) -> Result<f64> {
        match self.mode {
            // The geometry is irrelevant here, so skip the horizon check.
            LinkMode::Direct | LinkMode::Interpolated => self.transmission_probability(self.ground_separation),
            LinkMode::Parametric => self.transmission_probability(self.slant_range()?),
        }
    }

    fn budget(&self, range: f64) -> Result<f64> {
        let elevation = self.elevation()?;
        if elevation <= 0.0 {
            return Ok(0.0);
        }
        let waist = self.transmitter_aperture / 2.0;
        let divergence = self.wavelength / (std::f64::consts::PI * waist);
        let beam_sq = waist * waist + (divergence * range).powi(2);
        let wander = self.pointing_jitter * range;
        let w_eff_sq = beam_sq + 4.0 * wander * wander;
        let a = self.receiver_aperture / 2.0;
        let collected = -(-2.0 * a * a / w_eff_sq).exp_m1();
        let atmosphere = self.atmospheric_transmittance_zenith.powf(1.0 / elevation.sin());
        Ok((collected * atmosphere).clamp(0.0, 1.0))
    }

    /// One-way classical signalling delay between the stations, s.
    pub fn heralding_time(&self) -> Result<f64> {
        if let Some(t) = self.heralding_time_override {
            return Ok(t);
        }
        if !(self.ground_separation > 0.0 && self.ground_separation.is_finite()) {
            return Err(invalid(
                "ground_separation",
                format!("must be > 0, got {}", self.ground_separation),
            ));
        }
        Ok(self.ground_separation / SPEED_OF_LIGHT)
    }
}

/// Log-linear interpolation through `anchors`, extrapolating along the end segments.
fn interpolate_log(anchors: &[(f64, f64)], x: f64) -> Result<f64> {
    match anchors {
        [] => Err(invalid("p_t_anchors", "no anchors")),
        [(_, p)] => Ok(*p),
        _ => {
            let i = anchors
                .windows(2)
                .position(|w| x <= w[1].0)
                .unwrap_or(anchors.len() - 2);
            let (x0, p0) = anchors[i];
            let (x1, p1) = anchors[i + 1];
            let f = (x - x0) / (x1 - x0);
            let ln = p0.ln() + f * (p1.ln() - p0.ln());
            Ok(ln.exp().clamp(0.0, 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parametric() -> LinkConfig {
        LinkConfig {
            mode: LinkMode::Parametric,
            ground_separation: 600e3,
            ..LinkConfig::default()
        }
    }

    #[test]
    fn direct_mode_returns_injected_value() {
        for p in [8e-3, 2e-3] {
            let cfg = LinkConfig {
                p_t_direct: p,
                ..LinkConfig::default()
            };
            assert_eq!(cfg.transmission_probability(1.0e6).unwrap(), p);
            assert_eq!(cfg.effective_transmission().unwrap(), p);
        }
    }

    #[test]
    fn non_positive_range_is_rejected() {
        let cfg = LinkConfig::default();
        assert!(cfg.transmission_probability(0.0).is_err());
        assert!(cfg.transmission_probability(-5.0).is_err());
    }

    #[test]
    fn vanishing_receiver_gives_no_transmission() {
        let mut cfg = parametric();
        let range = cfg.slant_range().unwrap();
        cfg.receiver_aperture = 1e-9;
        assert!(cfg.transmission_probability(range).unwrap() < 1e-15);
    }

    #[test]
    fn parametric_decreases_with_range() {
        let cfg = parametric();
        let mut last = 1.0;
        for k in 1..40 {
            let p = cfg.transmission_probability(k as f64 * 100e3).unwrap();
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn parametric_is_in_the_expected_regime() {
        let p = parametric().effective_transmission().unwrap();
        assert!(p > 1e-4 && p < 0.1, "{p}");
    }

    #[test]
    fn interpolation_hits_anchors_and_is_geometric_between() {
        let cfg = LinkConfig {
            mode: LinkMode::Interpolated,
            ..LinkConfig::default()
        };
        let at = |d: f64| cfg.with_separation(d).effective_transmission().unwrap();
        assert!((at(200e3) - 8e-3).abs() < 1e-15);
        assert!((at(1200e3) - 2e-3).abs() < 1e-15);
        assert!((at(700e3) - 4e-3).abs() < 1e-15);
        assert!(at(1250e3) < 2e-3);
    }

    #[test]
    fn heralding_time_is_light_time() {
        let cfg = LinkConfig::default().with_separation(SPEED_OF_LIGHT);
        assert_eq!(cfg.heralding_time().unwrap(), 1.0);
        let t = LinkConfig::default().with_separation(1200e3).heralding_time().unwrap();
        assert!((t - 4.002769142377824e-3).abs() < 1e-17);
        assert!(LinkConfig::default().with_separation(0.0).heralding_time().is_err());
    }

    #[test]
    fn heralding_time_scales_linearly() {
        let base = LinkConfig::default();
        let t1 = base.with_separation(300e3).heralding_time().unwrap();
        let t3 = base.with_separation(900e3).heralding_time().unwrap();
        assert!((t3 - 3.0 * t1).abs() < 1e-18);
    }

    #[test]
    fn override_replaces_light_time() {
        let cfg = LinkConfig {
            heralding_time_override: Some(0.01),
            ..LinkConfig::default()
        };
        assert_eq!(cfg.heralding_time().unwrap(), 0.01);
    }
}
