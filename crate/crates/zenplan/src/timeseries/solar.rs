//! Transposition of horizontal irradiance onto a tilted panel plane.

use super::DataError;

/// Panel orientation plus the sun position series it will be evaluated
/// against. Angles in degrees; azimuths share one convention (0 = south,
/// west positive) for panel and sun alike.
#[derive(Debug, Clone)]
pub struct SolarGeometry {
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    pub albedo: f64,
    pub sun_elev: Vec<f64>,
    pub sun_azim: Vec<f64>,
}

impl SolarGeometry {
    pub fn new(
        tilt_deg: f64,
        azimuth_deg: f64,
        albedo: f64,
        sun_elev: Vec<f64>,
        sun_azim: Vec<f64>,
    ) -> Result<Self, DataError> {
        if !(0.0..=90.0).contains(&tilt_deg) {
            return Err(DataError::InvalidGeometry(format!(
                "tilt must be within [0, 90] degrees, got {tilt_deg}"
            )));
        }
        if !(0.0..=1.0).contains(&albedo) {
            return Err(DataError::InvalidGeometry(format!(
                "albedo must be within [0, 1], got {albedo}"
            )));
        }
        if sun_elev.len() != sun_azim.len() {
            return Err(DataError::InvalidGeometry(format!(
                "sun elevation ({}) and azimuth ({}) series differ in length",
                sun_elev.len(),
                sun_azim.len()
            )));
        }
        Ok(SolarGeometry { tilt_deg, azimuth_deg, albedo, sun_elev, sun_azim })
    }
}

/// Beam radiation is dropped whenever sin(elevation) <= sin(1 degree); this
/// covers sun below or near the horizon in one rule and keeps the 1/sin
/// factor bounded.
const MIN_SIN_ELEV: f64 = 0.017452406437283512; // sin(1 deg)

/// Plane-of-array irradiance from diffuse + ground-reflected + beam parts.
///
/// Per hour: `dhi*(1+cos p)/2 + albedo*(dni+dhi)*(1-cos p)/2 +
/// dni*(cos e * sin p * cos(pa - sa) + sin e * cos p)/sin e`, with panel
/// tilt `p`, sun elevation `e`, panel/sun azimuths `pa`/`sa`; the beam part
/// is omitted for low sun (see [`MIN_SIN_ELEV`]) and the total is clamped
/// at zero from below.
pub fn tilt_irradiance(
    dhi: &[f64],
    dni: &[f64],
    geo: &SolarGeometry,
) -> Result<Vec<f64>, DataError> {
    if dhi.len() != dni.len() || dhi.len() != geo.sun_elev.len() {
        return Err(DataError::LengthMismatch {
            series: "dhi/dni/sun position".to_string(),
            expected: dhi.len(),
            found: dni.len().min(geo.sun_elev.len()),
        });
    }
    let tilt = geo.tilt_deg.to_radians();
    let (sin_t, cos_t) = tilt.sin_cos();
    let diffuse_f = (1.0 + cos_t) / 2.0;
    let ground_f = geo.albedo * (1.0 - cos_t) / 2.0;
    let mut out = Vec::with_capacity(dhi.len());
    for t in 0..dhi.len() {
        let elev = geo.sun_elev[t].to_radians();
        let (sin_e, cos_e) = elev.sin_cos();
        let mut irr = dhi[t] * diffuse_f + (dni[t] + dhi[t]) * ground_f;
        if sin_e > MIN_SIN_ELEV {
            let az_diff = (geo.azimuth_deg - geo.sun_azim[t]).to_radians();
            irr += dni[t] * (cos_e * sin_t * az_diff.cos() + sin_e * cos_t) / sin_e;
        }
        out.push(irr.max(0.0));
    }
    Ok(out)
}

/// Rough sun position series for a full-year horizon at a given latitude.
///
/// Declination/hour-angle textbook model, no equation of time, no
/// refraction. Good enough to generate plausible synthetic inputs; real
/// studies should bring measured sun positions in the input file instead.
pub fn approx_sun_positions(latitude_deg: f64, hours: usize) -> (Vec<f64>, Vec<f64>) {
    let lat = latitude_deg.to_radians();
    let mut elev = Vec::with_capacity(hours);
    let mut azim = Vec::with_capacity(hours);
    for t in 0..hours {
        let day = (t / 24) as f64;
        let hod = (t % 24) as f64;
        let decl = (23.44f64).to_radians() * (std::f64::consts::TAU * (day + 284.0) / 365.0).sin();
        let omega = (15.0 * (hod - 12.0)).to_radians();
        let sin_e = lat.sin() * decl.sin() + lat.cos() * decl.cos() * omega.cos();
        let e = sin_e.asin();
        // azimuth measured from south, west positive
        let az = omega
            .sin()
            .atan2(omega.cos() * lat.sin() - decl.tan() * lat.cos());
        elev.push(e.to_degrees());
        azim.push(az.to_degrees());
    }
    (elev, azim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(tilt: f64, elev: Vec<f64>, azim: Vec<f64>) -> SolarGeometry {
        SolarGeometry::new(tilt, 0.0, 0.3, elev, azim).unwrap()
    }

    #[test]
    fn zero_tilt_gives_dhi_plus_dni_for_high_sun() {
        let g = geo(0.0, vec![45.0], vec![10.0]);
        let out = tilt_irradiance(&[100.0], &[500.0], &g).unwrap();
        assert!((out[0] - 600.0).abs() < 1e-9, "got {}", out[0]);
    }

    #[test]
    fn low_sun_drops_beam_regardless_of_azimuth() {
        // elevation 0.5 deg: no beam even though dni is large
        for az in [0.0, 120.0, -150.0] {
            let g = geo(30.0, vec![0.5], vec![az]);
            let out = tilt_irradiance(&[50.0], &[800.0], &g).unwrap();
            let tilt = (30.0f64).to_radians();
            let expected =
                50.0 * (1.0 + tilt.cos()) / 2.0 + 0.3 * 850.0 * (1.0 - tilt.cos()) / 2.0;
            assert!((out[0] - expected).abs() < 1e-9, "az={az}: got {}", out[0]);
        }
    }

    #[test]
    fn hand_evaluated_hour_matches() {
        // tilt 30, sun at 40 deg elevation, azimuth offset 20 deg, dhi 80, dni 600
        let g = geo(30.0, vec![40.0], vec![20.0]);
        let out = tilt_irradiance(&[80.0], &[600.0], &g).unwrap();
        let p = (30.0f64).to_radians();
        let e = (40.0f64).to_radians();
        let expected = 80.0 * (1.0 + p.cos()) / 2.0
            + 0.3 * 680.0 * (1.0 - p.cos()) / 2.0
            + 600.0 * (e.cos() * p.sin() * (-20.0f64).to_radians().cos() + e.sin() * p.cos())
                / e.sin();
        assert!((out[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn night_is_never_negative() {
        let g = geo(45.0, vec![-20.0, -5.0, 0.9], vec![-170.0, 170.0, -90.0]);
        let out = tilt_irradiance(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &g).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(SolarGeometry::new(91.0, 0.0, 0.3, vec![], vec![]).is_err());
        assert!(SolarGeometry::new(30.0, 0.0, 1.2, vec![], vec![]).is_err());
        assert!(SolarGeometry::new(30.0, 0.0, 0.3, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn sun_positions_have_midday_maximum() {
        let (elev, _) = approx_sun_positions(60.0, 48);
        assert!(elev[12] > elev[6]);
        assert!(elev[12] > elev[18]);
        assert!(elev[0] < 0.0);
    }
}
