//! Hourly input data: load/weather/price series for a neighborhood, CSV I/O,
//! tilted-irradiance transposition, and a deterministic synthetic generator.

mod csvio;
mod solar;
mod synth;

pub use csvio::{load_bundle, write_bundle, CsvSchema};
pub use solar::{approx_sun_positions, tilt_irradiance, SolarGeometry};
pub use synth::synth_bundle;

use std::fmt;

/// Hourly demand series of one building, all of horizon length.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingLoads {
    pub id: String,
    /// Electric load, kW.
    pub el: Vec<f64>,
    /// Domestic hot water heat demand, kW.
    pub dhw: Vec<f64>,
    /// Space heating demand, kW.
    pub sh: Vec<f64>,
}

/// One year (or shorter test horizon) of hourly neighborhood data.
///
/// `irr_tilt` is `None` until transposition has run or the column was read
/// from file; everything else is always present and of length
/// `horizon_hours`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesBundle {
    pub horizon_hours: usize,
    pub buildings: Vec<BuildingLoads>,
    /// Outdoor temperature, degrees C.
    pub temperature: Vec<f64>,
    /// Diffuse horizontal irradiance, W/m2.
    pub dhi: Vec<f64>,
    /// Direct normal irradiance, W/m2.
    pub dni: Vec<f64>,
    /// Irradiance on the tilted panel plane, W/m2.
    pub irr_tilt: Option<Vec<f64>>,
    /// Spot price, EUR/kWh.
    pub spot_price: Vec<f64>,
    /// Grid electricity emission factor, g CO2eq/kWh.
    pub co2_el: Vec<f64>,
    /// Sun elevation angle, degrees above horizon.
    pub sun_elev: Vec<f64>,
    /// Sun azimuth angle, degrees (0 = panel reference direction, south).
    pub sun_azim: Vec<f64>,
}

impl TimeSeriesBundle {
    pub fn n_days(&self) -> usize {
        self.horizon_hours / 24
    }

    /// Sum of all building loads (el + dhw + sh) at hour `t`.
    pub fn total_load(&self, t: usize) -> f64 {
        self.buildings
            .iter()
            .map(|b| b.el[t] + b.dhw[t] + b.sh[t])
            .sum()
    }

    /// Checks lengths, horizon shape and sign constraints.
    pub fn validate(&self) -> Result<(), DataError> {
        let h = self.horizon_hours;
        if h == 0 || h % 24 != 0 {
            return Err(DataError::BadHorizon { hours: h });
        }
        let check = |name: &str, s: &[f64]| -> Result<(), DataError> {
            if s.len() != h {
                return Err(DataError::LengthMismatch {
                    series: name.to_string(),
                    expected: h,
                    found: s.len(),
                });
            }
            for (t, &v) in s.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::BadCell {
                        row: t,
                        column: name.to_string(),
                        detail: format!("non-finite value {v}"),
                    });
                }
            }
            Ok(())
        };
        check("temperature", &self.temperature)?;
        check("dhi", &self.dhi)?;
        check("dni", &self.dni)?;
        check("spot_price", &self.spot_price)?;
        check("co2_el", &self.co2_el)?;
        check("sun_elev", &self.sun_elev)?;
        check("sun_azim", &self.sun_azim)?;
        if let Some(ir) = &self.irr_tilt {
            check("irr_tilt", ir)?;
        }
        for b in &self.buildings {
            check(&format!("el_{}", b.id), &b.el)?;
            check(&format!("dhw_{}", b.id), &b.dhw)?;
            check(&format!("sh_{}", b.id), &b.sh)?;
        }
        // non-negativity where physics demands it
        let nonneg = |name: &str, s: &[f64]| -> Result<(), DataError> {
            for (t, &v) in s.iter().enumerate() {
                if v < 0.0 {
                    return Err(DataError::NegativeValue {
                        row: t,
                        column: name.to_string(),
                        value: v,
                    });
                }
            }
            Ok(())
        };
        nonneg("dhi", &self.dhi)?;
        nonneg("dni", &self.dni)?;
        if let Some(ir) = &self.irr_tilt {
            nonneg("irr_tilt", ir)?;
        }
        for b in &self.buildings {
            nonneg(&format!("el_{}", b.id), &b.el)?;
            nonneg(&format!("dhw_{}", b.id), &b.dhw)?;
            nonneg(&format!("sh_{}", b.id), &b.sh)?;
        }
        Ok(())
    }

    /// Computes `irr_tilt` from DHI/DNI and the bundle's own sun position
    /// series for a panel with the given orientation.
    pub fn apply_transposition(
        &mut self,
        tilt_deg: f64,
        azimuth_deg: f64,
        albedo: f64,
    ) -> Result<(), DataError> {
        let geo = SolarGeometry::new(
            tilt_deg,
            azimuth_deg,
            albedo,
            self.sun_elev.clone(),
            self.sun_azim.clone(),
        )?;
        self.irr_tilt = Some(tilt_irradiance(&self.dhi, &self.dni, &geo)?);
        Ok(())
    }
}

#[derive(Debug)]
pub enum DataError {
    Io(std::io::Error),
    Csv(csv::Error),
    MissingColumn { name: String },
    BadCell { row: usize, column: String, detail: String },
    NegativeValue { row: usize, column: String, value: f64 },
    HourSequence { row: usize, found: String },
    BadHorizon { hours: usize },
    LengthMismatch { series: String, expected: usize, found: usize },
    InvalidGeometry(String),
    BadArg(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(e) => write!(f, "io error: {e}"),
            DataError::Csv(e) => write!(f, "csv error: {e}"),
            DataError::MissingColumn { name } => write!(f, "missing column '{name}'"),
            DataError::BadCell { row, column, detail } => {
                write!(f, "bad value at data row {row}, column '{column}': {detail}")
            }
            DataError::NegativeValue { row, column, value } => {
                write!(f, "negative value {value} at data row {row}, column '{column}'")
            }
            DataError::HourSequence { row, found } => {
                write!(f, "hour column must count 0,1,2,... ; data row {row} has '{found}'")
            }
            DataError::BadHorizon { hours } => {
                write!(f, "horizon must be a positive multiple of 24 hours, got {hours}")
            }
            DataError::LengthMismatch { series, expected, found } => {
                write!(f, "series '{series}' has {found} values, expected {expected}")
            }
            DataError::InvalidGeometry(msg) => write!(f, "invalid solar geometry: {msg}"),
            DataError::BadArg(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e)
    }
}
