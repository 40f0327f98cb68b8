//! The reduced horizon a model is built on: representative timesteps with
//! occurrence weights, plus the series values the constraints need.

use super::MilpError;
use crate::cluster::ClusterModel;
use crate::timeseries::TimeSeriesBundle;

/// Per-building load series sampled at the representative timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSlice {
    pub id: String,
    pub el: Vec<f64>,
    pub dhw: Vec<f64>,
    pub sh: Vec<f64>,
}

/// `k` clusters of `block` hours each; representative timestep `t` in
/// `0..k*block` belongs to cluster `t / block` and carries that cluster's
/// occurrence weight. `xi` maps original objects (hours or days) to
/// clusters, which is what chains reduced operation back onto the full
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RepHorizon {
    pub k: usize,
    pub block: usize,
    pub horizon_hours: usize,
    pub sigma: Vec<usize>,
    pub xi: Vec<usize>,
    pub buildings: Vec<BuildingSlice>,
    pub temperature: Vec<f64>,
    pub irr_tilt: Vec<f64>,
    pub spot_price: Vec<f64>,
    pub co2_el: Vec<f64>,
}

/// Representative timestep serving original hour `t`: position `t % block`
/// within the representative of the object containing `t`.
pub fn map_t_kappa(t: usize, xi: &[usize], block: usize) -> usize {
    assert!(t < xi.len() * block, "hour {t} outside the horizon");
    xi[t / block] * block + t % block
}

impl RepHorizon {
    pub fn n_rep_timesteps(&self) -> usize {
        self.k * self.block
    }

    /// Occurrence weight of the cluster containing representative
    /// timestep `t`.
    pub fn weight(&self, t: usize) -> f64 {
        self.sigma[t / self.block] as f64
    }

    /// Reduced horizon from a fitted cluster model; all series values come
    /// from the representatives.
    pub fn from_model(m: &ClusterModel) -> Result<Self, MilpError> {
        let block = m.granularity.block();
        let n_rep = m.k * block;
        let find = |name: &str| -> Result<usize, MilpError> {
            m.series.iter().position(|s| s == name).ok_or_else(|| {
                MilpError::SourceMismatch(format!("cluster model lacks series {name}"))
            })
        };
        let expand = |s: usize| -> Vec<f64> {
            (0..n_rep).map(|t| m.rep_value(t / block, s, t % block)).collect()
        };
        let mut buildings = Vec::new();
        for name in &m.series {
            if let Some(id) = name.strip_prefix("el_") {
                buildings.push(BuildingSlice {
                    id: id.to_string(),
                    el: expand(find(&format!("el_{id}"))?),
                    dhw: expand(find(&format!("dhw_{id}"))?),
                    sh: expand(find(&format!("sh_{id}"))?),
                });
            }
        }
        Ok(RepHorizon {
            k: m.k,
            block,
            horizon_hours: m.n_objects * block,
            sigma: m.sigma.clone(),
            xi: m.xi.clone(),
            buildings,
            temperature: expand(find("temperature")?),
            irr_tilt: expand(find("irr_tilt")?),
            spot_price: expand(find("spot_price")?),
            co2_el: expand(find("co2_el")?),
        })
    }

    /// Unreduced horizon: one cluster spanning all hours, every hour its
    /// own representative timestep with weight 1.
    pub fn full(bundle: &TimeSeriesBundle) -> Result<Self, MilpError> {
        bundle
            .validate()
            .map_err(|e| MilpError::SourceMismatch(format!("invalid bundle: {e}")))?;
        let irr = bundle.irr_tilt.clone().ok_or_else(|| {
            MilpError::SourceMismatch("bundle has no irr_tilt series".to_string())
        })?;
        let h = bundle.horizon_hours;
        Ok(RepHorizon {
            k: 1,
            block: h,
            horizon_hours: h,
            sigma: vec![1],
            xi: vec![0],
            buildings: bundle
                .buildings
                .iter()
                .map(|b| BuildingSlice {
                    id: b.id.clone(),
                    el: b.el.clone(),
                    dhw: b.dhw.clone(),
                    sh: b.sh.clone(),
                })
                .collect(),
            temperature: bundle.temperature.clone(),
            irr_tilt: irr,
            spot_price: bundle.spot_price.clone(),
            co2_el: bundle.co2_el.clone(),
        })
    }
}
