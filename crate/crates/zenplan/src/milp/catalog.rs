//! Technology catalog and economic parameters, loaded from TOML.

use super::{
    Carrier, EconomicParams, FuelSpec, HpParams, MilpError, StorageParams, TechLevel,
    TechnologySpec,
};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct TechCatalog {
    pub technologies: Vec<TechnologySpec>,
    pub economics: EconomicParams,
}

/// Source text of the catalog shipped with the toolkit (config/catalog.toml),
/// exposed so runs against the built-in catalog can still be fingerprinted.
pub const BUILTIN_CATALOG: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/catalog.toml"));

impl TechCatalog {
    /// The catalog shipped with the toolkit (config/catalog.toml).
    pub fn builtin() -> TechCatalog {
        parse_catalog(BUILTIN_CATALOG).expect("shipped catalog must be valid")
    }

    pub fn tech(&self, id: &str) -> Option<&TechnologySpec> {
        self.technologies.iter().find(|t| t.id == id)
    }
}

/// Copy with every binary-linked input zeroed: no fixed costs, no minimum
/// capacities, no part-load floors. The builder then emits no investment
/// binaries and no part-load rows, leaving (at most) the heating-grid
/// binary.
pub fn simplify(catalog: &TechCatalog) -> TechCatalog {
    let mut out = catalog.clone();
    for t in &mut out.technologies {
        t.fix_cost = 0.0;
        t.x_min = 0.0;
        t.part_load_min = 0.0;
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    economics: RawEconomics,
    #[serde(default)]
    fuel: Vec<RawFuel>,
    #[serde(default)]
    technology: Vec<RawTech>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEconomics {
    interest_rate: f64,
    years: usize,
    grid_tariff: f64,
    retail_tariff: f64,
    heating_grid_cost: f64,
    alpha_zen: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFuel {
    id: String,
    price: f64,
    co2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTech {
    id: String,
    #[serde(default = "default_level")]
    level: String,
    var_cost: f64,
    #[serde(default)]
    fix_cost: f64,
    #[serde(default)]
    maint_cost: f64,
    #[serde(default)]
    x_min: f64,
    x_max: f64,
    #[serde(default)]
    efficiency: BTreeMap<String, f64>,
    #[serde(default)]
    fuel: Option<String>,
    #[serde(default)]
    part_load_min: f64,
    #[serde(default)]
    solar: bool,
    #[serde(default)]
    hp: Option<RawHp>,
    #[serde(default)]
    storage: Option<RawStorage>,
    #[serde(default)]
    buildings: Option<Vec<String>>,
}

fn default_level() -> String {
    "building".to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHp {
    eta_ii: f64,
    cop_max: f64,
    t_supply_sh: f64,
    t_supply_dhw: f64,
    t_rating: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStorage {
    carrier: String,
    eta_charge: f64,
    rate_per_kwh: f64,
}

fn parse_carrier(s: &str) -> Result<Carrier, MilpError> {
    match s {
        "el" => Ok(Carrier::Electricity),
        "sh" => Ok(Carrier::SpaceHeat),
        "dhw" => Ok(Carrier::HotWater),
        other => Err(MilpError::Catalog(format!("unknown carrier '{other}'"))),
    }
}

fn bad(msg: impl Into<String>) -> MilpError {
    MilpError::Catalog(msg.into())
}

pub fn parse_catalog(text: &str) -> Result<TechCatalog, MilpError> {
    let raw: RawCatalog =
        toml::from_str(text).map_err(|e| bad(format!("toml parse error: {e}")))?;
    let e = &raw.economics;
    if e.interest_rate <= 0.0 {
        return Err(bad("interest_rate must be positive"));
    }
    if e.years < 1 {
        return Err(bad("years must be at least 1"));
    }
    if !(0.0..=1.0).contains(&e.alpha_zen) {
        return Err(bad("alpha_zen must be within [0, 1]"));
    }
    if e.grid_tariff < 0.0 || e.retail_tariff < 0.0 || e.heating_grid_cost < 0.0 {
        return Err(bad("tariffs and heating_grid_cost must be non-negative"));
    }

    let mut fuels = Vec::new();
    for f in &raw.fuel {
        if fuels.iter().any(|x: &FuelSpec| x.id == f.id) {
            return Err(bad(format!("duplicate fuel id '{}'", f.id)));
        }
        if f.price < 0.0 || f.co2 < 0.0 {
            return Err(bad(format!("fuel '{}' has negative price or co2", f.id)));
        }
        fuels.push(FuelSpec { id: f.id.clone(), price: f.price, co2: f.co2 });
    }

    let economics = EconomicParams {
        interest_rate: e.interest_rate,
        years: e.years,
        grid_tariff: e.grid_tariff,
        retail_tariff: e.retail_tariff,
        heating_grid_cost: e.heating_grid_cost,
        alpha_zen: e.alpha_zen,
        fuels,
    };

    let mut technologies = Vec::new();
    for t in &raw.technology {
        if technologies.iter().any(|x: &TechnologySpec| x.id == t.id) {
            return Err(bad(format!("duplicate technology id '{}'", t.id)));
        }
        let level = match t.level.as_str() {
            "building" => TechLevel::Building,
            "plant" => TechLevel::Plant,
            other => return Err(bad(format!("technology '{}': unknown level '{other}'", t.id))),
        };
        if !(t.x_max > 0.0) || t.x_min < 0.0 || t.x_min > t.x_max {
            return Err(bad(format!("technology '{}': need 0 <= x_min <= x_max, x_max > 0", t.id)));
        }
        if t.var_cost < 0.0 || t.fix_cost < 0.0 || t.maint_cost < 0.0 {
            return Err(bad(format!("technology '{}': negative cost", t.id)));
        }
        if !(0.0..1.0).contains(&t.part_load_min) {
            return Err(bad(format!("technology '{}': part_load_min must be in [0, 1)", t.id)));
        }
        let mut efficiency = BTreeMap::new();
        for (c, &v) in &t.efficiency {
            if v <= 0.0 {
                return Err(bad(format!("technology '{}': efficiency for {c} must be > 0", t.id)));
            }
            efficiency.insert(parse_carrier(c)?, v);
        }
        if let Some(fuel) = &t.fuel {
            if economics.fuel(fuel).is_none() {
                return Err(MilpError::MissingFuelPrice {
                    tech: t.id.clone(),
                    fuel: fuel.clone(),
                });
            }
        }
        let hp = match &t.hp {
            None => None,
            Some(h) => {
                if h.eta_ii <= 0.0 || h.cop_max < 1.0 {
                    return Err(bad(format!("technology '{}': bad hp efficiency bounds", t.id)));
                }
                if h.t_supply_dhw <= h.t_supply_sh || h.t_rating >= h.t_supply_sh {
                    return Err(bad(format!(
                        "technology '{}': need t_rating < t_supply_sh < t_supply_dhw",
                        t.id
                    )));
                }
                Some(HpParams {
                    eta_ii: h.eta_ii,
                    cop_max: h.cop_max,
                    t_supply_sh: h.t_supply_sh,
                    t_supply_dhw: h.t_supply_dhw,
                    t_rating: h.t_rating,
                })
            }
        };
        let storage = match &t.storage {
            None => None,
            Some(s) => {
                if !(s.eta_charge > 0.0 && s.eta_charge <= 1.0) || s.rate_per_kwh <= 0.0 {
                    return Err(bad(format!("technology '{}': bad storage parameters", t.id)));
                }
                Some(StorageParams {
                    carrier: parse_carrier(&s.carrier)?,
                    eta_charge: s.eta_charge,
                    rate_per_kwh: s.rate_per_kwh,
                })
            }
        };

        // one role per technology: the builder relies on the shapes
        let roles = [t.solar, hp.is_some(), storage.is_some(), t.fuel.is_some()];
        if roles.iter().filter(|&&r| r).count() > 1 {
            return Err(bad(format!(
                "technology '{}': solar, hp, storage and fuel are mutually exclusive",
                t.id
            )));
        }
        if t.solar && (efficiency.len() != 1 || !efficiency.contains_key(&Carrier::Electricity)) {
            return Err(bad(format!("technology '{}': solar needs exactly efficiency.el", t.id)));
        }
        if (hp.is_some() || storage.is_some()) && !efficiency.is_empty() {
            return Err(bad(format!(
                "technology '{}': hp/storage efficiency comes from its own table",
                t.id
            )));
        }
        if hp.is_none() && storage.is_none() && !t.solar && efficiency.is_empty() {
            return Err(bad(format!("technology '{}': converter without outputs", t.id)));
        }
        if efficiency.contains_key(&Carrier::Electricity) && t.fuel.is_none() && !t.solar {
            return Err(bad(format!(
                "technology '{}': electricity-to-electricity conversion is not a thing",
                t.id
            )));
        }
        if level == TechLevel::Plant {
            if storage.is_some() || hp.is_some() || t.solar {
                return Err(bad(format!(
                    "technology '{}': the plant hosts fuel converters only",
                    t.id
                )));
            }
            if !efficiency.contains_key(&Carrier::SpaceHeat) {
                return Err(bad(format!(
                    "technology '{}': plant techs must feed the heating grid (sh)",
                    t.id
                )));
            }
        }

        technologies.push(TechnologySpec {
            id: t.id.clone(),
            level,
            var_cost: t.var_cost,
            fix_cost: t.fix_cost,
            maint_cost: t.maint_cost,
            x_min: t.x_min,
            x_max: t.x_max,
            efficiency,
            fuel: t.fuel.clone(),
            part_load_min: t.part_load_min,
            is_solar: t.solar,
            hp,
            storage,
            buildings: t.buildings.clone(),
        });
    }

    Ok(TechCatalog { technologies, economics })
}

pub fn load_catalog(path: &Path) -> Result<TechCatalog, MilpError> {
    let text = std::fs::read_to_string(path)?;
    parse_catalog(&text)
}
