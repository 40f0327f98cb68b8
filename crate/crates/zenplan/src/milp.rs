//! Investment-and-operation MILP for a neighborhood energy system on a
//! reduced (clustered) or full hourly horizon.
//!
//! Flow topology: buildings carry electricity, space-heat (sh) and hot-water
//! (dhw) balances per representative timestep. Local production comes from
//! solar techs, heat pumps (sh+dhw via precomputed COPs), direct electric
//! heaters and a neighborhood plant that feeds building sh balances through
//! a heating grid gated by the grid's own binary. Each battery splits into a
//! grid-side chain (charges from the grid, discharges to grid or load,
//! bypassing the building balance on the grid side) and a production-side
//! chain (charges from local production, discharges to grid or load).
//! Direct exports and production-side charging are limited to local solar
//! output. Storage dynamics follow the selected variant: per-cluster cyclic
//! chains (M0/Full) or one hourly chain over the whole horizon with
//! cluster-indexed charge/discharge (M1). docs/model.md maps row-name
//! prefixes to these constraint families.

mod build;
mod catalog;
mod cop;
mod horizon;

pub use build::{build, build_from_horizon, ModelSource};
pub use catalog::{load_catalog, simplify, TechCatalog, BUILTIN_CATALOG};
pub use cop::{discount_factor, precompute_cop, CopTables};
pub use horizon::{map_t_kappa, BuildingSlice, RepHorizon};

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Per-cluster cyclic storage; needs day (or full-horizon) clusters.
    M0,
    /// Hourly storage level over the whole horizon, cluster-indexed flows.
    M1,
    /// Complete year, no clustering: one cluster spanning the horizon.
    Full,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::M0 => "M0",
            Variant::M1 => "M1",
            Variant::Full => "full",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "m0" => Ok(Variant::M0),
            "m1" => Ok(Variant::M1),
            "full" => Ok(Variant::Full),
            other => Err(format!("unknown variant '{other}' (expected M0, M1 or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Carrier {
    Electricity,
    SpaceHeat,
    HotWater,
}

impl Carrier {
    pub fn key(self) -> &'static str {
        match self {
            Carrier::Electricity => "el",
            Carrier::SpaceHeat => "sh",
            Carrier::HotWater => "dhw",
        }
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TechLevel {
    Building,
    Plant,
}

/// Storage behaviour of a technology; capacity `x` is then in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageParams {
    pub carrier: Carrier,
    /// Charge efficiency applied on the way into the store.
    pub eta_charge: f64,
    /// Max charge/discharge power as kW per kWh installed.
    pub rate_per_kwh: f64,
}

/// Heat-pump data; COPs derive from the outdoor temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct HpParams {
    /// Second-law efficiency of the Carnot bound.
    pub eta_ii: f64,
    pub cop_max: f64,
    pub t_supply_sh: f64,
    pub t_supply_dhw: f64,
    /// Outdoor rating temperature defining the nominal 1 kW input point.
    pub t_rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechnologySpec {
    pub id: String,
    pub level: TechLevel,
    /// €/kW (or €/kWh for storage), already discounted.
    pub var_cost: f64,
    /// € one-off per investment decision, already discounted.
    pub fix_cost: f64,
    /// €/kW/yr.
    pub maint_cost: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Output carrier -> output per unit of input (fuel or electricity).
    pub efficiency: BTreeMap<Carrier, f64>,
    pub fuel: Option<String>,
    pub part_load_min: f64,
    pub is_solar: bool,
    pub hp: Option<HpParams>,
    pub storage: Option<StorageParams>,
    /// Building ids this tech may be installed in; None = all buildings.
    pub buildings: Option<Vec<String>>,
}

impl TechnologySpec {
    pub fn is_hp(&self) -> bool {
        self.hp.is_some()
    }

    pub fn is_storage(&self) -> bool {
        self.storage.is_some()
    }

    /// Electricity-consuming converter (heater): el in, heat out.
    pub fn is_electric_converter(&self) -> bool {
        self.fuel.is_none() && !self.is_solar && self.hp.is_none() && self.storage.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuelSpec {
    pub id: String,
    /// €/kWh.
    pub price: f64,
    /// gCO2/kWh.
    pub co2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EconomicParams {
    pub interest_rate: f64,
    pub years: usize,
    /// Grid tariff added on top of spot for imports, €/kWh.
    pub grid_tariff: f64,
    /// Retailer tariff added on top of spot for imports, €/kWh.
    pub retail_tariff: f64,
    /// One-off heating-grid cost tied to its binary, €.
    pub heating_grid_cost: f64,
    /// Crediting factor for grid-battery exports in the emission balance.
    pub alpha_zen: f64,
    pub fuels: Vec<FuelSpec>,
}

impl EconomicParams {
    pub fn fuel(&self, id: &str) -> Option<&FuelSpec> {
        self.fuels.iter().find(|f| f.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarKind {
    Continuous,
    Binary,
    /// Domain {0} ∪ [lo, ub].
    SemiContinuous { lo: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// (column, coefficient), columns strictly increasing.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Sparse minimization MILP with named variables and rows.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub variant: Variant,
    pub simplified: bool,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Sparse objective (column, coefficient), minimization.
    pub objective: Vec<(usize, f64)>,
    pub obj_constant: f64,
    columns: HashMap<String, usize>,
}

impl MilpModel {
    pub fn new(variant: Variant, simplified: bool) -> Self {
        MilpModel {
            variant,
            simplified,
            variables: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            obj_constant: 0.0,
            columns: HashMap::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64) -> usize {
        let name = name.into();
        assert!(lb <= ub, "variable {name}: lb {lb} > ub {ub}");
        let col = self.variables.len();
        let prev = self.columns.insert(name.clone(), col);
        assert!(prev.is_none(), "duplicate variable {name}");
        self.variables.push(Variable { name, kind, lb, ub });
        col
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }

    /// Adds a row, merging repeated columns and dropping zero coefficients.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, v) in coeffs {
            assert!(c < self.variables.len(), "row references unknown column {c}");
            *merged.entry(c).or_insert(0.0) += v;
        }
        let coeffs: Vec<(usize, f64)> =
            merged.into_iter().filter(|&(_, v)| v != 0.0).collect();
        self.rows.push(Row { name: name.into(), coeffs, sense, rhs });
    }

    pub fn obj_add(&mut self, col: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        assert!(col < self.variables.len());
        match self.objective.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(i) => self.objective[i].1 += coef,
            Err(i) => self.objective.insert(i, (col, coef)),
        }
    }

    /// Objective value of a full assignment.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().map(|&(c, w)| w * values[c]).sum::<f64>()
    }
}

#[derive(Debug)]
pub enum MilpError {
    Io(std::io::Error),
    Catalog(String),
    MissingFuelPrice { tech: String, fuel: String },
    VariantNeedsDays { variant: Variant },
    SourceMismatch(String),
    StructurallyInfeasible { building: String, carrier: Carrier },
    BadHorizon(String),
}

impl fmt::Display for MilpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MilpError::Io(e) => write!(f, "io error: {e}"),
            MilpError::Catalog(msg) => write!(f, "invalid catalog: {msg}"),
            MilpError::MissingFuelPrice { tech, fuel } => {
                write!(f, "technology {tech} uses fuel {fuel} with no declared price")
            }
            MilpError::VariantNeedsDays { variant } => write!(
                f,
                "variant {variant} needs day or full-horizon clusters; hourly storage cycling is meaningless at 1 h resolution"
            ),
            MilpError::SourceMismatch(msg) => write!(f, "{msg}"),
            MilpError::StructurallyInfeasible { building, carrier } => write!(
                f,
                "building {building} has {carrier} load but no technology can supply it"
            ),
            MilpError::BadHorizon(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for MilpError {}

impl From<std::io::Error> for MilpError {
    fn from(e: std::io::Error) -> Self {
        MilpError::Io(e)
    }
}
