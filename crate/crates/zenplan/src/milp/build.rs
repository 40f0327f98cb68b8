//! Assembles the neighborhood MILP from a reduced horizon and a catalog.

use super::catalog::{simplify, TechCatalog};
use super::cop::{discount_factor, precompute_cop, CopTables};
use super::horizon::{map_t_kappa, RepHorizon};
use super::{
    Carrier, MilpError, MilpModel, Sense, TechLevel, TechnologySpec, VarKind, Variant,
};
use crate::cluster::{ClusterModel, Granularity};
use crate::timeseries::TimeSeriesBundle;

/// What the model is built on: a fitted reduction or the raw bundle.
pub enum ModelSource<'a> {
    Cluster(&'a ClusterModel),
    Bundle(&'a TimeSeriesBundle),
}

pub fn build(
    source: ModelSource,
    catalog: &TechCatalog,
    variant: Variant,
    simplified: bool,
) -> Result<MilpModel, MilpError> {
    let rep = match (&source, variant) {
        (ModelSource::Cluster(_), Variant::Full) => {
            return Err(MilpError::SourceMismatch(
                "the full variant builds from the unreduced bundle, not a cluster model"
                    .to_string(),
            ))
        }
        (ModelSource::Cluster(m), Variant::M0) if m.granularity == Granularity::Hour => {
            return Err(MilpError::VariantNeedsDays { variant })
        }
        (ModelSource::Cluster(m), _) => RepHorizon::from_model(m)?,
        (ModelSource::Bundle(b), _) => RepHorizon::full(b)?,
    };
    build_from_horizon(&rep, catalog, variant, simplified)
}

/// One installable (technology, location) pair.
struct Instance<'a> {
    tech: &'a TechnologySpec,
    /// Building index into `rep.buildings`; None = plant.
    building: Option<usize>,
    loc: String,
    x: usize,
    invest_bin: Option<usize>,
    op: OpVars,
}

enum OpVars {
    /// Electricity production pinned to irradiance.
    Solar { q: Vec<usize> },
    /// Heat pump: heat out and electricity in per duty.
    Hp { qsh: Vec<usize>, qdhw: Vec<usize>, dsh: Vec<usize>, ddhw: Vec<usize>, cop: CopTables },
    /// Electric converter: electricity in, efficiency-scaled heat out.
    Conv { d: Vec<usize> },
    /// Fuel converter: fuel in, efficiency-scaled outputs; optional
    /// per-timestep on/off binaries for part load.
    Fuel { f: Vec<usize>, u: Option<Vec<usize>> },
    /// Battery: grid-side chain (charge from grid, discharge to grid or
    /// load) and production-side chain (charge from local production,
    /// discharge to grid or load).
    Battery {
        chg: Vec<usize>,
        dgg: Vec<usize>,
        dgl: Vec<usize>,
        chp: Vec<usize>,
        dpg: Vec<usize>,
        dpl: Vec<usize>,
    },
    /// Thermal store on one heat carrier.
    Thermal { ch: Vec<usize>, dch: Vec<usize> },
}

/// One state-of-charge chain of a store: its charge column and discharge
/// columns per representative timestep.
struct Chain<'a> {
    suffix: &'a str,
    charge: &'a [usize],
    discharge: Vec<&'a [usize]>,
}

fn produces(tech: &TechnologySpec, carrier: Carrier) -> bool {
    if tech.is_hp() {
        return matches!(carrier, Carrier::SpaceHeat | Carrier::HotWater);
    }
    if tech.is_solar {
        return carrier == Carrier::Electricity;
    }
    if tech.is_storage() {
        return false; // stores shift energy, they do not produce it
    }
    tech.efficiency.contains_key(&carrier)
}

pub fn build_from_horizon(
    rep: &RepHorizon,
    catalog: &TechCatalog,
    variant: Variant,
    simplified: bool,
) -> Result<MilpModel, MilpError> {
    if rep.block == 1 && variant != Variant::M1 {
        return Err(MilpError::VariantNeedsDays { variant });
    }
    if rep.horizon_hours != rep.xi.len() * rep.block
        || rep.sigma.len() != rep.k
        || rep.sigma.iter().sum::<usize>() != rep.xi.len()
    {
        return Err(MilpError::BadHorizon("inconsistent reduced horizon".to_string()));
    }
    let catalog = if simplified { simplify(catalog) } else { catalog.clone() };
    let econ = &catalog.economics;
    let eps = discount_factor(econ.interest_rate, econ.years);
    let n_rep = rep.n_rep_timesteps();

    // structural feasibility: every loaded heat carrier needs a producer
    let has_plant = catalog.technologies.iter().any(|t| t.level == TechLevel::Plant);
    for b in &rep.buildings {
        for (carrier, load) in [(Carrier::HotWater, &b.dhw), (Carrier::SpaceHeat, &b.sh)] {
            if !load.iter().any(|&v| v > 0.0) {
                continue;
            }
            let served_locally = catalog.technologies.iter().any(|t| {
                t.level == TechLevel::Building
                    && t.buildings.as_ref().map_or(true, |ids| ids.contains(&b.id))
                    && produces(t, carrier)
            });
            let served_by_plant = carrier == Carrier::SpaceHeat && has_plant;
            if !served_locally && !served_by_plant {
                return Err(MilpError::StructurallyInfeasible {
                    building: b.id.clone(),
                    carrier,
                });
            }
        }
    }

    let mut m = MilpModel::new(variant, simplified);

    // The heating-grid connection decision. Simplification zeroes the
    // input tied to this binary (the connection cost), so the gate and
    // its cost term are dropped entirely and the simplified model stays
    // a pure LP.
    let b_hg = if has_plant && !simplified {
        Some(m.add_var("b_hg", VarKind::Binary, 0.0, 1.0))
    } else {
        None
    };

    // investment variables, catalog order, buildings in bundle order
    let mut instances: Vec<Instance> = Vec::new();
    for tech in &catalog.technologies {
        let locations: Vec<(Option<usize>, String)> = match tech.level {
            TechLevel::Plant => vec![(None, "plant".to_string())],
            TechLevel::Building => rep
                .buildings
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    tech.buildings.as_ref().map_or(true, |ids| ids.contains(&b.id))
                })
                .map(|(i, b)| (Some(i), b.id.clone()))
                .collect(),
        };
        for (building, loc) in locations {
            let kind = if tech.x_min > 0.0 {
                VarKind::SemiContinuous { lo: tech.x_min }
            } else {
                VarKind::Continuous
            };
            let x = m.add_var(format!("x_{}_{}", tech.id, loc), kind, 0.0, tech.x_max);
            let invest_bin = (tech.fix_cost > 0.0).then(|| {
                m.add_var(format!("b_{}_{}", tech.id, loc), VarKind::Binary, 0.0, 1.0)
            });
            instances.push(Instance {
                tech,
                building,
                loc,
                x,
                invest_bin,
                op: OpVars::Conv { d: Vec::new() }, // placeholder, filled below
            });
        }
    }

    // operation variables per instance and representative timestep
    for inst in &mut instances {
        let tech = inst.tech;
        let loc = inst.loc.clone();
        let id = tech.id.clone();
        let mk = |m: &mut MilpModel, pre: &str| -> Vec<usize> {
            (0..n_rep)
                .map(|t| {
                    m.add_var(
                        format!("{pre}_{id}_{loc}_t{t}"),
                        VarKind::Continuous,
                        0.0,
                        f64::INFINITY,
                    )
                })
                .collect()
        };
        inst.op = if tech.is_solar {
            OpVars::Solar { q: mk(&mut m, "q") }
        } else if let Some(hp) = &tech.hp {
            OpVars::Hp {
                qsh: mk(&mut m, "qsh"),
                qdhw: mk(&mut m, "qdhw"),
                dsh: mk(&mut m, "dsh"),
                ddhw: mk(&mut m, "ddhw"),
                cop: precompute_cop(&rep.temperature, hp),
            }
        } else if let Some(st) = &tech.storage {
            if st.carrier == Carrier::Electricity {
                OpVars::Battery {
                    chg: mk(&mut m, "chg"),
                    dgg: mk(&mut m, "dgg"),
                    dgl: mk(&mut m, "dgl"),
                    chp: mk(&mut m, "chp"),
                    dpg: mk(&mut m, "dpg"),
                    dpl: mk(&mut m, "dpl"),
                }
            } else {
                OpVars::Thermal { ch: mk(&mut m, "ch"), dch: mk(&mut m, "dch") }
            }
        } else if tech.fuel.is_some() {
            let f = mk(&mut m, "f");
            let u = (tech.part_load_min > 0.0).then(|| {
                (0..n_rep)
                    .map(|t| {
                        m.add_var(format!("u_{id}_{loc}_t{t}"), VarKind::Binary, 0.0, 1.0)
                    })
                    .collect()
            });
            OpVars::Fuel { f, u }
        } else {
            OpVars::Conv { d: mk(&mut m, "d") }
        };
    }

    // imports, exports and heating-grid delivery per building
    let mut yimp: Vec<Vec<usize>> = Vec::new();
    let mut yexp: Vec<Vec<usize>> = Vec::new();
    let mut hg: Vec<Vec<usize>> = Vec::new();
    for b in &rep.buildings {
        let id = &b.id;
        yimp.push(
            (0..n_rep)
                .map(|t| {
                    m.add_var(format!("yimp_{id}_t{t}"), VarKind::Continuous, 0.0, f64::INFINITY)
                })
                .collect(),
        );
        yexp.push(
            (0..n_rep)
                .map(|t| {
                    m.add_var(format!("yexp_{id}_t{t}"), VarKind::Continuous, 0.0, f64::INFINITY)
                })
                .collect(),
        );
        if has_plant {
            hg.push(
                (0..n_rep)
                    .map(|t| {
                        m.add_var(format!("hg_{id}_t{t}"), VarKind::Continuous, 0.0, f64::INFINITY)
                    })
                    .collect(),
            );
        }
    }

    // investment linking: fixed-cost binary gate and heating-grid gate
    for inst in &instances {
        if let Some(bin) = inst.invest_bin {
            m.add_row(
                format!("lnk_{}_{}", inst.tech.id, inst.loc),
                [(inst.x, 1.0), (bin, -inst.tech.x_max)],
                Sense::Le,
                0.0,
            );
        }
        if inst.tech.level == TechLevel::Plant {
            if let Some(hg_bin) = b_hg {
                m.add_row(
                    format!("hgg_{}_{}", inst.tech.id, inst.loc),
                    [(inst.x, 1.0), (hg_bin, -inst.tech.x_max)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    // per-timestep technology rows
    for inst in &instances {
        let tech = inst.tech;
        let id = &tech.id;
        let loc = &inst.loc;
        match &inst.op {
            OpVars::Solar { q } => {
                let eta = tech.efficiency[&Carrier::Electricity];
                for t in 0..n_rep {
                    // production pinned to installed capacity and irradiance
                    let yield_t = rep.irr_tilt[t] / 1000.0 * eta;
                    m.add_row(
                        format!("pvdef_{id}_{loc}_t{t}"),
                        [(q[t], 1.0), (inst.x, -yield_t)],
                        Sense::Eq,
                        0.0,
                    );
                }
            }
            OpVars::Hp { qsh, qdhw, dsh, ddhw, cop } => {
                for t in 0..n_rep {
                    m.add_row(
                        format!("hpsh_{id}_{loc}_t{t}"),
                        [(qsh[t], 1.0), (dsh[t], -cop.cop_sh[t])],
                        Sense::Eq,
                        0.0,
                    );
                    m.add_row(
                        format!("hpdhw_{id}_{loc}_t{t}"),
                        [(qdhw[t], 1.0), (ddhw[t], -cop.cop_dhw[t])],
                        Sense::Eq,
                        0.0,
                    );
                    // capacity is rated electric input at reference conditions
                    m.add_row(
                        format!("hpcap_{id}_{loc}_t{t}"),
                        [
                            (ddhw[t], 1.0 / cop.pin_dhw[t]),
                            (dsh[t], 1.0 / cop.pin_sh[t]),
                            (inst.x, -1.0),
                        ],
                        Sense::Le,
                        0.0,
                    );
                }
            }
            OpVars::Conv { d } => {
                let eta_tot: f64 = tech.efficiency.values().sum();
                for t in 0..n_rep {
                    m.add_row(
                        format!("cap_{id}_{loc}_t{t}"),
                        [(d[t], eta_tot), (inst.x, -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
            }
            OpVars::Fuel { f, u } => {
                let eta_tot: f64 = tech.efficiency.values().sum();
                for t in 0..n_rep {
                    m.add_row(
                        format!("cap_{id}_{loc}_t{t}"),
                        [(f[t], eta_tot), (inst.x, -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                if let Some(u) = u {
                    // on/off with a minimum stable output when on
                    for t in 0..n_rep {
                        m.add_row(
                            format!("plon_{id}_{loc}_t{t}"),
                            [(f[t], eta_tot), (u[t], -tech.x_max)],
                            Sense::Le,
                            0.0,
                        );
                        m.add_row(
                            format!("plmin_{id}_{loc}_t{t}"),
                            [
                                (inst.x, tech.part_load_min),
                                (f[t], -eta_tot),
                                (u[t], tech.x_max),
                            ],
                            Sense::Le,
                            tech.x_max,
                        );
                    }
                }
            }
            OpVars::Battery { .. } | OpVars::Thermal { .. } => {} // below
        }
    }

    // load balances per building and timestep
    for (bi, b) in rep.buildings.iter().enumerate() {
        for t in 0..n_rep {
            let mut el: Vec<(usize, f64)> = vec![(yimp[bi][t], 1.0), (yexp[bi][t], -1.0)];
            let mut dhw: Vec<(usize, f64)> = Vec::new();
            let mut sh: Vec<(usize, f64)> = Vec::new();
            if has_plant {
                sh.push((hg[bi][t], 1.0));
            }
            let mut src: Vec<(usize, f64)> = vec![(yexp[bi][t], 1.0)];
            for inst in instances.iter().filter(|i| i.building == Some(bi)) {
                match &inst.op {
                    OpVars::Solar { q } => {
                        el.push((q[t], 1.0));
                        src.push((q[t], -1.0));
                    }
                    OpVars::Hp { qsh, qdhw, dsh, ddhw, .. } => {
                        el.push((dsh[t], -1.0));
                        el.push((ddhw[t], -1.0));
                        sh.push((qsh[t], 1.0));
                        dhw.push((qdhw[t], 1.0));
                    }
                    OpVars::Conv { d } => {
                        el.push((d[t], -1.0));
                        for (&c, &eta) in &inst.tech.efficiency {
                            match c {
                                Carrier::SpaceHeat => sh.push((d[t], eta)),
                                Carrier::HotWater => dhw.push((d[t], eta)),
                                Carrier::Electricity => unreachable!("validated out"),
                            }
                        }
                    }
                    OpVars::Fuel { f, .. } => {
                        for (&c, &eta) in &inst.tech.efficiency {
                            match c {
                                Carrier::SpaceHeat => sh.push((f[t], eta)),
                                Carrier::HotWater => dhw.push((f[t], eta)),
                                Carrier::Electricity => el.push((f[t], eta)),
                            }
                        }
                    }
                    OpVars::Battery { dgl, chp, dpl, .. } => {
                        // grid-side charge and to-grid discharges bypass
                        // the building balance entirely
                        el.push((dgl[t], 1.0));
                        el.push((dpl[t], 1.0));
                        el.push((chp[t], -1.0));
                        src.push((chp[t], 1.0));
                    }
                    OpVars::Thermal { ch, dch } => {
                        let bal = match inst.tech.storage.as_ref().unwrap().carrier {
                            Carrier::HotWater => &mut dhw,
                            Carrier::SpaceHeat => &mut sh,
                            Carrier::Electricity => unreachable!("battery shape"),
                        };
                        bal.push((dch[t], 1.0));
                        bal.push((ch[t], -1.0));
                    }
                }
            }
            let id = &b.id;
            m.add_row(format!("bal_el_{id}_t{t}"), el, Sense::Eq, b.el[t]);
            if !dhw.is_empty() || b.dhw[t] != 0.0 {
                m.add_row(format!("bal_dhw_{id}_t{t}"), dhw, Sense::Eq, b.dhw[t]);
            }
            if !sh.is_empty() || b.sh[t] != 0.0 {
                m.add_row(format!("bal_sh_{id}_t{t}"), sh, Sense::Eq, b.sh[t]);
            }
            // direct exports and production-side charging are backed by
            // local solar output
            m.add_row(format!("src_{id}_t{t}"), src, Sense::Le, 0.0);
        }
    }

    // heating grid: plant output equals deliveries to buildings
    if has_plant {
        for t in 0..n_rep {
            let mut row: Vec<(usize, f64)> =
                (0..rep.buildings.len()).map(|bi| (hg[bi][t], 1.0)).collect();
            for inst in instances.iter().filter(|i| i.building.is_none()) {
                if let OpVars::Fuel { f, .. } = &inst.op {
                    let eta = inst.tech.efficiency[&Carrier::SpaceHeat];
                    row.push((f[t], -eta));
                }
            }
            m.add_row(format!("hgbal_t{t}"), row, Sense::Eq, 0.0);
        }
    }

    // storage dynamics
    for inst in &instances {
        let Some(st) = inst.tech.storage.as_ref() else { continue };
        let id = &inst.tech.id;
        let loc = &inst.loc;
        let chains: Vec<Chain> = match &inst.op {
            OpVars::Battery { chg, dgg, dgl, chp, dpg, dpl } => vec![
                Chain { suffix: "g", charge: chg, discharge: vec![dgg, dgl] },
                Chain { suffix: "p", charge: chp, discharge: vec![dpg, dpl] },
            ],
            OpVars::Thermal { ch, dch } => {
                vec![Chain { suffix: "", charge: ch, discharge: vec![dch] }]
            }
            _ => unreachable!("storage shapes only"),
        };

        // state-of-charge variables per chain
        let socs: Vec<Vec<usize>> = chains
            .iter()
            .map(|chain| {
                let s = chain.suffix;
                match variant {
                    Variant::M0 | Variant::Full => (0..rep.k)
                        .flat_map(|kk| (0..=rep.block).map(move |j| (kk, j)))
                        .map(|(kk, j)| {
                            m.add_var(
                                format!("v{s}_{id}_{loc}_k{kk}_j{j}"),
                                VarKind::Continuous,
                                0.0,
                                f64::INFINITY,
                            )
                        })
                        .collect(),
                    Variant::M1 => (0..=rep.horizon_hours)
                        .map(|h| {
                            m.add_var(
                                format!("v{s}_{id}_{loc}_h{h}"),
                                VarKind::Continuous,
                                0.0,
                                f64::INFINITY,
                            )
                        })
                        .collect(),
                }
            })
            .collect();

        match variant {
            Variant::M0 | Variant::Full => {
                let w = rep.block + 1; // soc vars per cluster chain
                for (chain, v) in chains.iter().zip(&socs) {
                    let s = chain.suffix;
                    for kk in 0..rep.k {
                        for j in 1..=rep.block {
                            let t = kk * rep.block + (j - 1);
                            let mut row = vec![
                                (v[kk * w + j], 1.0),
                                (v[kk * w + j - 1], -1.0),
                                (chain.charge[t], -st.eta_charge),
                            ];
                            row.extend(chain.discharge.iter().map(|d| (d[t], 1.0)));
                            m.add_row(
                                format!("soc{s}_{id}_{loc}_k{kk}_j{j}"),
                                row,
                                Sense::Eq,
                                0.0,
                            );
                        }
                        // each cluster ends where it started
                        m.add_row(
                            format!("clos{s}_{id}_{loc}_k{kk}"),
                            [(v[kk * w], 1.0), (v[kk * w + rep.block], -1.0)],
                            Sense::Eq,
                            0.0,
                        );
                    }
                }
                for kk in 0..rep.k {
                    for j in 0..=rep.block {
                        let mut row: Vec<(usize, f64)> =
                            socs.iter().map(|v| (v[kk * w + j], 1.0)).collect();
                        row.push((inst.x, -1.0));
                        m.add_row(format!("vcap_{id}_{loc}_k{kk}_j{j}"), row, Sense::Le, 0.0);
                    }
                }
            }
            Variant::M1 => {
                for (chain, v) in chains.iter().zip(&socs) {
                    let s = chain.suffix;
                    for h in 1..=rep.horizon_hours {
                        // the hour maps into its cluster's representative slot
                        let t = map_t_kappa(h - 1, &rep.xi, rep.block);
                        let mut row = vec![
                            (v[h], 1.0),
                            (v[h - 1], -1.0),
                            (chain.charge[t], -st.eta_charge),
                        ];
                        row.extend(chain.discharge.iter().map(|d| (d[t], 1.0)));
                        m.add_row(format!("soc{s}_{id}_{loc}_h{h}"), row, Sense::Eq, 0.0);
                    }
                    m.add_row(
                        format!("clos{s}_{id}_{loc}"),
                        [(v[0], 1.0), (v[rep.horizon_hours], -1.0)],
                        Sense::Eq,
                        0.0,
                    );
                }
                for h in 0..=rep.horizon_hours {
                    let mut row: Vec<(usize, f64)> = socs.iter().map(|v| (v[h], 1.0)).collect();
                    row.push((inst.x, -1.0));
                    m.add_row(format!("vcap_{id}_{loc}_h{h}"), row, Sense::Le, 0.0);
                }
            }
        }

        // charge/discharge power limits, shared across chains
        for t in 0..n_rep {
            let mut rch: Vec<(usize, f64)> = Vec::new();
            let mut rdch: Vec<(usize, f64)> = Vec::new();
            for chain in &chains {
                rch.push((chain.charge[t], 1.0));
                rdch.extend(chain.discharge.iter().map(|d| (d[t], 1.0)));
            }
            rch.push((inst.x, -st.rate_per_kwh));
            rdch.push((inst.x, -st.rate_per_kwh));
            m.add_row(format!("rch_{id}_{loc}_t{t}"), rch, Sense::Le, 0.0);
            m.add_row(format!("rdch_{id}_{loc}_t{t}"), rdch, Sense::Le, 0.0);
        }
    }

    // zero-emission balance over the weighted horizon
    {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for t in 0..n_rep {
            let w = rep.weight(t);
            let phi = rep.co2_el[t];
            for bi in 0..rep.buildings.len() {
                row.push((yimp[bi][t], w * phi));
                row.push((yexp[bi][t], -w * phi));
            }
            for inst in &instances {
                match &inst.op {
                    OpVars::Battery { chg, dgg, dpg, .. } => {
                        // grid credit for battery exports, net of charge loss
                        let eta = inst.tech.storage.as_ref().unwrap().eta_charge;
                        row.push((chg[t], w * phi));
                        row.push((dgg[t], -w * phi * eta * econ.alpha_zen));
                        row.push((dpg[t], -w * phi * eta));
                    }
                    OpVars::Fuel { f, .. } => {
                        let fuel_id = inst.tech.fuel.as_ref().unwrap();
                        let fuel =
                            econ.fuel(fuel_id).ok_or_else(|| MilpError::MissingFuelPrice {
                                tech: inst.tech.id.clone(),
                                fuel: fuel_id.clone(),
                            })?;
                        row.push((f[t], w * fuel.co2));
                    }
                    _ => {}
                }
            }
        }
        m.add_row("zeb", row, Sense::Le, 0.0);
    }

    // objective: investments plus discounted weighted operation
    if let Some(bin) = b_hg {
        m.obj_add(bin, econ.heating_grid_cost);
    }
    for inst in &instances {
        m.obj_add(inst.x, inst.tech.var_cost + inst.tech.maint_cost / eps);
        if let Some(bin) = inst.invest_bin {
            m.obj_add(bin, inst.tech.fix_cost);
        }
    }
    for t in 0..n_rep {
        let w = rep.weight(t) / eps;
        let import_price = rep.spot_price[t] + econ.grid_tariff + econ.retail_tariff;
        for bi in 0..rep.buildings.len() {
            m.obj_add(yimp[bi][t], w * import_price);
            m.obj_add(yexp[bi][t], -w * rep.spot_price[t]);
        }
        for inst in &instances {
            match &inst.op {
                OpVars::Battery { chg, .. } => m.obj_add(chg[t], w * import_price),
                OpVars::Fuel { f, .. } => {
                    let fuel = econ.fuel(inst.tech.fuel.as_ref().unwrap()).unwrap();
                    m.obj_add(f[t], w * fuel.price);
                }
                _ => {}
            }
        }
    }

    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{Algorithm, FitConfig, Normalization};
    use crate::milp::{BuildingSlice, EconomicParams, FuelSpec};
    use crate::timeseries::synth_bundle;
    use std::collections::BTreeMap;

    fn tiny_econ() -> EconomicParams {
        EconomicParams {
            interest_rate: 0.04,
            years: 30,
            grid_tariff: 0.05,
            retail_tariff: 0.02,
            heating_grid_cost: 12000.0,
            alpha_zen: 1.0,
            fuels: vec![FuelSpec { id: "wood".to_string(), price: 0.05, co2: 10.0 }],
        }
    }

    fn boiler() -> TechnologySpec {
        TechnologySpec {
            id: "boiler".to_string(),
            level: TechLevel::Plant,
            var_cost: 400.0,
            fix_cost: 9000.0,
            maint_cost: 10.0,
            x_min: 5.0,
            x_max: 40.0,
            efficiency: BTreeMap::from([(Carrier::SpaceHeat, 0.9)]),
            fuel: Some("wood".to_string()),
            part_load_min: 0.3,
            is_solar: false,
            hp: None,
            storage: None,
            buildings: None,
        }
    }

    fn two_step_horizon() -> RepHorizon {
        RepHorizon {
            k: 1,
            block: 2,
            horizon_hours: 2,
            sigma: vec![1],
            xi: vec![0],
            buildings: vec![BuildingSlice {
                id: "b1".to_string(),
                el: vec![0.0, 0.0],
                dhw: vec![0.0, 0.0],
                sh: vec![3.0, 6.0],
            }],
            temperature: vec![0.0, 5.0],
            irr_tilt: vec![0.0, 100.0],
            spot_price: vec![0.1, 0.2],
            co2_el: vec![50.0, 40.0],
        }
    }

    #[test]
    fn boiler_only_model_expands_by_hand() {
        let catalog = TechCatalog { technologies: vec![boiler()], economics: tiny_econ() };
        let rep = two_step_horizon();
        let m = build_from_horizon(&rep, &catalog, Variant::M0, false).unwrap();

        // b_hg, x, b_boiler, f×2, u×2, yimp×2, yexp×2, hg×2
        assert_eq!(m.n_vars(), 13);
        assert_eq!(m.n_binaries(), 4); // b_hg, b_boiler, u_t0, u_t1
        let x = m.col("x_boiler_plant").unwrap();
        assert_eq!(m.variables[x].kind, VarKind::SemiContinuous { lo: 5.0 });

        // rows: lnk, hgg, cap×2, plon×2, plmin×2, bal_el×2, bal_sh×2,
        // src×2, hgbal×2, zeb; the dhw balance vanishes with its carrier
        assert_eq!(m.n_rows(), 17);
        assert!(!m.rows.iter().any(|r| r.name.starts_with("bal_dhw")));

        let row = |name: &str| m.rows.iter().find(|r| r.name == name).unwrap();

        let sh0 = row("bal_sh_b1_t0");
        assert_eq!(sh0.sense, Sense::Eq);
        assert_eq!(sh0.rhs, 3.0);
        assert_eq!(sh0.coeffs, vec![(m.col("hg_b1_t0").unwrap(), 1.0)]);

        let hgbal = row("hgbal_t1");
        let f1 = m.col("f_boiler_plant_t1").unwrap();
        assert_eq!(hgbal.coeffs, vec![(f1, -0.9), (m.col("hg_b1_t1").unwrap(), 1.0)]);

        let plmin = row("plmin_boiler_plant_t0");
        assert_eq!(plmin.rhs, 40.0);
        let f0 = m.col("f_boiler_plant_t0").unwrap();
        let u0 = m.col("u_boiler_plant_t0").unwrap();
        assert_eq!(plmin.coeffs, vec![(x, 0.3), (f0, -0.9), (u0, 40.0)]);

        // emission balance: imports and fuel count, exports credit back
        let zeb = row("zeb");
        assert_eq!(zeb.sense, Sense::Le);
        let lookup = |n: &str| {
            let c = m.col(n).unwrap();
            zeb.coeffs.iter().find(|&&(col, _)| col == c).unwrap().1
        };
        assert_eq!(lookup("yimp_b1_t0"), 50.0);
        assert_eq!(lookup("yexp_b1_t1"), -40.0);
        assert_eq!(lookup("f_boiler_plant_t0"), 10.0);

        // objective: x carries var + maint/eps, imports pay tariffs
        let eps = discount_factor(0.04, 30);
        let obj_x = m.objective.iter().find(|&&(c, _)| c == x).unwrap().1;
        assert!((obj_x - (400.0 + 10.0 / eps)).abs() < 1e-12);
        let yimp0 = m.col("yimp_b1_t0").unwrap();
        let obj_imp = m.objective.iter().find(|&&(c, _)| c == yimp0).unwrap().1;
        assert!((obj_imp - (0.1 + 0.05 + 0.02) / eps).abs() < 1e-12);
    }

    #[test]
    fn simplified_model_is_a_pure_lp() {
        let catalog = TechCatalog { technologies: vec![boiler()], economics: tiny_econ() };
        let m = build_from_horizon(&two_step_horizon(), &catalog, Variant::M0, true).unwrap();
        assert_eq!(m.n_binaries(), 0);
        assert!(m.col("b_hg").is_none());
        assert!(m.col("u_boiler_plant_t0").is_none());
        let x = m.col("x_boiler_plant").unwrap();
        assert_eq!(m.variables[x].kind, VarKind::Continuous);
        assert!(!m.rows.iter().any(|r| r.name.starts_with("plon")));
        assert!(!m.rows.iter().any(|r| r.name.starts_with("hgg")));
        assert!(m
            .variables
            .iter()
            .all(|v| v.kind == VarKind::Continuous));
    }

    #[test]
    fn missing_heat_producer_is_structurally_infeasible() {
        let mut catalog = TechCatalog { technologies: vec![boiler()], economics: tiny_econ() };
        let mut rep = two_step_horizon();
        rep.buildings[0].dhw = vec![1.0, 0.0];
        let err = build_from_horizon(&rep, &catalog, Variant::M0, false).unwrap_err();
        match err {
            MilpError::StructurallyInfeasible { building, carrier } => {
                assert_eq!(building, "b1");
                assert_eq!(carrier, Carrier::HotWater);
            }
            other => panic!("unexpected error {other}"),
        }
        // an electric heater in the catalog clears it
        catalog.technologies.push(TechnologySpec {
            id: "heater".to_string(),
            level: TechLevel::Building,
            var_cost: 100.0,
            fix_cost: 0.0,
            maint_cost: 0.0,
            x_min: 0.0,
            x_max: 20.0,
            efficiency: BTreeMap::from([(Carrier::HotWater, 0.98)]),
            fuel: None,
            part_load_min: 0.0,
            is_solar: false,
            hp: None,
            storage: None,
            buildings: None,
        });
        assert!(build_from_horizon(&rep, &catalog, Variant::M0, false).is_ok());
    }

    #[test]
    fn m0_rejects_hourly_granularity() {
        let bundle = synth_bundle(7, 240, 1).unwrap();
        let cfg = FitConfig::new(
            Granularity::Hour,
            Algorithm::KMeans,
            Normalization::Range,
            false,
            5,
            1,
        );
        let model = crate::cluster::fit(&bundle, &cfg).unwrap();
        let catalog = TechCatalog::builtin();
        let err = build(ModelSource::Cluster(&model), &catalog, Variant::M0, true).unwrap_err();
        assert!(matches!(err, MilpError::VariantNeedsDays { variant: Variant::M0 }));
    }

    #[test]
    fn full_rejects_cluster_source() {
        let bundle = synth_bundle(7, 240, 1).unwrap();
        let cfg = FitConfig::new(
            Granularity::Day,
            Algorithm::KMeans,
            Normalization::Range,
            false,
            3,
            1,
        );
        let model = crate::cluster::fit(&bundle, &cfg).unwrap();
        let catalog = TechCatalog::builtin();
        let err =
            build(ModelSource::Cluster(&model), &catalog, Variant::Full, true).unwrap_err();
        assert!(matches!(err, MilpError::SourceMismatch(_)));
    }

    #[test]
    fn single_cluster_m0_matches_full_row_by_row() {
        let bundle = synth_bundle(11, 48, 2).unwrap();
        let catalog = TechCatalog::builtin();
        let full = build(ModelSource::Bundle(&bundle), &catalog, Variant::Full, false).unwrap();
        let rep = RepHorizon::full(&bundle).unwrap();
        let m0 = build_from_horizon(&rep, &catalog, Variant::M0, false).unwrap();
        assert_eq!(full.variables, m0.variables);
        assert_eq!(full.rows, m0.rows);
        assert_eq!(full.objective, m0.objective);
    }

    #[test]
    fn m1_storage_follows_cluster_assignment() {
        // two days collapse into one cluster, so every hour's storage row
        // must reference that cluster's flow columns
        let bundle = synth_bundle(3, 48, 1).unwrap();
        let cfg = FitConfig::new(
            Granularity::Day,
            Algorithm::KMeans,
            Normalization::Range,
            false,
            1,
            1,
        );
        let model = crate::cluster::fit(&bundle, &cfg).unwrap();
        let catalog = TechCatalog::builtin();
        let m = build(ModelSource::Cluster(&model), &catalog, Variant::M1, true).unwrap();

        let socs: Vec<_> =
            m.rows.iter().filter(|r| r.name.starts_with("socg_battery_b1_h")).collect();
        assert_eq!(socs.len(), 48);
        // hour 25 (second day, slot 0) charges through cluster-0 slot 0
        let chg0 = m.col("chg_battery_b1_t0").unwrap();
        let soc25 = m.rows.iter().find(|r| r.name == "socg_battery_b1_h25").unwrap();
        assert!(soc25.coeffs.iter().any(|&(c, w)| c == chg0 && w < 0.0));
        // closure ties hour 48 back to hour 0
        assert!(m.rows.iter().any(|r| r.name == "closg_battery_b1"));
    }

    #[test]
    fn battery_chains_share_capacity_and_rate_rows() {
        let bundle = synth_bundle(5, 48, 1).unwrap();
        let catalog = TechCatalog::builtin();
        let m = build(ModelSource::Bundle(&bundle), &catalog, Variant::Full, true).unwrap();
        let vg = m.col("vg_battery_b1_k0_j3").unwrap();
        let vp = m.col("vp_battery_b1_k0_j3").unwrap();
        let x = m.col("x_battery_b1").unwrap();
        let cap = m.rows.iter().find(|r| r.name == "vcap_battery_b1_k0_j3").unwrap();
        assert_eq!(cap.coeffs, vec![(x, -1.0), (vg, 1.0), (vp, 1.0)]);
        let rdch = m.rows.iter().find(|r| r.name == "rdch_battery_b1_t3").unwrap();
        assert_eq!(rdch.coeffs.len(), 5); // dgg, dgl, dpg, dpl, x
        assert!(rdch.coeffs.contains(&(x, -0.5)));
    }

    #[test]
    fn weighted_model_counts_cluster_sizes() {
        let bundle = synth_bundle(9, 96, 1).unwrap();
        let cfg = FitConfig::new(
            Granularity::Day,
            Algorithm::KMeans,
            Normalization::Range,
            false,
            2,
            1,
        );
        let model = crate::cluster::fit(&bundle, &cfg).unwrap();
        let catalog = TechCatalog::builtin();
        let m = build(ModelSource::Cluster(&model), &catalog, Variant::M0, true).unwrap();
        // import cost scales with the cluster weight at each timestep
        let rep = RepHorizon::from_model(&model).unwrap();
        let eps = discount_factor(0.04, 30);
        for t in [0usize, 24] {
            let col = m.col(&format!("yimp_b1_t{t}")).unwrap();
            let coeff = m.objective.iter().find(|&&(c, _)| c == col).unwrap().1;
            let expect = rep.weight(t) * (rep.spot_price[t] + 0.05 + 0.02) / eps;
            assert!((coeff - expect).abs() < 1e-12, "t{t}: {coeff} vs {expect}");
        }
        assert_eq!(rep.sigma.iter().sum::<usize>(), 4);
    }
}
