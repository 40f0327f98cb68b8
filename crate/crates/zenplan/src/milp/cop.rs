//! Discounting and precomputed heat-pump performance tables.

use super::HpParams;

const KELVIN: f64 = 273.15;

/// Present value of one currency unit per year over `years` at `rate`:
/// sum of (1+r)^-y for y = 1..=years.
pub fn discount_factor(rate: f64, years: usize) -> f64 {
    assert!(rate > 0.0, "interest rate must be positive");
    assert!(years >= 1, "study duration must be at least one year");
    (1..=years).map(|y| (1.0 + rate).powi(-(y as i32))).sum()
}

/// Per-timestep COPs and maximum input power (per kW installed) for one
/// heat pump, both duties.
#[derive(Debug, Clone, PartialEq)]
pub struct CopTables {
    pub cop_sh: Vec<f64>,
    pub cop_dhw: Vec<f64>,
    pub pin_sh: Vec<f64>,
    pub pin_dhw: Vec<f64>,
    /// Timesteps where the outdoor temperature reached the supply set
    /// point and the COP was clamped to its ceiling.
    pub clamped: usize,
}

fn cop_at(hp: &HpParams, t_supply: f64, t_out: f64) -> (f64, bool) {
    let ts_k = t_supply + KELVIN;
    if t_out >= t_supply {
        return (hp.cop_max, true);
    }
    let cop = hp.eta_ii * ts_k / (t_supply - t_out);
    (cop.clamp(1.0, hp.cop_max), false)
}

/// Evaluates COP and max-input tables over the given outdoor temperatures.
///
/// The max input power for a duty is the input that a 1 kW unit rated at
/// `t_rating` can draw: COP(t_rating)/COP(t), capped at 1.
pub fn precompute_cop(temperature: &[f64], hp: &HpParams) -> CopTables {
    let n = temperature.len();
    let mut out = CopTables {
        cop_sh: Vec::with_capacity(n),
        cop_dhw: Vec::with_capacity(n),
        pin_sh: Vec::with_capacity(n),
        pin_dhw: Vec::with_capacity(n),
        clamped: 0,
    };
    let (rated_sh, _) = cop_at(hp, hp.t_supply_sh, hp.t_rating);
    let (rated_dhw, _) = cop_at(hp, hp.t_supply_dhw, hp.t_rating);
    for &t in temperature {
        let (c_sh, clamp_sh) = cop_at(hp, hp.t_supply_sh, t);
        let (c_dhw, clamp_dhw) = cop_at(hp, hp.t_supply_dhw, t);
        out.clamped += usize::from(clamp_sh) + usize::from(clamp_dhw);
        out.cop_sh.push(c_sh);
        out.cop_dhw.push(c_dhw);
        out.pin_sh.push((rated_sh / c_sh).min(1.0));
        out.pin_dhw.push((rated_dhw / c_dhw).min(1.0));
    }
    out
}
