//! CSV reading/writing for [`TimeSeriesBundle`].
//!
//! One row per hour, comma separated, decimal point, UTF-8. Shared columns
//! are looked up by name; building series come as `el_<id>`, `dhw_<id>`,
//! `sh_<id>` triples discovered from the header. `irr_tilt` is optional on
//! read and written only when present, so write-then-read reproduces a
//! bundle exactly (floats are emitted in shortest round-trip form).

use super::{BuildingLoads, DataError, TimeSeriesBundle};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Column-name mapping; `Default` gives the documented names.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub hour: String,
    pub temperature: String,
    pub dhi: String,
    pub dni: String,
    pub spot_price: String,
    pub co2_el: String,
    pub sun_elev: String,
    pub sun_azim: String,
    pub irr_tilt: String,
    pub el_prefix: String,
    pub dhw_prefix: String,
    pub sh_prefix: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            hour: "hour".into(),
            temperature: "temperature".into(),
            dhi: "dhi".into(),
            dni: "dni".into(),
            spot_price: "spot_price".into(),
            co2_el: "co2_el".into(),
            sun_elev: "sun_elev".into(),
            sun_azim: "sun_azim".into(),
            irr_tilt: "irr_tilt".into(),
            el_prefix: "el_".into(),
            dhw_prefix: "dhw_".into(),
            sh_prefix: "sh_".into(),
        }
    }
}

pub fn load_bundle(path: &Path, schema: &CsvSchema) -> Result<TimeSeriesBundle, DataError> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(DataError::Csv)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(DataError::Csv)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let col = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { name: name.to_string() })
    };
    let c_hour = col(&schema.hour)?;
    let c_temp = col(&schema.temperature)?;
    let c_dhi = col(&schema.dhi)?;
    let c_dni = col(&schema.dni)?;
    let c_spot = col(&schema.spot_price)?;
    let c_co2 = col(&schema.co2_el)?;
    let c_elev = col(&schema.sun_elev)?;
    let c_azim = col(&schema.sun_azim)?;
    let c_irr = headers.iter().position(|h| h == &schema.irr_tilt);

    // buildings from el_<id> columns, in header order
    let mut building_cols: Vec<(String, usize, usize, usize)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(id) = h.strip_prefix(&schema.el_prefix) {
            let dhw = col(&format!("{}{}", schema.dhw_prefix, id))?;
            let sh = col(&format!("{}{}", schema.sh_prefix, id))?;
            building_cols.push((id.to_string(), i, dhw, sh));
        }
    }
    if building_cols.is_empty() {
        return Err(DataError::MissingColumn {
            name: format!("{}<id>", schema.el_prefix),
        });
    }

    let parse = |row: usize, column: &str, raw: &str| -> Result<f64, DataError> {
        raw.trim().parse::<f64>().map_err(|e| DataError::BadCell {
            row,
            column: column.to_string(),
            detail: format!("'{raw}': {e}"),
        })
    };

    let mut buildings: Vec<BuildingLoads> = building_cols
        .iter()
        .map(|(id, _, _, _)| BuildingLoads {
            id: id.clone(),
            el: Vec::new(),
            dhw: Vec::new(),
            sh: Vec::new(),
        })
        .collect();
    let mut temperature = Vec::new();
    let mut dhi = Vec::new();
    let mut dni = Vec::new();
    let mut spot = Vec::new();
    let mut co2 = Vec::new();
    let mut sun_elev = Vec::new();
    let mut sun_azim = Vec::new();
    let mut irr_tilt = Vec::new();

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(DataError::Csv)?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let hour_raw = get(c_hour);
        match hour_raw.trim().parse::<usize>() {
            Ok(v) if v == row => {}
            _ => {
                return Err(DataError::HourSequence { row, found: hour_raw.to_string() });
            }
        }
        temperature.push(parse(row, &schema.temperature, get(c_temp))?);
        dhi.push(parse(row, &schema.dhi, get(c_dhi))?);
        dni.push(parse(row, &schema.dni, get(c_dni))?);
        spot.push(parse(row, &schema.spot_price, get(c_spot))?);
        co2.push(parse(row, &schema.co2_el, get(c_co2))?);
        sun_elev.push(parse(row, &schema.sun_elev, get(c_elev))?);
        sun_azim.push(parse(row, &schema.sun_azim, get(c_azim))?);
        if let Some(c) = c_irr {
            irr_tilt.push(parse(row, &schema.irr_tilt, get(c))?);
        }
        for (b, (id, el_c, dhw_c, sh_c)) in building_cols.iter().enumerate() {
            buildings[b].el.push(parse(row, &format!("{}{}", schema.el_prefix, id), get(*el_c))?);
            buildings[b].dhw.push(parse(row, &format!("{}{}", schema.dhw_prefix, id), get(*dhw_c))?);
            buildings[b].sh.push(parse(row, &format!("{}{}", schema.sh_prefix, id), get(*sh_c))?);
        }
    }

    let bundle = TimeSeriesBundle {
        horizon_hours: temperature.len(),
        buildings,
        temperature,
        dhi,
        dni,
        irr_tilt: c_irr.map(|_| irr_tilt),
        spot_price: spot,
        co2_el: co2,
        sun_elev,
        sun_azim,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn write_bundle(bundle: &TimeSeriesBundle, path: &Path) -> Result<(), DataError> {
    bundle.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec![
        "hour".to_string(),
        "temperature".to_string(),
        "dhi".to_string(),
        "dni".to_string(),
        "spot_price".to_string(),
        "co2_el".to_string(),
        "sun_elev".to_string(),
        "sun_azim".to_string(),
    ];
    if bundle.irr_tilt.is_some() {
        header.push("irr_tilt".to_string());
    }
    for b in &bundle.buildings {
        header.push(format!("el_{}", b.id));
        header.push(format!("dhw_{}", b.id));
        header.push(format!("sh_{}", b.id));
    }
    writeln!(w, "{}", header.join(","))?;
    for t in 0..bundle.horizon_hours {
        let mut row = vec![
            t.to_string(),
            bundle.temperature[t].to_string(),
            bundle.dhi[t].to_string(),
            bundle.dni[t].to_string(),
            bundle.spot_price[t].to_string(),
            bundle.co2_el[t].to_string(),
            bundle.sun_elev[t].to_string(),
            bundle.sun_azim[t].to_string(),
        ];
        if let Some(ir) = &bundle.irr_tilt {
            row.push(ir[t].to_string());
        }
        for b in &bundle.buildings {
            row.push(b.el[t].to_string());
            row.push(b.dhw[t].to_string());
            row.push(b.sh[t].to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::synth_bundle;

    #[test]
    fn round_trip_is_exact() {
        let bundle = synth_bundle(3, 240, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_bundle(&bundle, &path).unwrap();
        let back = load_bundle(&path, &CsvSchema::default()).unwrap();
        assert_eq!(bundle, back);
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "hour,temperature,dhi,spot_price,co2_el,sun_elev,sun_azim,el_a,dhw_a,sh_a\n\
             0,1,2,3,4,5,6,7,8,9\n",
        )
        .unwrap();
        match load_bundle(&path, &CsvSchema::default()) {
            Err(DataError::MissingColumn { name }) => assert_eq!(name, "dni"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn negative_dhi_cell_identified() {
        let bundle = synth_bundle(5, 48, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.csv");
        write_bundle(&bundle, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // poison hour 30's dhi value
        let mut lines: Vec<String> = text.lines().map(|s| s.to_string()).collect();
        let mut fields: Vec<String> = lines[31].split(',').map(|s| s.to_string()).collect();
        fields[2] = "-4.5".to_string();
        lines[31] = fields.join(",");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match load_bundle(&path, &CsvSchema::default()) {
            Err(DataError::NegativeValue { row, column, .. }) => {
                assert_eq!(row, 30);
                assert_eq!(column, "dhi");
            }
            other => panic!("expected negative value error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_identified() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.csv");
        std::fs::write(
            &path,
            "hour,temperature,dhi,dni,spot_price,co2_el,sun_elev,sun_azim,el_a,dhw_a,sh_a\n\
             0,1,2,3,4,5,6,7,8,9,10\n\
             1,1,2,3,oops,5,6,7,8,9,10\n",
        )
        .unwrap();
        match load_bundle(&path, &CsvSchema::default()) {
            Err(DataError::BadCell { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "spot_price");
            }
            other => panic!("expected bad cell, got {other:?}"),
        }
    }

    #[test]
    fn hour_column_must_be_sequential() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        std::fs::write(
            &path,
            "hour,temperature,dhi,dni,spot_price,co2_el,sun_elev,sun_azim,el_a,dhw_a,sh_a\n\
             0,1,2,3,4,5,6,7,8,9,10\n\
             5,1,2,3,4,5,6,7,8,9,10\n",
        )
        .unwrap();
        assert!(matches!(
            load_bundle(&path, &CsvSchema::default()),
            Err(DataError::HourSequence { row: 1, .. })
        ));
    }

    #[test]
    fn horizon_must_be_full_days() {
        let bundle = synth_bundle(5, 48, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.csv");
        write_bundle(&bundle, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(1 + 30).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        assert!(matches!(
            load_bundle(&path, &CsvSchema::default()),
            Err(DataError::BadHorizon { hours: 30 })
        ));
    }
}
