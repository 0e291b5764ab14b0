//! Instance CSV input and reachable-point CSV output.

use std::collections::HashMap;
use std::io::{Read, Write};

use anyhow::{bail, Context, Result};

use crate::intervention::InterventionModel;
use crate::sampler::ReachablePoint;

/// One row of the instance file.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub x: Vec<f64>,
}

/// Reads instances whose header names every feature (any order) plus an
/// optional `id` column. Rows without an id are numbered from 0.
pub fn read_instances<R: Read>(reader: R, model: &InterventionModel) -> Result<Vec<Instance>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().context("reading CSV header")?.clone();
    let mut id_col = None;
    let mut col_of = HashMap::new();
    for (c, name) in header.iter().enumerate() {
        if name == "id" {
            id_col = Some(c);
        } else if let Some(j) = model.index_of(name) {
            if col_of.insert(j, c).is_some() {
                bail!("column {name} appears twice");
            }
        } else {
            bail!("column {name} is not a feature");
        }
    }
    let missing: Vec<_> = (0..model.dim())
        .filter(|j| !col_of.contains_key(j))
        .map(|j| model.feature(j).name.as_str())
        .collect();
    if !missing.is_empty() {
        bail!("missing feature columns: {}", missing.join(", "));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("reading row {row}"))?;
        let x = (0..model.dim())
            .map(|j| {
                let cell = &rec[col_of[&j]];
                cell.parse::<f64>()
                    .with_context(|| format!("row {row}, {}: bad number {cell:?}", model.feature(j).name))
            })
            .collect::<Result<Vec<_>>>()?;
        let id = match id_col {
            Some(c) => rec[c].to_string(),
            None => row.to_string(),
        };
        out.push(Instance { id, x });
    }
    Ok(out)
}

/// Writes reachable points; `draw_index` is omitted for enumerations.
pub struct PointWriter<W: Write> {
    inner: csv::Writer<W>,
    with_draw: bool,
}

impl<W: Write> PointWriter<W> {
    pub fn new(w: W, model: &InterventionModel, with_draw: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        let mut header = vec!["instance_id".to_string()];
        if with_draw {
            header.push("draw_index".into());
        }
        header.extend(model.features().iter().map(|f| f.name.clone()));
        header.extend(model.features().iter().map(|f| format!("a_{}", f.name)));
        inner.write_record(&header)?;
        Ok(Self { inner, with_draw })
    }

    pub fn write(&mut self, instance: &str, draw: usize, p: &ReachablePoint) -> Result<()> {
        let mut rec = vec![instance.to_string()];
        if self.with_draw {
            rec.push(draw.to_string());
        }
        rec.extend(p.x_prime.iter().map(|v| v.to_string()));
        rec.extend(p.a.iter().map(|v| v.to_string()));
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
