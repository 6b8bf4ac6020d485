//! Space files (JSON) and field files (CSV `id,value`).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::MetricMeasureSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Matrix,
    Euclidean,
}

/// On-disk form of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub n: usize,
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    pub measure: Vec<f64>,
    pub edges: Vec<[usize; 2]>,
}

impl SpaceFile {
    pub fn from_space(space: &MetricMeasureSpace) -> Self {
        let n = space.len();
        let edges = space.edges().iter().map(|&(a, b)| [a, b]).collect();
        match (space.is_euclidean(), space.coords()) {
            (true, Some(c)) => SpaceFile {
                n,
                metric: MetricKind::Euclidean,
                distances: None,
                coords: Some(c.to_vec()),
                measure: space.measure().to_vec(),
                edges,
            },
            _ => SpaceFile {
                n,
                metric: MetricKind::Matrix,
                distances: Some((0..n).map(|x| space.distance_row(x).to_vec()).collect()),
                coords: None,
                measure: space.measure().to_vec(),
                edges,
            },
        }
    }

    pub fn into_space(self) -> Result<MetricMeasureSpace> {
        let edges = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let space = match self.metric {
            MetricKind::Matrix => {
                let d = self
                    .distances
                    .ok_or_else(|| Error::Parse("matrix metric without `distances`".into()))?;
                MetricMeasureSpace::new(d, self.measure, edges)?
            }
            MetricKind::Euclidean => {
                let c = self
                    .coords
                    .ok_or_else(|| Error::Parse("euclidean metric without `coords`".into()))?;
                MetricMeasureSpace::from_coords(c, self.measure, edges)?
            }
        };
        if space.len() != self.n {
            return Err(Error::Shape(format!("declared n = {} but found {} points", self.n, space.len())));
        }
        Ok(space)
    }
}

pub fn space_from_json(text: &str) -> Result<MetricMeasureSpace> {
    serde_json::from_str::<SpaceFile>(text)?.into_space()
}

pub fn space_to_json(space: &MetricMeasureSpace) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpaceFile::from_space(space))?)
}

pub fn read_space(path: impl AsRef<Path>) -> Result<MetricMeasureSpace> {
    space_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_space(path: impl AsRef<Path>, space: &MetricMeasureSpace) -> Result<()> {
    std::fs::write(path, space_to_json(space)?)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: usize,
    value: f64,
}

/// Reads `id,value` rows; every id in `0..n` must appear exactly once.
pub fn field_from_csv<R: Read>(reader: R, n: usize) -> Result<ScalarField> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "value" {
        return Err(Error::Parse(format!("field header must be `id,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut values = vec![None; n];
    for row in rdr.deserialize::<Row>() {
        let Row { id, value } = row?;
        let slot = values
            .get_mut(id)
            .ok_or_else(|| Error::Shape(format!("field id {id} outside 0..{n}")))?;
        if slot.replace(value).is_some() {
            return Err(Error::Parse(format!("field id {id} repeated")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("field id {i} missing"))))
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::try_new(values)
}

pub fn field_to_csv<W: Write>(writer: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, &value) in values.iter().enumerate() {
        w.serialize(Row { id, value })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>, n: usize) -> Result<ScalarField> {
    field_from_csv(std::fs::File::open(path)?, n)
}

pub fn write_field(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    field_to_csv(std::fs::File::create(path)?, values)
}
