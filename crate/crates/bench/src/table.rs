use std::io::Write;

use kronequilt::{Error, Result};
use serde::Serialize;

/// One (configuration, trial) row of an experiment. Columns that do not apply
/// to an experiment are left empty in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: &'static str,
    pub theta: &'static str,
    pub n: u64,
    pub d: usize,
    pub mu: f64,
    pub trial: Option<usize>,
    pub sampler: &'static str,
    /// Partition size of the sampled attribute assignment.
    #[serde(rename = "B")]
    pub partition_size: Option<usize>,
    pub edges: Option<usize>,
    pub scc_fraction: Option<f64>,
    pub wall_ms: Option<f64>,
    pub ns_per_edge: Option<f64>,
    pub rho: Option<f64>,
}

impl Record {
    pub(crate) fn new(
        experiment: &'static str,
        theta: &'static str,
        n: u64,
        d: usize,
        mu: f64,
        sampler: &'static str,
    ) -> Self {
        Record {
            experiment,
            theta,
            n,
            d,
            mu,
            trial: None,
            sampler,
            partition_size: None,
            edges: None,
            scc_fraction: None,
            wall_ms: None,
            ns_per_edge: None,
            rho: None,
        }
    }

    /// The row with every clock-derived column cleared.
    pub fn without_timing(&self) -> Record {
        Record {
            wall_ms: None,
            ns_per_edge: None,
            rho: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Record>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Partition-size statistics: `n,d,mu,trial,B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub n: u64,
    pub d: usize,
    pub mu: f64,
    pub trial: usize,
    #[serde(rename = "B")]
    pub partition_size: usize,
}

/// Graph statistics: `n,d,mu,trial,edges,scc_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphRow {
    pub n: u64,
    pub d: usize,
    pub mu: f64,
    pub trial: usize,
    pub edges: usize,
    pub scc_fraction: f64,
}

/// Writes any serializable rows as CSV with a header line.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
