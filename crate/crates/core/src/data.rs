//! Workloads: truncated Zipf streams and single-column CSV files.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::FrequencyTable;

pub const DEFAULT_ZIPF_EXPONENT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZipfSpec {
    pub n: u64,
    pub domain_size: u32,
    pub exponent: f64,
    pub seed: u64,
}

impl ZipfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("record count must be at least 1".into()));
        }
        if self.domain_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "domain size must be at least 2, got {}",
                self.domain_size
            )));
        }
        if self.exponent.is_nan() || self.exponent <= 1.0 || self.exponent.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "zipf exponent must be a finite value above 1, got {}",
                self.exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvSpec {
    pub path: PathBuf,
    /// Zero-based column holding the values.
    pub column: usize,
    pub has_header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSpec {
    Zipf(ZipfSpec),
    Csv(CsvSpec),
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::Zipf(z) => z.validate(),
            DatasetSpec::Csv(c) if !c.path.is_file() => Err(Error::InvalidParameter(format!(
                "csv input {} is not a readable file",
                c.path.display()
            ))),
            DatasetSpec::Csv(_) => Ok(()),
        }
    }

    pub fn load(&self) -> Result<ItemStream> {
        match self {
            DatasetSpec::Zipf(z) => generate_zipf(z),
            DatasetSpec::Csv(c) => ingest_csv(&c.path, c.column, c.has_header),
        }
    }
}

/// Users' items, the labels they encode, and the exact per-item counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemStream {
    items: Vec<u32>,
    labels: Vec<String>,
    counts: Vec<u64>,
}

impl ItemStream {
    pub fn new(items: Vec<u32>, labels: Vec<String>) -> Result<Self> {
        if labels.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many distinct labels".into()));
        }
        let counts = tally(&items, labels.len())?;
        Ok(Self { items, labels, counts })
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn domain_size(&self) -> u32 {
        self.labels.len() as u32
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// One label per line, in stream order.
    pub fn write_items<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for &i in &self.items {
            w.write_record([&self.labels[i as usize]])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `item_label,count` rows with a header, in item order.
    pub fn write_ground_truth<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["item_label", "count"])?;
        for (label, count) in self.labels.iter().zip(&self.counts) {
            w.write_record([label.as_str(), &count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn tally(items: &[u32], domain_size: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; domain_size];
    for &i in items {
        let slot = counts.get_mut(i as usize).ok_or(Error::DomainOverflow {
            item: i as u64,
            domain: domain_size as u64,
        })?;
        *slot += 1;
    }
    Ok(counts)
}

/// `n` i.i.d. items with `P(i) ∝ (i+1)^-exponent` on `0..domain_size`.
pub fn generate_zipf(spec: &ZipfSpec) -> Result<ItemStream> {
    spec.validate()?;
    let dist = Zipf::new(spec.domain_size as f64, spec.exponent)
        .map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let items = (0..spec.n)
        .map(|_| dist.sample(&mut rng) as u32 - 1)
        .collect();
    let labels = (0..spec.domain_size).map(|i| i.to_string()).collect();
    ItemStream::new(items, labels)
}

/// Reads one column of a CSV file, encoding distinct values by first appearance.
pub fn ingest_csv(path: &Path, column: usize, has_header: bool) -> Result<ItemStream> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file);
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut labels = Vec::new();
    let mut items = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                path: path.to_owned(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let value = record.get(column).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("row has {} fields, column {column} missing", record.len()),
        })?;
        let next = labels.len() as u32;
        let id = *index.entry(value.to_owned()).or_insert_with(|| {
            labels.push(value.to_owned());
            next
        });
        items.push(id);
    }
    if items.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", path.display())));
    }
    ItemStream::new(items, labels)
}

/// Exact per-item counts of a stream.
pub fn exact_frequencies(stream: &ItemStream) -> FrequencyTable {
    FrequencyTable::from_counts(stream.counts()).expect("streams are non-empty")
}
