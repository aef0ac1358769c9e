//! Flat `key = value` model configuration.
//!
//! ```text
//! # shared across levels
//! d = 3
//! n = 8
//! theta.00 = 0.15
//! theta.01 = 0.7
//! theta.10 = 0.7
//! theta.11 = 0.85
//! mu = 0.5
//! # per-level entries override the shared ones
//! theta.2.11 = 0.9
//! mu.3 = 0.6
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kronecker::{InitiatorChain, InitiatorMatrix};
use crate::magm::MagmModel;

const CELLS: [&str; 4] = ["00", "01", "10", "11"];

pub fn parse_model_config(text: &str) -> Result<MagmModel> {
    let mut values: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, "expected key = value"))?;
        let key = key.trim().to_string();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::parse(lineno, format!("bad value for {key}: {e}")))?;
        if values.insert(key.clone(), (lineno, value)).is_some() {
            return Err(Error::parse(lineno, format!("duplicate key {key}")));
        }
    }

    let mut take = |key: &str| values.remove(key);
    let d = integer(take("d"), "d")?;
    let n = integer(take("n"), "n")?;
    if d == 0 {
        return Err(Error::invalid("d must be positive"));
    }

    let shared: Vec<Option<f64>> = CELLS
        .iter()
        .map(|ab| take(&format!("theta.{ab}")).map(|v| v.1))
        .collect();
    let shared_mu = take("mu").map(|v| v.1);

    let mut levels = Vec::with_capacity(d as usize);
    let mut mus = Vec::with_capacity(d as usize);
    for k in 1..=d {
        let mut entries = [0.0; 4];
        for (slot, (ab, fallback)) in entries.iter_mut().zip(CELLS.iter().zip(&shared)) {
            *slot = take(&format!("theta.{k}.{ab}"))
                .map(|v| v.1)
                .or(*fallback)
                .ok_or_else(|| Error::invalid(format!("missing theta.{k}.{ab} (or theta.{ab})")))?;
        }
        levels.push(InitiatorMatrix::new(entries[0], entries[1], entries[2], entries[3])?);
        mus.push(
            take(&format!("mu.{k}"))
                .map(|v| v.1)
                .or(shared_mu)
                .ok_or_else(|| Error::invalid(format!("missing mu.{k} (or mu)")))?,
        );
    }

    if let Some((key, (lineno, _))) = values.into_iter().next() {
        return Err(Error::parse(lineno, format!("unknown key {key}")));
    }
    MagmModel::new(InitiatorChain::new(levels)?, mus, n)
}

fn integer(value: Option<(usize, f64)>, key: &str) -> Result<u64> {
    let (lineno, v) = value.ok_or_else(|| Error::invalid(format!("missing {key}")))?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(Error::parse(lineno, format!("{key} must be a nonnegative integer")));
    }
    Ok(v as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_and_per_level_entries() {
        let text = "d = 3\nn = 8\ntheta.00 = 0.15\ntheta.01=0.7\ntheta.10 = 0.7\n\
                    theta.11 = 0.85 # shared\nmu = 0.5\ntheta.2.11 = 0.9\nmu.3 = 0.6\n";
        let model = parse_model_config(text).unwrap();
        assert_eq!(model.depth(), 3);
        assert_eq!(model.node_count(), 8);
        assert_eq!(model.chain().levels()[0], InitiatorMatrix::theta1());
        assert_eq!(model.chain().levels()[1].get(1, 1), 0.9);
        assert_eq!(model.mus(), &[0.5, 0.5, 0.6]);
    }

    #[test]
    fn errors() {
        assert!(parse_model_config("n = 4\n").is_err());
        assert!(parse_model_config("d = 1\nn = 4\nmu = 0.5\n").is_err());
        let base = "d = 1\nn = 4\ntheta.00 = 1\ntheta.01 = 1\ntheta.10 = 1\ntheta.11 = 1\n";
        assert!(parse_model_config(base).is_err());
        assert!(parse_model_config(&format!("{base}mu = 0.5\nbogus = 1\n")).is_err());
        assert!(parse_model_config(&format!("{base}mu = 0.5\nmu = 0.4\n")).is_err());
        assert!(parse_model_config(&format!("{base}mu = 0.5\n")).is_ok());
        assert!(parse_model_config("d = 1.5\n").is_err());
    }
}
