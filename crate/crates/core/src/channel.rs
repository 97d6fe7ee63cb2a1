//! The pair of K-user binary-input memoryless channels: one towards the
//! legitimate receiver (`P_U` rows) and one towards the warden (`Q_U` rows).
//!
//! Rows are indexed by input subset as a bitmask: bit `k-1` is set when user
//! `k` sends the symbol 1. Row 0 is the innocent row `P_∅` / `Q_∅`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::assumptions::validate_assumptions;
use crate::error::{Error, Result};
use crate::pmf::Pmf;
use crate::rng::{substream, Domain};

/// Rows whose sum is within this distance of one are renormalized on load.
pub const LOAD_TOLERANCE: f64 = 1e-9;

pub const RESAMPLE_CAP: usize = 1000;

/// Which observer a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Receiver,
    Warden,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Receiver => "receiver",
            Side::Warden => "warden",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    users: usize,
    receiver: Vec<Pmf>,
    warden: Vec<Pmf>,
}

/// On-disk layout of a channel pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDocument {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "Y")]
    pub receiver_alphabet: usize,
    #[serde(rename = "Z")]
    pub warden_alphabet: usize,
    pub receiver: BTreeMap<String, Vec<f64>>,
    pub warden: BTreeMap<String, Vec<f64>>,
}

impl ChannelPair {
    /// Builds a channel pair from rows already ordered by subset bitmask.
    pub fn new(receiver: Vec<Pmf>, warden: Vec<Pmf>) -> Result<Self> {
        let rows = receiver.len();
        if rows < 2 || !rows.is_power_of_two() {
            return Err(Error::Malformed(format!("{rows} rows is not 2^K for K >= 1")));
        }
        let users = rows.trailing_zeros() as usize;
        if warden.len() != rows {
            return Err(Error::RowCount { side: "warden", expected: rows, found: warden.len() });
        }
        for (side, table) in [("receiver", &receiver), ("warden", &warden)] {
            let size = table[0].len();
            if size < 1 || table.iter().any(|r| r.len() != size) {
                return Err(Error::Malformed(format!("{side} rows have differing lengths")));
            }
        }
        Ok(ChannelPair { users, receiver, warden })
    }

    /// Convenience constructor from raw row vectors, validated as [`Pmf`]s.
    pub fn from_rows(receiver: Vec<Vec<f64>>, warden: Vec<Vec<f64>>) -> Result<Self> {
        let conv = |rows: Vec<Vec<f64>>| rows.into_iter().map(Pmf::new).collect::<Result<Vec<_>>>();
        Self::new(conv(receiver)?, conv(warden)?)
    }

    /// A pair whose receiver sees exactly what the warden sees.
    pub fn same_observer(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows.clone(), rows)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subsets(&self) -> usize {
        1 << self.users
    }

    pub fn receiver_alphabet(&self) -> usize {
        self.receiver[0].len()
    }

    pub fn warden_alphabet(&self) -> usize {
        self.warden[0].len()
    }

    pub fn alphabet(&self, side: Side) -> usize {
        self.rows(side)[0].len()
    }

    pub fn rows(&self, side: Side) -> &[Pmf] {
        match side {
            Side::Receiver => &self.receiver,
            Side::Warden => &self.warden,
        }
    }

    /// `P_U` or `Q_U` for subset bitmask `u`. Panics when out of range; use
    /// [`ChannelPair::one_shot_outputs`] for checked access.
    pub fn row(&self, side: Side, u: usize) -> &Pmf {
        &self.rows(side)[u]
    }

    pub fn innocent(&self, side: Side) -> &Pmf {
        self.row(side, 0)
    }

    /// Row for user `k` (1-based) sending alone.
    pub fn single(&self, side: Side, k: usize) -> &Pmf {
        self.row(side, 1 << (k - 1))
    }

    pub fn one_shot_outputs(&self, subset: usize) -> Result<(&Pmf, &Pmf)> {
        if subset >= self.subsets() {
            return Err(Error::SubsetOutOfRange { subset, users: self.users });
        }
        Ok((&self.receiver[subset], &self.warden[subset]))
    }

    pub fn from_document(doc: ChannelDocument) -> Result<Self> {
        if doc.users == 0 || doc.users > 20 {
            return Err(Error::Malformed(format!("K = {} out of range", doc.users)));
        }
        let rows = 1usize << doc.users;
        let parse = |side: &'static str, size: usize, table: BTreeMap<String, Vec<f64>>| {
            if table.len() != rows {
                return Err(Error::RowCount { side, expected: rows, found: table.len() });
            }
            let mut out: Vec<Option<Pmf>> = vec![None; rows];
            for (key, values) in table {
                let idx: usize = key
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("{side} key {key:?} is not a decimal bitmask")))?;
                if idx >= rows {
                    return Err(Error::Malformed(format!("{side} key {idx} exceeds 2^K - 1")));
                }
                if values.len() != size {
                    return Err(Error::Malformed(format!(
                        "{side} row {key} has {} entries, expected {size}",
                        values.len()
                    )));
                }
                if let Some(&value) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::NegativeProbability { side, row: key, value });
                }
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > LOAD_TOLERANCE {
                    return Err(Error::RowSum { side, row: key, sum });
                }
                if out[idx].is_some() {
                    return Err(Error::Malformed(format!("{side} row {idx} given twice")));
                }
                out[idx] = Some(Pmf::normalized(values, LOAD_TOLERANCE)?);
            }
            Ok(out.into_iter().map(|r| r.expect("all keys present")).collect::<Vec<_>>())
        };
        if doc.receiver_alphabet < 1 || doc.warden_alphabet < 1 {
            return Err(Error::Malformed("empty output alphabet".into()));
        }
        let receiver = parse("receiver", doc.receiver_alphabet, doc.receiver)?;
        let warden = parse("warden", doc.warden_alphabet, doc.warden)?;
        Self::new(receiver, warden)
    }

    pub fn to_document(&self) -> ChannelDocument {
        let table = |rows: &[Pmf]| {
            rows.iter().enumerate().map(|(u, r)| (u.to_string(), r.values().to_vec())).collect()
        };
        ChannelDocument {
            users: self.users,
            receiver_alphabet: self.receiver_alphabet(),
            warden_alphabet: self.warden_alphabet(),
            receiver: table(&self.receiver),
            warden: table(&self.warden),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ChannelDocument =
            serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("channel document serializes")
    }
}

fn flat_dirichlet<R: Rng>(rng: &mut R, size: usize) -> Pmf {
    let draws: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = draws.iter().sum();
    let mut row: Vec<f64> = draws.into_iter().map(|x| x / sum).collect();
    // push the residual rounding into the largest entry
    let err = 1.0 - row.iter().sum::<f64>();
    let (imax, _) = row.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    row[imax] += err;
    Pmf::from_computed(row)
}

/// Draws every row from the flat Dirichlet distribution, resampling until all
/// modelling assumptions hold.
pub fn random_channel(users: usize, receiver_alphabet: usize, warden_alphabet: usize, seed: u64) -> Result<ChannelPair> {
    if users == 0 || users > 16 {
        return Err(Error::InvalidParameter(format!("K = {users} must be in 1..=16")));
    }
    if receiver_alphabet < 2 || warden_alphabet < 2 {
        return Err(Error::InvalidParameter("alphabet sizes must be at least 2".into()));
    }
    let rows = 1usize << users;
    for attempt in 0..RESAMPLE_CAP {
        let mut rng = substream(seed, Domain::Channel, attempt as u64);
        let receiver = (0..rows).map(|_| flat_dirichlet(&mut rng, receiver_alphabet)).collect();
        let warden = (0..rows).map(|_| flat_dirichlet(&mut rng, warden_alphabet)).collect();
        let channel = ChannelPair::new(receiver, warden)?;
        if validate_assumptions(&channel).all_pass() {
            return Ok(channel);
        }
    }
    Err(Error::ResampleCap(RESAMPLE_CAP))
}
