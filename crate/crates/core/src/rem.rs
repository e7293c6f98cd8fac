//! Radio environment maps: a store of interference models keyed by
//! (location, channel), used for each platoon's local map, the shared global
//! map and the reference baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GmmParams;

pub const REM_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemEntry {
    pub model: GmmParams,
    /// Chi samples absorbed into `model` so far (`N_r`).
    pub n_r: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemRole {
    Local,
    Global,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RemOwner {
    Platoon(usize),
    Shared(String),
}

impl fmt::Display for RemOwner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemOwner::Platoon(u) => write!(f, "platoon {u}"),
            RemOwner::Shared(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemStore {
    pub role: RemRole,
    pub owner: RemOwner,
    entries: BTreeMap<(usize, usize), RemEntry>,
}

#[derive(Serialize, Deserialize)]
struct RemFile {
    schema_version: u32,
    role: RemRole,
    owner: RemOwner,
    entries: Vec<RemFileEntry>,
}

#[derive(Serialize, Deserialize)]
struct RemFileEntry {
    location: usize,
    channel: usize,
    #[serde(flatten)]
    model: GmmParams,
    n_r: u64,
}

/// Only the version field, so an unknown layout still yields a version error
/// rather than an opaque parse failure.
#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

impl RemStore {
    pub fn new(role: RemRole, owner: RemOwner) -> Self {
        RemStore {
            role,
            owner,
            entries: BTreeMap::new(),
        }
    }

    pub fn local(platoon: usize) -> Self {
        Self::new(RemRole::Local, RemOwner::Platoon(platoon))
    }

    pub fn global() -> Self {
        Self::new(RemRole::Global, RemOwner::Shared("global".into()))
    }

    pub fn baseline() -> Self {
        Self::new(RemRole::Baseline, RemOwner::Shared("baseline".into()))
    }

    pub fn get(&self, location: usize, channel: usize) -> Option<&RemEntry> {
        self.entries.get(&(location, channel))
    }

    /// Like [`get`](Self::get), but absence is an error naming the key.
    pub fn require(&self, location: usize, channel: usize) -> Result<&RemEntry> {
        self.get(location, channel).ok_or_else(|| {
            Error::NotFound(format!(
                "no model for location {location}, channel {channel} in {} map",
                self.owner
            ))
        })
    }

    pub fn put(&mut self, location: usize, channel: usize, entry: RemEntry) -> Result<()> {
        entry.model.validate()?;
        self.entries.insert((location, channel), entry);
        Ok(())
    }

    pub fn remove(&mut self, location: usize, channel: usize) -> Option<RemEntry> {
        self.entries.remove(&(location, channel))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in (location, channel) order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &RemEntry)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    /// A local map seeded from this one's models and counts.
    pub fn snapshot_as_local(&self, platoon: usize) -> Self {
        RemStore {
            role: RemRole::Local,
            owner: RemOwner::Platoon(platoon),
            entries: self.entries.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = RemFile {
            schema_version: REM_SCHEMA_VERSION,
            role: self.role,
            owner: self.owner.clone(),
            entries: self
                .iter()
                .map(|((location, channel), e)| RemFileEntry {
                    location,
                    channel,
                    model: e.model.clone(),
                    n_r: e.n_r,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("map serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parse_err = |e| Error::Parse {
            what: "REM file".into(),
            source: e,
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(parse_err)?;
        if probe.schema_version != REM_SCHEMA_VERSION {
            return Err(Error::Version {
                what: "REM file",
                found: probe.schema_version,
                expected: REM_SCHEMA_VERSION,
            });
        }
        let file: RemFile = serde_json::from_str(text).map_err(parse_err)?;
        let mut store = RemStore::new(file.role, file.owner);
        for e in file.entries {
            if store.get(e.location, e.channel).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate entry for location {}, channel {}",
                    e.location, e.channel
                )));
            }
            store.put(
                e.location,
                e.channel,
                RemEntry {
                    model: e.model,
                    n_r: e.n_r,
                },
            )?;
        }
        Ok(store)
    }

    /// Writes to a sibling temp file first so a crash never leaves a
    /// half-written map under `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json() + "\n").map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { what, source } => Error::Parse {
                what: format!("{what} {}", path.display()),
                source,
            },
            other => other,
        })
    }

    /// One row per entry; means and weights flattened into `mean_j` /
    /// `weight_j` columns padded to the largest `J` in the store.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let j_max = self
            .entries
            .values()
            .map(|e| e.model.n_components())
            .max()
            .unwrap_or(0);
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["location", "channel", "n_r", "J", "sigma"]
            .map(String::from)
            .to_vec();
        header.extend((0..j_max).map(|j| format!("mean_{j}")));
        header.extend((0..j_max).map(|j| format!("weight_{j}")));
        out.write_record(&header)?;
        for ((l, c), e) in self.iter() {
            let m = &e.model;
            let mut rec = vec![
                l.to_string(),
                c.to_string(),
                e.n_r.to_string(),
                m.n_components().to_string(),
                format!("{:?}", m.sigma()),
            ];
            let pad = j_max - m.n_components();
            for col in [m.means(), m.weights()] {
                rec.extend(col.iter().map(|x| format!("{x:?}")));
                rec.extend(std::iter::repeat_n(String::new(), pad));
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(mu: f64, n_r: u64) -> RemEntry {
        RemEntry {
            model: GmmParams::new(vec![mu, mu + 1.0], vec![0.25, 0.75], 0.3).unwrap(),
            n_r,
        }
    }

    #[test]
    fn absent_is_none() {
        let s = RemStore::global();
        assert!(s.get(3, 1).is_none());
        assert!(matches!(s.require(3, 1), Err(Error::NotFound(_))));
    }

    #[test]
    fn last_write_wins_and_keys_are_isolated() {
        let mut s = RemStore::local(0);
        s.put(0, 0, entry(1.0, 10)).unwrap();
        s.put(0, 1, entry(2.0, 20)).unwrap();
        s.put(0, 0, entry(3.0, 30)).unwrap();
        assert_eq!(s.get(0, 0), Some(&entry(3.0, 30)));
        assert_eq!(s.get(0, 1), Some(&entry(2.0, 20)));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let mut s = RemStore::baseline();
        s.put(1, 2, entry(0.5, 7)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "location,channel,n_r,J,sigma,mean_0,mean_1,weight_0,weight_1"
        );
        assert!(lines[1].starts_with("1,2,7,2,0.3,0.5,1.5,0.25,0.75"));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text = RemStore::global().to_json().replace(
            &format!("\"schema_version\": {REM_SCHEMA_VERSION}"),
            "\"schema_version\": 99",
        );
        assert!(matches!(
            RemStore::from_json(&text),
            Err(Error::Version { found: 99, .. })
        ));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let mut s = RemStore::global();
        s.put(0, 0, entry(1.0, 1)).unwrap();
        let one = s.to_json();
        let v: serde_json::Value = serde_json::from_str(&one).unwrap();
        let e = v["entries"][0].clone();
        let mut v2 = v.clone();
        v2["entries"] = serde_json::Value::Array(vec![e.clone(), e]);
        assert!(RemStore::from_json(&v2.to_string()).is_err());
    }
}
