//! Text checkpoints: one parameter per line, `name<TAB>dims<TAB>values`.
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Result, StemoError};

const MAGIC: &str = "stemo-checkpoint v1";

/// Flat `name -> tensor` map gathered from one or more stores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every parameter of `store` under `prefix.` + its name.
    pub fn insert_store(&mut self, prefix: &str, store: &ParamStore) {
        for (name, t) in store.iter() {
            let key = if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            };
            let clean = Tensor::new(t.shape(), t.values().to_vec()).expect("store shape");
            self.entries.insert(key, clean);
        }
    }

    pub fn insert(&mut self, key: impl Into<String>, t: Tensor) {
        self.entries.insert(key.into(), t);
    }

    pub fn get(&self, key: &str) -> Result<&Tensor> {
        self.entries
            .get(key)
            .ok_or_else(|| StemoError::Checkpoint(format!("missing entry {key}")))
    }

    /// Overwrites the values of `store` from entries saved under `prefix`.
    pub fn restore_store(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let key = if prefix.is_empty() {
                store.name(id).to_string()
            } else {
                format!("{prefix}.{}", store.name(id))
            };
            let saved = self.get(&key)?;
            let dst = store.get_mut(id);
            if saved.shape() != dst.shape() {
                return Err(StemoError::Checkpoint(format!(
                    "{key}: saved shape {:?} vs model shape {:?}",
                    saved.shape(),
                    dst.shape()
                )));
            }
            dst.values_mut().copy_from_slice(saved.values());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(MAGIC);
        out.push('\n');
        for (name, t) in &self.entries {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            let _ = write!(out, "{}\t{}\t", name, dims.join(","));
            let vals: Vec<String> = t.values().iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(StemoError::Checkpoint("missing header".into()));
        }
        let mut entries = BTreeMap::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (Some(name), Some(dims), Some(vals)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(StemoError::Checkpoint(format!("line {}: expected 3 fields", lineno + 2)));
            };
            let shape = dims
                .split(',')
                .map(str::parse::<usize>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| StemoError::Checkpoint(format!("{name}: bad dims: {e}")))?;
            let values = vals
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| StemoError::Checkpoint(format!("{name}: bad value: {e}")))?;
            let t = Tensor::new(&shape, values).map_err(|e| StemoError::Checkpoint(format!("{name}: {e}")))?;
            entries.insert(name.to_string(), t);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| StemoError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StemoError::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_roundtrip_is_exact(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let n = values.len();
            let mut ck = Checkpoint::new();
            ck.insert("encoder.w", Tensor::new(&[1, n], values).unwrap());
            let back = Checkpoint::from_text(&ck.to_text()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn restore_rejects_shape_change() {
        let mut a = ParamStore::new();
        a.add("w", Tensor::zeros(&[2, 2]));
        let mut ck = Checkpoint::new();
        ck.insert_store("q", &a);
        let mut b = ParamStore::new();
        b.add("w", Tensor::zeros(&[1, 4]));
        assert!(ck.restore_store("q", &mut b).is_err());
    }
}
