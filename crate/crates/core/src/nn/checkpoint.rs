//! Plain-text parameter checkpoints.
//!
//! ```text
//! ia-arena checkpoint v1
//! meta <key> <value>
//! set <name> <blocks>
//! block <name> <rows> <cols>
//! <row-major values in shortest round-trip exponent form>
//! ```
//!
//! Values are written with `{:e}`, which parses back to the identical bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::params::ParamSet;
use super::tape::Matrix;
use crate::error::{ArenaError, Result};

const MAGIC: &str = "ia-arena checkpoint v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub sets: Vec<(String, ParamSet)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push(&mut self, name: &str, params: ParamSet) {
        self.sets.push((name.to_string(), params));
    }

    pub fn set(&self, name: &str) -> Result<&ParamSet> {
        self.sets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| ArenaError::Checkpoint(format!("missing parameter set {name}")))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ArenaError::Checkpoint(format!("missing meta field {key}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        for (name, set) in &self.sets {
            writeln!(out, "set {name} {}", set.len()).unwrap();
            for (block, value) in set.iter() {
                let (r, c) = value.dim();
                writeln!(out, "block {block} {r} {c}").unwrap();
                let row: Vec<String> = value.iter().map(|x| format!("{x:e}")).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| ArenaError::Checkpoint(msg);
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, MAGIC)) => {}
            other => return Err(bad(format!("bad header {:?}", other.map(|(_, l)| l)))),
        }
        let mut ckpt = Checkpoint::new();
        while let Some((no, line)) = lines.next() {
            let mut words = line.split_whitespace();
            match words.next() {
                Some("meta") => {
                    let key = words.next().ok_or_else(|| bad(format!("line {}: meta without key", no + 1)))?;
                    let value: Vec<&str> = words.collect();
                    ckpt.meta.insert(key.to_string(), value.join(" "));
                }
                Some("set") => {
                    let name = words.next().ok_or_else(|| bad(format!("line {}: set without name", no + 1)))?;
                    let count: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| bad(format!("line {}: set without block count", no + 1)))?;
                    let mut set = ParamSet::new();
                    for _ in 0..count {
                        let (no, header) = lines.next().ok_or_else(|| bad("truncated set".into()))?;
                        let parts: Vec<&str> = header.split_whitespace().collect();
                        let (block, rows, cols) = match parts.as_slice() {
                            ["block", name, r, c] => (
                                name.to_string(),
                                r.parse::<usize>().map_err(|e| bad(format!("line {}: {e}", no + 1)))?,
                                c.parse::<usize>().map_err(|e| bad(format!("line {}: {e}", no + 1)))?,
                            ),
                            _ => return Err(bad(format!("line {}: expected block header", no + 1))),
                        };
                        let (no, data) = lines.next().ok_or_else(|| bad("truncated block".into()))?;
                        let values = data
                            .split_whitespace()
                            .map(|w| w.parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|e| bad(format!("line {}: {e}", no + 1)))?;
                        let value = Matrix::from_shape_vec((rows, cols), values)
                            .map_err(|e| bad(format!("line {}: {e}", no + 1)))?;
                        set.add(block, value);
                    }
                    ckpt.sets.push((name.to_string(), set));
                }
                Some(other) => return Err(bad(format!("line {}: unexpected {other}", no + 1))),
                None => {}
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArenaError::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}
