use std::collections::BTreeMap;
use std::path::Path;

use super::{DatasetError, Label};

/// CWE id to label mapping with a fallback for ids it does not list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CweMap {
    entries: BTreeMap<u32, Label>,
    default: Label,
}

impl CweMap {
    pub fn new(default: Label) -> Self {
        CweMap {
            entries: BTreeMap::new(),
            default,
        }
    }

    pub fn insert(&mut self, cwe_id: u32, label: Label) -> Option<Label> {
        self.entries.insert(cwe_id, label)
    }

    pub fn default_label(&self) -> Label {
        self.default
    }

    pub fn get(&self, cwe_id: u32) -> Label {
        self.entries.get(&cwe_id).copied().unwrap_or(self.default)
    }

    /// Label for a sample's CWE list: CLEAN when empty, otherwise the label of
    /// the first listed id.
    pub fn label_for(&self, cwe_ids: &[u32]) -> Label {
        cwe_ids.first().map_or(Label::Clean, |&id| self.get(id))
    }

    /// Parses `<cwe_id> <LABEL>` lines plus exactly one `DEFAULT <LABEL>`
    /// line. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut entries = BTreeMap::new();
        let mut default = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| DatasetError::InvalidCweMap(format!("line {}: {msg}", n + 1));
            let mut parts = line.split_whitespace();
            let (Some(key), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected `<cwe_id> <LABEL>`".into()));
            };
            let label: Label = label.parse().map_err(err)?;
            if key == "DEFAULT" {
                if default.replace(label).is_some() {
                    return Err(err("second DEFAULT line".into()));
                }
                continue;
            }
            let id: u32 = key
                .trim_start_matches("CWE-")
                .parse()
                .map_err(|_| err(format!("bad CWE id `{key}`")))?;
            if entries.insert(id, label).is_some() {
                return Err(err(format!("CWE {id} listed twice")));
            }
        }
        let default =
            default.ok_or_else(|| DatasetError::InvalidCweMap("missing DEFAULT line".into()))?;
        Ok(CweMap { entries, default })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::FileUnreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut out: String = self
            .entries
            .iter()
            .map(|(id, label)| format!("{id} {label}\n"))
            .collect();
        out.push_str(&format!("DEFAULT {}\n", self.default));
        out
    }
}

impl Default for CweMap {
    /// Buffer overflows (119-122) are BUFFER, NULL dereference (476) and
    /// pointer subtraction for sizes (469) are MEMORY, and input validation
    /// (20), uninitialized use (457) and incorrect length values (805) are
    /// NUMERICAL, which is also the fallback. LOGIC is reachable only from
    /// a user-supplied map.
    fn default() -> Self {
        let mut map = CweMap::new(Label::Numerical);
        for id in [119, 120, 121, 122] {
            map.insert(id, Label::Buffer);
        }
        for id in [469, 476] {
            map.insert(id, Label::Memory);
        }
        for id in [20, 457, 805] {
            map.insert(id, Label::Numerical);
        }
        map
    }
}

pub fn map_cwe_to_label(cwe_id: u32, mapping: &CweMap) -> Label {
    mapping.get(cwe_id)
}
