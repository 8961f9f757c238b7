use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MaterialParams;
use crate::error::{Error, Result};

/// Database record for one material in one frequency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMaterial {
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub eps_r: f64,
    /// Conductivity (S/m).
    pub sigma: f64,
    /// Scattering coefficient interval `[lo, hi]`.
    pub s_range: [f64; 2],
    /// Valid band `[lo, hi]` in GHz.
    pub band_ghz: [f64; 2],
}

impl RadioMaterial {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("material `{}`: {m}", self.label)));
        if self.label.trim().is_empty() {
            return Err(Error::InvalidInput("material with empty label".into()));
        }
        if !(self.eps_r >= 1.0) {
            return bad("eps_r must be >= 1");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be > 0");
        }
        let [lo, hi] = self.s_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("s_range must satisfy 0 <= lo <= hi <= 1");
        }
        if !(self.band_ghz[0] <= self.band_ghz[1]) {
            return bad("band_ghz must be ordered");
        }
        Ok(())
    }

    /// Nominal parameters: the database point values and the midpoint of the
    /// scattering interval.
    pub fn nominal_params(&self) -> MaterialParams {
        MaterialParams::new(self.sigma, self.eps_r, 0.5 * (self.s_range[0] + self.s_range[1]))
    }

    pub fn covers(&self, freq_hz: f64) -> bool {
        let g = freq_hz / 1e9;
        self.band_ghz[0] <= g && g <= self.band_ghz[1]
    }

    fn names(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(&self.label).chain(&self.synonyms).map(|s| normalize(s))
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Deserialize, Serialize)]
struct DbFile {
    #[serde(default)]
    material: Vec<RadioMaterial>,
}

/// Immutable label -> material table with case-insensitive synonym lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDb {
    entries: Vec<RadioMaterial>,
}

const DEFAULT_DB: &str = include_str!("../../data/materials_60ghz.toml");

impl MaterialDb {
    pub fn from_entries(entries: Vec<RadioMaterial>) -> Result<Self> {
        for e in &entries {
            e.validate()?;
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[..i] {
                let bands_overlap = a.band_ghz[0] <= b.band_ghz[1] && b.band_ghz[0] <= a.band_ghz[1];
                let same_label = normalize(&a.label) == normalize(&b.label);
                let names_clash = a.names().any(|n| b.names().any(|m| m == n));
                if (same_label && bands_overlap) || (!same_label && names_clash) {
                    return Err(Error::DuplicateLabel(a.label.clone()));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: DbFile = toml::from_str(text).map_err(|e| Error::parse("material database", e.to_string()))?;
        Self::from_entries(file.material)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The shipped 60.5 GHz table.
    pub fn default_60ghz() -> Self {
        Self::parse(DEFAULT_DB).expect("bundled material database is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&DbFile { material: self.entries.clone() }).expect("serializable")
    }

    pub fn entries(&self) -> &[RadioMaterial] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First record whose label or synonym matches `name`.
    pub fn lookup(&self, name: &str) -> Result<&RadioMaterial> {
        let key = normalize(name);
        self.entries.iter().find(|e| e.names().any(|n| n == key)).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Record matching `name` whose band covers `freq_hz`.
    pub fn lookup_at(&self, name: &str, freq_hz: f64) -> Result<&RadioMaterial> {
        let key = normalize(name);
        self.entries
            .iter()
            .find(|e| e.covers(freq_hz) && e.names().any(|n| n == key))
            .ok_or_else(|| Error::UnknownLabel(format!("{name} @ {:.3} GHz", freq_hz / 1e9)))
    }
}
