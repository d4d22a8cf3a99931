use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{count_lines, sha256_hex, Provenance};
use crate::error::{Error, Result};
use crate::selftrain::RoundLedger;

use super::ops::ArtifactKind;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub toolkit: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub role: String,
    /// Path relative to the output directory.
    pub name: String,
    pub kind: ArtifactKind,
    /// Line count of the written file.
    pub count: usize,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<Provenance>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Position in the config file.
    pub index: usize,
    pub name: String,
    pub op: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<RoundLedger>,
    /// Wall time of the stage; the only field allowed to differ between reruns.
    pub wall_ms: u64,
}

impl StageRecord {
    /// Equal when everything that determines the outputs is equal.
    pub fn same_work(&self, other: &StageRecord) -> bool {
        self.index == other.index
            && self.name == other.name
            && self.op == other.op
            && self.seed == other.seed
            && self.params == other.params
            && self.inputs == other.inputs
            && self.outputs.iter().map(|o| (&o.role, &o.name)).eq(other.outputs.iter().map(|o| (&o.role, &o.name)))
    }
}

impl PipelineManifest {
    pub fn new(seed: u64, config_sha256: String) -> Self {
        PipelineManifest {
            toolkit: concat!("lowres-mt ", env!("CARGO_PKG_VERSION")).to_owned(),
            seed,
            config_sha256,
            stages: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes through a temporary file so a crash never leaves a torn manifest.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, self.to_json()).map_err(|e| Error::io(Path::new(&tmp), e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Copy with every `wall_ms` zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        let mut m = self.clone();
        m.stages.iter_mut().for_each(|s| s.wall_ms = 0);
        m
    }

    pub fn output(&self, name: &str) -> Option<&OutputRecord> {
        self.stages.iter().flat_map(|s| &s.outputs).find(|o| o.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drift {
    pub name: String,
    pub expected_count: usize,
    pub actual_count: usize,
    pub expected_sha256: String,
    pub actual_sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub missing: Vec<String>,
    pub drift: Vec<Drift>,
    /// Ledger recurrences that do not hold, prefixed with the stage name.
    pub ledger: Vec<String>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.drift.is_empty() && self.ledger.is_empty()
    }
}

/// Re-hashes and re-counts every recorded output under `out_dir` and
/// re-evaluates the self-training ledgers against the recorded counts.
pub fn verify(manifest: &PipelineManifest, out_dir: impl AsRef<Path>) -> VerifyReport {
    let out_dir = out_dir.as_ref();
    let mut report = VerifyReport::default();
    let counts: BTreeMap<&str, usize> = manifest
        .stages
        .iter()
        .flat_map(|s| &s.outputs)
        .map(|o| (o.name.as_str(), o.count))
        .collect();
    for stage in &manifest.stages {
        for o in &stage.outputs {
            report.checked += 1;
            match std::fs::read(out_dir.join(&o.name)) {
                Err(_) => report.missing.push(o.name.clone()),
                Ok(bytes) => {
                    let (count, sha) = (count_lines(&bytes), sha256_hex(&bytes));
                    if count != o.count || sha != o.sha256 {
                        report.drift.push(Drift {
                            name: o.name.clone(),
                            expected_count: o.count,
                            actual_count: count,
                            expected_sha256: o.sha256.clone(),
                            actual_sha256: sha,
                        });
                    }
                }
            }
        }
        if let Some(ledger) = &stage.ledger {
            let mut bad: Vec<String> = ledger.check();
            let role_count = |role: &str, records: &[InputRecord]| {
                records.iter().find(|r| r.role == role).and_then(|r| counts.get(r.name.as_str()).copied())
            };
            let mut tie = |row: &str, recorded: Option<usize>| {
                if let (Some(want), Some(got)) = (recorded, ledger.get(row)) {
                    if want != got {
                        bad.push(format!("{row}: ledger says {got}, recorded file has {want}"));
                    }
                }
            };
            tie("authentic", role_count("parallel", &stage.inputs));
            tie("previous", role_count("previous", &stage.inputs));
            tie("combined", stage.outputs.iter().find(|o| o.role == "combined").map(|o| o.count));
            report.ledger.extend(bad.into_iter().map(|b| format!("{}: {b}", stage.name)));
        }
    }
    report
}
