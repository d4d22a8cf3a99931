use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ops::{self, ArtifactKind};

/// A pipeline file. The grammar is documented in the repository README.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Output directory, relative to the config file unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub external: BTreeMap<String, ExternalInput>,
    #[serde(default, rename = "stage")]
    pub stages: Vec<StageConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalInput {
    pub path: String,
    pub kind: ArtifactKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub name: String,
    pub op: String,
    /// Role → artifact name.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Role → file name inside the output directory.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    /// Fixed stage seed. Without it the seed is derived from the global seed
    /// and the stage's position in the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: toml::Table,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            stage: "<config>".into(),
            field: "<file>".into(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks names, roles, parameters and references, and returns the
    /// execution order: a topological sort of the stage graph that keeps file
    /// order among independent stages.
    pub fn validate(&self) -> Result<Vec<usize>> {
        let err = |stage: &str, field: &str, reason: String| Error::Config {
            stage: stage.to_owned(),
            field: field.to_owned(),
            reason,
        };
        let mut names = BTreeSet::new();
        let mut producer: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, st) in self.stages.iter().enumerate() {
            if st.name.is_empty() || !names.insert(st.name.as_str()) {
                return Err(err(&st.name, "name", "stage names must be non-empty and unique".into()));
            }
            let spec = ops::spec(&st.op).ok_or_else(|| err(&st.name, "op", format!("unknown operation `{}`", st.op)))?;
            for (table, roles, field) in [(&st.inputs, spec.inputs, "inputs"), (&st.outputs, spec.outputs, "outputs")] {
                for role in table.keys() {
                    if !roles.iter().any(|r| r.name == role) {
                        return Err(err(&st.name, &format!("{field}.{role}"), format!("`{}` has no such role", st.op)));
                    }
                }
                for r in roles.iter().filter(|r| r.required) {
                    if !table.contains_key(r.name) {
                        return Err(err(&st.name, &format!("{field}.{}", r.name), "required".into()));
                    }
                }
            }
            for key in st.params.keys() {
                if !spec.params.contains(&key.as_str()) {
                    return Err(err(&st.name, &format!("params.{key}"), format!("`{}` has no such parameter", st.op)));
                }
            }
            for file in st.outputs.values() {
                if !is_plain_relative(file) {
                    return Err(err(&st.name, "outputs", format!("`{file}` must be a relative path inside the output directory")));
                }
                if self.external.contains_key(file) {
                    return Err(err(&st.name, "outputs", format!("`{file}` shadows an external input")));
                }
                if let Some(&j) = producer.get(file.as_str()) {
                    return Err(err(&st.name, "outputs", format!("`{file}` is already written by stage `{}`", self.stages[j].name)));
                }
                producer.insert(file, i);
            }
        }

        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.stages.len()];
        for (i, st) in self.stages.iter().enumerate() {
            for (role, name) in &st.inputs {
                match producer.get(name.as_str()) {
                    Some(&j) if j == i => return Err(err(&st.name, &format!("inputs.{role}"), "a stage cannot read its own output".into())),
                    Some(&j) => {
                        deps[i].insert(j);
                    }
                    None if self.external.contains_key(name) => {}
                    None => {
                        return Err(err(
                            &st.name,
                            &format!("inputs.{role}"),
                            format!("`{name}` is neither an external input nor produced by any stage"),
                        ))
                    }
                }
            }
        }

        let mut order = Vec::with_capacity(self.stages.len());
        let mut done = vec![false; self.stages.len()];
        while order.len() < self.stages.len() {
            let next = (0..self.stages.len()).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => {
                    let stuck = (0..self.stages.len()).find(|&i| !done[i]).expect("some stage left");
                    return Err(err(&self.stages[stuck].name, "inputs", "stage graph has a cycle".into()));
                }
            }
        }
        Ok(order)
    }
}

fn is_plain_relative(p: &str) -> bool {
    let path = Path::new(p);
    !p.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> PipelineConfig {
        PipelineConfig::from_toml(text).unwrap()
    }

    #[test]
    fn empty_is_valid() {
        assert_eq!(cfg("seed = 1").validate().unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn topological_order() {
        let c = cfg(r#"
            seed = 1
            [[stage]]
            name = "b"
            op = "corpus.swap"
            inputs = { corpus = "a.tsv" }
            outputs = { corpus = "b.tsv" }
            [[stage]]
            name = "a"
            op = "toy.generate"
            outputs = { parallel = "a.tsv" }
            params = { parallel = 5 }
        "#);
        assert_eq!(c.validate().unwrap(), vec![1, 0]);
    }

    #[test]
    fn errors_name_stage_and_field() {
        let c = cfg(r#"
            seed = 1
            [[stage]]
            name = "up"
            op = "corpus.upsample"
            inputs = { corpus = "nowhere" }
            outputs = { corpus = "x" }
        "#);
        match c.validate() {
            Err(Error::Config { stage, field, .. }) => assert_eq!((stage.as_str(), field.as_str()), ("up", "inputs.corpus")),
            other => panic!("{other:?}"),
        }
        let c = cfg(r#"
            seed = 1
            [[stage]]
            name = "g"
            op = "toy.generate"
            outputs = { parallel = "../escape" }
        "#);
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "outputs"));
    }

    #[test]
    fn cycle_rejected() {
        let c = cfg(r#"
            seed = 1
            [[stage]]
            name = "a"
            op = "corpus.swap"
            inputs = { corpus = "b" }
            outputs = { corpus = "a" }
            [[stage]]
            name = "b"
            op = "corpus.swap"
            inputs = { corpus = "a" }
            outputs = { corpus = "b" }
        "#);
        assert!(matches!(c.validate(), Err(Error::Config { reason, .. }) if reason.contains("cycle")));
    }

    #[test]
    fn unknown_param_rejected() {
        let c = cfg(r#"
            seed = 1
            [[stage]]
            name = "g"
            op = "toy.generate"
            outputs = { parallel = "p" }
            params = { parralel = 3 }
        "#);
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "params.parralel"));
    }
}
