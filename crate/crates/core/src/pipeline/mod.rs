//! Declarative stage runner with a hashed manifest.
//!
//! A run reads a [`PipelineConfig`], executes its stages in dependency order
//! and writes every output into one directory together with
//! `manifest.json` (the checkpoint, rewritten after each stage) and
//! `events.jsonl` (one JSON object per line: run and stage start, finish,
//! skip and failure, with timings). The directory is owned by one run at a
//! time through a `.lock` file.
//!
//! Stage seeds are `seed::derive(global, [stage index])` unless a stage pins
//! its own; ops derive per-sentence streams from that. `LOWRES_SEED`
//! overrides the global seed when [`env_seed`] is consulted (the CLI does).

mod config;
mod manifest;
mod ops;

pub use config::{ExternalInput, PipelineConfig, StageConfig};
pub use manifest::{verify, Drift, InputRecord, OutputRecord, PipelineManifest, StageRecord, VerifyReport, MANIFEST_FILE};
pub use ops::{spec as op_spec, Artifact, ArtifactKind, OpSpec, Role, OPS};

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::corpus::{self, count_lines, sha256_hex};
use crate::error::{Error, Result};
use crate::seed;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const LOCK_FILE: &str = ".lock";
pub const SEED_ENV: &str = "LOWRES_SEED";

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Directory that relative external input paths are resolved against.
    pub base_dir: PathBuf,
    pub seed: Option<u64>,
    /// Skip stages whose recorded work and outputs are unchanged.
    pub resume: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            base_dir: PathBuf::from("."),
            seed: None,
            resume: false,
        }
    }
}

/// Reads `LOWRES_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config {
            stage: "<env>".into(),
            field: SEED_ENV.into(),
            reason: format!("`{v}` is not an unsigned integer"),
        }),
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

struct Events(File);

impl Events {
    fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(EVENTS_FILE);
        let f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Events(f))
    }

    fn emit(&mut self, mut event: serde_json::Value) {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        event["ts_ms"] = json!(ts);
        let _ = writeln!(self.0, "{event}");
    }
}

/// Artifacts by name, loaded lazily from disk when a stage was skipped or
/// the input is external.
struct Store<'a> {
    config: &'a PipelineConfig,
    opts: &'a RunOptions,
    loaded: BTreeMap<String, Artifact>,
    hashes: BTreeMap<String, String>,
    kinds: BTreeMap<String, ArtifactKind>,
    provenance: BTreeMap<String, Vec<corpus::Provenance>>,
}

impl<'a> Store<'a> {
    fn external_path(&self, name: &str) -> Option<PathBuf> {
        self.config.external.get(name).map(|e| self.opts.base_dir.join(&e.path))
    }

    fn hash(&mut self, name: &str) -> Result<String> {
        if let Some(h) = self.hashes.get(name) {
            return Ok(h.clone());
        }
        let path = self
            .external_path(name)
            .ok_or_else(|| Error::MissingResource(format!("artifact `{name}`")))?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let h = sha256_hex(&bytes);
        self.hashes.insert(name.to_owned(), h.clone());
        Ok(h)
    }

    fn load(&mut self, name: &str) -> Result<()> {
        if self.loaded.contains_key(name) {
            return Ok(());
        }
        let (path, kind) = match self.config.external.get(name) {
            Some(e) => (self.opts.base_dir.join(&e.path), e.kind),
            None => {
                let kind = *self.kinds.get(name).ok_or_else(|| Error::MissingResource(format!("artifact `{name}`")))?;
                (self.opts.out_dir.join(name), kind)
            }
        };
        let mut a = Artifact::load(&path, kind)?;
        if let (Artifact::Corpus(c), Some(flags)) = (&mut a, self.provenance.get(name)) {
            *c = c.clone().with_provenance_set(flags.iter().copied());
        }
        self.loaded.insert(name.to_owned(), a);
        Ok(())
    }

    fn record(&mut self, o: &OutputRecord) {
        self.hashes.insert(o.name.clone(), o.sha256.clone());
        self.kinds.insert(o.name.clone(), o.kind);
        if let Some(p) = &o.provenance {
            self.provenance.insert(o.name.clone(), p.clone());
        }
    }
}

fn config_hash(config: &PipelineConfig, seed: u64) -> String {
    let mut c = config.clone();
    c.seed = seed;
    sha256_hex(c.to_toml().as_bytes())
}

fn outputs_intact(out_dir: &Path, rec: &StageRecord) -> bool {
    rec.outputs.iter().all(|o| fs::read(out_dir.join(&o.name)).is_ok_and(|b| sha256_hex(&b) == o.sha256))
}

/// Runs every stage and returns the final manifest, which is also written to
/// `<out_dir>/manifest.json`.
pub fn run(config: &PipelineConfig, opts: &RunOptions) -> Result<PipelineManifest> {
    let order = config.validate()?;
    let global_seed = opts.seed.unwrap_or(config.seed);
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let _lock = Lock::acquire(&opts.out_dir)?;
    let manifest_path = opts.out_dir.join(MANIFEST_FILE);
    let previous = if opts.resume && manifest_path.exists() {
        Some(PipelineManifest::load(&manifest_path)?)
    } else {
        None
    };

    let mut events = Events::open(&opts.out_dir)?;
    let mut manifest = PipelineManifest::new(global_seed, config_hash(config, global_seed));
    manifest.save(&manifest_path)?;
    events.emit(json!({"event": "run_start", "seed": global_seed, "stages": order.len(), "resume": opts.resume}));

    let mut store = Store {
        config,
        opts,
        loaded: BTreeMap::new(),
        hashes: BTreeMap::new(),
        kinds: BTreeMap::new(),
        provenance: BTreeMap::new(),
    };
    let run_start = Instant::now();
    for &i in &order {
        let st = &config.stages[i];
        let stage_seed = st.seed.unwrap_or_else(|| seed::derive(global_seed, &[i as u64]));
        let fail = |e: Error| Error::Stage {
            stage: st.name.clone(),
            source: Box::new(e),
        };
        let inputs: Vec<InputRecord> = st
            .inputs
            .iter()
            .map(|(role, name)| {
                Ok(InputRecord {
                    role: role.clone(),
                    name: name.clone(),
                    sha256: store.hash(name)?,
                })
            })
            .collect::<Result<_>>()
            .map_err(fail)?;
        let mut rec = StageRecord {
            index: i,
            name: st.name.clone(),
            op: st.op.clone(),
            seed: stage_seed,
            params: serde_json::to_value(&st.params)?,
            inputs,
            outputs: st
                .outputs
                .iter()
                .map(|(role, name)| OutputRecord {
                    role: role.clone(),
                    name: name.clone(),
                    kind: ArtifactKind::Text,
                    count: 0,
                    sha256: String::new(),
                    provenance: None,
                })
                .collect(),
            ledger: None,
            wall_ms: 0,
        };

        let reusable = previous
            .as_ref()
            .and_then(|p| p.stages.iter().find(|s| s.index == i))
            .filter(|old| old.same_work(&rec) && outputs_intact(&opts.out_dir, old));
        if let Some(old) = reusable {
            events.emit(json!({"event": "stage_skipped", "stage": st.name, "index": i}));
            old.outputs.iter().for_each(|o| store.record(o));
            manifest.stages.push(old.clone());
            manifest.save(&manifest_path)?;
            continue;
        }

        events.emit(json!({"event": "stage_start", "stage": st.name, "index": i, "op": st.op, "seed": stage_seed}));
        let started = Instant::now();
        let result = execute_stage(st, stage_seed, &mut store, &mut rec);
        match result {
            Ok(()) => {
                rec.wall_ms = started.elapsed().as_millis() as u64;
                let counts: BTreeMap<&str, usize> = rec.outputs.iter().map(|o| (o.name.as_str(), o.count)).collect();
                events.emit(json!({"event": "stage_done", "stage": st.name, "index": i, "counts": counts, "wall_ms": rec.wall_ms}));
                manifest.stages.push(rec);
                manifest.save(&manifest_path)?;
            }
            Err(e) => {
                events.emit(json!({"event": "stage_failed", "stage": st.name, "index": i, "error": e.to_string()}));
                return Err(fail(e));
            }
        }
    }
    events.emit(json!({"event": "run_done", "stages": manifest.stages.len(), "wall_ms": run_start.elapsed().as_millis() as u64}));
    Ok(manifest)
}

fn execute_stage(st: &StageConfig, stage_seed: u64, store: &mut Store<'_>, rec: &mut StageRecord) -> Result<()> {
    for name in st.inputs.values() {
        store.load(name)?;
    }
    let map = st
        .inputs
        .iter()
        .map(|(role, name)| (role.as_str(), (name.as_str(), &store.loaded[name])))
        .collect();
    let params = ops::Params::new(&st.name, &st.params);
    let mut produced = ops::execute(&st.op, &params, &ops::Inputs::new(&st.name, map), &st.outputs, stage_seed)?;
    if let Some(ledger) = &produced.ledger {
        let bad = ledger.check();
        if !bad.is_empty() {
            return Err(Error::Config {
                stage: st.name.clone(),
                field: "ledger".into(),
                reason: format!("recurrence violated: {}", bad.join("; ")),
            });
        }
    }
    for o in &mut rec.outputs {
        let artifact = produced
            .outputs
            .remove(&o.role)
            .ok_or_else(|| Error::MissingResource(format!("`{}` did not produce output `{}`", st.op, o.role)))?;
        let bytes = artifact.to_bytes();
        corpus::write_bytes(&store.opts.out_dir.join(&o.name), &bytes)?;
        o.kind = artifact.kind();
        o.count = count_lines(&bytes);
        o.sha256 = sha256_hex(&bytes);
        o.provenance = ops::provenance_of(&artifact);
        store.record(o);
        store.loaded.insert(o.name.clone(), artifact);
    }
    rec.ledger = produced.ledger;
    Ok(())
}

/// Loads a config file and runs it; relative external paths and `out_dir`
/// resolve against the file's directory. `out_dir` overrides the config.
pub fn run_file(path: impl AsRef<Path>, out_dir: Option<PathBuf>, seed: Option<u64>, resume: bool) -> Result<PipelineManifest> {
    let path = path.as_ref();
    let config = PipelineConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (out_dir, &config.out_dir) {
        (Some(o), _) => o,
        (None, Some(o)) => base.join(o),
        (None, None) => {
            return Err(Error::Config {
                stage: "<config>".into(),
                field: "out_dir".into(),
                reason: "no output directory given".into(),
            })
        }
    };
    run(
        &config,
        &RunOptions {
            out_dir: out,
            base_dir: base,
            seed,
            resume,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        seed = 7
        [[stage]]
        name = "gen"
        op = "toy.generate"
        outputs = { parallel = "auth.tsv", mono_src = "mono.src", mono_tgt = "mono.tgt" }
        params = { vocab = 60, parallel = 40, mono_src = 10, mono_tgt = 30 }
        [[stage]]
        name = "r1"
        op = "selftrain.round"
        inputs = { parallel = "auth.tsv", mono_src = "mono.src", mono_tgt = "mono.tgt" }
        outputs = { combined = "r1.tsv", ledger = "r1.json" }
        params = { round = 1, upsample = 2, teacher = "identity" }
    "#;

    #[test]
    fn empty_config_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::from_toml("seed = 3").unwrap();
        let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
        assert!(m.stages.is_empty());
        assert!(dir.path().join(MANIFEST_FILE).exists());
        assert!(!dir.path().join(LOCK_FILE).exists());
    }

    #[test]
    fn small_round_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::from_toml(SMALL).unwrap();
        let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
        let ledger = m.stages[1].ledger.as_ref().unwrap();
        assert_eq!(ledger.get("synthetic"), Some(30 + 10 + 40 + 40));
        assert_eq!(ledger.get("combined"), Some(120 + 80));
        assert!(verify(&m, dir.path()).is_clean());

        let path = dir.path().join("r1.tsv");
        let text = fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        fs::write(&path, truncated).unwrap();
        let rep = verify(&m, dir.path());
        assert_eq!(rep.drift.len(), 1);
        assert_eq!((rep.drift[0].expected_count, rep.drift[0].actual_count), (200, 5));
        fs::remove_file(dir.path().join("r1.json")).unwrap();
        assert_eq!(verify(&m, dir.path()).missing, vec!["r1.json".to_owned()]);
    }

    #[test]
    fn resume_reruns_only_missing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::from_toml(SMALL).unwrap();
        let first = run(&cfg, &RunOptions::new(dir.path())).unwrap();
        fs::remove_file(dir.path().join("r1.tsv")).unwrap();
        let opts = RunOptions {
            resume: true,
            ..RunOptions::new(dir.path())
        };
        let second = run(&cfg, &opts).unwrap();
        assert_eq!(second.stages[0], first.stages[0]);
        assert_eq!(second.without_timing(), first.without_timing());
        let events = fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap();
        let last_run: Vec<&str> = events.lines().skip_while(|l| !l.contains("\"resume\":true")).collect();
        assert_eq!(last_run.iter().filter(|l| l.contains("stage_skipped")).count(), 1);
        assert_eq!(last_run.iter().filter(|l| l.contains("stage_start")).count(), 1);
        assert!(last_run.iter().any(|l| l.contains("stage_start") && l.contains("\"r1\"")));
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LOCK_FILE), "1").unwrap();
        let cfg = PipelineConfig::from_toml("seed = 1").unwrap();
        assert!(matches!(run(&cfg, &RunOptions::new(dir.path())), Err(Error::Locked(_))));
    }

    #[test]
    fn failure_keeps_completed_stages() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::from_toml(
            r#"
            seed = 1
            [[stage]]
            name = "gen"
            op = "toy.generate"
            outputs = { parallel = "p.tsv" }
            params = { vocab = 20, parallel = 5 }
            [[stage]]
            name = "split"
            op = "corpus.split"
            inputs = { corpus = "p.tsv" }
            outputs = { train = "train.tsv" }
            params = { valid = 10 }
        "#,
        )
        .unwrap();
        match run(&cfg, &RunOptions::new(dir.path())) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "split"),
            other => panic!("{other:?}"),
        }
        let m = PipelineManifest::load(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.stages.len(), 1);
        assert!(dir.path().join("p.tsv").exists());
    }

    #[test]
    fn seed_changes_outputs() {
        let cfg = PipelineConfig::from_toml(SMALL).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = run(&cfg, &RunOptions::new(a.path())).unwrap();
        let mb = run(&cfg, &RunOptions { seed: Some(8), ..RunOptions::new(b.path()) }).unwrap();
        assert_ne!(ma.stages[0].outputs[0].sha256, mb.stages[0].outputs[0].sha256);
    }
}
