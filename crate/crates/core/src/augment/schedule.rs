use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Bidirectional pretraining, then forward fine-tuning.
    Bipt,
    /// Denoising pretraining, then forward fine-tuning.
    Dpt,
    /// Denoising, then bidirectional, then forward, each run to convergence.
    Combined,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bipt" => Ok(ScheduleKind::Bipt),
            "dpt" => Ok(ScheduleKind::Dpt),
            "combined" => Ok(ScheduleKind::Combined),
            _ => Err(Error::param("kind", format!("unknown schedule `{s}` (bipt, dpt, combined)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Both directions mixed (`src<->tgt`).
    Bidirectional,
    /// The task direction (`src->tgt`).
    Forward,
    /// Noised sentence to clean sentence, same language.
    Denoising,
}

/// Step budget of a stage: a fixed count or "until convergence".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Steps {
    Fixed(u64),
    Open,
}

impl Serialize for Steps {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Steps::Fixed(n) => s.serialize_u64(*n),
            Steps::Open => s.serialize_str("open"),
        }
    }
}

impl<'de> Deserialize<'de> for Steps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Steps;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a step count or \"open\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Steps, E> {
                Ok(Steps::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Steps, E> {
                u64::try_from(v).map(Steps::Fixed).map_err(|_| E::custom("negative step count"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Steps, E> {
                if v == "open" {
                    Ok(Steps::Open)
                } else {
                    Err(E::custom(format!("expected \"open\", got {v:?}")))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStage {
    pub dataset: String,
    pub steps: Steps,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSchedule {
    pub stages: Vec<ScheduleStage>,
}

/// Names of the datasets a schedule may refer to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleDatasets {
    pub bidirectional: Option<String>,
    pub denoising: Option<String>,
    pub forward: Option<String>,
}

impl TrainingSchedule {
    pub fn is_open_ended(&self) -> bool {
        self.stages.iter().any(|s| s.steps == Steps::Open)
    }

    /// Sum of fixed step counts, or `None` for an open-ended schedule.
    pub fn total_steps(&self) -> Option<u64> {
        self.stages
            .iter()
            .map(|s| match s.steps {
                Steps::Fixed(n) => Some(n),
                Steps::Open => None,
            })
            .sum()
    }

    pub fn datasets(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().map(|s| s.dataset.as_str())
    }

    /// Fails on the first stage whose dataset `known` does not recognise.
    pub fn check_datasets(&self, known: impl Fn(&str) -> bool) -> Result<()> {
        match self.stages.iter().find(|s| !known(&s.dataset)) {
            Some(s) => Err(Error::MissingResource(format!("schedule dataset `{}`", s.dataset))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.stages).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stages: Vec<ScheduleStage> = serde_json::from_str(text)?;
        if stages.is_empty() {
            return Err(Error::param("schedule", "no stages"));
        }
        Ok(TrainingSchedule { stages })
    }
}

fn need<'a>(name: &Option<String>, what: &str, kind: ScheduleKind) -> Result<String> {
    name.clone()
        .ok_or_else(|| Error::MissingResource(format!("{kind:?} schedule needs a {what} dataset").to_lowercase()))
}

/// Fixed schedules give the first stage `floor(total / 3)` steps and the
/// second the remainder; the combined schedule is open-ended.
pub fn build_schedule(kind: ScheduleKind, total_steps: u64, datasets: &ScheduleDatasets) -> Result<TrainingSchedule> {
    let forward = need(&datasets.forward, "forward", kind)?;
    let stage = |dataset: String, steps, direction| ScheduleStage { dataset, steps, direction };
    let fixed = |first: ScheduleStage| -> Result<TrainingSchedule> {
        if total_steps == 0 {
            return Err(Error::param("total_steps", "must be positive"));
        }
        let head = total_steps / 3;
        Ok(TrainingSchedule {
            stages: vec![
                ScheduleStage { steps: Steps::Fixed(head), ..first },
                stage(forward.clone(), Steps::Fixed(total_steps - head), Direction::Forward),
            ],
        })
    };
    match kind {
        ScheduleKind::Bipt => {
            let bi = need(&datasets.bidirectional, "bidirectional", kind)?;
            fixed(stage(bi, Steps::Open, Direction::Bidirectional))
        }
        ScheduleKind::Dpt => {
            let dn = need(&datasets.denoising, "denoising", kind)?;
            fixed(stage(dn, Steps::Open, Direction::Denoising))
        }
        ScheduleKind::Combined => {
            let dn = need(&datasets.denoising, "denoising", kind)?;
            let bi = need(&datasets.bidirectional, "bidirectional", kind)?;
            Ok(TrainingSchedule {
                stages: vec![
                    stage(dn, Steps::Open, Direction::Denoising),
                    stage(bi, Steps::Open, Direction::Bidirectional),
                    stage(forward, Steps::Open, Direction::Forward),
                ],
            })
        }
    }
}
