use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{self, Sentence};
use crate::error::{Error, Result};

use super::{Hypothesis, NBestList};

pub const DELIMITER: &str = " ||| ";
pub const DEFAULT_BEAM: usize = 10;

fn parse_features(field: &str, origin: &Path, line: usize) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in field.split_whitespace() {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, line, format!("feature `{item}` is not name=value")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::parse(origin, line, format!("feature `{name}` has non-numeric value")))?;
        if name.is_empty() || out.insert(name.to_owned(), v).is_some() {
            return Err(Error::parse(origin, line, format!("empty or repeated feature name `{name}`")));
        }
    }
    Ok(out)
}

/// Parses `<id> ||| <hypothesis> ||| <name=value ...> ||| <model_score>` lines.
/// Lines of a segment must be contiguous and ids strictly increasing.
/// Source sentences are left empty.
pub fn parse_nbest(text: &str, beam: usize, origin: &Path) -> Result<Vec<NBestList>> {
    let mut lists: Vec<NBestList> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let fields: Vec<&str> = line.split(DELIMITER).collect();
        let [id, hyp, feats, score] = fields[..] else {
            return Err(Error::parse(origin, ln, format!("expected 4 fields separated by `{}`", DELIMITER.trim())));
        };
        let id: u64 = id.trim().parse().map_err(|_| Error::parse(origin, ln, "bad segment id"))?;
        let model_score: f64 = score.trim().parse().map_err(|_| Error::parse(origin, ln, "bad model score"))?;
        if !model_score.is_finite() {
            return Err(Error::parse(origin, ln, "model score must be finite"));
        }
        let h = Hypothesis {
            text: Sentence::new(hyp).map_err(|e| Error::parse(origin, ln, e.to_string()))?,
            model_score,
            features: parse_features(feats, origin, ln)?,
        };
        match lists.last_mut() {
            Some(last) if last.segment_id == id => {
                if last.hypotheses.len() == beam {
                    return Err(Error::parse(origin, ln, format!("segment {id} has more than {beam} hypotheses")));
                }
                if last.hypotheses[0].features.keys().ne(h.features.keys()) {
                    return Err(Error::parse(origin, ln, "feature names differ within a segment"));
                }
                last.hypotheses.push(h);
            }
            Some(last) if last.segment_id > id => {
                return Err(Error::parse(origin, ln, format!("segment id {id} after {}", last.segment_id)));
            }
            _ => lists.push(NBestList {
                segment_id: id,
                source: Sentence::default(),
                hypotheses: vec![h],
            }),
        }
    }
    Ok(lists)
}

pub fn format_nbest(lists: &[NBestList]) -> String {
    let mut out = String::new();
    for nb in lists {
        for h in &nb.hypotheses {
            let feats: Vec<String> = h.features.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                out,
                "{}{DELIMITER}{}{DELIMITER}{}{DELIMITER}{}",
                nb.segment_id,
                h.text,
                feats.join(" "),
                h.model_score
            );
        }
    }
    out
}

pub fn read_nbest(path: impl AsRef<Path>, beam: usize) -> Result<Vec<NBestList>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_nbest(&text, beam, path)
}

pub fn write_nbest(lists: &[NBestList], path: impl AsRef<Path>) -> Result<()> {
    corpus::write_bytes(path.as_ref(), format_nbest(lists).as_bytes())
}

/// Sets each list's source from `sources`, matched by position.
pub fn attach_sources(lists: &mut [NBestList], sources: &[Sentence]) -> Result<()> {
    if lists.len() != sources.len() {
        return Err(Error::param("sources", format!("{} sources for {} n-best lists", sources.len(), lists.len())));
    }
    for (nb, s) in lists.iter_mut().zip(sources) {
        nb.source = s.clone();
    }
    Ok(())
}
