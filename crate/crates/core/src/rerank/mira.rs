use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::seed;

use super::{argmax, sentence_bleu, FeatureWeights, NBestList};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiraConfig {
    /// Step-size cap.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MiraConfig {
    fn default() -> Self {
        MiraConfig { c: 0.01, epochs: 10, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiraResult {
    /// Average of the weight vector after every update.
    pub weights: FeatureWeights,
    pub final_weights: FeatureWeights,
    pub updates: usize,
    /// Every segment had hypotheses of identical BLEU; `weights` is the initial vector.
    pub degenerate: bool,
    pub config: MiraConfig,
}

/// k-best batch MIRA.
///
/// Each epoch visits the segments in a seeded random order. For a segment,
/// `hope = argmax(w·Φ + bleu)` and `fear = argmax(w·Φ - bleu)` (ties to the
/// lowest index). When `bleu(hope) > bleu(fear)` the hinge loss
/// `max(0, Δbleu - w·ΔΦ)` drives the step `η = min(C, loss / ‖ΔΦ‖²)` and
/// `w += η ΔΦ`. Sentence BLEU is on the 0-100 scale.
pub fn train_mira(dev: &[(NBestList, Sentence)], init: &FeatureWeights, cfg: &MiraConfig) -> Result<MiraResult> {
    if !(cfg.c > 0.0) {
        return Err(Error::param("c", "must be positive"));
    }
    if dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let names: Vec<String> = init.weights.keys().cloned().collect();
    let mut phis: Vec<Vec<Vec<f64>>> = Vec::with_capacity(dev.len());
    let mut bleus: Vec<Vec<f64>> = Vec::with_capacity(dev.len());
    for (nb, reference) in dev {
        if nb.hypotheses.is_empty() {
            return Err(Error::param("nbest", format!("segment {} has no hypotheses", nb.segment_id)));
        }
        let mut seg = Vec::with_capacity(nb.hypotheses.len());
        for h in &nb.hypotheses {
            init.check(h)?;
            seg.push(names.iter().map(|n| h.value(n).expect("checked")).collect());
        }
        phis.push(seg);
        bleus.push(nb.hypotheses.iter().map(|h| sentence_bleu(&h.text, reference)).collect());
    }

    let degenerate = bleus.iter().all(|b| b.iter().all(|&x| x == b[0]));
    let mut w: Vec<f64> = names.iter().map(|n| init.get(n)).collect();
    let mut sum = vec![0.0; w.len()];
    let mut updates = 0usize;
    let dot = |w: &[f64], phi: &[f64]| w.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();

    if !degenerate {
        let mut order: Vec<usize> = (0..dev.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut seed::derived_rng(cfg.seed, &[epoch as u64]));
            for &s in &order {
                let (phi, bleu) = (&phis[s], &bleus[s]);
                let scores: Vec<f64> = phi.iter().map(|p| dot(&w, p)).collect();
                let hope = argmax(scores.iter().zip(bleu).map(|(a, b)| a + b));
                let fear = argmax(scores.iter().zip(bleu).map(|(a, b)| a - b));
                if bleu[hope] <= bleu[fear] {
                    continue;
                }
                let delta: Vec<f64> = phi[hope].iter().zip(&phi[fear]).map(|(a, b)| a - b).collect();
                let loss = ((bleu[hope] - bleu[fear]) - dot(&w, &delta)).max(0.0);
                let norm2: f64 = delta.iter().map(|x| x * x).sum();
                if loss <= 0.0 || norm2 == 0.0 {
                    continue;
                }
                let eta = cfg.c.min(loss / norm2);
                for (wi, d) in w.iter_mut().zip(&delta) {
                    *wi += eta * d;
                }
                for (si, wi) in sum.iter_mut().zip(&w) {
                    *si += wi;
                }
                updates += 1;
            }
        }
    }

    let to_weights = |v: &[f64]| FeatureWeights {
        weights: names.iter().cloned().zip(v.iter().copied()).collect(),
    };
    let averaged = if updates == 0 {
        init.clone()
    } else {
        to_weights(&sum.iter().map(|s| s / updates as f64).collect::<Vec<_>>())
    };
    Ok(MiraResult {
        weights: averaged,
        final_weights: to_weights(&w),
        updates,
        degenerate,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Hypothesis, MODEL_SCORE};
    use super::*;

    fn seg(hyps: &[(&str, f64)], reference: &str) -> (NBestList, Sentence) {
        let nb = NBestList {
            segment_id: 0,
            source: Sentence::default(),
            hypotheses: hyps
                .iter()
                .map(|&(t, f)| {
                    let mut h = Hypothesis::new(Sentence::new(t).unwrap(), 0.0);
                    h.features.insert("f".into(), f);
                    h
                })
                .collect(),
        };
        (nb, Sentence::new(reference).unwrap())
    }

    #[test]
    fn single_update() {
        let dev = vec![seg(&[("a b c d", 1.0), ("x y z w", 0.0)], "a b c d")];
        // Both hypotheses share model_score 0, so the update is one-dimensional.
        let init = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        let cfg = MiraConfig { c: 1.0, epochs: 1, seed: 0 };
        let r = train_mira(&dev, &init, &cfg).unwrap();
        assert_eq!(r.updates, 1);
        assert_eq!(r.weights.get("f"), 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn degenerate_returns_initial() {
        let dev = vec![seg(&[("a", 1.0), ("a", 0.0)], "a")];
        let mut init = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        init.set(MODEL_SCORE, 0.5);
        let r = train_mira(&dev, &init, &MiraConfig::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.weights, init);
    }

    #[test]
    fn rejects_bad_c() {
        let dev = vec![seg(&[("a", 1.0)], "a")];
        let cfg = MiraConfig { c: 0.0, ..MiraConfig::default() };
        assert!(train_mira(&dev, &FeatureWeights::zeros([MODEL_SCORE, "f"]), &cfg).is_err());
    }
}
