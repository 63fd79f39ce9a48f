//! Accuracy assessment: one-to-one crown matching by Dice overlap and the
//! derived detection/delineation metrics.
//!
//! Complement metrics are computed by subtraction (`e_com = 1 - P`,
//! `e_om = 1 - r`) so the identities `P + e_com = 1` and `r + e_om = 1`
//! hold exactly in floating point, not just mathematically.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One matched reference/prediction crown pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub ref_id: usize,
    pub pred_id: usize,
    pub overlap_ratio: f64,
}

/// Matching outcome plus every derived metric.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    /// Detection accuracy (= recall r).
    pub da: f64,
    pub e_com: f64,
    pub e_om: f64,
    /// Precision.
    pub p: f64,
    pub f_score: f64,
    /// Crown accuracy: mean overlap ratio over matched pairs.
    pub ca: f64,
    /// Set when a zero denominator forced a metric to 0.
    pub degenerate: bool,
}

/// Dice-style overlap ratio `2 * a_o / (a_r + a_p)`.
pub fn overlap_ratio(a_o: f64, a_r: f64, a_p: f64) -> Result<f64> {
    if a_r <= 0.0 || a_p <= 0.0 {
        return Err(Error::Input(
            "reference and prediction areas must be positive".into(),
        ));
    }
    if a_o < 0.0 || a_o > a_r.min(a_p) {
        return Err(Error::Input(format!(
            "overlap area {} outside [0, min({}, {})]",
            a_o, a_r, a_p
        )));
    }
    Ok(2.0 * a_o / (a_r + a_p))
}

/// Greedy one-to-one matching: overlapping pairs are visited in descending
/// overlap ratio (ties toward the smaller reference id, then prediction
/// id); a pair is accepted when both crowns are still unmatched and its
/// ratio is at least `gamma`.
pub fn match_crowns(
    refs: &[Vec<(usize, usize)>],
    preds: &[Vec<(usize, usize)>],
    gamma: f64,
) -> Vec<MatchedPair> {
    let mut pred_of_pixel: HashMap<(usize, usize), usize> = HashMap::new();
    for (j, pred) in preds.iter().enumerate() {
        for &px in pred {
            pred_of_pixel.insert(px, j);
        }
    }

    let mut overlap: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, r) in refs.iter().enumerate() {
        for px in r {
            if let Some(&j) = pred_of_pixel.get(px) {
                *overlap.entry((i, j)).or_insert(0) += 1;
            }
        }
    }

    let mut candidates: Vec<MatchedPair> = overlap
        .into_iter()
        .map(|((i, j), o)| MatchedPair {
            ref_id: i,
            pred_id: j,
            overlap_ratio: 2.0 * o as f64 / (refs[i].len() + preds[j].len()) as f64,
        })
        .filter(|p| p.overlap_ratio >= gamma)
        .collect();
    candidates.sort_by(|a, b| {
        b.overlap_ratio
            .total_cmp(&a.overlap_ratio)
            .then_with(|| (a.ref_id, a.pred_id).cmp(&(b.ref_id, b.pred_id)))
    });

    let mut ref_used = vec![false; refs.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut pairs = Vec::new();
    for cand in candidates {
        if ref_used[cand.ref_id] || pred_used[cand.pred_id] {
            continue;
        }
        ref_used[cand.ref_id] = true;
        pred_used[cand.pred_id] = true;
        pairs.push(cand);
    }
    pairs
}

/// Derives every metric from the matched pairs and total crown counts.
pub fn compute_metrics(
    pairs: Vec<MatchedPair>,
    n_refs: usize,
    n_preds: usize,
) -> Result<MatchReport> {
    if n_refs == 0 {
        return Err(Error::Input(
            "metrics need at least one reference crown".into(),
        ));
    }
    let n_tp = pairs.len();
    if n_tp > n_refs || n_tp > n_preds {
        return Err(Error::Input(
            "matched pair count exceeds crown counts".into(),
        ));
    }
    let n_fn = n_refs - n_tp;
    let n_fp = n_preds - n_tp;

    let mut degenerate = false;
    let r = n_tp as f64 / n_refs as f64;
    let e_om = 1.0 - r;
    let (p, e_com) = if n_preds > 0 {
        let p = n_tp as f64 / n_preds as f64;
        (p, 1.0 - p)
    } else {
        degenerate = true;
        (0.0, 0.0)
    };
    let f_score = if r + p > 0.0 {
        2.0 * r * p / (r + p)
    } else {
        degenerate = true;
        0.0
    };
    let ca = if n_tp > 0 {
        pairs.iter().map(|m| m.overlap_ratio).sum::<f64>() / n_tp as f64
    } else {
        0.0
    };

    Ok(MatchReport {
        pairs,
        n_tp,
        n_fp,
        n_fn,
        da: r,
        e_com,
        e_om,
        p,
        f_score,
        ca,
        degenerate,
    })
}

/// Matches and scores in one step.
pub fn evaluate(
    refs: &[Vec<(usize, usize)>],
    preds: &[Vec<(usize, usize)>],
    gamma: f64,
) -> Result<MatchReport> {
    let pairs = match_crowns(refs, preds, gamma);
    compute_metrics(pairs, refs.len(), preds.len())
}
