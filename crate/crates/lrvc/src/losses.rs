//! Training losses: self-reconstruction, same-speaker pair reconstruction,
//! speaker-embedding cycle consistency, and speaker classification, plus
//! their weighted total per training mode.

use std::fmt;
use std::str::FromStr;

use crate::compute::{NodeId, Real, Tape};
use crate::error::{Error, Result};

/// Which loss terms a training run optimizes. The lattice mirrors the
/// ablation table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossMode {
    SelfSame,
    SelfDiff,
    SelfDiffCycle,
    SelfDiffSpeaker,
    SelfDiffBoth,
}

impl LossMode {
    pub const ALL: [LossMode; 5] = [
        LossMode::SelfSame,
        LossMode::SelfDiff,
        LossMode::SelfDiffCycle,
        LossMode::SelfDiffSpeaker,
        LossMode::SelfDiffBoth,
    ];

    pub fn uses_pairs(self) -> bool {
        !matches!(self, LossMode::SelfSame)
    }

    pub fn cycle_enabled(self) -> bool {
        matches!(self, LossMode::SelfDiffCycle | LossMode::SelfDiffBoth)
    }

    pub fn speaker_enabled(self) -> bool {
        matches!(self, LossMode::SelfDiffSpeaker | LossMode::SelfDiffBoth)
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossMode::SelfSame => "self-same",
            LossMode::SelfDiff => "self-diff",
            LossMode::SelfDiffCycle => "self-diff+cycle",
            LossMode::SelfDiffSpeaker => "self-diff+speaker",
            LossMode::SelfDiffBoth => "self-diff+both",
        };
        write!(f, "{s}")
    }
}

impl FromStr for LossMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self-same" => Ok(LossMode::SelfSame),
            "self-diff" => Ok(LossMode::SelfDiff),
            "self-diff+cycle" => Ok(LossMode::SelfDiffCycle),
            "self-diff+speaker" => Ok(LossMode::SelfDiffSpeaker),
            "self-diff+both" => Ok(LossMode::SelfDiffBoth),
            other => Err(Error::Argument(format!(
                "unknown loss mode {other:?} (expected self-same, self-diff, \
                 self-diff+cycle, self-diff+speaker, or self-diff+both)"
            ))),
        }
    }
}

impl TryFrom<String> for LossMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossMode> for String {
    fn from(m: LossMode) -> String {
        m.to_string()
    }
}

/// Combination weights for the optional terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_cycle: f64,
    pub lambda_speaker: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_cycle: 1.0, lambda_speaker: 1.0 }
    }
}

/// Per-step loss record: every component (0 when disabled) plus the
/// weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub self_same: f64,
    pub self_diff: f64,
    pub cycle: f64,
    pub speaker: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossBreakdown {
    pub fn zeros(weights: LossWeights) -> Self {
        LossBreakdown { self_same: 0.0, self_diff: 0.0, cycle: 0.0, speaker: 0.0, total: 0.0, weights }
    }

    /// Elementwise mean over a batch of breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> Option<LossBreakdown> {
        let n = items.len() as f64;
        let first = items.first()?;
        let mut acc = LossBreakdown::zeros(first.weights);
        for b in items {
            acc.self_same += b.self_same;
            acc.self_diff += b.self_diff;
            acc.cycle += b.cycle;
            acc.speaker += b.speaker;
            acc.total += b.total;
        }
        acc.self_same /= n;
        acc.self_diff /= n;
        acc.cycle /= n;
        acc.speaker /= n;
        acc.total /= n;
        Some(acc)
    }
}

/// ‖x − x̂‖₂ over the whole mel matrix.
pub fn loss_self_same<T: Real>(tape: &mut Tape<T>, x: NodeId, x_hat: NodeId) -> Result<NodeId> {
    tape.l2_distance(x, x_hat)
}

/// ‖x_u − D(c_u, s_v)‖₂ + ‖x_v − D(c_v, s_u)‖₂ for a same-utterance pair.
pub fn loss_self_diff<T: Real>(
    tape: &mut Tape<T>,
    x_u: NodeId,
    x_v: NodeId,
    x_hat_u: NodeId,
    x_hat_v: NodeId,
) -> Result<NodeId> {
    let du = tape.l2_distance(x_u, x_hat_u)?;
    let dv = tape.l2_distance(x_v, x_hat_v)?;
    tape.sum_scalars(&[du, dv])
}

/// ‖s_u − s_v‖₂ + ‖s_u − E_s(x̂_u)‖₂ + ‖s_v − E_s(x̂_v)‖₂.
pub fn loss_cycle<T: Real>(
    tape: &mut Tape<T>,
    s_u: NodeId,
    s_v: NodeId,
    s_u_reencoded: NodeId,
    s_v_reencoded: NodeId,
) -> Result<NodeId> {
    let duv = tape.l2_distance(s_u, s_v)?;
    let du = tape.l2_distance(s_u, s_u_reencoded)?;
    let dv = tape.l2_distance(s_v, s_v_reencoded)?;
    tape.sum_scalars(&[duv, du, dv])
}

/// Cross-entropy of both projected embeddings against the speaker id.
pub fn loss_speaker<T: Real>(
    tape: &mut Tape<T>,
    logits_u: NodeId,
    logits_v: NodeId,
    speaker_index: usize,
) -> Result<NodeId> {
    let lu = tape.softmax_cross_entropy(logits_u, speaker_index)?;
    let lv = tape.softmax_cross_entropy(logits_v, speaker_index)?;
    tape.sum_scalars(&[lu, lv])
}
