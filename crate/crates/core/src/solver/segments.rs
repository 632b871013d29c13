//! Chord (secant) linearization of the convex line loss.
//!
//! The loss curve on `[0, E_cap]` is split into `k` equal segments and each
//! is replaced by its chord. Chords lie above a convex curve, so any flow
//! split feasible for the chords is feasible for the true quadratic.

use super::{LinearExpr, LinearProgram, VarId};
use crate::affinity::energy_loss;
use crate::model::CableModel;

#[derive(Debug, Clone, PartialEq)]
pub struct LossSegments {
    pub length_km: f64,
    /// `0 = e_0 < e_1 < … < e_k = E_cap`.
    pub breakpoints: Vec<f64>,
    /// Chord slope of the loss over `[e_{m−1}, e_m]`.
    pub slopes: Vec<f64>,
}

impl LossSegments {
    pub fn cap(&self) -> f64 {
        *self.breakpoints.last().unwrap_or(&0.0)
    }

    pub fn width(&self, m: usize) -> f64 {
        self.breakpoints[m + 1] - self.breakpoints[m]
    }

    /// Chord-model loss of sending `e` Wh with segments filled in order.
    pub fn modeled_loss(&self, e: f64) -> f64 {
        let mut rest = e.clamp(0.0, self.cap());
        let mut loss = 0.0;
        for (m, s) in self.slopes.iter().enumerate() {
            let f = rest.min(self.width(m));
            loss += s * f;
            rest -= f;
            if rest <= 0.0 {
                break;
            }
        }
        loss
    }
}

/// # Panics
/// If `cap` is not positive or `k == 0`.
pub fn build_loss_segments(length_km: f64, cap: f64, k: usize, cable: &CableModel, tau: f64) -> LossSegments {
    assert!(cap > 0.0 && k >= 1, "loss segments need a positive cap and at least one segment");
    let breakpoints: Vec<f64> = (0..=k).map(|m| cap * m as f64 / k as f64).collect();
    let slopes = breakpoints
        .windows(2)
        .map(|w| (energy_loss(w[1], length_km, cable, tau) - energy_loss(w[0], length_km, cable, tau)) / (w[1] - w[0]))
        .collect();
    LossSegments { length_km, breakpoints, slopes }
}

/// Flow variables of one directed link in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEmbedding {
    pub segment_vars: Vec<VarId>,
    /// Energy pushed into the line, `q^→ = Σ f_m`.
    pub forward: LinearExpr,
    /// Energy arriving at the far end, `q^← = Σ (1 − s_m) f_m`.
    pub delivered: LinearExpr,
}

/// Adds one bounded variable per segment. Delivered energy is the chord
/// bound taken with equality, since delivering less than the line carries is
/// never cheaper. Segments whose chord slope reaches 1 deliver nothing and
/// are left out.
pub fn embed_link(program: &mut LinearProgram, segments: &LossSegments) -> LinkEmbedding {
    let mut emb = LinkEmbedding { segment_vars: Vec::new(), forward: LinearExpr::new(), delivered: LinearExpr::new() };
    for (m, &s) in segments.slopes.iter().enumerate() {
        if s >= 1.0 {
            break;
        }
        let v = program.add_var(0.0, 0.0, segments.width(m));
        emb.segment_vars.push(v);
        emb.forward.add(v, 1.0);
        emb.delivered.add(v, 1.0 - s);
    }
    emb
}
