//! Per-terminal offloading decision and mobility-aware server selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostPair, ServerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenefitReport {
    pub delay_benefit_s: f64,
    pub energy_benefit_j: f64,
    pub overall: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerScore {
    pub server_id: ServerId,
    pub score: f64,
    pub d_now_m: f64,
    pub d_next_m: f64,
    pub alpha: f64,
}

/// `offloaded` is the binary decision; `chosen_server` is set exactly when it is true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub offloaded: bool,
    pub chosen_server: Option<ServerId>,
}

impl OffloadDecision {
    pub const LOCAL: OffloadDecision = OffloadDecision {
        offloaded: false,
        chosen_server: None,
    };

    pub fn offload_to(server: ServerId) -> Self {
        OffloadDecision {
            offloaded: true,
            chosen_server: Some(server),
        }
    }
}

/// One server the terminal could offload to this slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub server_id: ServerId,
    pub d_now_m: f64,
    pub d_next_m: f64,
    pub benefit: f64,
}

/// Weighted delay and energy savings of offloading over local processing.
pub fn evaluate_benefit(local: CostPair, offload: CostPair, lambda: f64) -> Result<BenefitReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config("lambda", format!("must lie in [0, 1], got {lambda}")));
    }
    let delay_benefit_s = local.delay_s - offload.delay_s;
    let energy_benefit_j = local.energy_j - offload.energy_j;
    Ok(BenefitReport {
        delay_benefit_s,
        energy_benefit_j,
        overall: lambda * delay_benefit_s + (1.0 - lambda) * energy_benefit_j,
        lambda,
    })
}

/// Offload only when the overall benefit is strictly positive.
pub fn decide(benefit: &BenefitReport) -> bool {
    benefit.overall > 0.0
}

/// Distance closed over the next slot plus the scaled benefit.
pub fn score_server(d_now: f64, d_next: f64, alpha: f64, overall_benefit: f64) -> f64 {
    (d_now - d_next) + alpha * overall_benefit
}

/// Highest-scoring candidate, lowest id on ties. `None` means no server covers
/// the terminal and it has to process locally.
pub fn select_server(candidates: &[Candidate], alpha: f64) -> Option<ServerScore> {
    candidates
        .iter()
        .map(|c| ServerScore {
            server_id: c.server_id,
            score: score_server(c.d_now_m, c.d_next_m, alpha, c.benefit),
            d_now_m: c.d_now_m,
            d_next_m: c.d_next_m,
            alpha,
        })
        .fold(None, |best: Option<ServerScore>, s| match best {
            Some(b) if b.score > s.score || (b.score == s.score && b.server_id < s.server_id) => Some(b),
            _ => Some(s),
        })
}

/// Benefit weight for a terminal moving at `speed`: `alpha0 * speed / v_ref`.
pub fn alpha_for_speed(alpha0: f64, speed: f64, v_ref: f64) -> f64 {
    alpha0 * speed / v_ref
}
