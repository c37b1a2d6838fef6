use super::{SimulationReport, VerifyError};
use crate::rational::{from_f64, parse_rational, to_f64, Rational};

/// Weighted RMS log-residual above which a fit is reported as non-geometric.
pub const GEOMETRIC_RESIDUAL: f64 = 0.25;

/// `P(N > n) ~ c_hat * rho_hat^n` on the window.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TailFit {
    #[serde(with = "crate::rational::serde_str")]
    pub rho_hat: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub c_hat: Rational,
    pub window: (u64, u64),
    pub points: usize,
    #[serde(with = "crate::rational::serde_str")]
    pub residual: Rational,
    pub geometric: bool,
}

impl TailFit {
    /// Decay over `k` tosses, e.g. k = 2 for pair-based schemes.
    pub fn rho_per(&self, k: u32) -> f64 {
        to_f64(&self.rho_hat).powi(k as i32)
    }
}

/// Least-squares fit of ln P(N > n) against n, weighted by survivor count.
///
/// Without explicit points, the fit uses the last n of each step of the empirical curve,
/// which lines staircases (pairs, checkpoints) up with their jump points. Points with
/// P = 1 (the idle plateau) or P = 0 are dropped.
pub fn tail_profile(report: &SimulationReport, points: Option<&[u64]>) -> Result<TailFit, VerifyError> {
    let curve: Vec<(u64, f64)> = report
        .tail
        .iter()
        .map(|(n, s)| Ok((*n, to_f64(&parse_rational(s).map_err(|e| VerifyError::BadTarget(e.to_string()))?))))
        .collect::<Result<_, VerifyError>>()?;
    let chosen: Vec<(u64, f64)> = match points {
        Some(ns) => curve.iter().filter(|(n, _)| ns.contains(n)).copied().collect(),
        None => curve
            .iter()
            .enumerate()
            .filter(|(i, (_, v))| curve.get(i + 1).is_none_or(|next| next.1 != *v))
            .map(|(_, c)| *c)
            .collect(),
    };
    let pts: Vec<(f64, f64, f64)> = chosen
        .into_iter()
        .filter(|(_, v)| *v > 0.0 && *v < 1.0)
        .map(|(n, v)| (n as f64, v.ln(), v * report.runs as f64))
        .collect();
    if pts.len() < 3 {
        return Err(VerifyError::InsufficientTail(pts.len()));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| p.2 * (p.1 - icpt - slope * p.0).powi(2)).sum();
    let residual = (rss / sw).sqrt();
    let rho = slope.exp();
    Ok(TailFit {
        rho_hat: from_f64(rho),
        c_hat: from_f64(icpt.exp()),
        window: (pts[0].0 as u64, pts[pts.len() - 1].0 as u64),
        points: pts.len(),
        residual: from_f64(residual),
        geometric: residual <= GEOMETRIC_RESIDUAL && rho < 1.0,
    })
}
