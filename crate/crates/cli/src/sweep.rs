use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use supermult::analysis::{violation_report, Soundness, WitnessKind};
use supermult::channels::{BuiltChannel, ChannelDescriptor, ChannelKind};
use supermult::optimize::OptimizerConfig;
use supermult::{Error, Result};

/// Width of the final bisection bracket around the crossing.
pub const CROSSING_TOL: f64 = 1e-3;

pub const NO_CROSSING: &str = "no crossing in range";
pub const CROSSING_FOUND: &str = "crossing found";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub tensor_lower: f64,
    pub product: f64,
    pub gap: f64,
    pub certified_gap: Option<f64>,
    pub soundness: Soundness,
}

impl SweepPoint {
    /// The gap against the closed-form single-copy norms when known,
    /// otherwise against the optimizer estimates.
    pub fn signal(&self) -> f64 {
        self.certified_gap.unwrap_or(self.gap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Adjacent grid points with `signal <= 0` then `signal > 0`.
    pub bracket: [f64; 2],
    /// Final bisection bracket, no wider than [`CROSSING_TOL`].
    pub refined: [f64; 2],
    /// Midpoint of `refined`.
    pub p_star: f64,
    pub bisection_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhSweep {
    pub d: usize,
    /// One point per grid value, in grid order.
    pub rows: Vec<SweepPoint>,
    pub crossing: Option<Crossing>,
    pub verdict: String,
}

fn point(wh: &BuiltChannel, p: f64, config: &OptimizerConfig) -> Result<SweepPoint> {
    let r = violation_report(wh, wh, p, WitnessKind::MaxEntangled, config)?;
    Ok(SweepPoint {
        p,
        tensor_lower: r.tensor_lower,
        product: r.product,
        gap: r.gap,
        certified_gap: r.certified_gap,
        soundness: r.soundness,
    })
}

/// Evaluates the Werner-Holevo self-pair gap on the maximally entangled
/// witness over an ascending grid, then bisects the first sign change
/// (nonpositive to positive) down to [`CROSSING_TOL`].
pub fn sweep_wh(p_grid: &[f64], d: usize, config: &OptimizerConfig) -> Result<WhSweep> {
    if p_grid.is_empty() || p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "p grid must be nonempty and strictly ascending".into(),
        ));
    }
    if let Some(&p) = p_grid.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
        return Err(Error::UnsupportedExponent(p));
    }
    let wh = ChannelDescriptor::simple(ChannelKind::WernerHolevo, d).build()?;
    let rows = p_grid
        .par_iter()
        .map(|&p| point(&wh, p, config))
        .collect::<Result<Vec<_>>>()?;
    let bracket = rows
        .windows(2)
        .find(|w| w[0].signal() <= 0.0 && w[1].signal() > 0.0)
        .map(|w| [w[0].p, w[1].p]);
    let crossing = match bracket {
        None => None,
        Some(bracket) => {
            let [mut lo, mut hi] = bracket;
            let mut steps = 0;
            while hi - lo > CROSSING_TOL {
                let mid = 0.5 * (lo + hi);
                if point(&wh, mid, config)?.signal() > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                steps += 1;
            }
            Some(Crossing {
                bracket,
                refined: [lo, hi],
                p_star: 0.5 * (lo + hi),
                bisection_steps: steps,
            })
        }
    };
    Ok(WhSweep {
        d,
        rows,
        verdict: if crossing.is_some() {
            CROSSING_FOUND
        } else {
            NO_CROSSING
        }
        .to_string(),
        crossing,
    })
}
