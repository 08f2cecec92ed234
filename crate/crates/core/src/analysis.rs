//! Quantitative bounds on the maximum output p-norm and the experiments built on them.
//!
//! - [`lemma1_lower_bound`]: `nu_p(N ⊗ N̄) >= 1/n` for a random unitary channel,
//!   evaluated on the maximally entangled input.
//! - [`lemma2_bound`]: `nu_p(N) <= ((1 + eps)/d)^(1 - 1/p)` for an
//!   eps-randomizing channel, and its numerical consistency check.
//! - [`n_haar`] and [`crossover_certified`]: the Haar sampling scale
//!   `n = (134/eps^2) d ln d` and the smallest `d` at which the two bounds
//!   certify a multiplicativity violation.
//! - [`violation_report`], [`min_output_renyi`], [`rank_necessity_check`] and
//!   [`scaling_experiment`].

use std::time::Instant;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::ops::BitTest;
pub use dashu_int::UBig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_tensor_pure, random_unitary_channel, tensor, BuiltChannel, Channel, ChannelDescriptor,
    PureStateMap, RandomUnitaryChannel, UpperBoundSource,
};
use crate::error::{Error, Result};
use crate::linalg::{
    check_exponent, clamp_spectrum, eig_hermitian, hermitian_spectrum, lp_norm_nonneg,
    max_entangled_state, PureState,
};
use crate::optimize::{
    certify_epsilon, certify_epsilon_with_hints, maximize_output_pnorm, OptimizerConfig,
};
use crate::rng::SeededRng;
use crate::{MAX_DIM, MAX_TENSOR_DIM};

/// Numerator of the Haar sampling scale `n = (134/eps^2) d ln d`.
pub const HAAR_SCALE_CONSTANT: f64 = 134.0;

fn inverse_p(p: f64) -> f64 {
    if p == f64::INFINITY {
        0.0
    } else {
        1.0 / p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    /// `<Phi_d| omega |Phi_d>` with `omega = (N ⊗ N̄)(Phi_d)`.
    pub overlap: f64,
    /// `(1/(n^2 d^2)) sum_ij |tr(V_j^† V_i)|^2`, computed without `omega`.
    pub overlap_identity: f64,
    pub lambda_max: f64,
    pub pnorm: f64,
    /// `1/n`.
    pub bound: f64,
    pub overlap_ok: bool,
    pub identity_ok: bool,
    pub chain_ok: bool,
}

impl Lemma1Report {
    pub fn holds(&self) -> bool {
        self.overlap_ok && self.identity_ok && self.chain_ok
    }
}

/// Forms `omega = (N ⊗ N̄)(Phi_d)` and checks the chain
/// `||omega||_p >= lambda_max(omega) >= <Phi|omega|Phi> >= 1/n`.
pub fn lemma1_lower_bound(ruc: &RandomUnitaryChannel, p: f64) -> Result<Lemma1Report> {
    check_exponent(p)?;
    let (d, n) = (ruc.dim(), ruc.n());
    if d * d > MAX_TENSOR_DIM {
        return Err(Error::Resource(format!(
            "d^2 = {} exceeds {MAX_TENSOR_DIM}",
            d * d
        )));
    }
    let phi = max_entangled_state(d)?;
    let omega = apply_tensor_pure(ruc, &ruc.conjugate(), &phi)?;
    let overlap = phi.amplitudes().dotc(&(&omega * phi.amplitudes())).re;

    let mut acc = 0.0;
    for vi in ruc.unitaries() {
        for vj in ruc.unitaries() {
            // tr(V_j^† V_i) as a Frobenius inner product
            acc += vj.dotc(vi).norm_sqr();
        }
    }
    let overlap_identity = acc / ((n * n) as f64 * (d * d) as f64);

    let spectrum = clamp_spectrum(&hermitian_spectrum(&omega)?)?;
    let lambda_max = spectrum[0];
    let pnorm = lp_norm_nonneg(&spectrum, p);
    let bound = 1.0 / n as f64;
    Ok(Lemma1Report {
        d,
        n,
        p,
        overlap,
        overlap_identity,
        lambda_max,
        pnorm,
        bound,
        overlap_ok: overlap >= bound - 1e-10,
        identity_ok: (overlap - overlap_identity).abs() <= 1e-9,
        chain_ok: pnorm >= lambda_max - 1e-12 && lambda_max >= overlap - 1e-12,
    })
}

/// `((1 + eps)/d)^(1 - 1/p)`.
pub fn lemma2_bound(eps: f64, d: usize, p: f64) -> f64 {
    ((1.0 + eps) / d as f64).powf(1.0 - inverse_p(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub eps_hat: f64,
    pub nu_hat: f64,
    pub bound: f64,
    /// `bound - nu_hat`.
    pub slack: f64,
    pub holds: bool,
    pub note: String,
}

pub const LEMMA2_NOTE: &str =
    "eps_hat is a lower bound on the true eps, so this is a necessary-consistency \
check of the upper bound, not a proof of it";

/// Checks `nu_hat_p <= ((1 + eps_hat)/d)^(1 - 1/p) + 1e-8`.
///
/// The p-norm maximizer is also used as a start for the eps search; it is a
/// pure state like any other, so `eps_hat` remains a lower bound on `eps`.
pub fn lemma2_consistency(
    channel: &RandomUnitaryChannel,
    p: f64,
    config: &OptimizerConfig,
) -> Result<Lemma2Report> {
    check_exponent(p)?;
    let nu = maximize_output_pnorm(channel, p, config)?;
    let cert = certify_epsilon_with_hints(channel, config, std::slice::from_ref(&nu.best_state))?;
    let bound = lemma2_bound(cert.eps_hat, channel.dim(), p);
    Ok(Lemma2Report {
        d: channel.dim(),
        n: channel.n(),
        p,
        eps_hat: cert.eps_hat,
        nu_hat: nu.best_value,
        bound,
        slack: bound - nu.best_value,
        holds: nu.best_value <= bound + 1e-8,
        note: LEMMA2_NOTE.to_string(),
    })
}

const BIG_PRECISION_BITS: usize = 256;
type Big = FBig<HalfEven, 2>;

fn big(x: f64, precision: usize) -> Big {
    Big::try_from(x)
        .expect("finite")
        .with_precision(precision)
        .value()
}

fn big_int(x: &UBig, precision: usize) -> Big {
    Big::from(x.clone()).with_precision(precision).value()
}

fn precision_for(d: &UBig) -> usize {
    BIG_PRECISION_BITS.max(2 * d.bit_len() + 128)
}

/// `ceil((134/eps^2) d ln d)` in exact integer arithmetic on a 256+ bit float.
fn n_haar_big(d: &UBig, eps: f64) -> UBig {
    if *d <= UBig::ONE {
        return UBig::ZERO;
    }
    let prec = precision_for(d);
    let dd = big_int(d, prec);
    let scale = big(HAAR_SCALE_CONSTANT, prec) / (big(eps, prec) * big(eps, prec));
    let x = scale * dd.clone() * dd.ln();
    let c = x.ceil();
    UBig::try_from(c.to_int().value()).expect("positive")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NHaar {
    pub d: u64,
    /// Decimal integer; can exceed 64 bits for large `d`.
    pub n: String,
    /// `d <= 10/eps`, outside the regime where the scale is claimed to work.
    pub below_threshold: bool,
    /// `d = 1`, where `ln d = 0`.
    pub degenerate: bool,
}

impl NHaar {
    pub fn n_u128(&self) -> u128 {
        self.n.parse().expect("n fits in 128 bits for 64-bit d")
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// `n = ceil((134/eps^2) d ln d)`, natural logarithm.
pub fn n_haar(d: u64, eps: f64) -> Result<NHaar> {
    check_eps(eps)?;
    if d == 0 {
        return Err(Error::InvalidDimension("d must be positive".into()));
    }
    let n = n_haar_big(&UBig::from(d), eps);
    Ok(NHaar {
        d,
        n: n.to_string(),
        below_threshold: (d as f64) <= 10.0 / eps,
        degenerate: d == 1,
    })
}

/// `((1 + eps)/d)^(2 - 2/p) < 1/n_haar(d, eps)`, evaluated as
/// `ln n < (2 - 2/p)(ln d - ln(1 + eps))` on a high-precision float.
/// `eps` and `p` are taken as their exact binary values.
pub fn crossover_predicate(d: &UBig, p: f64, eps: f64) -> bool {
    let n = n_haar_big(d, eps);
    if n == UBig::ZERO {
        return false;
    }
    let prec = precision_for(d);
    let exponent = big(2.0, prec) - big(2.0, prec) / big(p, prec);
    let lhs = big_int(&n, prec).ln();
    let rhs = exponent * (big_int(d, prec).ln() - (big(1.0, prec) + big(eps, prec)).ln());
    lhs < rhs
}

/// Both sides of the crossover inequality at `d`, as `f64`.
pub fn crossover_sides(d: &UBig, p: f64, eps: f64) -> (f64, f64) {
    let prec = precision_for(d);
    let exponent = 2.0 - 2.0 / p;
    let ln_bound = exponent
        * ((big(1.0, prec) + big(eps, prec)).ln() - big_int(d, prec).ln())
            .to_f64()
            .value();
    let n = n_haar_big(d, eps);
    let inv_n = if n == UBig::ZERO {
        f64::INFINITY
    } else {
        (-big_int(&n, prec).ln()).to_f64().value().exp()
    };
    (ln_bound.exp(), inv_n)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Crossover {
    Certified {
        d_star: UBig,
        n_at_d_star: UBig,
        /// `((1 + eps)/d*)^(2 - 2/p)`.
        product_bound: f64,
        /// `1/n(d*)`.
        tensor_bound: f64,
    },
    Never {
        reason: String,
    },
}

impl Crossover {
    pub fn d_star(&self) -> Option<&UBig> {
        match self {
            Crossover::Certified { d_star, .. } => Some(d_star),
            Crossover::Never { .. } => None,
        }
    }
}

pub const NO_CROSSOVER_REASON: &str =
    "for p <= 2 the exponent 2 - 2/p is at most 1, so certification would need \
n < d/(1 + eps); but every eps-randomizing channel has n >= d";

/// Smallest `d >= 2` at which the maximally entangled lower bound and the
/// randomizing upper bound certify `nu_p(N) nu_p(N̄) < nu_p(N ⊗ N̄)`
/// with `n = n_haar(d, eps)`.
///
/// With `a = 2 - 2/p` the log-margin is `g(d) = a ln d - a ln(1+eps) - ln n(d)`.
/// For `ln d <= 1/(a-1)` it is below `1 - ln 134 < 0`, and beyond that point
/// it is increasing, so the predicate is false-then-true along the integers.
/// Doubling brackets the first true value and bisection pins it down.
pub fn crossover_certified(p: f64, eps: f64) -> Result<Crossover> {
    check_eps(eps)?;
    if !(p > 1.0) {
        return Err(Error::UnsupportedExponent(p));
    }
    if p <= 2.0 {
        return Ok(Crossover::Never {
            reason: NO_CROSSOVER_REASON.to_string(),
        });
    }
    if p == f64::INFINITY {
        return Err(Error::UnsupportedExponent(p));
    }
    let mut lo = UBig::ONE;
    let mut hi = UBig::from(2u8);
    while !crossover_predicate(&hi, p, eps) {
        lo = hi.clone();
        hi = &hi * UBig::from(2u8);
        if hi.bit_len() > 4096 {
            return Err(Error::Resource("crossover beyond 2^4096".into()));
        }
    }
    // invariant: predicate(lo) false (or lo = 1), predicate(hi) true
    while &hi - &lo > UBig::ONE {
        let mid = (&lo + &hi) >> 1;
        if crossover_predicate(&mid, p, eps) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (product_bound, tensor_bound) = crossover_sides(&hi, p, eps);
    Ok(Crossover::Certified {
        n_at_d_star: n_haar_big(&hi, eps),
        d_star: hi,
        product_bound,
        tensor_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Evaluate on the maximally entangled state.
    MaxEntangled,
    /// Run the optimizer on the tensor-product channel.
    Optimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationMethod {
    MaxEntangledWitness,
    Optimizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Soundness {
    /// Exact tensor witness and closed-form single-copy values: a proven violation.
    Certified,
    /// Positive gap, but some single-copy value is only an optimizer estimate.
    Heuristic,
    /// Gap is not positive.
    NoViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub p: f64,
    pub nu1_hat: f64,
    pub nu2_hat: f64,
    /// `nu1_hat * nu2_hat`.
    pub product: f64,
    /// Value of the tensor objective at an explicit state, a lower bound on `nu_p(N1 ⊗ N2)`.
    pub tensor_lower: f64,
    /// `tensor_lower - product`.
    pub gap: f64,
    pub method: ViolationMethod,
    /// False only for an optimizer run in which no start converged.
    pub tensor_lower_exact: bool,
    pub nu1_exact: Option<f64>,
    pub nu2_exact: Option<f64>,
    pub nu1_source: Option<UpperBoundSource>,
    pub nu2_source: Option<UpperBoundSource>,
    /// `tensor_lower - nu1_exact * nu2_exact` when both are known.
    pub certified_gap: Option<f64>,
    pub soundness: Soundness,
    pub channel1: ChannelDescriptor,
    pub channel2: ChannelDescriptor,
    pub optimizer_seed: u64,
}

/// Gaps at or below this are treated as rounding noise.
pub const GAP_TOL: f64 = 1e-10;

/// Compares a lower bound on `nu_p(N1 ⊗ N2)` with `nu_hat_p(N1) nu_hat_p(N2)`.
pub fn violation_report(
    c1: &BuiltChannel,
    c2: &BuiltChannel,
    p: f64,
    witness: WitnessKind,
    config: &OptimizerConfig,
) -> Result<ViolationReport> {
    check_exponent(p)?;
    let (din, dout) = (c1.dim_in() * c2.dim_in(), c1.dim_out() * c2.dim_out());
    if din.max(dout) > MAX_TENSOR_DIM {
        return Err(Error::Resource(format!(
            "tensor dimension {} exceeds {MAX_TENSOR_DIM}",
            din.max(dout)
        )));
    }
    let (tensor_lower, method, tensor_lower_exact) = match witness {
        WitnessKind::MaxEntangled => {
            if c1.dim_in() != c2.dim_in() {
                return Err(Error::Shape(format!(
                    "maximally entangled witness needs equal input dimensions, got {} and {}",
                    c1.dim_in(),
                    c2.dim_in()
                )));
            }
            let phi = max_entangled_state(c1.dim_in())?;
            let omega = apply_tensor_pure(c1, c2, &phi)?;
            let v = lp_norm_nonneg(&clamp_spectrum(&hermitian_spectrum(&omega)?)?, p);
            (v, ViolationMethod::MaxEntangledWitness, true)
        }
        WitnessKind::Optimize => {
            let t = tensor(c1, c2)?;
            let r = maximize_output_pnorm(&t, p, config)?;
            (r.best_value, ViolationMethod::Optimizer, r.any_converged())
        }
    };
    let nu1 = maximize_output_pnorm(c1, p, config)?.best_value;
    let nu2 = maximize_output_pnorm(c2, p, config)?.best_value;
    let exact1 = c1.exact_nu_p(p);
    let exact2 = c2.exact_nu_p(p);
    let product = nu1 * nu2;
    let gap = tensor_lower - product;
    let certified_gap = match (exact1, exact2) {
        (Some((a, _)), Some((b, _))) => Some(tensor_lower - a * b),
        _ => None,
    };
    let soundness = match certified_gap {
        Some(g) if g > GAP_TOL && tensor_lower_exact => Soundness::Certified,
        _ if gap > GAP_TOL => Soundness::Heuristic,
        _ => Soundness::NoViolation,
    };
    Ok(ViolationReport {
        p,
        nu1_hat: nu1,
        nu2_hat: nu2,
        product,
        tensor_lower,
        gap,
        method,
        tensor_lower_exact,
        nu1_exact: exact1.map(|e| e.0),
        nu2_exact: exact2.map(|e| e.0),
        nu1_source: exact1.map(|e| e.1),
        nu2_source: exact2.map(|e| e.1),
        certified_gap,
        soundness,
        channel1: c1.descriptor.clone(),
        channel2: c2.descriptor.clone(),
        optimizer_seed: config.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenyiReport {
    pub p: f64,
    pub nu_hat: f64,
    /// `(p/(1-p)) log2 nu_hat`; an upper bound on the minimum output p-entropy
    /// because `nu_hat` underestimates `nu_p` and `p/(1-p) < 0`.
    pub entropy_upper_bound: f64,
}

/// Minimum output Rényi p-entropy in bits, from the optimizer's `nu_hat_p`.
/// At `p = inf` this is the min-entropy `-log2 nu_hat`.
pub fn min_output_renyi(
    channel: &impl Channel,
    p: f64,
    config: &OptimizerConfig,
) -> Result<RenyiReport> {
    check_exponent(p)?;
    let nu = maximize_output_pnorm(channel, p, config)?.best_value;
    Ok(RenyiReport {
        p,
        nu_hat: nu,
        entropy_upper_bound: renyi_from_nu(p, nu),
    })
}

/// `(p/(1-p)) log2 nu`, or `-log2 nu` at `p = inf`.
pub fn renyi_from_nu(p: f64, nu: f64) -> f64 {
    let factor = if p == f64::INFINITY {
        -1.0
    } else {
        p / (1.0 - p)
    };
    factor * nu.log2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub d: usize,
    pub n: usize,
    pub eps_hat: f64,
    /// Smallest output eigenvalue over the sampled inputs.
    pub min_output_eigenvalue: f64,
    /// Largest numerical rank (eigenvalues above 1e-10) over the sampled inputs.
    pub max_output_rank: usize,
    pub samples: usize,
    /// `n < d`: outputs are rank deficient, so eps must be at least 1.
    pub claim_triggered: bool,
    pub holds: bool,
}

const RANK_TOL: f64 = 1e-10;

/// Every output of a pure input has rank at most `n`, so `n < d` forces a zero
/// output eigenvalue and `eps >= 1`; equivalently `eps < 1` needs `n >= d`.
pub fn rank_necessity_check(
    ruc: &RandomUnitaryChannel,
    config: &OptimizerConfig,
) -> Result<RankReport> {
    config.validate()?;
    let (d, n) = (ruc.dim(), ruc.n());
    let map = PureStateMap::new(ruc);
    let mut min_eig = f64::INFINITY;
    let mut max_rank = 0;
    for k in 0..config.num_starts {
        let psi = PureState::random(d, &mut SeededRng::new(config.seed, k as u64))?;
        let spec = hermitian_spectrum(&map.output(psi.amplitudes()))?;
        min_eig = min_eig.min(spec[d - 1]);
        max_rank = max_rank.max(spec.iter().filter(|&&x| x > RANK_TOL).count());
    }
    let eps_hat = certify_epsilon(ruc, config)?.eps_hat;
    let claim_triggered = n < d;
    let holds =
        max_rank <= n && (!claim_triggered || (min_eig <= RANK_TOL && eps_hat >= 1.0 - 1e-9));
    Ok(RankReport {
        d,
        n,
        eps_hat,
        min_output_eigenvalue: min_eig,
        max_output_rank: max_rank,
        samples: config.num_starts,
        claim_triggered,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub d: usize,
    pub n: usize,
    pub multiplier: f64,
    pub seed: u64,
    pub eps_hat: f64,
    /// `nu_hat_p` when the experiment was given a `p`.
    pub nu_hat: Option<f64>,
    pub wall_time: f64,
}

/// `n = max(1, ceil(multiplier * d * ln d))`.
pub fn scaling_n(d: usize, multiplier: f64) -> usize {
    ((multiplier * d as f64 * (d as f64).ln()).ceil() as usize).max(1)
}

/// Samples a Haar channel per `(d, multiplier, seed)` cell and records its
/// `eps_hat`. Records come back sorted by `(d, multiplier, seed)`.
pub fn scaling_experiment(
    dims: &[usize],
    multipliers: &[f64],
    p: Option<f64>,
    seeds: &[u64],
    config: &OptimizerConfig,
) -> Result<Vec<ScalingRecord>> {
    config.validate()?;
    if let Some(p) = p {
        check_exponent(p)?;
    }
    if let Some(&d) = dims.iter().find(|&&d| d > MAX_DIM || d == 0) {
        return Err(if d == 0 {
            Error::InvalidDimension("d must be positive".into())
        } else {
            Error::Resource(format!("d = {d} exceeds {MAX_DIM}"))
        });
    }
    if let Some(m) = multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::Domain(format!(
            "multiplier must be positive, got {m}"
        )));
    }
    let mut cells: Vec<(usize, f64, u64)> = Vec::new();
    for &d in dims {
        for &m in multipliers {
            for &s in seeds {
                cells.push((d, m, s));
            }
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    cells
        .into_par_iter()
        .map(|(d, multiplier, seed)| {
            let start = Instant::now();
            let n = scaling_n(d, multiplier);
            let channel = random_unitary_channel(d, n, seed)?;
            let eps_hat = certify_epsilon(&channel, config)?.eps_hat;
            let nu_hat = p
                .map(|p| maximize_output_pnorm(&channel, p, config).map(|r| r.best_value))
                .transpose()?;
            Ok(ScalingRecord {
                d,
                n,
                multiplier,
                seed,
                eps_hat,
                nu_hat,
                wall_time: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Median of a nonempty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Largest eigenvalue of `(N ⊗ N̄)(Phi_d)` with its eigenvector, for diagnostics.
pub fn lemma1_top_eigenpair(ruc: &RandomUnitaryChannel) -> Result<(f64, PureState)> {
    let phi = max_entangled_state(ruc.dim())?;
    let omega = apply_tensor_pure(ruc, &ruc.conjugate(), &phi)?;
    let eig = eig_hermitian(&omega)?;
    Ok((
        eig.values[0],
        PureState::normalized(eig.vectors.column(0).into_owned())?,
    ))
}
