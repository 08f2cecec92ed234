//! Maximization of spectral objectives over pure input states.
//!
//! Two objectives are supported:
//!
//! - the output Schatten norm `f(psi) = ||N(psi psi^†)||_p`, whose maximum is `nu_p(N)`;
//! - the operator-norm distance `||N(psi psi^†) - I/d||_inf`, whose maximum times
//!   `d` is the randomizing parameter `eps` of the channel.
//!
//! Finite `p` uses projected gradient ascent on the unit sphere with a halving
//! line search. The spectral objectives (`p = inf` and the deviation) use
//! alternating maximization between the input state and an extreme output
//! eigenvector, which never decreases the objective. Starts run in lockstep
//! so that each pass over the stacked operators serves all of them.
//!
//! All values returned here come from evaluating the objective at an explicit
//! state, so they are lower bounds on the true maxima.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Channel, PureStateMap};
use crate::error::{Error, Result};
use crate::linalg::{
    check_exponent, clamp_spectrum, eig_hermitian, hermitian_spectrum, lp_norm_nonneg,
    ComplexMatrix, ComplexVector, HermitianEigen, PureState,
};
use crate::pure_map::Image;
use crate::rng::SeededRng;

/// Random starts use streams `START_STREAM_BASE + k`, away from channel streams.
const START_STREAM_BASE: u64 = 1 << 40;
/// Degenerate-block threshold for the top (or bottom) output eigenvalue.
const DEGENERACY_GAP: f64 = 1e-10;
const MAX_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub num_starts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    /// Relative objective improvement below which a start is considered converged.
    pub objective_tol: f64,
    /// Relative size of the tangent gradient below which a start is considered converged.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            num_starts: 20,
            max_iters: 5000,
            step_init: 0.1,
            objective_tol: 1e-12,
            grad_tol: 1e-9,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_starts(mut self, num_starts: usize) -> Self {
        self.num_starts = num_starts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.num_starts == 0 || self.max_iters == 0 {
            return Err(Error::Domain(
                "num_starts and max_iters must be positive".into(),
            ));
        }
        if !(positive(self.step_init) && positive(self.objective_tol) && positive(self.grad_tol)) {
            return Err(Error::Domain(
                "step_init and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub best_value: f64,
    /// Gauge fixed: first nonzero amplitude real and nonnegative.
    pub best_state: PureState,
    pub per_start_values: Vec<f64>,
    pub iterations_used: Vec<usize>,
    pub converged_flags: Vec<bool>,
}

impl OptResult {
    pub fn any_converged(&self) -> bool {
        self.converged_flags.iter().any(|&c| c)
    }

    pub fn best_index(&self) -> usize {
        self.per_start_values
            .iter()
            .position(|&v| v == self.best_value)
            .unwrap_or(0)
    }
}

struct StartOutcome {
    value: f64,
    state: ComplexVector,
    iterations: usize,
    converged: bool,
}

fn normalize(v: ComplexVector) -> Option<ComplexVector> {
    let n = v.norm();
    (n.is_finite() && n > 0.0).then(|| v.unscale(n))
}

fn pnorm_of_output(sigma: &ComplexMatrix, p: f64) -> Result<f64> {
    Ok(lp_norm_nonneg(
        &clamp_spectrum(&hermitian_spectrum(sigma)?)?,
        p,
    ))
}

fn check_dims(channel: &impl Channel, psi: &PureState) -> Result<()> {
    if psi.dim() != channel.dim_in() {
        return Err(Error::Shape(format!(
            "state dimension {} but channel input dimension {}",
            psi.dim(),
            channel.dim_in()
        )));
    }
    Ok(())
}

/// `||N(|psi><psi|)||_p`.
pub fn output_pnorm_objective(channel: &impl Channel, p: f64, psi: &PureState) -> Result<f64> {
    check_exponent(p)?;
    check_dims(channel, psi)?;
    pnorm_of_output(&PureStateMap::new(channel).output(psi.amplitudes()), p)
}

/// Wirtinger gradient of the output p-purity `tr N(psi psi^†)^p`:
/// `g = p N^†(sigma^(p-1)) psi`, so that the first variation along `eta` is
/// `2 Re <g, eta>`. Not projected; see [`project_tangent`].
pub fn gradient_output_pnorm(
    channel: &impl Channel,
    p: f64,
    psi: &PureState,
) -> Result<ComplexVector> {
    if p == f64::INFINITY {
        return Err(Error::Unsupported(
            "gradient at p = inf; use the eigenvector ascent".into(),
        ));
    }
    check_exponent(p)?;
    check_dims(channel, psi)?;
    let map = PureStateMap::new(channel);
    purity_gradient(&map, p, psi.amplitudes())
}

/// Objective value at one point, with the image `S psi` and the output
/// eigendecomposition kept for the gradient.
struct PnormPoint {
    value: f64,
    eig: HermitianEigen,
    image: Image,
}

impl PnormPoint {
    fn from_image(p: f64, map: &PureStateMap, image: Image) -> Result<Self> {
        let eig = eig_hermitian(&map.output_of(&image))?;
        let values = clamp_spectrum(&eig.values)?;
        Ok(Self {
            value: lp_norm_nonneg(&values, p),
            eig,
            image,
        })
    }

    fn power(&self, p: f64) -> ComplexMatrix {
        self.eig.map_values(|x| x.max(0.0).powf(p - 1.0))
    }
}

/// Purity gradients `p N^†(sigma^(p-1)) psi` for a batch of points.
fn gradients(map: &PureStateMap, p: f64, points: &[&PnormPoint]) -> Vec<ComplexVector> {
    let powers: Vec<ComplexMatrix> = points.iter().map(|pt| pt.power(p)).collect();
    let jobs: Vec<(&ComplexMatrix, &Image)> = powers
        .iter()
        .zip(points)
        .map(|(x, pt)| (x, &pt.image))
        .collect();
    map.adjoint_times_images(&jobs)
        .into_iter()
        .map(|g| g.scale(p))
        .collect()
}

fn evaluate_points(map: &PureStateMap, p: f64, psis: &[ComplexVector]) -> Result<Vec<PnormPoint>> {
    map.images(psis)
        .into_iter()
        .map(|img| PnormPoint::from_image(p, map, img))
        .collect()
}

fn purity_gradient(map: &PureStateMap, p: f64, psi: &ComplexVector) -> Result<ComplexVector> {
    let point = evaluate_points(map, p, std::slice::from_ref(psi))?
        .pop()
        .expect("one point");
    Ok(gradients(map, p, &[&point]).pop().expect("one gradient"))
}

/// `g - <psi, g> psi`, the component of `g` tangent to the sphere at `psi`.
pub fn project_tangent(psi: &PureState, g: &ComplexVector) -> ComplexVector {
    let a = psi.amplitudes();
    g - a * a.dotc(g)
}

/// Analytic derivative of `t -> ||N((psi + t eta)(psi + t eta)^†)||_p` at `t = 0`.
pub fn directional_derivative(
    channel: &impl Channel,
    p: f64,
    psi: &PureState,
    eta: &ComplexVector,
) -> Result<f64> {
    let g = gradient_output_pnorm(channel, p, psi)?;
    let f = output_pnorm_objective(channel, p, psi)?;
    let dpurity = 2.0 * g.dotc(eta).re;
    Ok(f.powf(1.0 - p) * dpurity / p)
}

/// One start of the p-norm ascent.
struct PnormRun {
    psi: ComplexVector,
    point: PnormPoint,
    grad: ComplexVector,
    dir: ComplexVector,
    step: f64,
    iterations: usize,
    converged: bool,
    done: bool,
}

/// Projected gradient ascent with a halving line search, for a batch of starts
/// run in lockstep so each pass over the channel serves all of them. Every
/// start follows exactly the iterates it would follow alone.
fn ascend_pnorm(
    map: &PureStateMap,
    p: f64,
    starts: Vec<ComplexVector>,
    cfg: &OptimizerConfig,
) -> Result<Vec<StartOutcome>> {
    let points = evaluate_points(map, p, &starts)?;
    let grads = gradients(map, p, &points.iter().collect::<Vec<_>>());
    let mut runs: Vec<PnormRun> = starts
        .into_iter()
        .zip(points)
        .zip(grads)
        .map(|((psi, point), grad)| PnormRun {
            dir: ComplexVector::zeros(psi.len()),
            psi,
            point,
            grad,
            step: cfg.step_init,
            iterations: 0,
            converged: false,
            done: false,
        })
        .collect();
    // runs waiting for a search direction
    let mut fresh: Vec<usize> = (0..runs.len()).collect();
    loop {
        for &i in &fresh {
            let run = &mut runs[i];
            if run.iterations >= cfg.max_iters {
                run.done = true;
                continue;
            }
            let along = run.psi.dotc(&run.grad);
            let tangent = &run.grad - &run.psi * along;
            let purity = (along.re / p).max(f64::MIN_POSITIVE);
            let gnorm = tangent.norm();
            if gnorm <= cfg.grad_tol * p * purity {
                run.converged = true;
                run.done = true;
                continue;
            }
            run.iterations += 1;
            run.dir = tangent.unscale(gnorm);
        }
        // one line-search trial per searching run
        let mut trials: Vec<(usize, ComplexVector)> = Vec::new();
        for (i, run) in runs.iter_mut().enumerate().filter(|(_, r)| !r.done) {
            match (run.step >= MIN_STEP)
                .then(|| normalize(&run.psi + run.dir.scale(run.step)))
                .flatten()
            {
                Some(cand) => trials.push((i, cand)),
                None => {
                    // no ascent left at working precision
                    run.converged = true;
                    run.done = true;
                }
            }
        }
        if trials.is_empty() {
            break;
        }
        let cands: Vec<ComplexVector> = trials.iter().map(|(_, c)| c.clone()).collect();
        let evaluated = evaluate_points(map, p, &cands)?;
        let mut accepted: Vec<(usize, ComplexVector, PnormPoint)> = Vec::new();
        for ((i, cand), point) in trials.into_iter().zip(evaluated) {
            if point.value > runs[i].point.value {
                accepted.push((i, cand, point));
            } else {
                runs[i].step *= 0.5;
            }
        }
        let grads = gradients(
            map,
            p,
            &accepted.iter().map(|(_, _, pt)| pt).collect::<Vec<_>>(),
        );
        fresh.clear();
        for ((i, cand, point), grad) in accepted.into_iter().zip(grads) {
            let run = &mut runs[i];
            let gain = point.value - run.point.value;
            run.psi = cand;
            run.point = point;
            run.grad = grad;
            run.step = (run.step * 2.0).min(MAX_STEP);
            if gain <= cfg.objective_tol * run.point.value {
                run.converged = true;
                run.done = true;
            } else {
                fresh.push(i);
            }
        }
    }
    Ok(runs
        .into_iter()
        .map(|r| StartOutcome {
            value: r.point.value,
            state: r.psi,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect())
}

/// Which end of the output spectrum is being pushed outwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralSide {
    /// Maximize `lambda_max(N(psi psi^†))`.
    Top,
    /// Maximize `-lambda_min(N(psi psi^†))`.
    Bottom,
}

/// Extreme eigenvalue (signed so that larger is better) and the eigenvectors
/// of its degenerate block.
fn extreme_of(eig: &HermitianEigen, side: SpectralSide) -> (f64, Vec<ComplexVector>) {
    let d = eig.values.len();
    let (value, block): (f64, Vec<usize>) = match side {
        SpectralSide::Top => {
            let top = eig.values[0];
            (
                top,
                (0..d)
                    .filter(|&k| top - eig.values[k] < DEGENERACY_GAP)
                    .collect(),
            )
        }
        SpectralSide::Bottom => {
            let bottom = eig.values[d - 1];
            (
                -bottom,
                (0..d)
                    .filter(|&k| eig.values[k] - bottom < DEGENERACY_GAP)
                    .collect(),
            )
        }
    };
    (
        value,
        block
            .into_iter()
            .map(|k| eig.vectors.column(k).into_owned())
            .collect(),
    )
}

fn extreme_batch(
    map: &PureStateMap,
    sides: &[SpectralSide],
    psis: &[ComplexVector],
) -> Result<Vec<(f64, Vec<ComplexVector>)>> {
    map.images(psis)
        .iter()
        .zip(sides)
        .map(|(img, &side)| Ok(extreme_of(&eig_hermitian(&map.output_of(img))?, side)))
        .collect()
}

/// One start of the extreme-eigenvalue ascent.
struct ExtremeRun {
    side: SpectralSide,
    psi: ComplexVector,
    value: f64,
    vecs: Vec<ComplexVector>,
    /// Extrapolation factor for the next step.
    boost: f64,
    iterations: usize,
    converged: bool,
    done: bool,
}

const MIN_BOOST: f64 = 2.0;
const MAX_BOOST: f64 = 1024.0;

/// `psi + boost (next - psi)` with `next` phase-aligned to `psi`, normalized.
fn extrapolate(psi: &ComplexVector, next: &ComplexVector, boost: f64) -> Option<ComplexVector> {
    let overlap = next.dotc(psi);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        num_complex::Complex64::new(1.0, 0.0)
    };
    let aligned = next * phase;
    normalize(psi + (aligned - psi).scale(boost))
}

/// Alternating maximization of the bilinear form `<v| N(psi psi^†) |v>`
/// (minimization on the bottom side): `v` is an extreme eigenvector of the
/// output, then `psi` an extreme eigenvector of `N^†(v v^†)`. Each half step
/// is exact, so the extreme eigenvalue never decreases.
///
/// Near-degenerate problems make that iteration crawl, so each step also
/// tries `psi + boost (psi' - psi)`, evaluated in the same pass over the
/// channel. The boost doubles while extrapolation wins and resets when it
/// loses; a candidate is only taken if it improves the objective.
/// Starts run in lockstep as in [`ascend_pnorm`].
fn ascend_extreme(
    map: &PureStateMap,
    starts: Vec<(SpectralSide, ComplexVector)>,
    cfg: &OptimizerConfig,
) -> Result<Vec<StartOutcome>> {
    let sides: Vec<SpectralSide> = starts.iter().map(|s| s.0).collect();
    let psis: Vec<ComplexVector> = starts.into_iter().map(|s| s.1).collect();
    let initial = extreme_batch(map, &sides, &psis)?;
    let mut runs: Vec<ExtremeRun> = psis
        .into_iter()
        .zip(initial)
        .zip(&sides)
        .map(|((psi, (value, vecs)), &side)| ExtremeRun {
            side,
            psi,
            value,
            vecs,
            boost: MIN_BOOST,
            iterations: 0,
            converged: false,
            done: false,
        })
        .collect();
    loop {
        for run in runs.iter_mut().filter(|r| !r.done) {
            if run.iterations >= cfg.max_iters {
                run.done = true;
            } else {
                run.iterations += 1;
            }
        }
        let active: Vec<usize> = (0..runs.len()).filter(|&i| !runs[i].done).collect();
        if active.is_empty() {
            break;
        }
        // On a degenerate block every eigenvector is tried and the best step kept.
        let owners: Vec<usize> = active
            .iter()
            .flat_map(|&i| std::iter::repeat_n(i, runs[i].vecs.len()))
            .collect();
        let vs: Vec<ComplexVector> = active
            .iter()
            .flat_map(|&i| runs[i].vecs.iter().cloned())
            .collect();
        let pulled: Vec<ComplexVector> = map
            .adjoint_rank_ones(&vs)
            .iter()
            .zip(&owners)
            .map(|(m, &i)| {
                let e = eig_hermitian(m)?;
                Ok(match runs[i].side {
                    SpectralSide::Top => e.vectors.column(0).into_owned(),
                    SpectralSide::Bottom => e.vectors.column(e.values.len() - 1).into_owned(),
                })
            })
            .collect::<Result<_>>()?;
        // (owner, extrapolated, state)
        let mut cands: Vec<(usize, bool, ComplexVector)> = Vec::with_capacity(2 * pulled.len());
        for (k, (&i, next)) in owners.iter().zip(pulled).enumerate() {
            if k == 0 || owners[k - 1] != i {
                if let Some(x) = extrapolate(&runs[i].psi, &next, runs[i].boost) {
                    cands.push((i, true, x));
                }
            }
            cands.push((i, false, next));
        }
        let cand_sides: Vec<SpectralSide> = cands.iter().map(|c| runs[c.0].side).collect();
        let states: Vec<ComplexVector> = cands.iter().map(|c| c.2.clone()).collect();
        let evaluated = extreme_batch(map, &cand_sides, &states)?;
        // (extrapolated, state, value, block vecs)
        type Best = (bool, ComplexVector, f64, Vec<ComplexVector>);
        let mut best: Vec<Option<Best>> = vec![None; runs.len()];
        for ((i, extrapolated, cand), (fc, vc)) in cands.into_iter().zip(evaluated) {
            if best[i].as_ref().is_none_or(|b| fc > b.2) {
                best[i] = Some((extrapolated, cand, fc, vc));
            }
        }
        for &i in &active {
            let run = &mut runs[i];
            let Some((extrapolated, cand, fc, vc)) = best[i].take() else {
                run.converged = true;
                run.done = true;
                continue;
            };
            if fc <= run.value {
                run.converged = true;
                run.done = true;
                continue;
            }
            run.boost = if extrapolated {
                (2.0 * run.boost).min(MAX_BOOST)
            } else {
                MIN_BOOST
            };
            let gain = fc - run.value;
            run.psi = cand;
            run.value = fc;
            run.vecs = vc;
            if gain <= cfg.objective_tol * run.value.abs().max(1e-300) {
                run.converged = true;
                run.done = true;
            }
        }
    }
    Ok(runs
        .into_iter()
        .map(|r| StartOutcome {
            value: r.value,
            state: r.psi,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect())
}

/// Starting states: `num_starts` random states from dedicated streams of the
/// seed, then the hints.
fn start_states(
    dim: usize,
    cfg: &OptimizerConfig,
    hints: &[PureState],
) -> Result<Vec<ComplexVector>> {
    cfg.validate()?;
    if let Some(h) = hints.iter().find(|h| h.dim() != dim) {
        return Err(Error::Shape(format!(
            "hint state of dimension {} for a {dim}-dimensional problem",
            h.dim()
        )));
    }
    let mut starts = (0..cfg.num_starts)
        .map(|k| {
            Ok(PureState::random(
                dim,
                &mut SeededRng::new(cfg.seed, START_STREAM_BASE + k as u64),
            )?
            .into_amplitudes())
        })
        .collect::<Result<Vec<_>>>()?;
    starts.extend(hints.iter().map(|h| h.amplitudes().clone()));
    Ok(starts)
}

/// Splits the jobs into one lockstep batch per worker thread and concatenates
/// the outcomes in job order.
fn run_batched<J, F>(jobs: Vec<J>, run: F) -> Result<Vec<StartOutcome>>
where
    J: Send + Sync + Clone,
    F: Fn(Vec<J>) -> Result<Vec<StartOutcome>> + Sync,
{
    let chunk = jobs
        .len()
        .div_ceil(rayon::current_num_threads().max(1))
        .max(1);
    let parts = jobs
        .par_chunks(chunk)
        .map(|c| run(c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn collect_result(outcomes: Vec<StartOutcome>) -> Result<OptResult> {
    let mut best = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = k;
        }
    }
    let best_state = PureState::normalized(outcomes[best].state.clone())?.gauge_fixed();
    Ok(OptResult {
        best_value: outcomes[best].value,
        best_state,
        per_start_values: outcomes.iter().map(|o| o.value).collect(),
        iterations_used: outcomes.iter().map(|o| o.iterations).collect(),
        converged_flags: outcomes.iter().map(|o| o.converged).collect(),
    })
}

fn trivial_result(value: f64, starts: usize) -> Result<OptResult> {
    Ok(OptResult {
        best_value: value,
        best_state: PureState::basis(1, 0)?,
        per_start_values: vec![value; starts],
        iterations_used: vec![0; starts],
        converged_flags: vec![true; starts],
    })
}

/// Multistart estimate of `nu_p(N)`. The value is attained by `best_state`,
/// hence a lower bound on `nu_p`.
pub fn maximize_output_pnorm(
    channel: &impl Channel,
    p: f64,
    config: &OptimizerConfig,
) -> Result<OptResult> {
    maximize_output_pnorm_with_hints(channel, p, config, &[])
}

/// As [`maximize_output_pnorm`], with extra starting states run after the random ones.
pub fn maximize_output_pnorm_with_hints(
    channel: &impl Channel,
    p: f64,
    config: &OptimizerConfig,
    hints: &[PureState],
) -> Result<OptResult> {
    check_exponent(p)?;
    config.validate()?;
    let map = PureStateMap::new(channel);
    if channel.dim_in() == 1 {
        let v = pnorm_of_output(&map.output(PureState::basis(1, 0)?.amplitudes()), p)?;
        return trivial_result(v, config.num_starts);
    }
    let starts = start_states(channel.dim_in(), config, hints)?;
    let outcomes = if p == f64::INFINITY {
        let jobs = starts.into_iter().map(|s| (SpectralSide::Top, s)).collect();
        run_batched(jobs, |batch| ascend_extreme(&map, batch, config))?
    } else {
        run_batched(starts, |batch| ascend_pnorm(&map, p, batch, config))?
    };
    collect_result(outcomes)
}

fn maximize_sides(
    channel: &impl Channel,
    sides: &[SpectralSide],
    config: &OptimizerConfig,
    hints: &[PureState],
) -> Result<Vec<OptResult>> {
    config.validate()?;
    let map = PureStateMap::new(channel);
    if channel.dim_in() == 1 {
        let img = map.image(PureState::basis(1, 0)?.amplitudes());
        let eig = eig_hermitian(&map.output_of(&img))?;
        return sides
            .iter()
            .map(|&side| trivial_result(extreme_of(&eig, side).0, config.num_starts))
            .collect();
    }
    let starts = start_states(channel.dim_in(), config, hints)?;
    let jobs: Vec<(SpectralSide, ComplexVector)> = sides
        .iter()
        .flat_map(|&side| starts.iter().map(move |s| (side, s.clone())))
        .collect();
    let mut outcomes = run_batched(jobs, |batch| ascend_extreme(&map, batch, config))?;
    let per_side = starts.len();
    let mut results = Vec::with_capacity(sides.len());
    for _ in sides {
        let rest = outcomes.split_off(per_side);
        results.push(collect_result(std::mem::replace(&mut outcomes, rest))?);
    }
    Ok(results)
}

/// Multistart maximization of one end of the output spectrum.
pub fn maximize_extreme_eigenvalue(
    channel: &impl Channel,
    side: SpectralSide,
    config: &OptimizerConfig,
    hints: &[PureState],
) -> Result<OptResult> {
    Ok(maximize_sides(channel, &[side], config, hints)?.remove(0))
}

/// Lower bound on the randomizing parameter `eps` of a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsCertificate {
    /// `d * ||N(w w^†) - I/d||_inf` at the witness `w`.
    pub eps_hat: f64,
    pub witness: PureState,
    /// Best `lambda_max - 1/d` found.
    pub top_excess: f64,
    /// Best `1/d - lambda_min` found.
    pub bottom_deficit: f64,
    pub converged: bool,
}

/// `d * ||N(psi psi^†) - I/d||_inf` at one state.
pub fn deviation_at(channel: &impl Channel, psi: &PureState) -> Result<f64> {
    check_dims(channel, psi)?;
    let d = channel.dim_out() as f64;
    let spec = hermitian_spectrum(&PureStateMap::new(channel).output(psi.amplitudes()))?;
    Ok(d * (spec[0] - 1.0 / d).max(1.0 / d - spec[spec.len() - 1]))
}

/// Maximizes `||N(psi psi^†) - I/d||_inf` over pure states from both ends of
/// the spectrum. Pure inputs suffice because the objective is convex in the
/// input density operator.
pub fn certify_epsilon(channel: &impl Channel, config: &OptimizerConfig) -> Result<EpsCertificate> {
    certify_epsilon_with_hints(channel, config, &[])
}

pub fn certify_epsilon_with_hints(
    channel: &impl Channel,
    config: &OptimizerConfig,
    hints: &[PureState],
) -> Result<EpsCertificate> {
    if channel.dim_in() != channel.dim_out() {
        return Err(Error::Shape(
            "eps certification needs equal input and output dimensions".into(),
        ));
    }
    let d = channel.dim_out() as f64;
    let mut sides = maximize_sides(
        channel,
        &[SpectralSide::Top, SpectralSide::Bottom],
        config,
        hints,
    )?;
    let bottom = sides.pop().expect("two sides");
    let top = sides.pop().expect("two sides");
    let top_excess = top.best_value - 1.0 / d;
    let bottom_deficit = bottom.best_value + 1.0 / d;
    let converged = top.any_converged() && bottom.any_converged();
    let (eps_hat, witness) = if top_excess >= bottom_deficit {
        (d * top_excess, top.best_state)
    } else {
        (d * bottom_deficit, bottom.best_state)
    };
    Ok(EpsCertificate {
        eps_hat: eps_hat.max(0.0),
        witness,
        top_excess,
        bottom_deficit,
        converged,
    })
}

fn bloch_state(theta: f64, phi: f64) -> ComplexVector {
    use num_complex::Complex64;
    ComplexVector::from_vec(vec![
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ])
}

/// Bloch grid with `resolution` polar points on `[0, pi]` (endpoints included)
/// and `resolution` azimuthal points on `[0, 2 pi)`.
fn bloch_grid(resolution: usize) -> impl Iterator<Item = ComplexVector> {
    let dtheta = std::f64::consts::PI / (resolution - 1) as f64;
    let dphi = 2.0 * std::f64::consts::PI / resolution as f64;
    (0..resolution).flat_map(move |i| {
        (0..resolution).map(move |j| bloch_state(i as f64 * dtheta, j as f64 * dphi))
    })
}

/// Covering radius (Euclidean, up to global phase) of the Bloch grid.
///
/// `|d psi / d theta| = 1/2` and `|d psi / d phi| <= 1`, and every state is
/// within half a spacing of a grid point in each coordinate, so
/// `delta <= dtheta/4 + dphi/2`.
pub fn bloch_covering_radius(resolution: usize) -> f64 {
    let dtheta = std::f64::consts::PI / (resolution - 1) as f64;
    let dphi = 2.0 * std::f64::consts::PI / resolution as f64;
    dtheta / 4.0 + dphi / 2.0
}

/// Conservative gap between the Bloch-grid maximum of the p-norm objective and
/// the true maximum: the objective is Lipschitz in `psi` with constant at most
/// `2p` (the output is 2-Lipschitz in trace norm and the p-norm is dominated by
/// it), giving `2p * delta`.
pub fn bloch_grid_slack(p: f64, resolution: usize) -> f64 {
    let lip = if p == f64::INFINITY { 2.0 } else { 2.0 * p };
    lip * bloch_covering_radius(resolution)
}

/// Grid-search oracle for qubit channels: the maximum of the p-norm objective
/// over a `resolution x resolution` Bloch-sphere grid.
pub fn brute_force_pnorm_d2(channel: &impl Channel, p: f64, resolution: usize) -> Result<f64> {
    Ok(brute_force_pnorms_d2(channel, &[p], resolution)?[0])
}

/// [`brute_force_pnorm_d2`] for several exponents from one pass over the grid.
pub fn brute_force_pnorms_d2(
    channel: &impl Channel,
    ps: &[f64],
    resolution: usize,
) -> Result<Vec<f64>> {
    for &p in ps {
        check_exponent(p)?;
    }
    if channel.dim_in() != 2 {
        return Err(Error::Unsupported(format!(
            "Bloch grid needs input dimension 2, got {}",
            channel.dim_in()
        )));
    }
    if resolution < 100 {
        return Err(Error::Domain(format!(
            "resolution must be at least 100, got {resolution}"
        )));
    }
    let map = PureStateMap::new(channel);
    let spectra = bloch_grid(resolution)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|psi| clamp_spectrum(&hermitian_spectrum(&map.output(&psi))?))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ps
        .iter()
        .map(|&p| {
            spectra
                .iter()
                .map(|s| lp_norm_nonneg(s, p))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// Two-sided bracket on `eps` from an exhaustive grid at `d <= 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBracket {
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub covering_radius: f64,
    pub grid_points: usize,
}

/// Maximum number of grid points [`epsnet_certify_upper`] will evaluate.
pub const MAX_GRID_POINTS: usize = 10_000_000;

fn hopf_state(a: f64, b: f64, phi1: f64, phi2: f64) -> ComplexVector {
    use num_complex::Complex64;
    ComplexVector::from_vec(vec![
        Complex64::new(a.cos(), 0.0),
        Complex64::from_polar(a.sin() * b.cos(), phi1),
        Complex64::from_polar(a.sin() * b.sin(), phi2),
    ])
}

/// Exhaustive grid over pure states of a qubit or qutrit channel.
///
/// `d = 2`: the Bloch grid of [`brute_force_pnorm_d2`] with `resolution^2` points.
/// `d = 3`: Hopf coordinates `(cos a, e^{i phi1} sin a cos b, e^{i phi2} sin a sin b)`,
/// `a, b` on `[0, pi/2]` and the phases on `[0, 2 pi)`, `resolution` points each
/// (`resolution^4` total). Every coordinate derivative has norm at most 1, so the
/// covering radius is at most half the sum of the four spacings.
///
/// The deviation `||N(psi psi^†) - I/d||_inf` is 2-Lipschitz in `psi` (trace-norm
/// contractivity of `N`), so the true `eps` lies in
/// `[eps_lower, eps_lower + 2 d delta]`.
pub fn epsnet_certify_upper(channel: &impl Channel, resolution: usize) -> Result<EpsBracket> {
    let d = channel.dim_in();
    if channel.dim_out() != d {
        return Err(Error::Shape(
            "eps certification needs equal input and output dimensions".into(),
        ));
    }
    if resolution < 2 {
        return Err(Error::Domain("grid resolution must be at least 2".into()));
    }
    let (states, delta): (Vec<ComplexVector>, f64) = match d {
        2 => {
            if resolution.saturating_pow(2) > MAX_GRID_POINTS {
                return Err(Error::Resource(format!("{resolution}^2 grid points")));
            }
            (
                bloch_grid(resolution).collect(),
                bloch_covering_radius(resolution),
            )
        }
        3 => {
            if resolution.saturating_pow(4) > MAX_GRID_POINTS {
                return Err(Error::Resource(format!("{resolution}^4 grid points")));
            }
            let da = std::f64::consts::FRAC_PI_2 / (resolution - 1) as f64;
            let dphi = 2.0 * std::f64::consts::PI / resolution as f64;
            let r = resolution;
            let states = (0..r * r * r * r)
                .map(|idx| {
                    let (i, j, k, l) = (
                        idx / (r * r * r),
                        (idx / (r * r)) % r,
                        (idx / r) % r,
                        idx % r,
                    );
                    hopf_state(
                        i as f64 * da,
                        j as f64 * da,
                        k as f64 * dphi,
                        l as f64 * dphi,
                    )
                })
                .collect();
            (states, da + dphi)
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "grid certification only for d in {{2, 3}}, got {d}"
            )))
        }
    };
    let map = PureStateMap::new(channel);
    let df = d as f64;
    let devs = states
        .par_iter()
        .map(|psi| {
            let spec = hermitian_spectrum(&map.output(psi))?;
            Ok(df * (spec[0] - 1.0 / df).max(1.0 / df - spec[spec.len() - 1]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let eps_lower = devs.into_iter().fold(0.0f64, f64::max);
    Ok(EpsBracket {
        eps_lower,
        eps_upper: eps_lower + 2.0 * df * delta,
        covering_radius: delta,
        grid_points: states.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        random_unitary_channel, werner_holevo, weyl_channel, KrausChannel, RandomUnitaryChannel,
    };
    use crate::linalg::haar_unitary;
    use approx::assert_abs_diff_eq;

    fn quick() -> OptimizerConfig {
        OptimizerConfig::with_seed(3).with_starts(6)
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig::default()
            .with_starts(0)
            .validate()
            .is_err());
        let bad = OptimizerConfig {
            grad_tol: 0.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn objective_examples() {
        let mut rng = SeededRng::new(1, 0);
        let single = RandomUnitaryChannel::single(haar_unitary(3, &mut rng).unwrap()).unwrap();
        let psi = PureState::random(3, &mut rng).unwrap();
        for p in [1.5, 3.0, f64::INFINITY] {
            assert_abs_diff_eq!(
                output_pnorm_objective(&single, p, &psi).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
        let w = weyl_channel(3).unwrap();
        for p in [2.0, 4.0, f64::INFINITY] {
            let expected = 3f64.powf(if p.is_infinite() { 0.0 } else { 1.0 / p } - 1.0);
            assert_abs_diff_eq!(
                output_pnorm_objective(&w, p, &psi).unwrap(),
                expected,
                epsilon = 1e-12
            );
        }
        let wh = werner_holevo(3).unwrap();
        assert_abs_diff_eq!(
            output_pnorm_objective(&wh, 5.0, &psi).unwrap(),
            0.574349,
            epsilon = 1e-6
        );
        assert!(output_pnorm_objective(&wh, 1.0, &psi).is_err());
        assert!(output_pnorm_objective(&wh, 2.0, &PureState::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn gradient_vanishes_for_constant_objectives() {
        let mut rng = SeededRng::new(2, 0);
        let single = RandomUnitaryChannel::single(haar_unitary(4, &mut rng).unwrap()).unwrap();
        let psi = PureState::random(4, &mut rng).unwrap();
        let g = gradient_output_pnorm(&single, 3.0, &psi).unwrap();
        assert!(project_tangent(&psi, &g).norm() <= 1e-8);
        let w = weyl_channel(2).unwrap();
        let psi = PureState::random(2, &mut rng).unwrap();
        let g = gradient_output_pnorm(&w, 2.5, &psi).unwrap();
        assert!(project_tangent(&psi, &g).norm() <= 1e-10);
        assert!(matches!(
            gradient_output_pnorm(&w, f64::INFINITY, &psi),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn maximize_identity_and_wh() {
        let id = KrausChannel::identity(4).unwrap();
        let r = maximize_output_pnorm(&id, 2.0, &quick()).unwrap();
        assert_abs_diff_eq!(r.best_value, 1.0, epsilon = 1e-9);
        let wh = werner_holevo(3).unwrap();
        let r = maximize_output_pnorm(&wh, 5.0, &quick()).unwrap();
        assert_abs_diff_eq!(r.best_value, 0.574349, epsilon = 1e-6);
        assert_eq!(r.per_start_values.len(), 6);
        assert_eq!(
            r.best_value,
            r.per_start_values
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        );
    }

    #[test]
    fn maximize_matches_bloch_grid() {
        let ch = random_unitary_channel(2, 2, 41).unwrap();
        let est = maximize_output_pnorm(&ch, 3.0, &quick())
            .unwrap()
            .best_value;
        let grid = brute_force_pnorm_d2(&ch, 3.0, 200).unwrap();
        assert!((est - grid).abs() <= 1e-4, "{est} vs {grid}");
        assert!(est >= grid - 1e-12);
    }

    #[test]
    fn best_state_is_gauge_fixed() {
        let ch = random_unitary_channel(3, 2, 5).unwrap();
        let r = maximize_output_pnorm(&ch, 2.0, &quick()).unwrap();
        let a = r.best_state.amplitudes();
        let first = a.iter().find(|z| z.norm() > 1e-14).unwrap();
        assert!(first.im == 0.0 && first.re > 0.0);
        assert_abs_diff_eq!(
            output_pnorm_objective(&ch, 2.0, &r.best_state).unwrap(),
            r.best_value,
            epsilon = 1e-12
        );
    }

    #[test]
    fn dimension_one_is_closed_form() {
        let ch = KrausChannel::identity(1).unwrap();
        assert_eq!(
            maximize_output_pnorm(&ch, 3.0, &quick())
                .unwrap()
                .best_value,
            1.0
        );
        assert_eq!(certify_epsilon(&ch, &quick()).unwrap().eps_hat, 0.0);
    }

    #[test]
    fn brute_force_examples() {
        let id = KrausChannel::identity(2).unwrap();
        assert_abs_diff_eq!(
            brute_force_pnorm_d2(&id, 2.0, 200).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let w = weyl_channel(2).unwrap();
        for res in [100, 150] {
            assert_abs_diff_eq!(
                brute_force_pnorm_d2(&w, 4.0, res).unwrap(),
                0.594604,
                epsilon = 1e-6
            );
        }
        let single = random_unitary_channel(2, 1, 9).unwrap();
        assert_abs_diff_eq!(
            brute_force_pnorm_d2(&single, 5.0, 120).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(brute_force_pnorm_d2(&weyl_channel(3).unwrap(), 2.0, 100).is_err());
        assert!(brute_force_pnorm_d2(&w, 2.0, 50).is_err());
    }

    #[test]
    fn certify_examples() {
        let w = weyl_channel(3).unwrap();
        assert!(certify_epsilon(&w, &quick()).unwrap().eps_hat <= 1e-9);
        let single = random_unitary_channel(4, 1, 3).unwrap();
        let c = certify_epsilon(&single, &quick()).unwrap();
        assert_abs_diff_eq!(c.eps_hat, 3.0, epsilon = 1e-9);
        for d in [2, 3, 4] {
            assert!(
                certify_epsilon(&weyl_channel(d).unwrap(), &quick())
                    .unwrap()
                    .eps_hat
                    <= 1e-9
            );
        }
    }

    #[test]
    fn epsnet_examples() {
        let w = weyl_channel(2).unwrap();
        let b = epsnet_certify_upper(&w, 60).unwrap();
        assert!(b.eps_lower <= 1e-12);
        assert_abs_diff_eq!(b.eps_upper, 4.0 * b.covering_radius, epsilon = 1e-12);

        let single = random_unitary_channel(2, 1, 1).unwrap();
        let b = epsnet_certify_upper(&single, 60).unwrap();
        assert!(b.eps_lower <= 1.0 + 1e-12 && 1.0 <= b.eps_upper);

        let h = random_unitary_channel(2, 4, 12).unwrap();
        let b = epsnet_certify_upper(&h, 200).unwrap();
        let c = certify_epsilon(&h, &quick()).unwrap();
        assert!(b.eps_lower <= c.eps_hat + 1e-12 && c.eps_hat <= b.eps_upper);

        let h3 = random_unitary_channel(3, 3, 2).unwrap();
        let b = epsnet_certify_upper(&h3, 12).unwrap();
        let c = certify_epsilon(&h3, &quick()).unwrap();
        assert_eq!(b.grid_points, 12usize.pow(4));
        assert!(b.eps_lower <= c.eps_hat + 1e-12 && c.eps_hat <= b.eps_upper);

        assert!(matches!(
            epsnet_certify_upper(&weyl_channel(4).unwrap(), 10),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            epsnet_certify_upper(&h3, 60),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn more_starts_never_hurt() {
        let ch = random_unitary_channel(4, 3, 8).unwrap();
        let cfg = OptimizerConfig::with_seed(1);
        let few = maximize_output_pnorm(&ch, 3.0, &cfg.clone().with_starts(5)).unwrap();
        let many = maximize_output_pnorm(&ch, 3.0, &cfg.with_starts(50)).unwrap();
        assert!(many.best_value >= few.best_value);
        assert_eq!(&many.per_start_values[..5], &few.per_start_values[..]);
    }

    #[test]
    fn results_are_deterministic() {
        let ch = random_unitary_channel(5, 4, 2).unwrap();
        let a = maximize_output_pnorm(&ch, 2.0, &quick()).unwrap();
        let b = maximize_output_pnorm(&ch, 2.0, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infinity_norm_uses_top_eigenvalue() {
        let ch = random_unitary_channel(4, 3, 6).unwrap();
        let r = maximize_output_pnorm(&ch, f64::INFINITY, &quick()).unwrap();
        let top = maximize_extreme_eigenvalue(&ch, SpectralSide::Top, &quick(), &[]).unwrap();
        assert_eq!(r.best_value, top.best_value);
        // ||sigma||_8 >= lambda_max(sigma) at the same state
        let at_best = output_pnorm_objective(&ch, 8.0, &r.best_state).unwrap();
        assert!(at_best >= r.best_value - 1e-12);
    }
}
