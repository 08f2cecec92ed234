use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use supermult::analysis::{
    crossover_certified, crossover_predicate, lemma1_lower_bound, lemma2_consistency, median,
    rank_necessity_check, renyi_from_nu, scaling_experiment, violation_report, Crossover, UBig,
};
use supermult::channels::{BuiltChannel, ChannelDescriptor, RandomUnitaryChannel};
use supermult::optimize::{certify_epsilon, maximize_output_pnorm, OptimizerConfig};
use supermult::PureState;

use crate::config::{Experiment, ExperimentConfig, Exponent, Pair};
use crate::error::{CliError, CliResult};
use crate::report::Timing;
use crate::sweep::sweep_wh;

fn to_value<T: Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Internal(format!("serialization: {e}")))
}

/// Serializes a report and writes its `p` back as an [`Exponent`], so that
/// `p = inf` shows up as `"inf"` instead of `null`.
fn with_exponent<T: Serialize>(report: &T, p: f64) -> CliResult<Value> {
    let mut v = to_value(report)?;
    v["p"] = to_value(&Exponent(p))?;
    Ok(v)
}

/// Amplitudes as `[re, im]` pairs.
fn amplitudes(state: &PureState) -> Vec<[f64; 2]> {
    state.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

fn build(descriptor: &ChannelDescriptor) -> CliResult<BuiltChannel> {
    Ok(descriptor.build()?)
}

fn random_unitary<'a>(
    built: &'a BuiltChannel,
    command: &str,
) -> CliResult<&'a RandomUnitaryChannel> {
    built.as_random_unitary().ok_or_else(|| {
        CliError::Config(format!(
            "{command} needs a random unitary channel (haar, weyl or id), got {}",
            built.descriptor
        ))
    })
}

fn nu_p(built: &BuiltChannel, ps: &[Exponent], cfg: &OptimizerConfig) -> CliResult<Value> {
    let mut rows = Vec::with_capacity(ps.len());
    for &Exponent(p) in ps {
        let r = maximize_output_pnorm(built, p, cfg)?;
        let exact = built.exact_nu_p(p);
        rows.push(json!({
            "p": Exponent(p),
            "nu_hat": r.best_value,
            "exact_nu_p": exact.map(|e| e.0),
            "exact_source": exact.map(|e| e.1),
            "renyi_entropy_upper_bound": renyi_from_nu(p, r.best_value),
            "converged_starts": r.converged_flags.iter().filter(|&&c| c).count(),
            "num_starts": r.per_start_values.len(),
            "best_state": amplitudes(&r.best_state),
        }));
    }
    Ok(json!({ "rows": rows }))
}

fn crossover_row(p: f64, eps: f64) -> CliResult<Value> {
    Ok(match crossover_certified(p, eps)? {
        Crossover::Certified {
            d_star,
            n_at_d_star,
            product_bound,
            tensor_bound,
        } => {
            let below = &d_star - UBig::ONE;
            json!({
                "p": Exponent(p),
                "eps": eps,
                "verdict": "certified",
                "d_star": d_star.to_string(),
                "n_at_d_star": n_at_d_star.to_string(),
                "product_bound": product_bound,
                "tensor_bound": tensor_bound,
                "predicate_at_d_star": crossover_predicate(&d_star, p, eps),
                "predicate_below_d_star": crossover_predicate(&below, p, eps),
                "reason": Value::Null,
            })
        }
        Crossover::Never { reason } => json!({
            "p": Exponent(p),
            "eps": eps,
            "verdict": "no crossover",
            "d_star": Value::Null,
            "n_at_d_star": Value::Null,
            "product_bound": Value::Null,
            "tensor_bound": Value::Null,
            "predicate_at_d_star": Value::Null,
            "predicate_below_d_star": Value::Null,
            "reason": reason,
        }),
    })
}

/// Runs one experiment. Returns the outputs payload and per-cell timings.
pub fn execute(config: &ExperimentConfig) -> CliResult<(Value, Vec<f64>)> {
    let cfg = &config.optimizer;
    let outputs = match &config.experiment {
        Experiment::NuP(x) => nu_p(&build(&x.channel)?, &x.p, cfg)?,
        Experiment::CertifyEps(x) => {
            let c = certify_epsilon(&build(&x.channel)?, cfg)?;
            json!({
                "eps_hat": c.eps_hat,
                "top_excess": c.top_excess,
                "bottom_deficit": c.bottom_deficit,
                "converged": c.converged,
                "witness": amplitudes(&c.witness),
            })
        }
        Experiment::Lemma1(x) => {
            let built = build(&x.channel)?;
            let ruc = random_unitary(&built, "lemma1")?;
            let rows =
                x.p.iter()
                    .map(|&Exponent(p)| with_exponent(&lemma1_lower_bound(ruc, p)?, p))
                    .collect::<CliResult<Vec<_>>>()?;
            json!({ "rows": rows })
        }
        Experiment::Lemma2Check(x) => {
            let built = build(&x.channel)?;
            let ruc = random_unitary(&built, "lemma2-check")?;
            let rows =
                x.p.iter()
                    .map(|&Exponent(p)| with_exponent(&lemma2_consistency(ruc, p, cfg)?, p))
                    .collect::<CliResult<Vec<_>>>()?;
            json!({ "rows": rows })
        }
        Experiment::Violation(x) => {
            let c1 = build(&x.channel)?;
            let c2 = match x.pair {
                Pair::Same => c1.clone(),
                Pair::Conjugate => build(&x.channel.conjugated())?,
            };
            with_exponent(&violation_report(&c1, &c2, x.p.0, x.witness, cfg)?, x.p.0)?
        }
        Experiment::Crossover(x) => {
            let rows =
                x.p.iter()
                    .map(|&Exponent(p)| crossover_row(p, x.eps))
                    .collect::<CliResult<Vec<_>>>()?;
            json!({ "rows": rows })
        }
        Experiment::SweepWh(x) => to_value(&sweep_wh(&x.p_grid, x.d, cfg)?)?,
        Experiment::Scaling(x) => {
            let records =
                scaling_experiment(&x.dims, &x.multipliers, x.p.map(|e| e.0), &x.seeds, cfg)?;
            let times = records.iter().map(|r| r.wall_time).collect();
            let rows: Vec<Value> = records
                .iter()
                .map(|r| {
                    json!({
                        "d": r.d,
                        "n": r.n,
                        "multiplier": r.multiplier,
                        "seed": r.seed,
                        "eps_hat": r.eps_hat,
                        "nu_hat": r.nu_hat,
                    })
                })
                .collect();
            let mut medians = Vec::new();
            for &d in &x.dims {
                for &m in &x.multipliers {
                    let cell: Vec<&_> = records
                        .iter()
                        .filter(|r| r.d == d && r.multiplier == m)
                        .collect();
                    medians.push(json!({
                        "d": d,
                        "multiplier": m,
                        "n": cell[0].n,
                        "median_eps_hat": median(&cell.iter().map(|r| r.eps_hat).collect::<Vec<_>>()),
                    }));
                }
            }
            return Ok((json!({ "rows": rows, "medians": medians }), times));
        }
        Experiment::RankCheck(x) => {
            let built = build(&x.channel)?;
            to_value(&rank_necessity_check(
                random_unitary(&built, "rank-check")?,
                cfg,
            )?)?
        }
    };
    Ok((outputs, Vec::new()))
}

/// Executes and times one experiment.
pub fn run(config: &ExperimentConfig) -> CliResult<(Value, Timing)> {
    let start = Instant::now();
    let (outputs, cell_wall_times) = execute(config)?;
    Ok((
        outputs,
        Timing {
            wall_time_seconds: start.elapsed().as_secs_f64(),
            cell_wall_times,
        },
    ))
}
