use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use supermult::analysis::WitnessKind;
use supermult::channels::ChannelDescriptor;
use supermult::optimize::OptimizerConfig;

use crate::config::{
    load_config, ChannelParams, CrossoverParams, Experiment, ExperimentConfig, Exponent,
    ExponentParams, Format, OutputOptions, Pair, ScalingParams, SweepParams, ViolationParams,
    SEED_ENV,
};
use crate::error::CliResult;

const CHANNEL_HELP: &str = "\
Channels are written kind:dim[:n[:seed]]:
  haar:D:N[:SEED]   N Haar-random unitaries on C^D, mixed uniformly (seed defaults to --seed)
  weyl:D            the D^2 Weyl (clock and shift) unitaries, mixed uniformly
  wh:D              Werner-Holevo channel X -> (tr(X) I - X^T)/(D-1)
  id:D              identity channel
Exponents are reals > 1 or 'inf'.";

#[derive(Debug, Parser)]
#[command(name = "supermult", version, about = "Maximum output p-norms of quantum channels", after_help = CHANNEL_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    /// Master seed for random starts and seedless Haar channels.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Number of random starts [default: 20].
    #[arg(long)]
    pub starts: Option<usize>,
    /// Iteration cap per start [default: 5000].
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl OptimizerArgs {
    fn config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::with_seed(self.seed);
        if let Some(s) = self.starts {
            cfg.num_starts = s;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; JSON lines are appended, CSV is overwritten. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl OutputArgs {
    fn options(self) -> OutputOptions {
        OutputOptions {
            path: self.out,
            format: self.format,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WitnessArg {
    /// The maximally entangled state; an exact evaluation.
    MaxEntangled,
    /// Multistart optimization over the tensor-product channel.
    Optimize,
}

impl From<WitnessArg> for WitnessKind {
    fn from(w: WitnessArg) -> Self {
        match w {
            WitnessArg::MaxEntangled => WitnessKind::MaxEntangled,
            WitnessArg::Optimize => WitnessKind::Optimize,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the maximum output p-norm (a lower bound attained by a state).
    NuP {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<Exponent>,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Lower-bound the randomizing parameter eps of a channel.
    CertifyEps {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Maximally entangled lower bound for a random unitary channel and its conjugate.
    Lemma1 {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<Exponent>,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare the p-norm estimate with the eps-randomizing upper bound.
    Lemma2Check {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<Exponent>,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare a tensor-product lower bound with the product of single-copy estimates.
    Violation {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[arg(long, value_enum, default_value_t = Pair::Same)]
        pair: Pair,
        #[arg(long)]
        p: Exponent,
        #[arg(long, value_enum, default_value_t = WitnessArg::MaxEntangled)]
        witness: WitnessArg,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Smallest dimension at which the Haar-scale bounds certify a violation.
    Crossover {
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<Exponent>,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Locate the Werner-Holevo crossing on a p grid.
    SweepWh {
        #[arg(long, value_delimiter = ',', required = true)]
        p_grid: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// eps estimates of Haar channels with n = multiplier * d ln d.
    Scaling {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        multipliers: Vec<f64>,
        /// Channel seeds.
        #[arg(long, value_delimiter = ',', default_values_t = 0..10)]
        seeds: Vec<u64>,
        /// Also estimate nu_p for each channel.
        #[arg(long)]
        p: Option<Exponent>,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check that a channel with fewer unitaries than the dimension is not randomizing.
    RankCheck {
        #[arg(long)]
        channel: ChannelDescriptor,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Command {
    /// Turns the parsed arguments into a config and output options.
    pub fn into_job(self) -> CliResult<(ExperimentConfig, OutputOptions)> {
        let job = |experiment, opt: OptimizerArgs, out: OutputArgs| {
            Ok((
                ExperimentConfig {
                    experiment,
                    optimizer: opt.config(),
                },
                out.options(),
            ))
        };
        match self {
            Command::NuP {
                channel,
                p,
                opt,
                out,
            } => job(Experiment::NuP(ExponentParams { channel, p }), opt, out),
            Command::CertifyEps { channel, opt, out } => {
                job(Experiment::CertifyEps(ChannelParams { channel }), opt, out)
            }
            Command::Lemma1 {
                channel,
                p,
                opt,
                out,
            } => job(Experiment::Lemma1(ExponentParams { channel, p }), opt, out),
            Command::Lemma2Check {
                channel,
                p,
                opt,
                out,
            } => job(
                Experiment::Lemma2Check(ExponentParams { channel, p }),
                opt,
                out,
            ),
            Command::Violation {
                channel,
                pair,
                p,
                witness,
                opt,
                out,
            } => job(
                Experiment::Violation(ViolationParams {
                    channel,
                    pair,
                    p,
                    witness: witness.into(),
                }),
                opt,
                out,
            ),
            Command::Crossover { p, eps, out } => Ok((
                ExperimentConfig {
                    experiment: Experiment::Crossover(CrossoverParams { p, eps }),
                    optimizer: OptimizerConfig::default(),
                },
                out.options(),
            )),
            Command::SweepWh {
                p_grid,
                d,
                opt,
                out,
            } => job(Experiment::SweepWh(SweepParams { p_grid, d }), opt, out),
            Command::Scaling {
                dims,
                multipliers,
                seeds,
                p,
                opt,
                out,
            } => job(
                Experiment::Scaling(ScalingParams {
                    dims,
                    multipliers,
                    seeds,
                    p,
                }),
                opt,
                out,
            ),
            Command::RankCheck { channel, opt, out } => {
                job(Experiment::RankCheck(ChannelParams { channel }), opt, out)
            }
            Command::Run { config } => load_config(&config),
        }
    }
}
