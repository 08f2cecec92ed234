//! Quantum channels in Kraus form and the random unitary special case.
//!
//! Every channel is presented through the [`Channel`] trait as a list of
//! operators `A_k` and a scalar weight `w`, acting as
//! `rho -> w * sum_k A_k rho A_k^†`. For a [`KrausChannel`] the weight is 1;
//! a [`RandomUnitaryChannel`] keeps its unitaries unscaled with `w = 1/n`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    all_finite, haar_unitary, hermitian_spectrum, identity, unitarity_residual, ComplexMatrix,
    DensityOperator, PureState,
};
pub use crate::pure_map::PureStateMap;
use crate::rng::SeededRng;
use crate::{MAX_DIM, MAX_TENSOR_DIM};

/// Trace-preservation and unitarity tolerance for channel construction.
pub const CHANNEL_TOL: f64 = 1e-9;

/// Largest output dimension for which [`tensor`] materializes the Kraus list.
pub const MAX_MATERIALIZED_DIM: usize = 256;

/// Upper limit on stored complex entries for a single channel.
const MAX_CHANNEL_ENTRIES: usize = 1 << 26;

pub trait Channel: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn operators(&self) -> &[ComplexMatrix];
    fn weight(&self) -> f64;

    fn num_operators(&self) -> usize {
        self.operators().len()
    }
}

fn check_input(channel: &impl Channel, m: &ComplexMatrix) -> Result<()> {
    let d = channel.dim_in();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Shape(format!(
            "channel input is {d}x{d}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `w * sum_k A_k X A_k^†` for an arbitrary square input.
pub fn apply_matrix(channel: &impl Channel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_input(channel, x)?;
    let d = channel.dim_out();
    let mut out = ComplexMatrix::zeros(d, d);
    for a in channel.operators() {
        out += a * x * a.adjoint();
    }
    Ok(out.scale(channel.weight()))
}

pub fn apply(channel: &impl Channel, rho: &DensityOperator) -> Result<DensityOperator> {
    let out = apply_matrix(channel, rho.matrix())?;
    let herm = (&out + out.adjoint()).scale(0.5);
    Ok(DensityOperator::from_matrix_unchecked(herm))
}

/// Heisenberg picture: `w * sum_k A_k^† X A_k`.
pub fn adjoint_apply(channel: &impl Channel, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = channel.dim_out();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Shape(format!(
            "adjoint input is {d}x{d}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let mut out = ComplexMatrix::zeros(channel.dim_in(), channel.dim_in());
    for a in channel.operators() {
        out += a.adjoint() * x * a;
    }
    Ok(out.scale(channel.weight()))
}

/// Output of `N1 ⊗ N2` on a pure input of `C^{d1} ⊗ C^{d2}`, without forming
/// the tensor-product Kraus list.
///
/// The input is reshaped to the `d1 x d2` matrix `Psi`; then
/// `(A ⊗ B) psi = vec(A Psi B^T)` in row-major order.
pub fn apply_tensor_pure(
    c1: &impl Channel,
    c2: &impl Channel,
    psi: &PureState,
) -> Result<ComplexMatrix> {
    let (d1, d2) = (c1.dim_in(), c2.dim_in());
    let (o1, o2) = (c1.dim_out(), c2.dim_out());
    if psi.dim() != d1 * d2 {
        return Err(Error::Shape(format!(
            "tensor input dimension {} != {d1}*{d2}",
            psi.dim()
        )));
    }
    if o1 * o2 > MAX_TENSOR_DIM {
        return Err(Error::Resource(format!(
            "tensor output dimension {} exceeds {MAX_TENSOR_DIM}",
            o1 * o2
        )));
    }
    let amps = psi.amplitudes();
    let big_psi = ComplexMatrix::from_fn(d1, d2, |a, b| amps[a * d2 + b]);
    let (n1, n2) = (c1.num_operators(), c2.num_operators());
    let mut cols = ComplexMatrix::zeros(o1 * o2, n1 * n2);
    for (i, a) in c1.operators().iter().enumerate() {
        let left = a * &big_psi;
        for (j, b) in c2.operators().iter().enumerate() {
            let w = &left * b.transpose();
            let mut col = cols.column_mut(i * n2 + j);
            for r in 0..o1 {
                for s in 0..o2 {
                    col[r * o2 + s] = w[(r, s)];
                }
            }
        }
    }
    Ok((&cols * cols.adjoint()).scale(c1.weight() * c2.weight()))
}

/// Health report of a Kraus list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDiagnostics {
    /// Operator norm of `sum_k K_k^† K_k - I`.
    pub trace_preservation_residual: f64,
    /// `max |V V^† - I|` per unitary; empty for general Kraus channels.
    pub unitarity_residuals: Vec<f64>,
    pub passed: bool,
}

fn tp_residual(ops: &[ComplexMatrix], weight: f64) -> f64 {
    let Some(first) = ops.first() else {
        return f64::INFINITY;
    };
    let d = first.ncols();
    let mut sum = ComplexMatrix::zeros(d, d);
    for k in ops {
        if k.ncols() != d {
            return f64::INFINITY;
        }
        sum += k.ad_mul(k);
    }
    let resid = sum.scale(weight) - identity(d);
    match hermitian_spectrum(&resid) {
        Ok(spec) => spec.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        Err(_) => f64::INFINITY,
    }
}

/// Checks a raw Kraus list; does not require it to form a valid channel.
pub fn validate_kraus_ops(ops: &[ComplexMatrix]) -> ChannelDiagnostics {
    let r = tp_residual(ops, 1.0);
    ChannelDiagnostics {
        trace_preservation_residual: r,
        unitarity_residuals: Vec::new(),
        passed: r <= CHANNEL_TOL,
    }
}

pub fn validate(channel: &impl Channel) -> ChannelDiagnostics {
    let r = tp_residual(channel.operators(), channel.weight());
    let unitary = (channel.weight() * channel.num_operators() as f64 - 1.0).abs() < 1e-15
        && channel.dim_in() == channel.dim_out();
    let unitarity_residuals: Vec<f64> = if unitary {
        channel.operators().iter().map(unitarity_residual).collect()
    } else {
        Vec::new()
    };
    let passed = r <= CHANNEL_TOL && unitarity_residuals.iter().all(|&u| u <= CHANNEL_TOL);
    ChannelDiagnostics {
        trace_preservation_residual: r,
        unitarity_residuals,
        passed,
    }
}

fn check_entry_budget(count: usize, rows: usize, cols: usize) -> Result<()> {
    if count.saturating_mul(rows).saturating_mul(cols) > MAX_CHANNEL_ENTRIES {
        return Err(Error::Resource(format!(
            "{count} operators of size {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Completely positive trace-preserving map `rho -> sum_k K_k rho K_k^†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus_ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(kraus_ops: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = kraus_ops.first() else {
            return Err(Error::InvalidChannel("empty Kraus list".into()));
        };
        let (dim_out, dim_in) = first.shape();
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidDimension(
                "zero-dimensional Kraus operator".into(),
            ));
        }
        if let Some(bad) = kraus_ops.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(Error::Shape(format!(
                "Kraus operators must all be {dim_out}x{dim_in}, found {}x{}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        if !kraus_ops.iter().all(all_finite) {
            return Err(Error::NonFinite);
        }
        let diag = validate_kraus_ops(&kraus_ops);
        if !diag.passed {
            return Err(Error::InvalidChannel(format!(
                "sum K^dag K deviates from identity by {:e}",
                diag.trace_preservation_residual
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus_ops,
        })
    }

    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(
                "identity channel of dimension 0".into(),
            ));
        }
        Self::new(vec![identity(d)])
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    /// Entrywise complex conjugate of every Kraus operator.
    pub fn conjugate(&self) -> Self {
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus_ops: self.kraus_ops.iter().map(|k| k.map(|z| z.conj())).collect(),
        }
    }
}

impl Channel for KrausChannel {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn operators(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    fn weight(&self) -> f64 {
        1.0
    }
}

/// Uniform mixture of `n` unitary conjugations, `rho -> (1/n) sum_i V_i rho V_i^†`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomUnitaryChannel {
    dim: usize,
    unitaries: Vec<ComplexMatrix>,
}

impl RandomUnitaryChannel {
    pub fn new(unitaries: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = unitaries.first() else {
            return Err(Error::InvalidChannel(
                "random unitary channel needs n >= 1".into(),
            ));
        };
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::InvalidDimension("unitary of dimension 0".into()));
        }
        for (i, v) in unitaries.iter().enumerate() {
            if v.shape() != (dim, dim) {
                return Err(Error::Shape(format!(
                    "unitary {i} is {}x{}, expected {dim}x{dim}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            let r = unitarity_residual(v);
            if !(r <= CHANNEL_TOL) {
                return Err(Error::InvalidChannel(format!(
                    "V_{i} is not unitary (residual {r:e})"
                )));
            }
        }
        Ok(Self { dim, unitaries })
    }

    pub fn single(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.unitaries.len()
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    /// `rho -> (1/n) sum_i conj(V_i) rho conj(V_i)^†`.
    pub fn conjugate(&self) -> Self {
        Self {
            dim: self.dim,
            unitaries: self.unitaries.iter().map(|v| v.map(|z| z.conj())).collect(),
        }
    }

    /// Kraus form with `K_i = V_i / sqrt(n)`.
    pub fn to_kraus(&self) -> KrausChannel {
        let s = 1.0 / (self.n() as f64).sqrt();
        KrausChannel {
            dim_in: self.dim,
            dim_out: self.dim,
            kraus_ops: self.unitaries.iter().map(|v| v.scale(s)).collect(),
        }
    }

    /// The `n1 * n2` unitaries `V_i ⊗ W_j`, in lexicographic order.
    pub fn tensor(&self, other: &RandomUnitaryChannel) -> Result<Self> {
        let dim = self.dim * other.dim;
        if dim > MAX_MATERIALIZED_DIM {
            return Err(Error::Resource(format!(
                "tensor dimension {dim} exceeds {MAX_MATERIALIZED_DIM}"
            )));
        }
        check_entry_budget(self.n() * other.n(), dim, dim)?;
        let unitaries = self
            .unitaries
            .iter()
            .flat_map(|v| other.unitaries.iter().map(move |w| v.kronecker(w)))
            .collect();
        Ok(Self { dim, unitaries })
    }
}

impl Channel for RandomUnitaryChannel {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.dim
    }

    fn operators(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    fn weight(&self) -> f64 {
        1.0 / self.unitaries.len() as f64
    }
}

/// Tensor product channel with Kraus operators `sqrt(w1 w2) A ⊗ B`.
pub fn tensor(c1: &impl Channel, c2: &impl Channel) -> Result<KrausChannel> {
    let (din, dout) = (c1.dim_in() * c2.dim_in(), c1.dim_out() * c2.dim_out());
    if din.max(dout) > MAX_MATERIALIZED_DIM {
        return Err(Error::Resource(format!(
            "tensor dimension {} exceeds {MAX_MATERIALIZED_DIM}",
            din.max(dout)
        )));
    }
    check_entry_budget(c1.num_operators() * c2.num_operators(), dout, din)?;
    let s = (c1.weight() * c2.weight()).sqrt();
    let kraus_ops = c1
        .operators()
        .iter()
        .flat_map(|a| c2.operators().iter().map(move |b| a.kronecker(b).scale(s)))
        .collect();
    Ok(KrausChannel {
        dim_in: din,
        dim_out: dout,
        kraus_ops,
    })
}

/// `n` independent Haar unitaries; unitary `i` is drawn from stream `i` of `seed`.
pub fn random_unitary_channel(d: usize, n: usize, seed: u64) -> Result<RandomUnitaryChannel> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!(
            "random unitary channel with d={d}, n={n}"
        )));
    }
    check_entry_budget(n, d, d)?;
    let unitaries = (0..n)
        .map(|i| haar_unitary(d, &mut SeededRng::new(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    RandomUnitaryChannel::new(unitaries)
}

/// Generic channel with `k` Kraus operators, cut from the first `dim_in`
/// columns of a Haar unitary on `dim_out * k` (a random Stinespring isometry).
pub fn random_kraus_channel(
    dim_in: usize,
    dim_out: usize,
    k: usize,
    seed: u64,
) -> Result<KrausChannel> {
    if dim_in == 0 || dim_out == 0 || k == 0 {
        return Err(Error::InvalidDimension(format!(
            "random Kraus channel with dim_in={dim_in}, dim_out={dim_out}, k={k}"
        )));
    }
    if dim_in > dim_out * k {
        return Err(Error::Shape(format!(
            "isometry needs dim_in <= dim_out * k, got {dim_in} > {}",
            dim_out * k
        )));
    }
    check_entry_budget(k, dim_out, dim_in)?;
    let u = haar_unitary(dim_out * k, &mut SeededRng::new(seed, 0))?;
    let kraus_ops = (0..k)
        .map(|j| u.view((j * dim_out, 0), (dim_out, dim_in)).into_owned())
        .collect();
    KrausChannel::new(kraus_ops)
}

/// The `d^2` discrete Weyl operators `X^a Z^b`, which average every input to `I/d`.
pub fn weyl_channel(d: usize) -> Result<RandomUnitaryChannel> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "Weyl channel needs d >= 2, got {d}"
        )));
    }
    let omega = |k: usize| {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % d) as f64 / d as f64)
    };
    let mut unitaries = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            // X^a Z^b |j> = omega^{b j} |j + a>
            let mut u = ComplexMatrix::zeros(d, d);
            for j in 0..d {
                u[((j + a) % d, j)] = omega(b * j);
            }
            unitaries.push(u);
        }
    }
    RandomUnitaryChannel::new(unitaries)
}

/// Werner–Holevo channel `rho -> (tr(rho) I - rho^T) / (d - 1)`, with Kraus
/// operators `(|i><j| - |j><i|) / sqrt(d - 1)` for `i < j`.
pub fn werner_holevo(d: usize) -> Result<KrausChannel> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "Werner-Holevo channel needs d >= 2, got {d}"
        )));
    }
    let s = 1.0 / ((d - 1) as f64).sqrt();
    let mut ops = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            let mut k = ComplexMatrix::zeros(d, d);
            k[(i, j)] = Complex64::new(s, 0.0);
            k[(j, i)] = Complex64::new(-s, 0.0);
            ops.push(k);
        }
    }
    KrausChannel::new(ops)
}

/// Closed form of the Werner–Holevo action, used to cross-check the Kraus list.
pub fn werner_holevo_closed_form(x: &ComplexMatrix) -> ComplexMatrix {
    let d = x.nrows();
    let tr: Complex64 = x.diagonal().iter().sum();
    (identity(d) * tr - x.transpose()).unscale((d - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    RandomUnitaryHaar,
    Weyl,
    WernerHolevo,
    Identity,
    ExplicitKraus,
}

impl ChannelKind {
    fn short_name(self) -> &'static str {
        match self {
            ChannelKind::RandomUnitaryHaar => "haar",
            ChannelKind::Weyl => "weyl",
            ChannelKind::WernerHolevo => "wh",
            ChannelKind::Identity => "id",
            ChannelKind::ExplicitKraus => "kraus",
        }
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" | "random_unitary_haar" => Ok(ChannelKind::RandomUnitaryHaar),
            "weyl" => Ok(ChannelKind::Weyl),
            "wh" | "werner_holevo" => Ok(ChannelKind::WernerHolevo),
            "id" | "identity" => Ok(ChannelKind::Identity),
            "kraus" | "explicit_kraus" => Ok(ChannelKind::ExplicitKraus),
            other => Err(Error::Domain(format!("unknown channel kind '{other}'"))),
        }
    }
}

/// A matrix as rows of `[re, im]` pairs.
pub type MatrixRepr = Vec<Vec<[f64; 2]>>;

fn matrix_from_repr(rows: &MatrixRepr) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(
            "explicit Kraus operator must be a nonempty rectangular matrix".into(),
        ));
    }
    Ok(ComplexMatrix::from_fn(nrows, ncols, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// Serializable recipe for building a channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DescriptorRepr", into = "DescriptorFields")]
pub struct ChannelDescriptor {
    pub kind: ChannelKind,
    pub dim: usize,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    /// Build the entrywise complex conjugate channel.
    pub conjugate: bool,
    pub kraus_ops: Option<Vec<MatrixRepr>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DescriptorFields {
    kind: ChannelKind,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    conjugate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kraus_ops: Option<Vec<MatrixRepr>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DescriptorRepr {
    Short(String),
    Full(DescriptorFields),
}

impl TryFrom<DescriptorRepr> for ChannelDescriptor {
    type Error = Error;

    fn try_from(repr: DescriptorRepr) -> Result<Self> {
        match repr {
            DescriptorRepr::Short(s) => s.parse(),
            DescriptorRepr::Full(f) => ChannelDescriptor {
                kind: f.kind,
                dim: f.dim,
                n: f.n,
                seed: f.seed,
                conjugate: f.conjugate,
                kraus_ops: f.kraus_ops,
            }
            .checked(),
        }
    }
}

impl From<ChannelDescriptor> for DescriptorFields {
    fn from(d: ChannelDescriptor) -> Self {
        DescriptorFields {
            kind: d.kind,
            dim: d.dim,
            n: d.n,
            seed: d.seed,
            conjugate: d.conjugate,
            kraus_ops: d.kraus_ops,
        }
    }
}

impl ChannelDescriptor {
    pub fn haar(dim: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: ChannelKind::RandomUnitaryHaar,
            dim,
            n: Some(n),
            seed: Some(seed),
            conjugate: false,
            kraus_ops: None,
        }
    }

    pub fn simple(kind: ChannelKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            n: None,
            seed: None,
            conjugate: false,
            kraus_ops: None,
        }
    }

    fn checked(self) -> Result<Self> {
        if self.dim == 0 {
            return Err(Error::InvalidDimension(
                "channel dimension must be positive".into(),
            ));
        }
        match (self.kind, self.n) {
            (ChannelKind::RandomUnitaryHaar, None) => {
                return Err(Error::Domain("random_unitary_haar requires n".into()))
            }
            (ChannelKind::RandomUnitaryHaar, Some(0)) => {
                return Err(Error::Domain("n must be positive".into()))
            }
            (ChannelKind::RandomUnitaryHaar, Some(_)) => {}
            (_, Some(_)) => {
                return Err(Error::Domain(format!(
                    "n is only valid for haar channels, not {:?}",
                    self.kind
                )))
            }
            (_, None) => {}
        }
        if (self.kind == ChannelKind::ExplicitKraus) != self.kraus_ops.is_some() {
            return Err(Error::Domain(
                "kraus_ops must be given exactly for explicit_kraus".into(),
            ));
        }
        Ok(self)
    }

    /// Fills in the seed of a haar descriptor that has none.
    pub fn with_default_seed(mut self, seed: u64) -> Self {
        if self.kind == ChannelKind::RandomUnitaryHaar && self.seed.is_none() {
            self.seed = Some(seed);
        }
        self
    }

    pub fn conjugated(&self) -> Self {
        let mut d = self.clone();
        d.conjugate = !d.conjugate;
        d
    }

    pub fn build(&self) -> Result<BuiltChannel> {
        let d = self.dim;
        if d > MAX_DIM {
            return Err(Error::Resource(format!(
                "channel dimension {d} exceeds {MAX_DIM}"
            )));
        }
        let channel = match self.kind {
            ChannelKind::RandomUnitaryHaar => {
                let n = self
                    .n
                    .ok_or_else(|| Error::Domain("random_unitary_haar requires n".into()))?;
                AnyChannel::RandomUnitary(random_unitary_channel(d, n, self.seed.unwrap_or(0))?)
            }
            ChannelKind::Weyl => AnyChannel::RandomUnitary(weyl_channel(d)?),
            ChannelKind::WernerHolevo => AnyChannel::Kraus(werner_holevo(d)?),
            ChannelKind::Identity => {
                AnyChannel::RandomUnitary(RandomUnitaryChannel::single(identity(d))?)
            }
            ChannelKind::ExplicitKraus => {
                let reprs = self
                    .kraus_ops
                    .as_ref()
                    .ok_or_else(|| Error::Domain("explicit_kraus requires kraus_ops".into()))?;
                let ops = reprs
                    .iter()
                    .map(matrix_from_repr)
                    .collect::<Result<Vec<_>>>()?;
                let k = KrausChannel::new(ops)?;
                if k.dim_in() != d {
                    return Err(Error::Shape(format!(
                        "descriptor dim {d} but Kraus input dim {}",
                        k.dim_in()
                    )));
                }
                AnyChannel::Kraus(k)
            }
        };
        let channel = if self.conjugate {
            channel.conjugate()
        } else {
            channel
        };
        Ok(BuiltChannel {
            descriptor: self.clone(),
            channel,
        })
    }
}

impl FromStr for ChannelDescriptor {
    type Err = Error;

    /// `kind:dim[:n[:seed]]`, e.g. `wh:3`, `weyl:4`, `haar:16:64:7`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || {
            Error::Domain(format!(
                "cannot parse channel descriptor '{s}', expected kind:dim[:n[:seed]]"
            ))
        };
        if parts.len() < 2 || parts.len() > 4 {
            return Err(bad());
        }
        let kind: ChannelKind = parts[0].parse()?;
        if kind == ChannelKind::ExplicitKraus {
            return Err(Error::Domain(
                "explicit_kraus channels can only be given in a JSON config".into(),
            ));
        }
        let dim: usize = parts[1].parse().map_err(|_| bad())?;
        let n = parts
            .get(2)
            .map(|x| x.parse::<usize>())
            .transpose()
            .map_err(|_| bad())?;
        let seed = parts
            .get(3)
            .map(|x| x.parse::<u64>())
            .transpose()
            .map_err(|_| bad())?;
        if kind != ChannelKind::RandomUnitaryHaar && parts.len() > 2 {
            return Err(bad());
        }
        ChannelDescriptor {
            kind,
            dim,
            n,
            seed,
            conjugate: false,
            kraus_ops: None,
        }
        .checked()
    }
}

impl fmt::Display for ChannelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjugate {
            write!(f, "conj(")?;
        }
        write!(f, "{}:{}", self.kind.short_name(), self.dim)?;
        if let Some(n) = self.n {
            write!(f, ":{n}")?;
        }
        if let Some(seed) = self.seed {
            write!(f, ":{seed}")?;
        }
        if self.conjugate {
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyChannel {
    Kraus(KrausChannel),
    RandomUnitary(RandomUnitaryChannel),
}

impl AnyChannel {
    pub fn conjugate(&self) -> Self {
        match self {
            AnyChannel::Kraus(k) => AnyChannel::Kraus(k.conjugate()),
            AnyChannel::RandomUnitary(r) => AnyChannel::RandomUnitary(r.conjugate()),
        }
    }

    pub fn as_random_unitary(&self) -> Option<&RandomUnitaryChannel> {
        match self {
            AnyChannel::RandomUnitary(r) => Some(r),
            AnyChannel::Kraus(_) => None,
        }
    }
}

impl Channel for AnyChannel {
    fn dim_in(&self) -> usize {
        match self {
            AnyChannel::Kraus(k) => k.dim_in(),
            AnyChannel::RandomUnitary(r) => r.dim_in(),
        }
    }

    fn dim_out(&self) -> usize {
        match self {
            AnyChannel::Kraus(k) => k.dim_out(),
            AnyChannel::RandomUnitary(r) => r.dim_out(),
        }
    }

    fn operators(&self) -> &[ComplexMatrix] {
        match self {
            AnyChannel::Kraus(k) => k.operators(),
            AnyChannel::RandomUnitary(r) => r.operators(),
        }
    }

    fn weight(&self) -> f64 {
        match self {
            AnyChannel::Kraus(k) => k.weight(),
            AnyChannel::RandomUnitary(r) => r.weight(),
        }
    }
}

/// Where a single-copy upper bound on `nu_p` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundSource {
    /// Every pure input produces the same output spectrum.
    ClosedFormSpectrum,
    /// Outputs of a single unitary are pure, so `nu_p = 1`.
    PureOutputs,
}

/// A channel together with the descriptor it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltChannel {
    pub descriptor: ChannelDescriptor,
    pub channel: AnyChannel,
}

impl BuiltChannel {
    pub fn as_random_unitary(&self) -> Option<&RandomUnitaryChannel> {
        self.channel.as_random_unitary()
    }

    /// Exact `nu_p` when it is known in closed form.
    pub fn exact_nu_p(&self, p: f64) -> Option<(f64, UpperBoundSource)> {
        let d = self.descriptor.dim as f64;
        let inv_p = if p == f64::INFINITY { 0.0 } else { 1.0 / p };
        match self.descriptor.kind {
            ChannelKind::Identity => Some((1.0, UpperBoundSource::PureOutputs)),
            ChannelKind::RandomUnitaryHaar if self.descriptor.n == Some(1) => {
                Some((1.0, UpperBoundSource::PureOutputs))
            }
            ChannelKind::Weyl => Some((d.powf(inv_p - 1.0), UpperBoundSource::ClosedFormSpectrum)),
            ChannelKind::WernerHolevo => Some((
                (d - 1.0).powf(inv_p - 1.0),
                UpperBoundSource::ClosedFormSpectrum,
            )),
            _ => None,
        }
    }
}

impl Channel for BuiltChannel {
    fn dim_in(&self) -> usize {
        self.channel.dim_in()
    }

    fn dim_out(&self) -> usize {
        self.channel.dim_out()
    }

    fn operators(&self) -> &[ComplexMatrix] {
        self.channel.operators()
    }

    fn weight(&self) -> f64 {
        self.channel.weight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, schatten_norm, ComplexVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn random_kraus_is_valid_and_reproducible() {
        let a = random_kraus_channel(3, 2, 4, 9).unwrap();
        assert_eq!((a.dim_in(), a.dim_out(), a.num_operators()), (3, 2, 4));
        assert!(validate(&a).trace_preservation_residual <= 1e-12);
        assert_eq!(a, random_kraus_channel(3, 2, 4, 9).unwrap());
        assert!(random_kraus_channel(5, 2, 2, 0).is_err());
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal())
    }

    fn random_hermitian(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
        let g = random_matrix(d, rng);
        (&g + g.adjoint()).scale(0.5)
    }

    /// Random Kraus channel: blocks of a Haar isometry.
    fn random_kraus(d: usize, k: usize, rng: &mut SeededRng) -> KrausChannel {
        let u = haar_unitary(d * k, rng).unwrap();
        let ops = (0..k)
            .map(|i| u.view((i * d, 0), (d, d)).into_owned())
            .collect();
        KrausChannel::new(ops).unwrap()
    }

    /// Spanning set of density inputs: |i><i|, |+_ij><+_ij|, |+i_ij><+i_ij|.
    fn spanning_inputs(d: usize) -> Vec<DensityOperator> {
        let mut out = Vec::new();
        for i in 0..d {
            out.push(DensityOperator::from_pure(&PureState::basis(d, i).unwrap()));
            for j in (i + 1)..d {
                for phase in [c(1.0), Complex64::new(0.0, 1.0)] {
                    let mut v = ComplexVector::zeros(d);
                    v[i] = c(1.0);
                    v[j] = phase;
                    out.push(DensityOperator::from_pure(
                        &PureState::normalized(v).unwrap(),
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn identity_channel_is_identity() {
        let id = KrausChannel::identity(3).unwrap();
        let rho = DensityOperator::random(3, &mut SeededRng::new(1, 0)).unwrap();
        assert!(max_abs(&(apply(&id, &rho).unwrap().matrix() - rho.matrix())) <= 1e-15);
        let x = random_hermitian(3, &mut SeededRng::new(1, 1));
        assert!(max_abs(&(adjoint_apply(&id, &x).unwrap() - &x)) <= 1e-15);
    }

    #[test]
    fn single_unitary_preserves_spectrum() {
        let mut rng = SeededRng::new(2, 0);
        let ch = RandomUnitaryChannel::single(haar_unitary(4, &mut rng).unwrap()).unwrap();
        let rho = DensityOperator::random(4, &mut rng).unwrap();
        let a = rho.eigenvalues();
        let b = apply(&ch, &rho).unwrap().eigenvalues();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn weyl_depolarizes_spanning_set() {
        for d in [2, 3, 4] {
            let w = weyl_channel(d).unwrap();
            assert_eq!(w.n(), d * d);
            let flat = identity(d).unscale(d as f64);
            for rho in spanning_inputs(d) {
                assert!(max_abs(&(apply(&w, &rho).unwrap().into_matrix() - &flat)) <= 1e-10);
            }
        }
        assert!(weyl_channel(1).is_err());
    }

    #[test]
    fn weyl_d2_is_pauli_group() {
        let w = weyl_channel(2).unwrap();
        let x = ComplexMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let z = ComplexMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let y = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                c(0.0),
            ],
        );
        let us = w.unitaries();
        assert_eq!(us[0], identity(2));
        assert!(max_abs(&(&us[1] - &z)) < 1e-15);
        assert!(max_abs(&(&us[2] - &x)) < 1e-15);
        // X Z = -i Y
        assert!(max_abs(&(&us[3] - y.scale(1.0) * Complex64::new(0.0, -1.0))) < 1e-15);
    }

    #[test]
    fn conjugate_examples() {
        let w = weyl_channel(2).unwrap();
        let real =
            RandomUnitaryChannel::new(vec![w.unitaries()[0].clone(), w.unitaries()[2].clone()])
                .unwrap();
        assert_eq!(real.conjugate(), real);
        let h = random_unitary_channel(3, 5, 17).unwrap();
        assert_eq!(h.conjugate().conjugate(), h);
        let rho = DensityOperator::random(3, &mut SeededRng::new(4, 0)).unwrap();
        let lhs = apply(&h.conjugate(), &rho.conj()).unwrap();
        let rhs = apply(&h, &rho).unwrap().conj();
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) <= 1e-12);
    }

    #[test]
    fn adjoint_of_identity_is_identity() {
        let mut rng = SeededRng::new(5, 0);
        let chans: Vec<KrausChannel> = vec![
            random_kraus(3, 4, &mut rng),
            werner_holevo(4).unwrap(),
            random_unitary_channel(5, 3, 1).unwrap().to_kraus(),
        ];
        for ch in &chans {
            let d = ch.dim_out();
            assert!(max_abs(&(adjoint_apply(ch, &identity(d)).unwrap() - identity(d))) <= 1e-9);
        }
    }

    #[test]
    fn adjoint_duality() {
        let mut rng = SeededRng::new(6, 0);
        for _ in 0..10 {
            let ch = random_kraus(4, 3, &mut rng);
            let rho = DensityOperator::random(4, &mut rng).unwrap();
            let x = random_hermitian(4, &mut rng);
            let lhs: Complex64 = (&x * apply(&ch, &rho).unwrap().matrix()).trace();
            let rhs: Complex64 = (adjoint_apply(&ch, &x).unwrap() * rho.matrix()).trace();
            assert!((lhs - rhs).norm() <= 1e-10);
        }
    }

    #[test]
    fn tensor_examples() {
        let id = tensor(
            &KrausChannel::identity(2).unwrap(),
            &KrausChannel::identity(3).unwrap(),
        )
        .unwrap();
        assert_eq!(id.kraus_ops(), &[identity(6)]);

        let mut rng = SeededRng::new(7, 0);
        let v = haar_unitary(2, &mut rng).unwrap();
        let w = haar_unitary(3, &mut rng).unwrap();
        let t = tensor(
            &RandomUnitaryChannel::single(v.clone()).unwrap(),
            &RandomUnitaryChannel::single(w.clone()).unwrap(),
        )
        .unwrap();
        assert_eq!(t.kraus_ops().len(), 1);
        assert!(max_abs(&(&t.kraus_ops()[0] - v.kronecker(&w))) <= 1e-15);

        let n = random_kraus(2, 3, &mut rng);
        let m = random_unitary_channel(3, 2, 9).unwrap();
        let nm = tensor(&n, &m).unwrap();
        assert_eq!(nm.kraus_ops().len(), 3 * 2);
        assert!(validate(&nm).passed);
        let rho = DensityOperator::random(2, &mut rng).unwrap();
        let sigma = DensityOperator::random(3, &mut rng).unwrap();
        let lhs = apply(&nm, &rho.tensor(&sigma)).unwrap();
        let rhs = apply(&n, &rho).unwrap().tensor(&apply(&m, &sigma).unwrap());
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) <= 1e-10);
    }

    #[test]
    fn tensor_guard() {
        let a = KrausChannel::identity(20).unwrap();
        assert!(matches!(tensor(&a, &a), Err(Error::Resource(_))));
    }

    #[test]
    fn conjugation_commutes_with_tensor() {
        let a = random_unitary_channel(2, 3, 1).unwrap();
        let b = random_unitary_channel(3, 2, 2).unwrap();
        assert_eq!(
            a.tensor(&b).unwrap().conjugate(),
            a.conjugate().tensor(&b.conjugate()).unwrap()
        );
    }

    #[test]
    fn random_unitary_structure_and_determinism() {
        let one = random_unitary_channel(2, 1, 3).unwrap();
        assert_eq!(one.n(), 1);
        assert!(validate(&one).passed);
        assert_eq!(
            random_unitary_channel(4, 8, 11).unwrap(),
            random_unitary_channel(4, 8, 11).unwrap()
        );
        assert_ne!(
            random_unitary_channel(4, 8, 11).unwrap(),
            random_unitary_channel(4, 8, 12).unwrap()
        );
    }

    #[test]
    fn werner_holevo_validity_and_closed_form() {
        for d in [2, 3, 4, 5] {
            let wh = werner_holevo(d).unwrap();
            assert_eq!(wh.kraus_ops().len(), d * (d - 1) / 2);
            assert!(validate(&wh).trace_preservation_residual <= 1e-12);
            // full matrix basis |i><j|
            for i in 0..d {
                for j in 0..d {
                    let mut e = ComplexMatrix::zeros(d, d);
                    e[(i, j)] = c(1.0);
                    let diff = apply_matrix(&wh, &e).unwrap() - werner_holevo_closed_form(&e);
                    assert!(max_abs(&diff) <= 1e-10);
                }
            }
        }
        assert!(werner_holevo(1).is_err());
    }

    #[test]
    fn werner_holevo_pure_output_d3() {
        let wh = werner_holevo(3).unwrap();
        let mut rng = SeededRng::new(8, 0);
        for _ in 0..20 {
            let psi = PureState::random(3, &mut rng).unwrap();
            let out = apply(&wh, &DensityOperator::from_pure(&psi)).unwrap();
            let bar = psi.conj().projector();
            let expected = (identity(3) - bar).unscale(2.0);
            assert!(max_abs(&(out.matrix() - expected)) <= 1e-12);
            let spec = out.eigenvalues();
            assert_abs_diff_eq!(spec[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(spec[1], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(spec[2], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                schatten_norm(out.matrix(), 5.0).unwrap(),
                0.574349,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn werner_holevo_spectrum_is_input_independent() {
        for d in [3, 4] {
            let wh = werner_holevo(d).unwrap();
            let mut rng = SeededRng::new(9, d as u64);
            let reference = apply(
                &wh,
                &DensityOperator::from_pure(&PureState::basis(d, 0).unwrap()),
            )
            .unwrap()
            .eigenvalues();
            for _ in 0..100 {
                let psi = PureState::random(d, &mut rng).unwrap();
                let spec = apply(&wh, &DensityOperator::from_pure(&psi))
                    .unwrap()
                    .eigenvalues();
                for (a, b) in spec.iter().zip(&reference) {
                    assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn validate_examples() {
        let id = validate(&KrausChannel::identity(3).unwrap());
        assert_eq!(id.trace_preservation_residual, 0.0);
        assert!(id.passed);
        let half = validate_kraus_ops(&[identity(2).scale(0.5)]);
        assert!(!half.passed);
        assert_abs_diff_eq!(half.trace_preservation_residual, 0.75, epsilon = 1e-15);
        assert!(KrausChannel::new(vec![identity(2).scale(0.5)]).is_err());
        let h = validate(&random_unitary_channel(8, 16, 4).unwrap());
        assert!(h.passed);
        assert_eq!(h.unitarity_residuals.len(), 16);
    }

    #[test]
    fn pure_state_map_matches_apply() {
        let mut rng = SeededRng::new(10, 0);
        let ch = random_kraus(3, 4, &mut rng);
        let map = PureStateMap::new(&ch);
        let psi = PureState::random(3, &mut rng).unwrap();
        let direct = apply(&ch, &DensityOperator::from_pure(&psi)).unwrap();
        assert!(max_abs(&(map.output(psi.amplitudes()) - direct.matrix())) <= 1e-13);
        let x = random_hermitian(3, &mut rng);
        let lhs = map.adjoint_times(&x, psi.amplitudes());
        let rhs = adjoint_apply(&ch, &x).unwrap() * psi.amplitudes();
        assert!((lhs - rhs).norm() <= 1e-13);
    }

    #[test]
    fn lazy_tensor_matches_materialized() {
        let mut rng = SeededRng::new(12, 0);
        let a = random_kraus(2, 2, &mut rng);
        let b = random_unitary_channel(3, 3, 5).unwrap();
        let psi = PureState::random(6, &mut rng).unwrap();
        let lazy = apply_tensor_pure(&a, &b, &psi).unwrap();
        let eager = apply(&tensor(&a, &b).unwrap(), &DensityOperator::from_pure(&psi)).unwrap();
        assert!(max_abs(&(lazy - eager.matrix())) <= 1e-13);
    }

    #[test]
    fn descriptor_parsing_and_json() {
        let d: ChannelDescriptor = "haar:16:64:7".parse().unwrap();
        assert_eq!(d, ChannelDescriptor::haar(16, 64, 7));
        assert_eq!(d.to_string(), "haar:16:64:7");
        let wh: ChannelDescriptor = "wh:3".parse().unwrap();
        assert_eq!(wh.kind, ChannelKind::WernerHolevo);
        assert!("haar:4".parse::<ChannelDescriptor>().is_err());
        assert!("weyl:4:2".parse::<ChannelDescriptor>().is_err());
        assert!("foo:4".parse::<ChannelDescriptor>().is_err());
        assert!("id:0".parse::<ChannelDescriptor>().is_err());
    }

    #[test]
    fn descriptor_build_guards() {
        assert!(matches!(
            ChannelDescriptor::simple(ChannelKind::Identity, 65).build(),
            Err(Error::Resource(_))
        ));
        let built = ChannelDescriptor::haar(3, 2, 1)
            .conjugated()
            .build()
            .unwrap();
        assert_eq!(
            built.as_random_unitary().unwrap(),
            &random_unitary_channel(3, 2, 1).unwrap().conjugate()
        );
    }

    #[test]
    fn exact_nu_p_matches_spectrum() {
        let wh = ChannelDescriptor::simple(ChannelKind::WernerHolevo, 3)
            .build()
            .unwrap();
        let (v, src) = wh.exact_nu_p(5.0).unwrap();
        assert_eq!(src, UpperBoundSource::ClosedFormSpectrum);
        assert_abs_diff_eq!(v, 0.574349, epsilon = 1e-6);
        let weyl = ChannelDescriptor::simple(ChannelKind::Weyl, 4)
            .build()
            .unwrap();
        assert_abs_diff_eq!(weyl.exact_nu_p(2.0).unwrap().0, 0.5, epsilon = 1e-15);
        assert_eq!(weyl.exact_nu_p(f64::INFINITY).unwrap().0, 0.25);
        assert!(ChannelDescriptor::haar(3, 2, 0)
            .build()
            .unwrap()
            .exact_nu_p(2.0)
            .is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn random_unitary_apply_is_trace_preserving_and_psd(seed in any::<u64>(), d in 1usize..7, n in 1usize..6) {
                let ch = random_unitary_channel(d, n, seed).unwrap();
                let rho = DensityOperator::random(d, &mut SeededRng::new(seed, 99)).unwrap();
                let out = apply(&ch, &rho).unwrap();
                prop_assert!(DensityOperator::new(out.into_matrix()).is_ok());
            }

            #[test]
            fn weyl_is_exactly_randomizing(seed in any::<u64>(), d in 2usize..6) {
                let ch = weyl_channel(d).unwrap();
                let psi = PureState::random(d, &mut SeededRng::new(seed, 0)).unwrap();
                let out = apply(&ch, &DensityOperator::from_pure(&psi)).unwrap();
                let dev = out.matrix() - identity(d).unscale(d as f64);
                let spec = hermitian_spectrum(&dev).unwrap();
                let eps = d as f64 * spec[0].abs().max(spec[d - 1].abs());
                prop_assert!(eps <= 1e-9);
            }

            #[test]
            fn kraus_count_multiplies(k1 in 1usize..4, k2 in 1usize..4, seed in any::<u64>()) {
                let mut rng = SeededRng::new(seed, 0);
                let a = random_kraus(2, k1, &mut rng);
                let b = random_kraus(3, k2, &mut rng);
                prop_assert_eq!(tensor(&a, &b).unwrap().kraus_ops().len(), k1 * k2);
            }
        }
    }
}
