use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channels::Channel;
use crate::linalg::{ComplexMatrix, ComplexVector};

type RealMatrix = DMatrix<f64>;

/// Rows of `S` processed together, small enough that a block of `S` stays in
/// L1 while every vector of a batch is updated from it.
const ROW_BLOCK: usize = 512;

/// Fast evaluation of a channel on pure inputs.
///
/// All operators are stacked into one `(K * d_out) x d_in` matrix `S`, so the
/// vectors `A_k psi` come out of a single product `S psi`. With `W` the
/// `d_out x K` matrix of those columns, `N(psi psi^†) = w W W^†` and
/// `N^†(X) psi = w S^† vec(X W)`.
///
/// `S` is held as separate real and imaginary column-major arrays. The tall
/// products run as fused real loops over row blocks, one pass over `S` per
/// batch of vectors, and the small ones as real GEMMs. Each vector in a batch
/// goes through the same arithmetic as it would alone.
#[derive(Clone, Debug)]
pub struct PureStateMap {
    re: Vec<f64>,
    im: Vec<f64>,
    rows: usize,
    dim_in: usize,
    dim_out: usize,
    count: usize,
    weight: f64,
}

/// `W = S psi` for one input, kept so the output and the adjoint product can
/// share it.
#[derive(Clone, Debug)]
pub struct Image {
    wr: RealMatrix,
    wi: RealMatrix,
}

fn split(m: &ComplexMatrix) -> (RealMatrix, RealMatrix) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join(re: &RealMatrix, im: &RealMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex64::new(re[(i, j)], im[(i, j)])
    })
}

/// `(a_r + i a_i)(b_r + i b_i)^†` from real GEMMs.
fn mul_adjoint(
    ar: &RealMatrix,
    ai: &RealMatrix,
    br: &RealMatrix,
    bi: &RealMatrix,
) -> (RealMatrix, RealMatrix) {
    let (brt, bit) = (br.transpose(), bi.transpose());
    (ar * &brt + ai * &bit, ai * &brt - ar * &bit)
}

/// `[a.c, a.d, b.c, b.d]` in one pass, with independent accumulators so the
/// loop vectorizes.
fn dots4(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> [f64; 4] {
    const L: usize = 4;
    let mut acc = [[0.0; L]; 4];
    let n = a.len() / L * L;
    for j in (0..n).step_by(L) {
        for l in 0..L {
            let (x, y, u, v) = (a[j + l], b[j + l], c[j + l], d[j + l]);
            acc[0][l] += x * u;
            acc[1][l] += x * v;
            acc[2][l] += y * u;
            acc[3][l] += y * v;
        }
    }
    let mut out = acc.map(|r| r.iter().sum::<f64>());
    for j in n..a.len() {
        out[0] += a[j] * c[j];
        out[1] += a[j] * d[j];
        out[2] += b[j] * c[j];
        out[3] += b[j] * d[j];
    }
    out
}

impl PureStateMap {
    pub fn new(channel: &impl Channel) -> Self {
        let (din, dout) = (channel.dim_in(), channel.dim_out());
        let ops = channel.operators();
        let rows = ops.len() * dout;
        let mut re = vec![0.0; rows * din];
        let mut im = vec![0.0; rows * din];
        for (k, a) in ops.iter().enumerate() {
            for c in 0..din {
                for r in 0..dout {
                    let z = a[(r, c)];
                    re[c * rows + k * dout + r] = z.re;
                    im[c * rows + k * dout + r] = z.im;
                }
            }
        }
        Self {
            re,
            im,
            rows,
            dim_in: din,
            dim_out: dout,
            count: ops.len(),
            weight: channel.weight(),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn column(&self, c: usize) -> (&[f64], &[f64]) {
        let range = c * self.rows..(c + 1) * self.rows;
        (&self.re[range.clone()], &self.im[range])
    }

    /// `W = S psi`.
    pub fn image(&self, psi: &ComplexVector) -> Image {
        self.images(std::slice::from_ref(psi))
            .pop()
            .expect("one image")
    }

    /// `S psi` for a batch of inputs in one pass over `S`.
    pub fn images(&self, psis: &[ComplexVector]) -> Vec<Image> {
        let mut ys: Vec<(Vec<f64>, Vec<f64>)> = psis
            .iter()
            .map(|_| (vec![0.0; self.rows], vec![0.0; self.rows]))
            .collect();
        for r0 in (0..self.rows).step_by(ROW_BLOCK) {
            let r1 = (r0 + ROW_BLOCK).min(self.rows);
            for c in 0..self.dim_in {
                let (sr, si) = self.column(c);
                let (sr, si) = (&sr[r0..r1], &si[r0..r1]);
                for (psi, (yr, yi)) in psis.iter().zip(ys.iter_mut()) {
                    let (ar, ai) = (psi[c].re, psi[c].im);
                    for (((y1, y2), x1), x2) in
                        yr[r0..r1].iter_mut().zip(&mut yi[r0..r1]).zip(sr).zip(si)
                    {
                        *y1 += x1 * ar - x2 * ai;
                        *y2 += x1 * ai + x2 * ar;
                    }
                }
            }
        }
        ys.into_iter()
            .map(|(yr, yi)| Image {
                wr: RealMatrix::from_vec(self.dim_out, self.count, yr),
                wi: RealMatrix::from_vec(self.dim_out, self.count, yi),
            })
            .collect()
    }

    /// `N(|psi><psi|)`; `psi` need not be normalized.
    pub fn output(&self, psi: &ComplexVector) -> ComplexMatrix {
        self.output_of(&self.image(psi))
    }

    /// `w W W^†`.
    pub fn output_of(&self, img: &Image) -> ComplexMatrix {
        let (gr, gi) = mul_adjoint(&img.wr, &img.wi, &img.wr, &img.wi);
        join(&gr, &gi).scale(self.weight)
    }

    /// `N^†(X) psi`.
    pub fn adjoint_times(&self, x: &ComplexMatrix, psi: &ComplexVector) -> ComplexVector {
        self.adjoint_times_images(&[(x, &self.image(psi))])
            .pop()
            .expect("one product")
    }

    /// `N^†(X_j) psi_j` from the images of the `psi_j`, in one pass over `S`.
    pub fn adjoint_times_images(&self, jobs: &[(&ComplexMatrix, &Image)]) -> Vec<ComplexVector> {
        let ys: Vec<(RealMatrix, RealMatrix)> = jobs
            .iter()
            .map(|(x, img)| {
                let (xr, xi) = split(x);
                (&xr * &img.wr - &xi * &img.wi, &xr * &img.wi + &xi * &img.wr)
            })
            .collect();
        let mut acc = vec![[0.0; 4]; jobs.len() * self.dim_in];
        for r0 in (0..self.rows).step_by(ROW_BLOCK) {
            let r1 = (r0 + ROW_BLOCK).min(self.rows);
            for c in 0..self.dim_in {
                let (sr, si) = self.column(c);
                let (sr, si) = (&sr[r0..r1], &si[r0..r1]);
                for (j, (yr, yi)) in ys.iter().enumerate() {
                    let part = dots4(sr, si, &yr.as_slice()[r0..r1], &yi.as_slice()[r0..r1]);
                    let slot = &mut acc[j * self.dim_in + c];
                    for l in 0..4 {
                        slot[l] += part[l];
                    }
                }
            }
        }
        (0..jobs.len())
            .map(|j| {
                ComplexVector::from_fn(self.dim_in, |c, _| {
                    let [rr, ri, ir, ii] = acc[j * self.dim_in + c];
                    // conj(S) y
                    Complex64::new(rr + ii, ri - ir).scale(self.weight)
                })
            })
            .collect()
    }

    /// `N^†(|v><v|)`, a `d_in x d_in` matrix.
    pub fn adjoint_rank_one(&self, v: &ComplexVector) -> ComplexMatrix {
        self.adjoint_rank_ones(std::slice::from_ref(v))
            .pop()
            .expect("one matrix")
    }

    /// `N^†(|v_j><v_j|)` for a batch of vectors in one pass over `S`.
    pub fn adjoint_rank_ones(&self, vs: &[ComplexVector]) -> Vec<ComplexMatrix> {
        let (din, dout) = (self.dim_in, self.dim_out);
        // row k of R_j is v_j^† A_k
        let mut rs: Vec<(RealMatrix, RealMatrix)> = vs
            .iter()
            .map(|_| {
                (
                    RealMatrix::zeros(self.count, din),
                    RealMatrix::zeros(self.count, din),
                )
            })
            .collect();
        let split_vs: Vec<(Vec<f64>, Vec<f64>)> = vs
            .iter()
            .map(|v| v.iter().map(|z| (z.re, z.im)).unzip())
            .collect();
        for c in 0..din {
            let (sr, si) = self.column(c);
            for k in 0..self.count {
                let (br, bi) = (&sr[k * dout..(k + 1) * dout], &si[k * dout..(k + 1) * dout]);
                for ((vr, vi), (rr, ri)) in split_vs.iter().zip(rs.iter_mut()) {
                    let [rv, rw, iv, iw] = dots4(br, bi, vr, vi);
                    rr[(k, c)] = rv + iw;
                    ri[(k, c)] = iv - rw;
                }
            }
        }
        rs.into_iter()
            .map(|(rr, ri)| {
                // R^† R
                let (rrt, rit) = (rr.transpose(), ri.transpose());
                let gr = &rrt * &rr + &rit * &ri;
                let gi = &rrt * &ri - &rit * &rr;
                join(&gr, &gi).scale(self.weight)
            })
            .collect()
    }
}
