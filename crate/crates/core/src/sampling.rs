// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams, sample blocks and the Gaussian / inverse-Wishart
//! samplers.
//!
//! Every parallel consumer gets its own ChaCha substream addressed by
//! `(seed, stream)`, so results never depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, gram_lower_into, invert_lower_into, pair_count, LowerTriangular, SymMatrix,
};

pub type SimRng = ChaCha8Rng;

/// Independent generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rows × dim` block of draws, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBlock {
    dim: usize,
    data: Vec<f64>,
}

impl SampleBlock {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Values of coordinate `j` across rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    /// Splits into consecutive blocks of at most `size` rows.
    pub fn split(&self, size: usize) -> Vec<SampleBlock> {
        self.data
            .chunks(size.max(1) * self.dim)
            .map(|c| SampleBlock {
                dim: self.dim,
                data: c.to_vec(),
            })
            .collect()
    }

    pub fn concat(blocks: &[SampleBlock]) -> Result<SampleBlock> {
        let dim = blocks.first().map_or(1, |b| b.dim);
        let mut data = Vec::new();
        for b in blocks {
            if b.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim,
                });
            }
            data.extend_from_slice(&b.data);
        }
        Ok(SampleBlock { dim, data })
    }
}

/// A source of i.i.d. posterior vectors.
///
/// The workspace holds per-thread scratch memory so that `draw` never
/// allocates.
pub trait VectorSampler: Sync {
    type Workspace: Send;

    fn dim(&self) -> usize;

    fn workspace(&self) -> Self::Workspace;

    fn draw(&self, rng: &mut SimRng, ws: &mut Self::Workspace, out: &mut [f64]);

    /// Draws `count` vectors into a new block.
    fn draw_block(&self, rng: &mut SimRng, count: usize) -> SampleBlock {
        let d = self.dim();
        let mut ws = self.workspace();
        let mut data = vec![0.0; count * d];
        for row in data.chunks_exact_mut(d) {
            self.draw(rng, &mut ws, row);
        }
        SampleBlock { dim: d, data }
    }
}

/// Draws per block in [`fold_draws`]; block `b` always uses substream
/// `stream_offset + b`, so results do not depend on the thread count.
pub const DRAW_BLOCK: usize = 4096;

/// Folds `total` draws from `sampler` in parallel.
///
/// `merge` must be associative and commutative for the result to be
/// deterministic (counts and order-statistic buffers are).
pub fn fold_draws<S, A, I, V, M>(
    sampler: &S,
    total: usize,
    seed: u64,
    stream_offset: u64,
    init: I,
    visit: V,
    merge: M,
) -> A
where
    S: VectorSampler,
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, &[f64]) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    use rayon::prelude::*;

    let blocks = total.div_ceil(DRAW_BLOCK);
    let d = sampler.dim();
    (0..blocks)
        .into_par_iter()
        .fold(
            || (init(), sampler.workspace(), vec![0.0; d]),
            |(mut acc, mut ws, mut buf), b| {
                let mut rng = substream(seed, stream_offset + b as u64);
                let count = DRAW_BLOCK.min(total - b * DRAW_BLOCK);
                for _ in 0..count {
                    sampler.draw(&mut rng, &mut ws, &mut buf);
                    visit(&mut acc, &buf);
                }
                (acc, ws, buf)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(&init, &merge)
}

/// `count` rows of `mean + L z` with `z` standard normal.
pub fn sample_mvn(
    mean: &[f64],
    cov_factor: &LowerTriangular,
    count: usize,
    rng: &mut SimRng,
) -> Result<SampleBlock> {
    let sampler = GaussianSampler::new(mean.to_vec(), cov_factor.clone())?;
    Ok(sampler.draw_block(rng, count))
}

/// Multivariate normal `N(mean, L Lᵀ)`.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    factor: LowerTriangular,
    diagonal: bool,
}

impl GaussianSampler {
    pub fn new(mean: Vec<f64>, factor: LowerTriangular) -> Result<Self> {
        if mean.len() != factor.dim() {
            return Err(Error::DimensionMismatch {
                expected: factor.dim(),
                got: mean.len(),
            });
        }
        let p = factor.dim();
        let diagonal = (0..p).all(|i| (0..i).all(|j| factor.get(i, j) == 0.0));
        Ok(Self {
            mean,
            factor,
            diagonal,
        })
    }

    /// `N(0, cov)`.
    pub fn centered(cov: &SymMatrix) -> Result<Self> {
        Self::new(vec![0.0; cov.dim()], cholesky(cov)?)
    }

    /// `d` independent standard normals.
    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            factor: LowerTriangular::identity(d),
            diagonal: true,
        }
    }
}

impl VectorSampler for GaussianSampler {
    type Workspace = Vec<f64>;

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn workspace(&self) -> Vec<f64> {
        vec![0.0; self.mean.len()]
    }

    fn draw(&self, rng: &mut SimRng, z: &mut Vec<f64>, out: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if self.diagonal {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.mean[i] + self.factor.get(i, i) * z[i];
            }
        } else {
            self.factor.mul_vec_into(z, out);
            for (o, m) in out.iter_mut().zip(&self.mean) {
                *o += m;
            }
        }
    }
}

/// Inverse-Wishart `IW(scale, dof)` sampled as the inverse of a Bartlett
/// Wishart draw with scale `scale⁻¹`.
#[derive(Clone, Debug)]
pub struct InverseWishart {
    p: usize,
    dof: f64,
    /// Lower Cholesky factor of `scale⁻¹`.
    inv_scale_factor: LowerTriangular,
    chi: Vec<ChiSquared<f64>>,
}

/// Scratch buffers for one inverse-Wishart draw.
#[derive(Clone, Debug)]
pub struct IwWorkspace {
    bartlett: Vec<f64>,
    product: Vec<f64>,
    inverse: Vec<f64>,
    sigma: Vec<f64>,
    acc: Vec<f64>,
    inv_sd: Vec<f64>,
}

impl InverseWishart {
    pub fn new(scale: &SymMatrix, dof: f64) -> Result<Self> {
        let p = scale.dim();
        let min = p as f64 - 1.0;
        if !(dof > min) {
            return Err(Error::InvalidDof { dof, min });
        }
        let inv_scale = cholesky(scale)?.inverse_of_product()?;
        let inv_scale_factor = cholesky(&inv_scale)?;
        let chi = (0..p)
            .map(|i| ChiSquared::new(dof - i as f64).expect("dof checked above"))
            .collect();
        Ok(Self {
            p,
            dof,
            inv_scale_factor,
            chi,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn workspace(&self) -> IwWorkspace {
        let pp = self.p * self.p;
        IwWorkspace {
            bartlett: vec![0.0; pp],
            product: vec![0.0; pp],
            inverse: vec![0.0; pp],
            sigma: vec![0.0; pp],
            acc: vec![0.0; self.p],
            inv_sd: vec![0.0; self.p],
        }
    }

    /// Leaves the upper triangle of a draw Σ in `ws.sigma`.
    fn draw_upper(&self, rng: &mut SimRng, ws: &mut IwWorkspace) {
        let p = self.p;
        // Bartlett factor A: chi diagonal, standard normal below.
        for i in 0..p {
            let row = &mut ws.bartlett[i * p..(i + 1) * p];
            for v in row[..i].iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            row[i] = self.chi[i].sample(rng).sqrt();
        }
        // B = L A is lower triangular and W = B Bᵀ ~ Wishart(scale⁻¹, dof).
        ws.product.fill(0.0);
        for i in 0..p {
            let l_row = self.inv_scale_factor.row_lower(i);
            for (k, &l) in l_row.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let a_row = &ws.bartlett[k * p..k * p + k + 1];
                let dst = &mut ws.product[i * p..i * p + k + 1];
                for (d, a) in dst.iter_mut().zip(a_row) {
                    *d += l * a;
                }
            }
        }
        // Σ = W⁻¹ = B⁻ᵀ B⁻¹ via triangular solve.
        invert_lower_into(&ws.product, &mut ws.inverse, &mut ws.acc, p);
        gram_lower_into(&ws.inverse, &mut ws.sigma, p);
    }

    pub fn draw_cov(&self, rng: &mut SimRng, ws: &mut IwWorkspace) -> SymMatrix {
        self.draw_upper(rng, ws);
        SymMatrix::from_upper_unchecked(self.p, ws.sigma.clone())
    }

    /// Writes `vech0(corr(Σ))` of one draw into `out`.
    pub fn draw_corr_vech0(&self, rng: &mut SimRng, ws: &mut IwWorkspace, out: &mut [f64]) {
        self.draw_upper(rng, ws);
        let p = self.p;
        for i in 0..p {
            ws.inv_sd[i] = 1.0 / ws.sigma[i * p + i].sqrt();
        }
        let mut k = 0;
        for i in 0..p {
            let si = ws.inv_sd[i];
            for j in (i + 1)..p {
                out[k] = (ws.sigma[i * p + j] * si * ws.inv_sd[j]).clamp(-1.0, 1.0);
                k += 1;
            }
        }
    }
}

/// `count` draws from `IW(scale, dof)`.
pub fn sample_inverse_wishart(
    scale: &SymMatrix,
    dof: f64,
    count: usize,
    rng: &mut SimRng,
) -> Result<Vec<SymMatrix>> {
    let iw = InverseWishart::new(scale, dof)?;
    let mut ws = iw.workspace();
    Ok((0..count).map(|_| iw.draw_cov(rng, &mut ws)).collect())
}

/// Correlation vectors `vech0(corr(Σ))` for `Σ ~ IW(scale, dof)`.
#[derive(Clone, Debug)]
pub struct CorrelationSampler {
    iw: InverseWishart,
}

impl CorrelationSampler {
    pub fn new(scale: &SymMatrix, dof: f64) -> Result<Self> {
        Ok(Self {
            iw: InverseWishart::new(scale, dof)?,
        })
    }

    pub fn p(&self) -> usize {
        self.iw.p()
    }
}

impl VectorSampler for CorrelationSampler {
    type Workspace = IwWorkspace;

    fn dim(&self) -> usize {
        pair_count(self.iw.p())
    }

    fn workspace(&self) -> IwWorkspace {
        self.iw.workspace()
    }

    fn draw(&self, rng: &mut SimRng, ws: &mut IwWorkspace, out: &mut [f64]) {
        self.iw.draw_corr_vech0(rng, ws, out);
    }
}
