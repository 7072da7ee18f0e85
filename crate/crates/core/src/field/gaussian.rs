use rand_chacha::ChaCha8Rng;
use ndarray::Array2;

use super::{FieldPath, SamplerKind, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::green::{covariance, stationary_part, BoundaryCondition, KernelParams};
use crate::rng::{fill_normals, normal, path_rng};

/// Pivots below this fraction of the diagonal are treated as exact zeros.
const PIVOT_FLOOR: f64 = 1e-13;

/// Lower Cholesky factor of a positive semidefinite covariance, stored as
/// packed rows. Rows can be appended later; earlier rows never change, so a
/// draw of the first `n` coordinates is unaffected by extensions.
#[derive(Clone, Debug, Default)]
pub struct GaussianSampler {
    n: usize,
    packed: Vec<f64>,
}

fn offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl GaussianSampler {
    /// Factor the `n × n` covariance given by `cov(i, j)` (only `j <= i` is queried).
    pub fn from_covariance(n: usize, cov: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::default();
        s.extend(n, cov);
        s
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[offset(i)..offset(i) + i + 1]
    }

    /// Append `m` coordinates; `cov` is indexed in the extended numbering.
    pub fn extend(&mut self, m: usize, mut cov: impl FnMut(usize, usize) -> f64) {
        let start = self.n;
        for i in start..start + m {
            let base = self.packed.len();
            self.packed.resize(base + i + 1, 0.0);
            for k in 0..i {
                let lkk = self.packed[offset(k) + k];
                if lkk == 0.0 {
                    continue;
                }
                let (done, cur) = self.packed.split_at_mut(base);
                let rk = &done[offset(k)..offset(k) + k];
                let dot: f64 = cur[..k].iter().zip(rk).map(|(a, b)| a * b).sum();
                cur[k] = (cov(i, k) - dot) / lkk;
            }
            let diag = cov(i, i);
            let ss: f64 = self.packed[base..base + i].iter().map(|v| v * v).sum();
            let d = diag - ss;
            self.packed[base + i] = if d > PIVOT_FLOOR * diag.abs() && d > 0.0 { d.sqrt() } else { 0.0 };
            self.n += 1;
        }
    }

    /// x = L ξ for coordinates `range` (ξ must cover at least `range.end`).
    pub fn transform_into(&self, xi: &[f64], range: std::ops::Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(range) {
            *o = self.row(i).iter().zip(xi).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut xi = vec![0.0; self.n];
        fill_normals(rng, &mut xi);
        let mut out = vec![0.0; self.n];
        self.transform_into(&xi, 0..self.n, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Coords {
    /// Plain values u(t, x).
    Plain,
    /// Single column: coordinate 0 is u(t_start, x), the rest u(t, x) − u(t_start, x).
    Anchored,
}

/// Exact sampler of u on a window grid, optionally with extra points that
/// are drawn conditionally and only on demand.
#[derive(Clone, Debug)]
pub struct WindowSampler {
    grid: SpaceTimeGrid,
    bc: BoundaryCondition,
    params: KernelParams,
    coords: Coords,
    nodes: Vec<(f64, f64)>,
    gs: GaussianSampler,
    base: usize,
}

impl WindowSampler {
    pub fn new(grid: SpaceTimeGrid, bc: BoundaryCondition, params: &KernelParams) -> Result<Self> {
        let mut nodes = Vec::with_capacity((grid.nt + 1) * (grid.nx + 1));
        for i in 0..=grid.nt {
            for j in 0..=grid.nx {
                nodes.push((grid.time(i), grid.pos(j)));
            }
        }
        let mut cov_err = None;
        let gs = GaussianSampler::from_covariance(nodes.len(), |i, j| {
            let (a, b) = (nodes[i], nodes[j]);
            covariance(a.0, a.1, b.0, b.1, bc, params).unwrap_or_else(|e| {
                cov_err.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = cov_err {
            return Err(e);
        }
        let base = nodes.len();
        Ok(Self {
            grid,
            bc,
            params: *params,
            coords: Coords::Plain,
            nodes,
            gs,
            base,
        })
    }

    /// Single-column window whose coordinates are the anchor value and the
    /// increments from it. Increments near the anchor are then resolved to
    /// full relative precision.
    pub fn anchored(grid: SpaceTimeGrid, bc: BoundaryCondition, params: &KernelParams) -> Result<Self> {
        if grid.nx != 0 {
            return Err(Error::Config("anchored windows are single columns (nx = 0)".into()));
        }
        if grid.t_start <= 0.0 {
            return Err(Error::Config("anchored window needs t_start > 0".into()));
        }
        let nodes: Vec<(f64, f64)> = (0..=grid.nt).map(|i| (grid.time(i) - grid.t_start, grid.x_start)).collect();
        let mut s = Self {
            grid,
            bc,
            params: *params,
            coords: Coords::Anchored,
            nodes: Vec::new(),
            gs: GaussianSampler::default(),
            base: nodes.len(),
        };
        s.push_nodes(&nodes)?;
        Ok(s)
    }

    fn cov(&self, a: (f64, f64), b: (f64, f64), ia: usize, ib: usize) -> Result<f64> {
        match self.coords {
            Coords::Plain => covariance(a.0, a.1, b.0, b.1, self.bc, &self.params),
            Coords::Anchored => {
                let s0 = self.grid.t_start;
                let x = self.grid.x_start;
                let sp = |tau: f64| stationary_part(tau, x, x, self.bc, &self.params);
                let neumann = self.bc == BoundaryCondition::Neumann;
                match (ia == 0, ib == 0) {
                    (true, true) => covariance(s0, x, s0, x, self.bc, &self.params),
                    (true, false) | (false, true) => {
                        let off = if ia == 0 { b.0 } else { a.0 };
                        Ok(sp(off)? - sp(0.0)? - sp(2.0 * s0 + off)? + sp(2.0 * s0)?)
                    }
                    (false, false) => {
                        let (p, q) = (a.0, b.0);
                        let near = sp((p - q).abs())? - sp(p)? - sp(q)? + sp(0.0)?;
                        let far = sp(2.0 * s0 + p + q)? - sp(2.0 * s0 + p)? - sp(2.0 * s0 + q)? + sp(2.0 * s0)?;
                        Ok(near - far + if neumann { p.min(q) } else { 0.0 })
                    }
                }
            }
        }
    }

    fn push_nodes(&mut self, pts: &[(f64, f64)]) -> Result<()> {
        let start = self.nodes.len();
        self.nodes.extend_from_slice(pts);
        let nodes = self.nodes.clone();
        let mut err = None;
        let this = &*self;
        let mut gs = this.gs.clone();
        gs.extend(pts.len(), |i, j| {
            this.cov(nodes[i], nodes[j], i, j).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = err {
            self.nodes.truncate(start);
            return Err(e);
        }
        self.gs = gs;
        Ok(())
    }

    /// Append points drawn conditionally after the grid. For anchored
    /// windows, points are (time offset from the anchor, ignored) and the
    /// drawn value is the increment.
    pub fn add_points(&mut self, pts: &[(f64, f64)]) -> Result<()> {
        self.push_nodes(pts)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn base_len(&self) -> usize {
        self.base
    }

    pub fn extra_len(&self) -> usize {
        self.gs.len() - self.base
    }

    pub fn extra_point(&self, k: usize) -> (f64, f64) {
        self.nodes[self.base + k]
    }

    pub fn draw(&self, seed: u64, path: u64) -> WindowDraw<'_> {
        let mut rng = path_rng(seed, path);
        let mut xi = vec![0.0; self.base];
        fill_normals(&mut rng, &mut xi);
        let mut raw = vec![0.0; self.base];
        self.gs.transform_into(&xi, 0..self.base, &mut raw);
        WindowDraw {
            sampler: self,
            seed,
            path,
            xi,
            raw,
            rng,
        }
    }

    pub fn sample(&self, seed: u64, path: u64) -> FieldPath {
        self.draw(seed, path).path()
    }
}

/// One draw from a [`WindowSampler`]; extra points are generated lazily in
/// a fixed order so the result is a deterministic function of (seed, path).
pub struct WindowDraw<'a> {
    sampler: &'a WindowSampler,
    seed: u64,
    path: u64,
    xi: Vec<f64>,
    raw: Vec<f64>,
    rng: ChaCha8Rng,
}

impl WindowDraw<'_> {
    /// Sampled coordinates in the sampler's convention.
    pub fn raw(&self) -> &[f64] {
        &self.raw[..self.sampler.base]
    }

    pub fn path(&self) -> FieldPath {
        let g = self.sampler.grid;
        let mut values = Array2::zeros((g.nt + 1, g.nx + 1));
        match self.sampler.coords {
            Coords::Plain => {
                for (v, r) in values.iter_mut().zip(self.raw()) {
                    *v = *r;
                }
            }
            Coords::Anchored => {
                let a = self.raw[0];
                values[[0, 0]] = a;
                for i in 1..=g.nt {
                    values[[i, 0]] = a + self.raw[i];
                }
            }
        }
        FieldPath {
            grid: g,
            values,
            bc: self.sampler.bc,
            seed: self.seed,
            path_index: self.path,
            sampler: SamplerKind::Gaussian,
            truncation: None,
        }
    }

    /// Value of extra point `k`, drawing conditionally on everything before it.
    pub fn extra(&mut self, k: usize) -> f64 {
        let idx = self.sampler.base + k;
        assert!(idx < self.sampler.gs.len(), "extra point {k} not configured");
        while self.xi.len() <= idx {
            self.xi.push(normal(&mut self.rng));
            let i = self.raw.len();
            let v: f64 = self.sampler.gs.row(i).iter().zip(&self.xi).map(|(a, b)| a * b).sum();
            self.raw.push(v);
        }
        self.raw[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factor_reproduces_covariance() {
        let a = [[4.0, 2.0, 0.4], [2.0, 3.0, 0.5], [0.4, 0.5, 1.0]];
        let gs = GaussianSampler::from_covariance(3, |i, j| a[i][j]);
        for i in 0..3 {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| gs.row(i)[k] * gs.row(j)[k]).sum();
                assert_relative_eq!(v, a[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_covariance_is_clamped() {
        // Third coordinate is the sum of the first two.
        let a = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]];
        let gs = GaussianSampler::from_covariance(3, |i, j| a[i][j]);
        assert_eq!(gs.row(2)[2], 0.0);
        let mut rng = path_rng(1, 1);
        let x = gs.sample(&mut rng);
        assert_relative_eq!(x[2], x[0] + x[1], epsilon = 1e-12);
    }

    #[test]
    fn extension_leaves_prefix_unchanged() {
        let grid = SpaceTimeGrid::window(0.0, 0.04, 4, 0.5, 0.6, 2).unwrap();
        let kp = KernelParams::default();
        let mut w = WindowSampler::new(grid, BoundaryCondition::Dirichlet, &kp).unwrap();
        let before = w.sample(4, 9);
        w.add_points(&[(0.001, 0.52), (0.002, 0.55)]).unwrap();
        let mut d = w.draw(4, 9);
        assert_eq!(d.path(), before);
        let e0 = d.extra(0);
        let e1 = d.extra(1);
        let mut d2 = w.draw(4, 9);
        assert_eq!(d2.extra(1), e1);
        assert_eq!(d2.extra(0), e0);
    }

    #[test]
    fn anchored_matches_plain_covariance() {
        let kp = KernelParams::default();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let grid = SpaceTimeGrid::window(0.4, 0.44, 4, 0.5, 0.5, 0).unwrap();
            let w = WindowSampler::anchored(grid, bc, &kp).unwrap();
            // Var(u(0.43) − u(0.4)) against four covariance calls.
            let (t, s) = (0.43, 0.4);
            let c = |a, b| covariance(a, 0.5, b, 0.5, bc, &kp).unwrap();
            let direct = c(t, t) + c(s, s) - 2.0 * c(t, s);
            let via = w.cov((0.03, 0.5), (0.03, 0.5), 3, 3).unwrap();
            assert_relative_eq!(via, direct, epsilon = 1e-12);
        }
    }
}
