//! Weighted Lichnerowicz Laplacian `L h = Δ h - ∇_{∇f} h + 2 Rm(h)` on
//! U(2)-invariant symmetric 2-tensors over the FIK shrinker.
//!
//! An invariant tensor has frame components `h00, h11 = h22, h33, h03`. With
//! `β = b_s/b`, `γ = c_s/c`, `q = c^2/b^4` and `w = b^2 c e^{-f}`:
//!
//! ```text
//! (L h)_pp = (1/w)(w h_pp')' + Σ_q M_pq h_qq        p, q ∈ {00, 11, 33}
//! (L h)_03 = (1/w)(w h_03')' + m03 h_03
//!
//! M = | -2γ²-4β²      4β²+4K01        2γ²+2K03  |
//!     |  2β²+2K01    -2β²-2q+2K12     2q+2K13   |
//!     |  2γ²+2K03     4q+4K13        -2γ²-4q    |
//! m03 = -4γ² - 2β² - 2q - 2K03
//! ```
//!
//! `L` is self-adjoint for `(S, T) = ∫ (S00 T00 + 2 S11 T11 + S33 T33 + 2 S03 T03) w ds`
//! (orbit volume normalized to `b^2 c`). Regularity at the bolt requires
//! `h03 = O(s^2)` and `h00 - h33 = O(s^2)`.
//!
//! Discretization: cell-centered flux form on `[0, S]` with `w = 0` at the
//! bolt face and homogeneous Dirichlet data at `S`. The discrete operator is
//! symmetric in the discrete weighted inner product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::BandedSym;
use crate::error::{Error, Result};
use crate::profile::cell_centers;
use crate::reference::{FikPoint, SolitonBackground};

/// Component weights of the frame inner product, in storage order
/// `00, 11, 33, 03`.
pub const COMPONENT_WEIGHTS: [f64; 4] = [1.0, 2.0, 1.0, 2.0];

/// U(2)-invariant symmetric 2-tensor in frame components on a cell-centered
/// arclength grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorU2 {
    pub s: Vec<f64>,
    pub h00: Vec<f64>,
    pub h11: Vec<f64>,
    pub h33: Vec<f64>,
    pub h03: Vec<f64>,
}

impl SymTensorU2 {
    pub fn zeros(s: &[f64]) -> Self {
        let n = s.len();
        Self { s: s.to_vec(), h00: vec![0.0; n], h11: vec![0.0; n], h33: vec![0.0; n], h03: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.h00,
            1 => &self.h11,
            2 => &self.h33,
            _ => &self.h03,
        }
    }

    pub fn component_mut(&mut self, k: usize) -> &mut Vec<f64> {
        match k {
            0 => &mut self.h00,
            1 => &mut self.h11,
            2 => &mut self.h33,
            _ => &mut self.h03,
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SymTensorU2) {
        for k in 0..4 {
            let src = other.component(k).to_vec();
            for (x, y) in self.component_mut(k).iter_mut().zip(src) {
                *x += alpha * y;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> SymTensorU2 {
        let mut out = SymTensorU2::zeros(&self.s);
        out.axpy(alpha, self);
        out
    }

    pub fn max_abs(&self) -> f64 {
        (0..4)
            .flat_map(|k| self.component(k).iter().copied())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Bolt regularity: `h03` and `h00 - h33` extrapolated to `s = 0` (even
    /// quadratic in `s^2` through the first three cells) must vanish relative
    /// to the tensor's size.
    pub fn check_parity(&self, tol: f64) -> Result<()> {
        if self.len() < 3 {
            return Err(Error::Resolution("tensor needs at least three cells".into()));
        }
        let xs: Vec<f64> = self.s[..3].iter().map(|s| s * s).collect();
        let at_bolt = |v: &[f64]| crate::stencil::lagrange(&xs, &v[..3], 0.0);
        let diff: Vec<f64> = (0..3).map(|i| self.h00[i] - self.h33[i]).collect();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for (name, v) in [("h03", at_bolt(&self.h03)), ("h00 - h33", at_bolt(&diff))] {
            if v.abs() > tol * scale {
                return Err(Error::Parity(format!(
                    "{name} = {v:e} at the bolt (tensor scale {scale:e})"
                )));
            }
        }
        Ok(())
    }

    /// Interleaved storage `[h00, h11, h33, h03]` per cell.
    #[cfg(test)]
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.len());
        for i in 0..self.len() {
            out.extend_from_slice(&[self.h00[i], self.h11[i], self.h33[i], self.h03[i]]);
        }
        out
    }

    fn from_flat(s: &[f64], v: &[f64]) -> Self {
        let mut out = SymTensorU2::zeros(s);
        for i in 0..s.len() {
            out.h00[i] = v[4 * i];
            out.h11[i] = v[4 * i + 1];
            out.h33[i] = v[4 * i + 2];
            out.h03[i] = v[4 * i + 3];
        }
        out
    }
}

/// Truncated cell-centered grid `[0, s_max]` for the spectral problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralGrid {
    pub cells: usize,
    pub s_max: f64,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self { cells: 1600, s_max: 16.0 }
    }
}

impl SpectralGrid {
    pub fn nodes(&self) -> Vec<f64> {
        cell_centers(self.cells, self.s_max)
    }

    pub fn spacing(&self) -> f64 {
        self.s_max / self.cells as f64
    }

    pub fn refined(&self) -> Self {
        Self { cells: 2 * self.cells, s_max: self.s_max }
    }
}

/// Zeroth-order coefficients at one cell.
#[derive(Clone, Copy, Debug)]
struct CellCoefficients {
    weight: f64,
    block: [[f64; 3]; 3],
    m03: f64,
}

fn cell_coefficients(e: &FikPoint) -> CellCoefficients {
    let beta = e.bs / e.b;
    let gamma = e.cs / e.c;
    let q = e.c * e.c / (e.b * e.b * e.b * e.b);
    let k = e.curvature();
    let (b2, g2) = (beta * beta, gamma * gamma);
    CellCoefficients {
        weight: e.b * e.b * e.c * (-e.f).exp(),
        block: [
            [-2.0 * g2 - 4.0 * b2, 4.0 * b2 + 4.0 * k.k01, 2.0 * g2 + 2.0 * k.k03],
            [2.0 * b2 + 2.0 * k.k01, -2.0 * b2 - 2.0 * q + 2.0 * k.k12, 2.0 * q + 2.0 * k.k13],
            [2.0 * g2 + 2.0 * k.k03, 4.0 * q + 4.0 * k.k13, -2.0 * g2 - 4.0 * q],
        ],
        m03: -4.0 * g2 - 2.0 * b2 - 2.0 * q - 2.0 * k.k03,
    }
}

/// Discrete `L` on a fixed grid.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    pub grid: SpectralGrid,
    s: Vec<f64>,
    cells: Vec<CellCoefficients>,
    /// `w` at the faces `s = j Δ`, `j = 0..=cells`.
    faces: Vec<f64>,
}

impl SpectralOperator {
    pub fn new(bg: &SolitonBackground, grid: SpectralGrid) -> Result<Self> {
        if grid.cells < 8 || !(grid.s_max > 0.0) {
            return Err(Error::Resolution(format!("invalid spectral grid {grid:?}")));
        }
        if grid.s_max > bg.s_max() {
            return Err(Error::Parameter(format!(
                "spectral domain {} exceeds the soliton grid {}",
                grid.s_max,
                bg.s_max()
            )));
        }
        let s = grid.nodes();
        let dx = grid.spacing();
        let points = crate::par::map_indices(s.len(), |i| bg.eval(s[i]));
        let cells = points
            .into_iter()
            .map(|e| e.map(|e| cell_coefficients(&e)))
            .collect::<Result<Vec<_>>>()?;
        let mut faces = crate::par::map_indices(grid.cells + 1, |j| {
            let x = j as f64 * dx;
            bg.eval(x).map(|e| e.b * e.b * e.c * (-e.f).exp())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        faces[0] = 0.0;
        let op = Self { grid, s, cells, faces };
        op.check_assembly()?;
        Ok(op)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.s
    }

    /// Discrete weight `w_i Δ` of cell `i`.
    pub fn cell_weight(&self, i: usize) -> f64 {
        self.cells[i].weight * self.grid.spacing()
    }

    fn check_grid(&self, h: &SymTensorU2) -> Result<()> {
        let same = h.len() == self.s.len()
            && h.s.iter().zip(&self.s).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "tensor has {} cells, operator grid has {}",
                h.len(),
                self.s.len()
            )))
        }
    }

    /// Weighted inner product.
    pub fn inner(&self, a: &SymTensorU2, b: &SymTensorU2) -> Result<f64> {
        self.check_grid(a)?;
        self.check_grid(b)?;
        let mut acc = 0.0;
        for i in 0..self.s.len() {
            let local = a.h00[i] * b.h00[i]
                + 2.0 * a.h11[i] * b.h11[i]
                + a.h33[i] * b.h33[i]
                + 2.0 * a.h03[i] * b.h03[i];
            acc += self.cell_weight(i) * local;
        }
        Ok(acc)
    }

    pub fn norm(&self, a: &SymTensorU2) -> Result<f64> {
        Ok(self.inner(a, a)?.sqrt())
    }

    /// Radial part `(1/w)(w v')'` at cell `i` for one component.
    #[inline]
    fn radial(&self, v: &[f64], i: usize) -> f64 {
        let n = v.len();
        let dx = self.grid.spacing();
        let right = if i + 1 < n { v[i + 1] } else { -v[i] };
        let left = if i > 0 { v[i - 1] } else { v[i] };
        let flux = self.faces[i + 1] * (right - v[i]) - self.faces[i] * (v[i] - left);
        flux / (self.cells[i].weight * dx * dx)
    }

    /// `L h`. The input must satisfy the bolt regularity conditions.
    pub fn apply(&self, h: &SymTensorU2) -> Result<SymTensorU2> {
        self.check_grid(h)?;
        h.check_parity(PARITY_TOL)?;
        Ok(self.apply_unchecked(h))
    }

    fn apply_unchecked(&self, h: &SymTensorU2) -> SymTensorU2 {
        let rows = crate::par::map_indices(self.s.len(), |i| {
            let c = &self.cells[i];
            let x = [h.h00[i], h.h11[i], h.h33[i]];
            let mut out = [0.0; 4];
            for p in 0..3 {
                out[p] = self.radial(h.component(p), i)
                    + c.block[p][0] * x[0]
                    + c.block[p][1] * x[1]
                    + c.block[p][2] * x[2];
            }
            out[3] = self.radial(&h.h03, i) + c.m03 * h.h03[i];
            out
        });
        let mut out = SymTensorU2::zeros(&self.s);
        for (i, r) in rows.into_iter().enumerate() {
            out.h00[i] = r[0];
            out.h11[i] = r[1];
            out.h33[i] = r[2];
            out.h03[i] = r[3];
        }
        out
    }

    /// Fails if the zeroth-order block is not symmetric in the component
    /// weights.
    fn check_assembly(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            for p in 0..3 {
                for q in 0..p {
                    let a = COMPONENT_WEIGHTS[p] * c.block[p][q];
                    let b = COMPONENT_WEIGHTS[q] * c.block[q][p];
                    let scale = a.abs().max(b.abs()).max(1.0);
                    if (a - b).abs() > 1e-12 * scale {
                        return Err(Error::Assembly(format!(
                            "block ({p},{q}) asymmetric at cell {i}: {a} vs {b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `D^{1/2} L D^{-1/2}` with `D = diag(w_i Δ g_p)`, a symmetric banded
    /// matrix in interleaved ordering.
    pub fn symmetric_matrix(&self) -> BandedSym {
        let n = self.s.len();
        let dx = self.grid.spacing();
        let mut a = BandedSym::zeros(4 * n, 4);
        for i in 0..n {
            let wi = self.cells[i].weight;
            let right = self.faces[i + 1];
            let left = self.faces[i];
            let outer = if i + 1 < n { right } else { 2.0 * right };
            let diag_radial = -(outer + left) / (wi * dx * dx);
            let c = &self.cells[i];
            for p in 0..3 {
                for q in 0..=p {
                    let gpq = (COMPONENT_WEIGHTS[p] / COMPONENT_WEIGHTS[q]).sqrt();
                    let mut v = gpq * c.block[p][q];
                    if p == q {
                        v += diag_radial;
                    }
                    a.set(4 * i + p, 4 * i + q, v);
                }
            }
            a.set(4 * i + 3, 4 * i + 3, diag_radial + c.m03);
            if i + 1 < n {
                let off = right / (dx * dx * (wi * self.cells[i + 1].weight).sqrt());
                for p in 0..4 {
                    a.set(4 * (i + 1) + p, 4 * i + p, off);
                }
            }
        }
        a
    }

    fn scaling(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(4 * self.s.len());
        for i in 0..self.s.len() {
            let w = self.cell_weight(i);
            for g in COMPONENT_WEIGHTS {
                d.push((w * g).sqrt());
            }
        }
        d
    }

    /// Frame components of `Ric` on the operator grid.
    pub fn ricci(&self, bg: &SolitonBackground) -> Result<SymTensorU2> {
        self.tensor_from(bg, |e| {
            let k = e.curvature();
            [k.ric00, k.ric11, k.ric33]
        })
    }

    /// Frame components of `Hess f`: `(f_ss, β f_s, γ f_s)`.
    pub fn hessian_f(&self, bg: &SolitonBackground) -> Result<SymTensorU2> {
        self.tensor_from(bg, |e| [e.fss, e.bs / e.b * e.fs, e.cs / e.c * e.fs])
    }

    /// The background metric (all diagonal frame components 1).
    pub fn metric(&self) -> SymTensorU2 {
        let mut g = SymTensorU2::zeros(&self.s);
        for k in 0..3 {
            g.component_mut(k).iter_mut().for_each(|x| *x = 1.0);
        }
        g
    }

    fn tensor_from<F: Fn(&FikPoint) -> [f64; 3] + Sync>(&self, bg: &SolitonBackground, f: F) -> Result<SymTensorU2> {
        let rows = crate::par::map_indices(self.s.len(), |i| bg.eval(self.s[i]).map(|e| f(&e)));
        let mut t = SymTensorU2::zeros(&self.s);
        for (i, r) in rows.into_iter().enumerate() {
            let r = r?;
            t.h00[i] = r[0];
            t.h11[i] = r[1];
            t.h33[i] = r[2];
        }
        Ok(t)
    }
}

/// Relative tolerance of the bolt regularity check in [`SpectralOperator::apply`].
pub const PARITY_TOL: f64 = 1e-3;

/// `L h` on `h`'s grid (which must be a default-style cell-centered grid on `[0, S]`).
pub fn apply_l(bg: &SolitonBackground, h: &SymTensorU2) -> Result<SymTensorU2> {
    SpectralOperator::new(bg, grid_of(h)?)?.apply(h)
}

/// Weighted inner product of two tensors on a common grid.
pub fn inner_f(bg: &SolitonBackground, a: &SymTensorU2, b: &SymTensorU2) -> Result<f64> {
    if a.s != b.s {
        return Err(Error::GridMismatch("tensors live on different grids".into()));
    }
    SpectralOperator::new(bg, grid_of(a)?)?.inner(a, b)
}

fn grid_of(h: &SymTensorU2) -> Result<SpectralGrid> {
    let n = h.len();
    if n < 8 {
        return Err(Error::Resolution("tensor needs at least eight cells".into()));
    }
    let dx = 2.0 * h.s[0];
    let grid = SpectralGrid { cells: n, s_max: dx * n as f64 };
    let expect = grid.nodes();
    if h.s.iter().zip(&expect).any(|(a, b)| (a - b).abs() > 1e-9 * dx) {
        return Err(Error::GridMismatch("tensor grid is not cell-centered and uniform".into()));
    }
    Ok(grid)
}

/// Settings of the shift-invert subspace iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSettings {
    pub grid: SpectralGrid,
    /// Extra vectors carried beyond the requested count.
    pub guard: usize,
    /// Relative residual at which a pair counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalues above `-nonneg_tol` count as nonnegative when choosing `K`.
    pub nonneg_tol: f64,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self { grid: SpectralGrid::default(), guard: 6, tol: 1e-9, max_iter: 500, nonneg_tol: 1e-3, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub grid: SpectralGrid,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal in the weighted inner product, oriented by `h11 < 0` at
    /// the bolt where that component is nonzero.
    pub eigentensors: Vec<SymTensorU2>,
    /// `‖L h_j - λ_j h_j‖` per pair.
    pub residuals: Vec<f64>,
    /// Number `K` of eigenvalues above the cut.
    pub k: usize,
    /// Cut strictly between `λ_K` and `λ_{K+1}`.
    pub lambda_star: f64,
    /// Shift used by the inverse iteration.
    pub shift: f64,
    pub iterations: usize,
}

impl SpectralResult {
    /// Largest deviation of the weighted Gram matrix from the identity.
    pub fn gram_defect(&self, op: &SpectralOperator) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (i, a) in self.eigentensors.iter().enumerate() {
            for (j, b) in self.eigentensors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((op.inner(a, b)? - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Sign convention: `h11 < 0` at the first cell, so that a positive
/// coefficient shrinks the bolt; when `h11` vanishes there, the entry of
/// largest magnitude is made positive.
fn orientation(h: &SymTensorU2) -> f64 {
    let scale = h.max_abs();
    if h.h11[0].abs() > 1e-6 * scale {
        return -h.h11[0];
    }
    (0..4)
        .flat_map(|k| h.component(k).iter().copied())
        .fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best })
}

fn orthonormalize(x: nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    x.qr().q()
}

/// Top `count` eigenpairs of `L` on `settings.grid`.
pub fn eigensolve(bg: &SolitonBackground, count: usize, settings: &EigenSettings) -> Result<SpectralResult> {
    let op = SpectralOperator::new(bg, settings.grid)?;
    eigensolve_with(&op, count, settings)
}

pub fn eigensolve_with(op: &SpectralOperator, count: usize, settings: &EigenSettings) -> Result<SpectralResult> {
    if count < 2 {
        return Err(Error::Parameter("eigensolve needs count >= 2".into()));
    }
    let a = op.symmetric_matrix();
    let n = a.n;
    let block = (count + settings.guard).min(n);
    // The first shift whose σ I - A factorizes lies above the spectrum.
    let mut shift = 1.5;
    let factor = loop {
        match a.shifted_negative(shift).cholesky() {
            Ok(f) => break f,
            Err(_) if shift < 1e6 => shift *= 2.0,
            Err(e) => return Err(e),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut q = orthonormalize(nalgebra::DMatrix::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0)));
    let mut theta = vec![0.0; block];
    let mut resid = vec![f64::INFINITY; block];
    let mut iterations = 0;
    let mut ritz = q.clone();
    while iterations < settings.max_iter {
        iterations += 1;
        let mut y = q.clone();
        for mut col in y.column_iter_mut() {
            let mut v: Vec<f64> = col.iter().copied().collect();
            factor.solve_in_place(&mut v);
            col.copy_from_slice(&v);
        }
        q = orthonormalize(y);
        let aq = nalgebra::DMatrix::from_columns(
            &q.column_iter()
                .map(|c| {
                    let v: Vec<f64> = c.iter().copied().collect();
                    nalgebra::DVector::from_vec(a.mul_vec(&v))
                })
                .collect::<Vec<_>>(),
        );
        let t = q.transpose() * &aq;
        let t = (&t + t.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let v = nalgebra::DMatrix::from_columns(&order.iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect::<Vec<_>>());
        ritz = &q * &v;
        let aritz = &aq * &v;
        for (j, &o) in order.iter().enumerate() {
            theta[j] = eig.eigenvalues[o];
            resid[j] = (aritz.column(j) - ritz.column(j) * theta[j]).norm();
        }
        q = ritz.clone();
        if (0..count).all(|j| resid[j] <= settings.tol * theta[j].abs().max(1.0)) {
            break;
        }
    }
    if (0..count).any(|j| !(resid[j] <= settings.tol * theta[j].abs().max(1.0) * 1e3)) {
        return Err(Error::Convergence(format!(
            "subspace iteration stalled after {iterations} sweeps (residuals {:?})",
            &resid[..count]
        )));
    }
    let d = op.scaling();
    let mut tensors = Vec::with_capacity(count);
    for j in 0..count {
        let x: Vec<f64> = ritz.column(j).iter().zip(&d).map(|(x, d)| x / d).collect();
        let mut h = SymTensorU2::from_flat(op.nodes(), &x);
        if orientation(&h) < 0.0 {
            h = h.scaled(-1.0);
        }
        tensors.push(h);
    }
    let eigenvalues: Vec<f64> = theta[..count].to_vec();
    let k = eigenvalues.iter().take_while(|&&l| l > -settings.nonneg_tol).count();
    let lambda_star = if k == 0 {
        eigenvalues[0] + 1.0
    } else if k < count {
        0.5 * (eigenvalues[k - 1] + eigenvalues[k])
    } else {
        // All computed pairs lie above the cut; place it just below the last.
        eigenvalues[count - 1] - settings.nonneg_tol
    };
    Ok(SpectralResult {
        grid: op.grid,
        eigenvalues,
        eigentensors: tensors,
        residuals: resid[..count].to_vec(),
        k,
        lambda_star,
        shift,
        iterations,
    })
}

/// Coefficients of `h` on the computed eigentensors and its split into the
/// unstable (`j <= K`) and stable parts.
#[derive(Clone, Debug)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    pub unstable: SymTensorU2,
    pub stable: SymTensorU2,
    /// `‖h - Σ c_j h_j‖`.
    pub residual_norm: f64,
}

pub fn project(op: &SpectralOperator, h: &SymTensorU2, result: &SpectralResult) -> Result<Projection> {
    let mut unstable = SymTensorU2::zeros(op.nodes());
    let mut stable = SymTensorU2::zeros(op.nodes());
    let mut rest = h.clone();
    let mut coefficients = Vec::with_capacity(result.eigentensors.len());
    for (j, e) in result.eigentensors.iter().enumerate() {
        let c = op.inner(h, e)?;
        coefficients.push(c);
        if j < result.k {
            unstable.axpy(c, e);
        } else {
            stable.axpy(c, e);
        }
        rest.axpy(-c, e);
    }
    let residual_norm = op.norm(&rest)?;
    Ok(Projection { coefficients, unstable, stable, residual_norm })
}

/// Random tensor satisfying the bolt conditions, for symmetry checks.
pub fn random_regular_tensor(s: &[f64], seed: u64) -> SymTensorU2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = |k: usize| -> Vec<(f64, f64)> { (0..k).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..2.0))).collect() };
    let (m0, m1, m3, md) = (modes(4), modes(4), modes(4), modes(4));
    let smooth = |m: &[(f64, f64)], x: f64| m.iter().map(|(a, k)| a * (k * x).cos()).sum::<f64>() * (-0.1 * x * x).exp();
    let mut t = SymTensorU2::zeros(s);
    for (i, &x) in s.iter().enumerate() {
        let base = smooth(&m0, x);
        t.h00[i] = base;
        t.h33[i] = base + x * x * smooth(&m3, x);
        t.h11[i] = smooth(&m1, x);
        t.h03[i] = x * x * smooth(&md, x);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{fik_shoot, FikSettings};
    use std::sync::OnceLock;

    pub(crate) fn fik() -> &'static SolitonBackground {
        static BG: OnceLock<SolitonBackground> = OnceLock::new();
        BG.get_or_init(|| fik_shoot(&FikSettings::default()).unwrap())
    }

    fn small_grid() -> SpectralGrid {
        SpectralGrid { cells: 400, s_max: 14.0 }
    }

    #[test]
    fn metric_maps_to_twice_ricci() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let g = op.metric();
        let lg = op.apply(&g).unwrap();
        let ric = op.ricci(fik()).unwrap();
        let mut diff = lg.clone();
        diff.axpy(-2.0, &ric);
        let rel = op.norm(&diff).unwrap() / op.norm(&ric).unwrap();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn operator_is_self_adjoint() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let a = random_regular_tensor(op.nodes(), 1);
        let b = random_regular_tensor(op.nodes(), 2);
        let lhs = op.inner(&op.apply(&a).unwrap(), &b).unwrap();
        let rhs = op.inner(&a, &op.apply(&b).unwrap()).unwrap();
        let scale = op.norm(&a).unwrap() * op.norm(&b).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * scale, "{lhs} {rhs}");
    }

    #[test]
    fn symmetric_matrix_matches_apply() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let h = random_regular_tensor(op.nodes(), 3);
        let d = op.scaling();
        let y: Vec<f64> = h.to_flat().iter().zip(&d).map(|(x, d)| x * d).collect();
        let ay = op.symmetric_matrix().mul_vec(&y);
        let lh = op.apply(&h).unwrap().to_flat();
        for k in 0..ay.len() {
            let expect = lh[k] * d[k];
            assert!((ay[k] - expect).abs() <= 1e-9 * expect.abs().max(1e-300) + 1e-12 * d[k], "{k}");
        }
    }

    #[test]
    fn parity_violation_is_rejected() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let mut h = op.metric();
        h.h03.iter_mut().for_each(|x| *x = 1.0);
        assert!(matches!(op.apply(&h), Err(Error::Parity(_))));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let other = SymTensorU2::zeros(&cell_centers(10, 1.0));
        assert!(matches!(op.inner(&other, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn projection_of_a_basis_vector() {
        let op = SpectralOperator::new(fik(), small_grid()).unwrap();
        let res = eigensolve_with(&op, 3, &EigenSettings { grid: small_grid(), ..Default::default() }).unwrap();
        let pr = project(&op, &res.eigentensors[0], &res).unwrap();
        assert!((pr.coefficients[0] - 1.0).abs() < 1e-8);
        assert!(pr.coefficients[1].abs() < 1e-8 && pr.coefficients[2].abs() < 1e-8);
        assert!(pr.residual_norm < 1e-8);
    }
}
