//! Static-form representation `y = Z β̃ + ε` of a time-varying regression and
//! its exact thin SVD.
//!
//! Coefficient vectors of length `K·T` are stored block-major: entries
//! `t*K .. (t+1)*K` belong to period `t`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the period-`t` row of `Z` touches the coefficient blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    /// White-noise deviations: row `t` touches block `t` only.
    BlockDiagonal,
    /// Random-walk states: row `t` applies `x_t'` to every block `s <= t`.
    LowerTriangular,
}

/// Structured `T × KT` design, optionally rescaled as
/// `diag(row_scale) · Z · diag(block_scale ⊗ 1_K)`.
#[derive(Debug, Clone)]
pub struct StaticSystem {
    x: DMatrix<f64>,
    mode: StateMode,
    row_scale: Option<Vec<f64>>,
    block_scale: Option<Vec<f64>>,
}

impl StaticSystem {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn mode(&self) -> StateMode {
        self.mode
    }

    pub fn t(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_scaled(&self) -> bool {
        self.row_scale.is_some()
    }

    #[inline]
    fn r(&self, t: usize) -> f64 {
        self.row_scale.as_ref().map_or(1.0, |r| r[t])
    }

    #[inline]
    fn c(&self, s: usize) -> f64 {
        self.block_scale.as_ref().map_or(1.0, |c| c[s])
    }

    /// Entry of `Z` at row `t`, column `(s, k)`.
    pub fn entry(&self, t: usize, s: usize, k: usize) -> f64 {
        let touches = match self.mode {
            StateMode::BlockDiagonal => s == t,
            StateMode::LowerTriangular => s <= t,
        };
        if touches {
            self.r(t) * self.x[(t, k)] * self.c(s)
        } else {
            0.0
        }
    }

    /// `Z b` for a block-major `b` of length `KT`.
    pub fn mul(&self, b: &[f64]) -> DVector<f64> {
        let (t_len, k) = (self.t(), self.k());
        assert_eq!(b.len(), t_len * k);
        let mut out = DVector::zeros(t_len);
        match self.mode {
            StateMode::BlockDiagonal => {
                for t in 0..t_len {
                    let dot: f64 = (0..k).map(|j| self.x[(t, j)] * b[t * k + j]).sum();
                    out[t] = self.r(t) * self.c(t) * dot;
                }
            }
            StateMode::LowerTriangular => {
                let mut cum = vec![0.0; k];
                for t in 0..t_len {
                    let cs = self.c(t);
                    for j in 0..k {
                        cum[j] += cs * b[t * k + j];
                    }
                    let dot: f64 = (0..k).map(|j| self.x[(t, j)] * cum[j]).sum();
                    out[t] = self.r(t) * dot;
                }
            }
        }
        out
    }

    /// `Z' y`, block-major of length `KT`.
    pub fn tmul(&self, y: &[f64]) -> Vec<f64> {
        let (t_len, k) = (self.t(), self.k());
        assert_eq!(y.len(), t_len);
        let mut out = vec![0.0; t_len * k];
        match self.mode {
            StateMode::BlockDiagonal => {
                for t in 0..t_len {
                    let w = self.r(t) * self.c(t) * y[t];
                    for j in 0..k {
                        out[t * k + j] = self.x[(t, j)] * w;
                    }
                }
            }
            StateMode::LowerTriangular => {
                let mut acc = vec![0.0; k];
                for t in (0..t_len).rev() {
                    let w = self.r(t) * y[t];
                    for j in 0..k {
                        acc[j] += self.x[(t, j)] * w;
                    }
                    let cs = self.c(t);
                    for j in 0..k {
                        out[t * k + j] = cs * acc[j];
                    }
                }
            }
        }
        out
    }
}

/// Wrap a `T × K` regressor matrix as a static-form system.
pub fn assemble_static(x: &DMatrix<f64>, mode: StateMode) -> Result<StaticSystem> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Structure(format!(
            "design must be at least 1x1, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite regressor".into()));
    }
    Ok(StaticSystem {
        x: x.clone(),
        mode,
        row_scale: None,
        block_scale: None,
    })
}

/// Closed-form factors of a block-diagonal design: component `t` has
/// singular value `‖x_t‖`, left vector `e_t` and right vector
/// `e_t ⊗ x_t/‖x_t‖`.
#[derive(Debug, Clone)]
pub struct BlockSvd {
    lambda: Vec<f64>,
    dirs: DMatrix<f64>,
}

impl BlockSvd {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Unit direction `x_t / ‖x_t‖` as row `t`.
    pub fn dirs(&self) -> &DMatrix<f64> {
        &self.dirs
    }
}

/// Dense factors `Z = U diag(λ) V'` with `V` of size `KT × r`.
#[derive(Debug, Clone)]
pub struct DenseSvd {
    pub u: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD of a static system. Component order is internal; use
/// [`SvdFactors::to_dense_sorted`] for the conventional descending layout.
#[derive(Debug, Clone)]
pub enum SvdFactors {
    Block(BlockSvd),
    Dense(DenseSvd),
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        match self {
            SvdFactors::Block(b) => b.lambda.len(),
            SvdFactors::Dense(d) => d.lambda.len(),
        }
    }

    /// Singular values in internal component order.
    pub fn lambda(&self) -> Vec<f64> {
        match self {
            SvdFactors::Block(b) => b.lambda.clone(),
            SvdFactors::Dense(d) => d.lambda.iter().copied().collect(),
        }
    }

    /// Singular values sorted in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut l = self.lambda();
        l.sort_by(|a, b| b.total_cmp(a));
        l
    }

    /// `V' w` for block-major `w` of length `KT`.
    pub fn vt_mul(&self, w: &[f64]) -> Vec<f64> {
        match self {
            SvdFactors::Block(b) => {
                let k = b.dirs.ncols();
                (0..b.lambda.len())
                    .map(|t| (0..k).map(|j| b.dirs[(t, j)] * w[t * k + j]).sum())
                    .collect()
            }
            SvdFactors::Dense(d) => (d.v.tr_mul(&DVector::from_column_slice(w))).as_slice().to_vec(),
        }
    }

    /// `V c` for a component vector `c` of length `rank`.
    pub fn v_mul(&self, c: &[f64]) -> Vec<f64> {
        match self {
            SvdFactors::Block(b) => {
                let k = b.dirs.ncols();
                let mut out = vec![0.0; b.lambda.len() * k];
                for t in 0..b.lambda.len() {
                    for j in 0..k {
                        out[t * k + j] = b.dirs[(t, j)] * c[t];
                    }
                }
                out
            }
            SvdFactors::Dense(d) => (&d.v * DVector::from_column_slice(c)).as_slice().to_vec(),
        }
    }

    /// `U' y`.
    pub fn ut_mul(&self, y: &[f64]) -> Vec<f64> {
        match self {
            SvdFactors::Block(_) => y.to_vec(),
            SvdFactors::Dense(d) => d.u.tr_mul(&DVector::from_column_slice(y)).as_slice().to_vec(),
        }
    }

    /// Diagonal of `V' diag(d0) V`. Fails with a contract violation when the
    /// product has off-diagonal mass, which happens for a lower-triangular
    /// design paired with a non-scalar `d0`.
    pub fn vtdv_diag(&self, d0: &[f64]) -> Result<Vec<f64>> {
        match self {
            SvdFactors::Block(b) => {
                let k = b.dirs.ncols();
                Ok((0..b.lambda.len())
                    .map(|t| (0..k).map(|j| b.dirs[(t, j)].powi(2) * d0[t * k + j]).sum())
                    .collect())
            }
            SvdFactors::Dense(d) => {
                let lo = d0.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = d0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo <= 1e-12 * hi.abs() {
                    let mean = d0.iter().sum::<f64>() / d0.len() as f64;
                    let cols = (0..d.v.ncols()).map(|i| mean * d.v.column(i).norm_squared());
                    return Ok(cols.collect());
                }
                let mut scaled = d.v.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= d0[i];
                }
                let m = d.v.tr_mul(&scaled);
                let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if i != j && m[(i, j)].abs() > 1e-10 * scale {
                            return Err(Error::Contract(format!(
                                "V'D0V is not diagonal (entry ({i},{j}) = {:e}); \
                                 a lower-triangular design needs a scalar prior covariance",
                                m[(i, j)]
                            )));
                        }
                    }
                }
                Ok(m.diagonal().as_slice().to_vec())
            }
        }
    }

    /// Explicit `(U, λ, V)` with singular values in descending order.
    pub fn to_dense_sorted(&self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let (u, l, v) = match self {
            SvdFactors::Block(b) => {
                let (t_len, k) = (b.lambda.len(), b.dirs.ncols());
                let u = DMatrix::identity(t_len, t_len);
                let mut v = DMatrix::zeros(t_len * k, t_len);
                for t in 0..t_len {
                    for j in 0..k {
                        v[(t * k + j, t)] = b.dirs[(t, j)];
                    }
                }
                (u, DVector::from_column_slice(&b.lambda), v)
            }
            SvdFactors::Dense(d) => (d.u.clone(), d.lambda.clone(), d.v.clone()),
        };
        let mut order: Vec<usize> = (0..l.len()).collect();
        order.sort_by(|&a, &b| l[b].total_cmp(&l[a]));
        let u = DMatrix::from_fn(u.nrows(), order.len(), |i, c| u[(i, order[c])]);
        let v = DMatrix::from_fn(v.nrows(), order.len(), |i, c| v[(i, order[c])]);
        let l = DVector::from_iterator(order.len(), order.iter().map(|&i| l[i]));
        (u, l, v)
    }
}

/// Relative floor below which a singular value counts as zero.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

/// Exact rank-`T` thin SVD of `Z`.
///
/// With `truncate` set, components below the floor are dropped instead of
/// raising [`Error::SingularValueUnderflow`].
pub fn thin_svd(sys: &StaticSystem, truncate: bool) -> Result<SvdFactors> {
    let (t_len, k) = (sys.t(), sys.k());
    match sys.mode {
        StateMode::BlockDiagonal => {
            let mut lambda = Vec::with_capacity(t_len);
            let mut dirs = DMatrix::zeros(t_len, k);
            for t in 0..t_len {
                let s = sys.r(t) * sys.c(t);
                let n = sys.x.row(t).norm() * s.abs();
                lambda.push(n);
                if n > 0.0 {
                    for j in 0..k {
                        dirs[(t, j)] = sys.x[(t, j)] * s / n;
                    }
                }
            }
            let max = lambda.iter().copied().fold(0.0, f64::max);
            if let Some(t) = lambda.iter().position(|&l| !(l > SINGULAR_VALUE_FLOOR * max)) {
                if !truncate || max == 0.0 {
                    return Err(Error::SingularValueUnderflow { t, value: lambda[t] });
                }
                // A dropped block keeps a zero direction and an infinitesimal
                // weight so that downstream per-period formulas stay defined.
                for l in lambda.iter_mut() {
                    if !(*l > SINGULAR_VALUE_FLOOR * max) {
                        *l = SINGULAR_VALUE_FLOOR * max;
                    }
                }
            }
            Ok(SvdFactors::Block(BlockSvd { lambda, dirs }))
        }
        StateMode::LowerTriangular => {
            for t in 0..t_len {
                if sys.x.row(t).iter().all(|v| *v == 0.0) && !truncate {
                    return Err(Error::SingularValueUnderflow { t, value: 0.0 });
                }
            }
            // C(m) = Σ_{s<=m} c_s², Gram[t, r] = r_t r_r (x_t · x_r) C(min(t, r))
            let mut cum = vec![0.0; t_len];
            let mut acc = 0.0;
            for (s, c) in cum.iter_mut().enumerate() {
                acc += sys.c(s).powi(2);
                *c = acc;
            }
            let xx = &sys.x * sys.x.transpose();
            let gram = DMatrix::from_fn(t_len, t_len, |t, r| {
                sys.r(t) * sys.r(r) * xx[(t, r)] * cum[t.min(r)]
            });
            let eig = SymmetricEigen::new(gram);
            let mut order: Vec<usize> = (0..t_len).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let max = eig.eigenvalues[order[0]].max(0.0).sqrt();
            if !(max > 0.0) {
                return Err(Error::SingularValueUnderflow { t: 0, value: 0.0 });
            }
            let mut keep = Vec::with_capacity(t_len);
            for (pos, &i) in order.iter().enumerate() {
                let l = eig.eigenvalues[i].max(0.0).sqrt();
                if l > SINGULAR_VALUE_FLOOR * max {
                    keep.push((i, l));
                } else if !truncate {
                    return Err(Error::SingularValueUnderflow { t: pos, value: l });
                }
            }
            let r = keep.len();
            let u = DMatrix::from_fn(t_len, r, |t, c| eig.eigenvectors[(t, keep[c].0)]);
            let lambda = DVector::from_iterator(r, keep.iter().map(|&(_, l)| l));
            // V' = Λ⁻¹ U' Z, built column by column of V via Z' u_i
            let mut v = DMatrix::zeros(t_len * k, r);
            for c in 0..r {
                let col = sys.tmul(u.column(c).as_slice());
                let inv = 1.0 / lambda[c];
                for (i, val) in col.into_iter().enumerate() {
                    v[(i, c)] = val * inv;
                }
            }
            Ok(SvdFactors::Dense(DenseSvd { u, lambda, v }))
        }
    }
}

/// The standardized system obtained by the substitution
/// `β̃ = b0 + (σ ⊗ 1_K) ⊙ β̆`, which has unit error variance and prior mean 0.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub system: StaticSystem,
    pub y: DVector<f64>,
    pub sigma: Vec<f64>,
}

impl Whitened {
    /// Map a draw in standardized coordinates back to `β̃`.
    pub fn unwhiten(&self, beta_breve: &[f64], b0: &[f64]) -> Vec<f64> {
        let k = self.system.k();
        beta_breve
            .iter()
            .enumerate()
            .map(|(i, v)| b0[i] + self.sigma[i / k] * v)
            .collect()
    }
}

/// Standardize `(Z, ŷ)` for error scales `σ_t` and prior mean `b0`.
///
/// Returns `y*_t = (ŷ_t − (Z b0)_t)/σ_t` and
/// `Z* = diag(1/σ) Z diag(σ ⊗ 1_K)`. In block-diagonal mode the scales cancel
/// and `Z* = Z`, so factors computed once remain valid for every `σ`.
pub fn whiten_system(
    sys: &StaticSystem,
    y_hat: &[f64],
    sigma: &[f64],
    b0: &[f64],
) -> Result<Whitened> {
    let t_len = sys.t();
    if sigma.len() != t_len || y_hat.len() != t_len || b0.len() != t_len * sys.k() {
        return Err(Error::Structure("whitening inputs have inconsistent lengths".into()));
    }
    if let Some(t) = sigma.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!("sigma_{t} = {} must be positive", sigma[t])));
    }
    if sys.is_scaled() {
        return Err(Error::Contract("whitening an already scaled system".into()));
    }
    let zb0 = sys.mul(b0);
    let y = DVector::from_iterator(t_len, (0..t_len).map(|t| (y_hat[t] - zb0[t]) / sigma[t]));
    let system = match sys.mode {
        StateMode::BlockDiagonal => sys.clone(),
        StateMode::LowerTriangular => StaticSystem {
            x: sys.x.clone(),
            mode: sys.mode,
            row_scale: Some(sigma.iter().map(|s| 1.0 / s).collect()),
            block_scale: Some(sigma.to_vec()),
        },
    };
    Ok(Whitened {
        system,
        y,
        sigma: sigma.to_vec(),
    })
}
