//! Kernels that depend only on `<xi, eta>_o`, their Galerkin forms on
//! depth-`n` cylinder indicators, and a hierarchical apply.
//!
//! For distinct cells `v, w` the Gromov product is the constant
//! `|v ^ w|`. Inside one cell it is `n + T` with `P(T >= m) = q^-m`, so
//! every entry is a closed-form series. The same fact makes `K f` exactly
//! cylinder-constant for cylinder-constant `f`: no quadrature anywhere.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::representation::{pi_s_apply, pi_zero};
use super::CylinderFunction;
use crate::conformal::critical_exponent;
use crate::error::{Error, Result};
use crate::hypspace::{FreeGroup, GroupWord};
use crate::scalar::{Numeric, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `d_o(xi, eta)^{-2 delta (1 - s)} = q^{2 (1 - s) <xi, eta>_o}`.
    KnappStein(f64),
    /// `<xi, eta>_o`.
    LogGromov,
}

/// Kernel values by common-prefix length at a fixed depth `n`:
/// `off[l] = K(l)` for `l < n` and `diag = E[K(n + T)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<T> {
    pub off: Vec<T>,
    pub diag: T,
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::KnappStein(s) if !(s > 0.5) => Err(Error::BelowCriticalLine(s)),
            Kernel::KnappStein(s) if !s.is_finite() => Err(Error::InvalidArgument(format!("s = {s}"))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Kernel::KnappStein(s) => format!("knapp-stein(s={s})"),
            Kernel::LogGromov => "log-gromov".to_string(),
        }
    }

    /// `K(m)` at integer Gromov product `m`.
    pub fn at(&self, q: usize, m: f64) -> f64 {
        match *self {
            Kernel::KnappStein(s) => (2.0 * (1.0 - s) * (q as f64).ln() * m).exp(),
            Kernel::LogGromov => m,
        }
    }

    pub fn table(&self, q: usize, n: usize) -> Result<KernelTable<f64>> {
        self.validate()?;
        let qf = q as f64;
        let off = (0..n).map(|l| self.at(q, l as f64)).collect();
        let diag = match *self {
            Kernel::LogGromov => n as f64 + 1.0 / (qf - 1.0),
            Kernel::KnappStein(s) => {
                let r = qf.powf(2.0 * (1.0 - s));
                r.powi(n as i32) * (1.0 - 1.0 / qf) / (1.0 - r / qf)
            }
        };
        Ok(KernelTable { off, diag })
    }

    /// Exact table when all values are rational: the logarithmic kernel and
    /// the constant kernel at `s = 1`.
    pub fn exact_table(&self, q: usize, n: usize) -> Option<KernelTable<Rational>> {
        match *self {
            Kernel::LogGromov => Some(KernelTable {
                off: (0..n).map(|l| Rational::from_integer(l as i128)).collect(),
                diag: Rational::from_integer(n as i128) + Rational::new(1, q as i128 - 1),
            }),
            Kernel::KnappStein(s) if s == 1.0 => Some(KernelTable {
                off: vec![Rational::from_integer(1); n],
                diag: Rational::from_integer(1),
            }),
            _ => None,
        }
    }

    /// Table of `K - 1` for the Knapp-Stein family, computed without the
    /// cancellation that `K - 1` suffers near `s = 1`.
    fn shifted_table(s: f64, q: usize, n: usize) -> Result<KernelTable<f64>> {
        Kernel::KnappStein(s).validate()?;
        let ln_r = 2.0 * (1.0 - s) * (q as f64).ln();
        let qf = q as f64;
        let off = (0..n).map(|l| (ln_r * l as f64).exp_m1()).collect();
        let r_n_minus_1 = (ln_r * n as f64).exp_m1();
        let r_minus_1 = ln_r.exp_m1();
        let r = ln_r.exp();
        let diag = (r_n_minus_1 * (1.0 - 1.0 / qf) + r_minus_1 / qf) / (1.0 - r / qf);
        Ok(KernelTable { off, diag })
    }
}

/// `(K f)(v) = sum_w mu_n K(v, w) f_w` with the diagonal block integrated
/// exactly, in `O(N n)` via prefix-tree partial sums.
pub fn fast_apply_table<T: Scalar>(f: &CylinderFunction<T>, table: &KernelTable<T>) -> CylinderFunction<T> {
    let group = *f.group();
    let n = f.depth();
    let q = group.branching();
    let mu = T::from_rational(&f.cell_mass());
    // sums[l][i]: integral of f over the depth-l cell i, for l = 1..=n.
    let mut sums: Vec<Vec<T>> = vec![Vec::new(); n + 1];
    sums[n] = f.values().par_iter().map(|v| v.clone() * mu.clone()).collect();
    for l in (1..n).rev() {
        let finer = &sums[l + 1];
        let cells = finer.len() / q;
        sums[l] = (0..cells)
            .into_par_iter()
            .map(|i| {
                finer[i * q..(i + 1) * q]
                    .iter()
                    .cloned()
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect();
    }
    let total = sums[1].iter().cloned().fold(T::zero(), |a, b| a + b);
    let mut strides = vec![1usize; n + 1];
    for l in (1..n).rev() {
        strides[l] = strides[l + 1] * q;
    }
    let values = (0..f.len())
        .into_par_iter()
        .map(|v| {
            let mut acc = table.diag.clone() * mu.clone() * f.values()[v].clone();
            let mut coarse = total.clone();
            for l in 0..n {
                let fine = sums[l + 1][v / strides[l + 1]].clone();
                acc = acc + table.off[l].clone() * (coarse - fine.clone());
                coarse = fine;
            }
            acc
        })
        .collect();
    CylinderFunction::new(group, n, values).expect("same shape as input")
}

/// Hierarchical apply of `kernel` to `f`.
pub fn fast_apply<T: Numeric>(kernel: Kernel, f: &CylinderFunction<T>) -> Result<CylinderFunction<T>> {
    let t = kernel.table(f.group().branching(), f.depth())?;
    let table = KernelTable {
        off: t.off.into_iter().map(T::from_real).collect(),
        diag: T::from_real(t.diag),
    };
    Ok(fast_apply_table(f, &table))
}

/// Exact hierarchical apply for kernels with rational values.
pub fn fast_apply_exact(kernel: Kernel, f: &CylinderFunction<Rational>) -> Result<CylinderFunction<Rational>> {
    kernel.validate()?;
    let table = kernel
        .exact_table(f.group().branching(), f.depth())
        .ok_or_else(|| Error::InvalidArgument(format!("{} has irrational values", kernel.name())))?;
    Ok(fast_apply_table(f, &table))
}

/// The form `(I f, h) = sum_{v,w} f_w conj(h_v) M_vw`.
pub fn kernel_form<T: Numeric>(kernel: Kernel, f: &CylinderFunction<T>, h: &CylinderFunction<T>) -> Result<T> {
    let (f, h) = f.align(h)?;
    fast_apply(kernel, &f)?.pair_q(&h)
}

/// `Q'_1(f, h)`, the logarithmic-kernel form.
pub fn log_form<T: Numeric>(f: &CylinderFunction<T>, h: &CylinderFunction<T>) -> Result<T> {
    kernel_form(Kernel::LogGromov, f, h)
}

pub fn log_form_exact(f: &CylinderFunction<Rational>, h: &CylinderFunction<Rational>) -> Result<Rational> {
    let (f, h) = f.align(h)?;
    fast_apply_exact(Kernel::LogGromov, &f)?.pair_q(&h)
}

/// Dense Galerkin matrix `M_vw = int_[v] int_[w] K dmu_o dmu_o`.
#[derive(Debug, Clone)]
pub struct GalerkinForm {
    group: FreeGroup,
    depth: usize,
    kernel: Kernel,
    matrix: DMatrix<f64>,
}

/// Length of the common prefix of two depth-`n` cells given by index.
pub(crate) fn cell_lcp(q: usize, n: usize, i: usize, j: usize) -> usize {
    let (mut a, mut b, mut level) = (i, j, n);
    while a != b {
        if level == 1 {
            return 0;
        }
        a /= q;
        b /= q;
        level -= 1;
    }
    level
}

pub fn galerkin(group: &FreeGroup, kernel: Kernel, n: usize) -> Result<GalerkinForm> {
    let cells = group.cells_within(n, group.limits().dense_cells)?;
    let table = kernel.table(group.branching(), n)?;
    let q = group.branching();
    let mu = crate::conformal::ConformalDensity::new(*group).cell_mass_f64(n);
    let mu2 = mu * mu;
    let rows: Vec<Vec<f64>> = (0..cells)
        .into_par_iter()
        .map(|i| {
            (0..cells)
                .map(|j| {
                    if i == j {
                        mu2 * table.diag
                    } else {
                        mu2 * table.off[cell_lcp(q, n, i, j)]
                    }
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(cells, cells, |i, j| rows[i][j]);
    Ok(GalerkinForm {
        group: *group,
        depth: n,
        kernel,
        matrix,
    })
}

impl GalerkinForm {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn group(&self) -> &FreeGroup {
        &self.group
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn cell_mass(&self) -> f64 {
        crate::conformal::ConformalDensity::new(self.group).cell_mass_f64(self.depth)
    }

    /// `(1 / mu_n) M f`, the operator on cylinder functions.
    pub fn apply(&self, f: &CylinderFunction<f64>) -> Result<CylinderFunction<f64>> {
        let f = f.refine(self.depth)?;
        let v = DVector::from_column_slice(f.values());
        let out = &self.matrix * v / self.cell_mass();
        CylinderFunction::new(self.group, self.depth, out.iter().copied().collect())
    }

    /// `f^T M h` for real functions.
    pub fn form(&self, f: &CylinderFunction<f64>, h: &CylinderFunction<f64>) -> Result<f64> {
        let f = DVector::from_column_slice(f.refine(self.depth)?.values());
        let h = DVector::from_column_slice(h.refine(self.depth)?.values());
        Ok(f.dot(&(&self.matrix * h)))
    }
}

/// Symmetric matrix restricted to the orthogonal complement of `ones`,
/// via the Householder reflection taking `ones / sqrt(N)` to the last
/// basis vector.
pub(crate) fn compress_off_constants(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut u = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    u[n - 1] -= 1.0;
    let uu = u.dot(&u);
    if uu == 0.0 {
        return a.view((0, 0), (n - 1, n - 1)).into_owned();
    }
    let beta = 2.0 / uu;
    let au = a * &u;
    let uau = u.dot(&au);
    // H A H with H = I - beta u u^T, expanded as rank-one updates.
    let mut b = a.clone();
    b.ger(-beta, &au, &u, 1.0);
    b.ger(-beta, &u, &au, 1.0);
    b.ger(beta * beta * uau, &u, &u, 1.0);
    b.view((0, 0), (n - 1, n - 1)).into_owned()
}

/// Eigenvalues (ascending) of the form on zero-mean depth-`n` functions
/// in the mass-weighted inner product.
pub fn zero_mean_spectrum(form: &GalerkinForm) -> Vec<f64> {
    let a = &form.matrix / form.cell_mass();
    if a.nrows() < 2 {
        return Vec::new();
    }
    let b = compress_off_constants(&a);
    let mut eig: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// One eigenspace of a prefix-tree kernel on zero-mean functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenspace {
    /// Depth of the node whose children the eigenfunctions separate.
    pub level: usize,
    pub eigenvalue: f64,
    pub multiplicity: u128,
}

/// Closed-form zero-mean spectrum at depth `n`.
///
/// Functions with zero integral over the children of a depth-`l` node and
/// constant on those children are eigenfunctions with eigenvalue
/// `mu_{l+1} (E[K(l + 1 + T)] - K(l))`, and they span the zero-mean
/// depth-`n` functions as `l` runs over `0..n`.
pub fn structured_zero_mean_spectrum(group: &FreeGroup, kernel: Kernel, n: usize) -> Result<Vec<Eigenspace>> {
    kernel.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let q = group.branching();
    let density = crate::conformal::ConformalDensity::new(*group);
    (0..n)
        .map(|l| {
            let t = kernel.table(q, l + 1)?;
            let eigenvalue = density.cell_mass_f64(l + 1) * (t.diag - t.off[l]);
            let multiplicity = if l == 0 {
                group.alphabet_size() as u128 - 1
            } else {
                group.sphere_size(l) * (q as u128 - 1)
            };
            Ok(Eigenspace {
                level: l,
                eigenvalue,
                multiplicity,
            })
        })
        .collect()
}

/// One point of the `s -> 1` degeneration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerationPoint {
    pub s: f64,
    /// `(I_s f, f) / (2 (1 - s) delta)`.
    pub scaled_knapp_stein: f64,
    /// `(I' f, f)`.
    pub log_form: f64,
    pub residual: f64,
}

/// Residuals `|(I_s f, f) / (2 (1 - s) delta) - (I' f, f)|` for zero-mean `f`.
///
/// The constant part of `I_s` drops out on zero-mean input, so the sweep
/// uses `K_s - 1`, which stays accurate as `s -> 1`.
pub fn degeneration_check(f: &CylinderFunction<f64>, s_list: &[f64]) -> Result<Vec<DegenerationPoint>> {
    f.ensure_zero_mean_tol(1e-12)?;
    let q = f.group().branching();
    let delta = critical_exponent(f.group());
    let log = log_form(f, f)?;
    s_list
        .iter()
        .map(|&s| {
            if !(s < 1.0) {
                return Err(Error::InvalidArgument(format!("degeneration needs s < 1, got {s}")));
            }
            let table = Kernel::shifted_table(s, q, f.depth())?;
            let ks = fast_apply_table(f, &table).pair_q(f)?;
            let scaled = ks / (2.0 * (1.0 - s) * delta);
            Ok(DegenerationPoint {
                s,
                scaled_knapp_stein: scaled,
                log_form: log,
                residual: (scaled - log).abs(),
            })
        })
        .collect()
}

/// Least-squares slope of `log residual` against `log (1 - s)`.
pub fn degeneration_rate(points: &[DegenerationPoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.residual > 0.0)
        .map(|p| ((1.0 - p.s).ln(), p.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `min_kappa || I'[pi_1(g) f] - pi_0(g) I'[f] - kappa ||_Q` for zero-mean `f`.
pub fn intertwine_residual(g: &GroupWord, f: &CylinderFunction<f64>) -> Result<f64> {
    f.ensure_zero_mean_tol(1e-12)?;
    let lhs = fast_apply(Kernel::LogGromov, &pi_s_apply(g, f, 1.0)?)?;
    let rhs = pi_zero(g, &fast_apply(Kernel::LogGromov, f)?)?;
    Ok(lhs.sub(&rhs)?.norm_modulo_constants())
}

/// The defect `I'[pi_1(g) f] - pi_0(g) I'[f]` in exact arithmetic.
pub fn intertwine_defect_exact(g: &GroupWord, f: &CylinderFunction<Rational>) -> Result<CylinderFunction<Rational>> {
    f.ensure_zero_mean()?;
    let lhs = fast_apply_exact(Kernel::LogGromov, &super::representation::pi_one_exact(g, f)?)?;
    let rhs = pi_zero(g, &fast_apply_exact(Kernel::LogGromov, f)?)?;
    lhs.sub(&rhs)
}

/// `|| f ||` in the `Q'_1` seminorm for real `f`.
pub fn log_norm(f: &CylinderFunction<f64>) -> Result<f64> {
    Ok(log_form(f, f)?.max(0.0).sqrt())
}
