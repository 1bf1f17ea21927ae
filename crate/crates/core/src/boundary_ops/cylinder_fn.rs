use std::borrow::Cow;

use num_traits::Zero;
use rayon::prelude::*;

use crate::conformal::ConformalDensity;
use crate::error::{Error, Result};
use crate::hypspace::{Cylinder, FreeGroup, GroupWord, Letter};
use crate::scalar::{Numeric, Rational, Scalar};

/// A function on the boundary that is constant on depth-`n` cylinders.
///
/// Values are stored in cell order (see [`FreeGroup::cell_index`]). Every
/// depth-`n` cell has the same `mu_o` mass, so integrals are plain sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunction<T> {
    group: FreeGroup,
    depth: usize,
    values: Vec<T>,
}

impl<T: Scalar> CylinderFunction<T> {
    pub fn new(group: FreeGroup, depth: usize, values: Vec<T>) -> Result<Self> {
        let cells = group.checked_cells(depth)?;
        if values.len() != cells {
            return Err(Error::InvalidArgument(format!(
                "depth {depth} needs {cells} values, got {}",
                values.len()
            )));
        }
        Ok(Self { group, depth, values })
    }

    pub fn constant(group: FreeGroup, depth: usize, c: T) -> Result<Self> {
        let cells = group.checked_cells(depth)?;
        Ok(Self {
            group,
            depth,
            values: vec![c; cells],
        })
    }

    pub fn zeros(group: FreeGroup, depth: usize) -> Result<Self> {
        Self::constant(group, depth, T::zero())
    }

    /// `1_[w]` at depth `|w|`.
    pub fn indicator(group: FreeGroup, c: &Cylinder) -> Result<Self> {
        group.validate_word(c.word())?;
        let mut f = Self::zeros(group, c.depth())?;
        let idx = group.cell_index(c.word().letters());
        f.values[idx] = T::one();
        Ok(f)
    }

    /// Tabulates `f` on the cells of depth `depth`, given each cell's word.
    pub fn from_fn<F>(group: FreeGroup, depth: usize, f: F) -> Result<Self>
    where
        F: Fn(&[Letter]) -> T + Sync,
    {
        let cells = group.checked_cells(depth)?;
        let values = (0..cells)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                group.decode_cell(depth, i, buf);
                f(buf)
            })
            .collect();
        Ok(Self { group, depth, values })
    }

    pub fn group(&self) -> &FreeGroup {
        &self.group
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `mu_o` mass of one cell.
    pub fn cell_mass(&self) -> Rational {
        ConformalDensity::new(self.group).cell_mass(self.depth)
    }

    /// Value on the cell containing rays that start with `word`.
    pub fn value_on(&self, word: &[Letter]) -> Option<&T> {
        if word.len() < self.depth {
            return None;
        }
        self.values.get(self.group.cell_index(&word[..self.depth]))
    }

    pub fn value_at(&self, w: &GroupWord) -> Option<&T> {
        self.value_on(w.letters())
    }

    /// Copies each value onto the sub-cylinders of depth `depth`.
    pub fn refine(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::DepthDecrease {
                current: self.depth,
                requested: depth,
            });
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let cells = self.group.checked_cells(depth)?;
        let step = self.group.branching().pow((depth - self.depth) as u32);
        let values = (0..cells)
            .into_par_iter()
            .map(|i| self.values[i / step].clone())
            .collect();
        Ok(Self {
            group: self.group,
            depth,
            values,
        })
    }

    /// Brings both operands to their common depth.
    pub fn align<'a>(&'a self, other: &'a Self) -> Result<(Cow<'a, Self>, Cow<'a, Self>)> {
        if self.group.rank() != other.group.rank() {
            return Err(Error::RankMismatch(self.group.rank(), other.group.rank()));
        }
        let depth = self.depth.max(other.depth);
        let a = if self.depth == depth {
            Cow::Borrowed(self)
        } else {
            Cow::Owned(self.refine(depth)?)
        };
        let b = if other.depth == depth {
            Cow::Borrowed(other)
        } else {
            Cow::Owned(other.refine(depth)?)
        };
        Ok((a, b))
    }

    /// `int f dmu_o`.
    pub fn integral(&self) -> T {
        let sum = self
            .values
            .iter()
            .cloned()
            .fold(T::zero(), |acc, v| acc + v);
        sum * T::from_rational(&self.cell_mass())
    }

    /// The sesquilinear pairing `Q(f, h) = int f conj(h) dmu_o`.
    pub fn pair_q(&self, other: &Self) -> Result<T> {
        let (a, b) = self.align(other)?;
        let sum = a
            .values
            .iter()
            .zip(&b.values)
            .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.conj());
        Ok(sum * T::from_rational(&a.cell_mass()))
    }

    pub fn map<U: Scalar, F: Fn(&T) -> U>(&self, f: F) -> CylinderFunction<U> {
        CylinderFunction {
            group: self.group,
            depth: self.depth,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn zip_with<F: Fn(&T, &T) -> T>(&self, other: &Self, f: F) -> Result<Self> {
        let (a, b) = self.align(other)?;
        Ok(Self {
            group: a.group,
            depth: a.depth,
            values: a.values.iter().zip(&b.values).map(|(x, y)| f(x, y)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x.clone() + y.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x.clone() - y.clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    pub fn add_constant(&self, c: &T) -> Self {
        self.map(|v| v.clone() + c.clone())
    }

    /// `f - int f`.
    pub fn centered(&self) -> Self {
        let m = self.integral();
        self.add_constant(&(-m))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }
}

impl CylinderFunction<Rational> {
    pub fn to_f64(&self) -> CylinderFunction<f64> {
        self.map(f64::from_rational)
    }

    pub fn ensure_zero_mean(&self) -> Result<()> {
        let m = self.integral();
        if m.is_zero() {
            Ok(())
        } else {
            Err(Error::NonZeroMean(crate::scalar::rational_to_f64(&m)))
        }
    }
}

impl<T: Numeric> CylinderFunction<T> {
    /// Rejects functions whose mean exceeds `tol` relative to their size.
    pub fn ensure_zero_mean_tol(&self, tol: f64) -> Result<()> {
        let m = self.integral().norm_sqr().sqrt();
        let scale = self.pair_q(self).map(|v| v.real().sqrt())?.max(1.0);
        if m > tol * scale {
            return Err(Error::NonZeroMean(m));
        }
        Ok(())
    }

    pub fn norm_q(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * crate::scalar::rational_to_f64(&self.cell_mass())).sqrt()
    }

    /// `min_kappa ||f - kappa||_Q`.
    pub fn norm_modulo_constants(&self) -> f64 {
        let total = self.norm_q().powi(2);
        let mean = self.integral().norm_sqr();
        (total - mean).max(0.0).sqrt()
    }
}

impl CylinderFunction<f64> {
    pub fn to_complex(&self) -> CylinderFunction<num_complex::Complex64> {
        self.map(|v| num_complex::Complex64::new(*v, 0.0))
    }
}
