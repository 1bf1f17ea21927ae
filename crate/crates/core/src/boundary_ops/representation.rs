//! The boundary representations `pi_s(g) f (xi) = e^{-s delta b_xi(g.o, o)} f(g^-1 xi)`.
//!
//! On a depth-`n` input the output lives at depth `n + |g|`: there both the
//! multiplier and the pulled-back cell are constant.

use num_complex::Complex64;
use rayon::prelude::*;

use super::CylinderFunction;
use crate::conformal::critical_exponent;
use crate::error::Result;
use crate::hypspace::{GroupWord, Letter};
use crate::scalar::{rational_pow, Numeric, Rational, Scalar};

/// Applies `f -> m(b) f(g^-1 .)` where `b = b_xi(g.o, o)` and `m` is given
/// per common-prefix length `c = <xi, g.o>_o` as `multipliers[c]`.
fn pullback_with<T: Scalar>(g: &GroupWord, f: &CylinderFunction<T>, multipliers: &[T]) -> Result<CylinderFunction<T>> {
    let group = *f.group();
    group.validate_word(g)?;
    if g.is_identity() {
        return Ok(f.clone());
    }
    let n = f.depth();
    let depth = n + g.len();
    let cells = group.checked_cells(depth)?;
    let gl = g.letters();
    let values: Vec<T> = (0..cells)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(depth), Vec::with_capacity(n)),
            |(buf, pulled), i| {
                group.decode_cell(depth, i, buf);
                let c = gl.iter().zip(buf.iter()).take_while(|(a, b)| a == b).count();
                pulled.clear();
                pulled.extend(gl[c..].iter().rev().map(|l| l.inverse()).chain(buf[c..].iter().copied()).take(n));
                let idx = group.cell_index(pulled);
                multipliers[c].clone() * f.values()[idx].clone()
            },
        )
        .collect();
    CylinderFunction::new(group, depth, values)
}

/// `b_xi(g.o, o) = |g| - 2c` on rays sharing exactly `c` letters with `g`.
fn busemann_by_prefix(g: &GroupWord) -> impl Iterator<Item = i64> + '_ {
    (0..=g.len()).map(move |c| g.len() as i64 - 2 * c as i64)
}

/// `pi_s(g) f` for real `s`.
pub fn pi_s_apply<T: Numeric>(g: &GroupWord, f: &CylinderFunction<T>, s: f64) -> Result<CylinderFunction<T>> {
    let delta = critical_exponent(f.group());
    let m: Vec<T> = busemann_by_prefix(g)
        .map(|b| T::from_real((-s * delta * b as f64).exp()))
        .collect();
    pullback_with(g, f, &m)
}

/// `pi_s(g) f` for complex `s`.
pub fn pi_s_apply_complex(
    g: &GroupWord,
    f: &CylinderFunction<Complex64>,
    s: Complex64,
) -> Result<CylinderFunction<Complex64>> {
    let delta = critical_exponent(f.group());
    let m: Vec<Complex64> = busemann_by_prefix(g)
        .map(|b| (-s * delta * b as f64).exp())
        .collect();
    pullback_with(g, f, &m)
}

/// `pi_1(g) f` with the exact multiplier `q^{-b}`.
pub fn pi_one_exact(g: &GroupWord, f: &CylinderFunction<Rational>) -> Result<CylinderFunction<Rational>> {
    let q = f.group().branching() as i128;
    let m: Vec<Rational> = busemann_by_prefix(g).map(|b| rational_pow(q, -b)).collect();
    pullback_with(g, f, &m)
}

/// `pi_0(g) f = f(g^-1 .)`.
pub fn pi_zero<T: Scalar>(g: &GroupWord, f: &CylinderFunction<T>) -> Result<CylinderFunction<T>> {
    let m = vec![T::one(); g.len() + 1];
    pullback_with(g, f, &m)
}

/// First `n` letters of `g^-1 xi` for rays `xi` starting with `word`.
pub(crate) fn pulled_prefix(g: &[Letter], word: &[Letter], n: usize) -> Vec<Letter> {
    let c = g.iter().zip(word).take_while(|(a, b)| a == b).count();
    g[c..]
        .iter()
        .rev()
        .map(|l| l.inverse())
        .chain(word[c..].iter().copied())
        .take(n)
        .collect()
}
