//! Spheres, cones, Vitali covers and the orbit measures `nu_{o,t}`, with the
//! equidistribution averages built on them.
//!
//! On the tree every shadow is a cylinder, so shadow products are
//! rectangles `[u] x [v]` of cylinders and all of the cover bookkeeping is
//! exact set algebra with rational masses.

use std::collections::HashSet;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary_ops::{fast_apply, log_form, pulled_prefix, CylinderFunction, Kernel};
use crate::conformal::{critical_exponent, ConformalDensity};
use crate::error::{Error, Result};
use crate::hypspace::{shadow_depth, BoundaryPoint, FreeGroup, GroupWord, Letter, Point};
use crate::scalar::{rational_to_f64, Rational};
use crate::special_rep::{df_value, THETA_CANDIDATES};

/// Word lengths `tR <= n < (t+1)R` of the annulus `S(t)`.
pub fn annulus_lengths(annulus_width: usize, t: usize) -> std::ops::Range<usize> {
    t * annulus_width..(t + 1) * annulus_width
}

pub fn annulus_size(group: &FreeGroup, annulus_width: usize, t: usize) -> u128 {
    annulus_lengths(annulus_width, t).map(|n| group.sphere_size(n)).sum()
}

/// All of `S(t)`, ordered by length and then lexicographically.
pub fn annulus(group: &FreeGroup, annulus_width: usize, t: usize) -> Result<Vec<GroupWord>> {
    let size = annulus_size(group, annulus_width, t);
    if size > group.limits().enumeration {
        return Err(Error::EnumerationTooLarge {
            requested: size,
            cap: group.limits().enumeration,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    for n in annulus_lengths(annulus_width, t) {
        out.extend(group.sphere(n)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCount {
    pub count: u128,
    /// `count e^{-delta t R} e^{delta rho}`.
    pub ratio: f64,
}

/// `|C+(xi; rho, r) ∩ S(t)|` where `g` is in the cone when its shadow
/// `O_o(g.o, r)` meets the visual ball `B(xi, e^-rho)`.
///
/// Both sets are cylinders, and two cylinders meet exactly when one word
/// prefixes the other, so the count per length is a power of `q`.
pub fn cone_count(group: &FreeGroup, annulus_width: usize, rho: f64, r: f64, t: usize) -> Result<ConeCount> {
    if !(rho >= 0.0) || !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("rho = {rho} and r = {r} must be >= 0")));
    }
    if (t * annulus_width) as f64 + 1e-12 < rho {
        return Err(Error::InvalidArgument(format!("need t >= rho / R, got t = {t}, rho = {rho}")));
    }
    let ball = rho.ceil() as usize;
    let q = group.branching() as u128;
    let mut count = 0u128;
    for n in annulus_lengths(annulus_width, t) {
        let fixed = shadow_depth(n, r).min(ball);
        count += if fixed == 0 {
            group.sphere_size(n)
        } else {
            q.pow((n - fixed) as u32)
        };
    }
    let delta = critical_exponent(group);
    let ratio = count as f64 * (delta * (rho - (t * annulus_width) as f64)).exp();
    Ok(ConeCount { count, ratio })
}

/// `cone_count` with the ray `xi` spelled out; the count does not depend on
/// `xi` on the tree but the membership test below does use it.
pub fn cone_count_check(
    group: &FreeGroup,
    xi: &BoundaryPoint,
    annulus_width: usize,
    rho: f64,
    r: f64,
    t: usize,
) -> Result<ConeCount> {
    group.validate_word(xi.prefix_word())?;
    group.validate_word(xi.period_word())?;
    cone_count(group, annulus_width, rho, r, t)
}

/// Exact cone membership for one word.
pub fn in_cone(g: &GroupWord, xi: &BoundaryPoint, rho: f64, r: f64) -> bool {
    let m = shadow_depth(g.len(), r);
    let ball = rho.max(0.0).ceil() as usize;
    let k = m.min(ball);
    xi.common_prefix_with_word(&g.prefix(k)) == k
}

/// Radii of the Vitali construction: `R(t) = tR/2 + r`, `R'(t) = tR/2 + r'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverParams {
    pub annulus_width: usize,
    pub r: f64,
    pub r_prime: f64,
}

impl Default for CoverParams {
    fn default() -> Self {
        Self {
            annulus_width: 2,
            r: 1.0,
            r_prime: 3.0,
        }
    }
}

impl CoverParams {
    pub fn validate(&self) -> Result<()> {
        if self.annulus_width == 0 || !(self.r >= 0.0) || !(self.r_prime >= self.r) {
            return Err(Error::InvalidParams(format!(
                "cover needs R > 0 and 0 <= r <= r', got {self:?}"
            )));
        }
        Ok(())
    }

    fn inner_radius(&self, t: usize) -> f64 {
        0.5 * (t * self.annulus_width) as f64 + self.r
    }

    fn outer_radius(&self, t: usize) -> f64 {
        0.5 * (t * self.annulus_width) as f64 + self.r_prime
    }
}

/// A rectangle `[u] x [v]` of boundary cylinders; empty words mean `∂X`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Rectangle {
    pub first: GroupWord,
    pub second: GroupWord,
}

impl Rectangle {
    pub fn contains(&self, other: &Rectangle) -> bool {
        other.first.starts_with(&self.first) && other.second.starts_with(&self.second)
    }

    pub fn intersects(&self, other: &Rectangle) -> bool {
        let comparable = |a: &GroupWord, b: &GroupWord| a.starts_with(b) || b.starts_with(a);
        comparable(&self.first, &other.first) && comparable(&self.second, &other.second)
    }

    fn mass(&self, density: &ConformalDensity) -> Rational {
        let m = |w: &GroupWord| {
            if w.is_empty() {
                Rational::one()
            } else {
                density.cell_mass(w.len())
            }
        };
        m(&self.first) * m(&self.second)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverElement {
    pub g: GroupWord,
    /// `O^2(g)` as a disjoint union of rectangles; the first one is
    /// `O(g.o, R(t)) x O(g^-1.o, R(t))`.
    pub rectangles: Vec<Rectangle>,
    #[serde(skip)]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereCover {
    pub t: usize,
    pub params: CoverParams,
    pub elements: Vec<CoverElement>,
    #[serde(skip)]
    pub covered_mass: Rational,
    /// Rectangles added after the greedy pass.
    pub completed: usize,
}

/// Cell index with the empty word mapped to 0 at depth 0.
fn key(group: &FreeGroup, w: &[Letter]) -> usize {
    if w.is_empty() {
        0
    } else {
        group.cell_index(w)
    }
}

#[derive(Default)]
struct RectangleIndex {
    /// `(depth, first, second)` of every selected square rectangle.
    exact: HashSet<(usize, usize, usize)>,
    /// All strict prefixes of selected rectangles.
    prefixes: HashSet<(usize, usize, usize)>,
}

impl RectangleIndex {
    fn hits(&self, group: &FreeGroup, u: &[Letter], v: &[Letter]) -> bool {
        let depth = u.len();
        debug_assert_eq!(depth, v.len());
        (0..=depth).any(|d| self.exact.contains(&(d, key(group, &u[..d]), key(group, &v[..d]))))
            || self.prefixes.contains(&(depth, key(group, u), key(group, v)))
    }

    fn insert(&mut self, group: &FreeGroup, u: &[Letter], v: &[Letter]) {
        let depth = u.len();
        self.exact.insert((depth, key(group, u), key(group, v)));
        for d in 0..depth {
            self.prefixes.insert((d, key(group, &u[..d]), key(group, &v[..d])));
        }
    }
}

fn square(g: &GroupWord, depth: usize) -> Rectangle {
    Rectangle {
        first: g.prefix(depth),
        second: g.inverse().prefix(depth),
    }
}

/// Greedy Vitali cover of `∂X x ∂X` by shadow products of `S(t)`.
///
/// Words are scanned by length, then lexicographically; a word is kept when
/// its inner rectangle misses everything kept so far. Whatever remains
/// uncovered is split into rectangles at the finest depth in use and handed
/// to the closest kept word whose outer rectangle contains it. All four
/// properties of the cover are checked before returning.
pub fn vitali_cover(group: &FreeGroup, params: &CoverParams, t: usize) -> Result<SphereCover> {
    params.validate()?;
    let density = ConformalDensity::new(*group);
    let size = annulus_size(group, params.annulus_width, t);
    if size > group.limits().enumeration {
        return Err(Error::EnumerationTooLarge {
            requested: size,
            cap: group.limits().enumeration,
        });
    }
    let inner = params.inner_radius(t);
    let mut index = RectangleIndex::default();
    let mut elements: Vec<CoverElement> = Vec::new();
    let mut covered = Rational::zero();
    'scan: for n in annulus_lengths(params.annulus_width, t) {
        let depth = shadow_depth(n, inner);
        for g in group.sphere(n)? {
            if covered == Rational::one() {
                break 'scan;
            }
            let rect = square(&g, depth);
            if index.hits(group, rect.first.letters(), rect.second.letters()) {
                continue;
            }
            index.insert(group, rect.first.letters(), rect.second.letters());
            let weight = rect.mass(&density);
            covered += weight;
            elements.push(CoverElement {
                g,
                rectangles: vec![rect],
                weight,
            });
        }
    }
    if elements.is_empty() {
        return Err(Error::CoverConstruction(format!("no element selected at t = {t}")));
    }
    let mut completed = 0;
    if covered < Rational::one() {
        completed = complete_cover(group, params, t, &mut index, &mut elements, &mut covered)?;
    }
    let cover = SphereCover {
        t,
        params: *params,
        elements,
        covered_mass: covered,
        completed,
    };
    verify_cover(group, &cover)?;
    Ok(cover)
}

fn complete_cover(
    group: &FreeGroup,
    params: &CoverParams,
    t: usize,
    index: &mut RectangleIndex,
    elements: &mut [CoverElement],
    covered: &mut Rational,
) -> Result<usize> {
    let density = ConformalDensity::new(*group);
    let depth = elements
        .iter()
        .map(|e| e.rectangles[0].first.len())
        .max()
        .unwrap_or(0)
        .max(1);
    let cells = group.cell_count(depth);
    if cells * cells > group.limits().cells {
        return Err(Error::CoverConstruction(format!(
            "completion at depth {depth} needs {} rectangles, above the cell cap",
            cells * cells
        )));
    }
    let outer = params.outer_radius(t);
    let outers: Vec<Rectangle> = elements
        .iter()
        .map(|e| square(&e.g, shadow_depth(e.g.len(), outer)))
        .collect();
    let mut added = 0;
    for i in 0..cells as usize {
        let u = group.cell_word(depth, i);
        for j in 0..cells as usize {
            let v = group.cell_word(depth, j);
            if index.hits(group, u.letters(), v.letters()) {
                continue;
            }
            let rect = Rectangle {
                first: u.clone(),
                second: v.clone(),
            };
            let host = (0..elements.len())
                .filter(|&e| outers[e].contains(&rect))
                .min_by_key(|&e| {
                    let g = &elements[e].g;
                    crate::hypspace::distance(&g.prefix(depth), &u)
                        + crate::hypspace::distance(&g.inverse().prefix(depth), &v)
                })
                .ok_or_else(|| {
                    Error::CoverConstruction(format!(
                        "no selected word has [{u}] x [{v}] inside its outer shadow product at t = {t}"
                    ))
                })?;
            index.insert(group, u.letters(), v.letters());
            let w = rect.mass(&density);
            elements[host].weight += w;
            elements[host].rectangles.push(rect);
            *covered += w;
            added += 1;
        }
    }
    Ok(added)
}

/// Asserts the Vitali properties: support in `S(t)`, pairwise disjoint
/// rectangles, the shadow sandwich, and full mass.
pub fn verify_cover(group: &FreeGroup, cover: &SphereCover) -> Result<()> {
    let p = &cover.params;
    let lengths = annulus_lengths(p.annulus_width, cover.t);
    let inner = p.inner_radius(cover.t);
    let outer = p.outer_radius(cover.t);
    let mut seen = RectangleIndex::default();
    let mut mass = Rational::zero();
    let density = ConformalDensity::new(*group);
    for e in &cover.elements {
        if !lengths.contains(&e.g.len()) {
            return Err(Error::CoverConstruction(format!("{} is outside S({})", e.g, cover.t)));
        }
        let lo = square(&e.g, shadow_depth(e.g.len(), inner));
        let hi = square(&e.g, shadow_depth(e.g.len(), outer));
        if e.rectangles.first() != Some(&lo) {
            return Err(Error::CoverConstruction(format!("O^2({}) misses its inner shadow product", e.g)));
        }
        let mut weight = Rational::zero();
        for rect in &e.rectangles {
            if !hi.contains(rect) {
                return Err(Error::CoverConstruction(format!("O^2({}) leaves its outer shadow product", e.g)));
            }
            if rect.first.len() != rect.second.len() {
                return Err(Error::CoverConstruction("non-square rectangle".into()));
            }
            if seen.hits(group, rect.first.letters(), rect.second.letters()) {
                return Err(Error::CoverConstruction(format!("O^2({}) overlaps another element", e.g)));
            }
            seen.insert(group, rect.first.letters(), rect.second.letters());
            weight += rect.mass(&density);
        }
        if weight != e.weight {
            return Err(Error::CoverConstruction(format!("weight of {} is inconsistent", e.g)));
        }
        mass += weight;
    }
    if mass != cover.covered_mass || mass != Rational::one() {
        return Err(Error::CoverConstruction(format!("covered mass {mass} != 1")));
    }
    Ok(())
}

/// `nu_{o,t} = sum_{g in S*} mu_o x mu_o(O^2(g)) D_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicOrbitMeasure {
    pub t: usize,
    pub atoms: Vec<(GroupWord, Rational)>,
    pub total_mass: Rational,
}

pub fn nu_measure(cover: &SphereCover) -> AtomicOrbitMeasure {
    let atoms: Vec<_> = cover.elements.iter().map(|e| (e.g.clone(), e.weight)).collect();
    let total_mass = atoms.iter().map(|(_, w)| *w).sum();
    AtomicOrbitMeasure {
        t: cover.t,
        atoms,
        total_mass,
    }
}

impl AtomicOrbitMeasure {
    pub fn total_mass_f64(&self) -> f64 {
        rational_to_f64(&self.total_mass)
    }

    /// Sum of `weight * f(g)` in atom order.
    pub fn integrate<F: Fn(&GroupWord) -> f64 + Sync>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .atoms
            .par_iter()
            .map(|(g, w)| rational_to_f64(w) * f(g))
            .collect();
        terms.iter().sum()
    }

    /// Mass pushed to each depth-1 cylinder through the first letter of `g`.
    pub fn first_letter_marginal(&self, group: &FreeGroup) -> Vec<f64> {
        let mut out = vec![0.0; group.alphabet_size()];
        for (g, w) in &self.atoms {
            if let Some(l) = g.first() {
                out[l.code()] += rational_to_f64(w);
            }
        }
        out
    }
}

/// Integrals of a cylinder function over arbitrary cylinders.
#[derive(Debug, Clone)]
pub struct CylinderIntegrals {
    group: FreeGroup,
    depth: usize,
    /// `levels[l][i]`: integral over the depth-`l` cell `i`, `l = 1..=depth`.
    levels: Vec<Vec<f64>>,
    total: f64,
    values: Vec<f64>,
    cell_mass: f64,
}

impl CylinderIntegrals {
    pub fn new(f: &CylinderFunction<f64>) -> Self {
        let group = *f.group();
        let n = f.depth();
        let q = group.branching();
        let mu = rational_to_f64(&f.cell_mass());
        let mut levels = vec![Vec::new(); n + 1];
        levels[n] = f.values().iter().map(|v| v * mu).collect();
        for l in (1..n).rev() {
            levels[l] = levels[l + 1].chunks(q).map(|c| c.iter().sum()).collect();
        }
        let total = levels[1].iter().sum();
        Self {
            group,
            depth: n,
            levels,
            total,
            values: f.values().to_vec(),
            cell_mass: mu,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `int_[w] f dmu_o`, the whole integral for the empty word.
    pub fn integral(&self, w: &[Letter]) -> f64 {
        if w.is_empty() {
            return self.total;
        }
        if w.len() <= self.depth {
            return self.levels[w.len()][self.group.cell_index(w)];
        }
        let q = self.group.branching() as f64;
        let v = self.values[self.group.cell_index(&w[..self.depth])];
        v * self.cell_mass * q.powi(-((w.len() - self.depth) as i32))
    }

    /// Average of `f` over `[w]` with respect to `mu_o`.
    pub fn mean(&self, w: &[Letter]) -> f64 {
        if w.is_empty() {
            return self.total;
        }
        if w.len() >= self.depth {
            return self.values[self.group.cell_index(&w[..self.depth])];
        }
        let mass = ConformalDensity::new(self.group).cell_mass_f64(w.len());
        self.integral(w) / mass
    }
}

/// A zero-mean cylinder function extended to the orbit: at `g.o` it takes
/// the value of the cell of `g` when `|g| >= n` and the `mu_o`-average over
/// the cells extending `g` otherwise.
#[derive(Debug, Clone)]
pub struct TestFunction {
    phi: CylinderFunction<f64>,
    integrals: CylinderIntegrals,
}

impl TestFunction {
    pub fn new(phi: CylinderFunction<f64>) -> Result<Self> {
        phi.ensure_zero_mean_tol(1e-12)?;
        let integrals = CylinderIntegrals::new(&phi);
        Ok(Self { phi, integrals })
    }

    pub fn boundary(&self) -> &CylinderFunction<f64> {
        &self.phi
    }

    pub fn at(&self, g: &GroupWord) -> f64 {
        self.integrals.mean(g.letters())
    }
}

/// A function on `∂X x ∂X` constant on depth-`n` rectangles.
#[derive(Debug, Clone)]
pub struct CylinderPairFunction {
    group: FreeGroup,
    depth: usize,
    values: Vec<f64>,
}

impl CylinderPairFunction {
    pub fn from_fn<F: Fn(&[Letter], &[Letter]) -> f64>(group: FreeGroup, depth: usize, f: F) -> Result<Self> {
        let cells = group.checked_cells(depth)?;
        if (cells as u128) * (cells as u128) > group.limits().cells {
            return Err(Error::CellCap {
                depth,
                cells: (cells * cells) as u128,
                cap: group.limits().cells,
            });
        }
        let words: Vec<GroupWord> = (0..cells).map(|i| group.cell_word(depth, i)).collect();
        let mut values = Vec::with_capacity(cells * cells);
        for a in &words {
            for b in &words {
                values.push(f(a.letters(), b.letters()));
            }
        }
        Ok(Self { group, depth, values })
    }

    /// `f1 (x) f2`.
    pub fn tensor(f1: &CylinderFunction<f64>, f2: &CylinderFunction<f64>) -> Result<Self> {
        let (a, b) = f1.align(f2)?;
        let depth = a.depth();
        Self::from_fn(*a.group(), depth, |x, y| {
            a.value_on(x).copied().unwrap_or(0.0) * b.value_on(y).copied().unwrap_or(0.0)
        })
    }

    fn cells(&self) -> usize {
        (self.values.len() as f64).sqrt().round() as usize
    }

    /// `int int Psi dmu_o dmu_o`.
    pub fn integral(&self) -> f64 {
        let mu = ConformalDensity::new(self.group).cell_mass_f64(self.depth);
        self.values.iter().sum::<f64>() * mu * mu
    }

    fn block(&self, w: &[Letter]) -> std::ops::Range<usize> {
        let n = self.depth;
        if w.is_empty() {
            return 0..self.cells();
        }
        if w.len() >= n {
            let i = self.group.cell_index(&w[..n]);
            return i..i + 1;
        }
        let span = self.group.branching().pow((n - w.len()) as u32);
        let i = self.group.cell_index(w) * span;
        i..i + span
    }

    /// Extension to `(x, y)` in `X x X`: average over the reachable rectangles.
    pub fn at(&self, x: &GroupWord, y: &GroupWord) -> f64 {
        let cells = self.cells();
        let (bx, by) = (self.block(x.letters()), self.block(y.letters()));
        let count = (bx.len() * by.len()) as f64;
        let mut sum = 0.0;
        for i in bx {
            for j in by.clone() {
                sum += self.values[i * cells + j];
            }
        }
        sum / count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoblinEstimate {
    pub t: usize,
    pub raw: f64,
    pub normalized: f64,
    pub total_mass: f64,
    pub target: f64,
    pub rel_err: f64,
}

/// `int Psi(g.o, g^-1.o) dnu_{o,t}(g)` against `int int Psi dmu_o dmu_o`.
pub fn roblin_average(nu: &AtomicOrbitMeasure, psi: &CylinderPairFunction) -> RoblinEstimate {
    let raw = nu.integrate(|g| psi.at(g, &g.inverse()));
    let total_mass = nu.total_mass_f64();
    let normalized = raw / total_mass;
    let target = psi.integral();
    let rel_err = if target != 0.0 {
        ((normalized - target) / target).abs()
    } else {
        (normalized - target).abs()
    };
    RoblinEstimate {
        t: nu.t,
        raw,
        normalized,
        total_mass,
        target,
        rel_err,
    }
}

/// `int F(g^-1 eta) conj(psi(eta)) dmu_o(eta)` for real cylinder functions,
/// i.e. `Q(pi_0(g) F, psi)`, without refining to depth `|g|`.
pub fn pullback_pairing(g: &GroupWord, f: &CylinderIntegrals, psi: &CylinderFunction<f64>) -> f64 {
    let group = *psi.group();
    let density = ConformalDensity::new(group);
    let n = psi.depth();
    let q = group.branching();
    let gl = g.letters();
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(n);
    for (i, &p) in psi.values().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        group.decode_cell(n, i, &mut buf);
        let c = gl.iter().zip(&buf).take_while(|(a, b)| a == b).count();
        let piece = if c < n {
            density.cell_mass_f64(n) * f.mean(&pulled_prefix(gl, &buf, usize::MAX))
        } else {
            // [v] contains the direction of g: split it along g.
            let mut acc = 0.0;
            for j in n..gl.len() {
                let mass = density.cell_mass_f64(j + 1);
                for l in group.letters() {
                    if l == gl[j] || l == gl[j - 1].inverse() {
                        continue;
                    }
                    let mut word: Vec<Letter> = gl[j..].iter().rev().map(|x| x.inverse()).collect();
                    word.push(l);
                    acc += mass * f.mean(&word);
                }
            }
            let last = gl[gl.len() - 1].inverse();
            let tail: f64 = group
                .letters()
                .filter(|l| *l != last)
                .map(|l| f.mean(&[l]))
                .sum();
            acc + density.cell_mass_f64(gl.len()) * tail / q as f64
        };
        total += p * piece;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingRow {
    pub len: usize,
    pub value: f64,
}

/// `|Q(pi_0(g) phi, psi)|` along a sequence of group elements.
pub fn mixing_decay(
    phi: &CylinderFunction<f64>,
    psi: &CylinderFunction<f64>,
    ray: &[GroupWord],
) -> Result<Vec<MixingRow>> {
    phi.ensure_zero_mean_tol(1e-12)?;
    psi.ensure_zero_mean_tol(1e-12)?;
    let f = CylinderIntegrals::new(phi);
    Ok(ray
        .iter()
        .map(|g| MixingRow {
            len: g.len(),
            value: pullback_pairing(g, &f, psi).abs(),
        })
        .collect())
}

/// One factor `f(g.o) Q'_1(c(g) + d_w(g), u)` of an affine average.
#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub f: TestFunction,
    pub u: CylinderFunction<f64>,
    pub w: CylinderFunction<f64>,
}

struct PreparedTerm<'a> {
    term: &'a AffineTerm,
    u: CylinderIntegrals,
    iw: CylinderIntegrals,
    w_u: f64,
    target: f64,
}

impl<'a> PreparedTerm<'a> {
    fn new(term: &'a AffineTerm) -> Result<Self> {
        term.u.ensure_zero_mean_tol(1e-12)?;
        term.w.ensure_zero_mean_tol(1e-12)?;
        Ok(Self {
            term,
            u: CylinderIntegrals::new(&term.u),
            iw: CylinderIntegrals::new(&fast_apply(Kernel::LogGromov, &term.w)?),
            w_u: log_form(&term.w, &term.u)?,
            target: log_form(term.f.boundary(), &term.u)?,
        })
    }

    /// `Q'_1(c(g), u)` through `theta b_.(o, g) + dF(g, o)` paired with `u`.
    fn cocycle_pairing(&self, g: &GroupWord, theta: f64) -> f64 {
        let group = *self.term.u.group();
        let prefixes: f64 = (1..=g.len()).map(|m| self.u.integral(&g.letters()[..m])).sum();
        let busemann = 2.0 * prefixes - g.len() as f64 * self.u.total();
        let ray = BoundaryPoint::through(&GroupWord::from_letters(vec![Letter::from_code(0)]).expect("letter"))
            .expect("ray");
        // dF(g, o) restricted to the boundary is constant in eta.
        let df = rational_to_f64(&df_value(g, &GroupWord::identity(), &Point::Boundary(ray), &group));
        theta * busemann + df * self.u.total()
    }

    /// `Q'_1(d_w(g), u) = Q'_1(w, u) - Q(pi_0(g) I'w, u)`.
    fn coboundary_pairing(&self, g: &GroupWord) -> f64 {
        self.w_u - pullback_pairing(g, &self.iw, &self.term.u)
    }

    fn factor(&self, g: &GroupWord, theta: f64) -> f64 {
        self.term.f.at(g) * (self.cocycle_pairing(g, theta) + self.coboundary_pairing(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineEstimate {
    pub t: usize,
    pub arity: usize,
    /// The average with no prefactor.
    pub raw: f64,
    /// `raw / (2 theta)^arity`, which targets the product of `Q'_1` values.
    pub estimate: f64,
    /// `raw / 2^arity`.
    pub unit_theta_estimate: f64,
    pub target: f64,
    pub rel_err: f64,
}

/// Arity-1 or arity-2 cocycle averages against `nu_{o,t}`.
///
/// Arity 1 averages `f(g.o) Q'_1(c(g) + d_w(g), u)`; arity 2 multiplies that
/// by the same expression for the second term evaluated at `g^-1`.
pub fn affine_average(nu: &AtomicOrbitMeasure, terms: &[AffineTerm], theta: f64) -> Result<AffineEstimate> {
    if terms.is_empty() || terms.len() > 2 {
        return Err(Error::InvalidArgument(format!("arity must be 1 or 2, got {}", terms.len())));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta}")));
    }
    let prepared: Vec<PreparedTerm> = terms.iter().map(PreparedTerm::new).collect::<Result<_>>()?;
    let raw = nu.integrate(|g| {
        let mut value = prepared[0].factor(g, theta);
        if let Some(second) = prepared.get(1) {
            value *= second.factor(&g.inverse(), theta);
        }
        value
    }) / nu.total_mass_f64();
    let arity = terms.len() as i32;
    let estimate = raw / (2.0 * theta).powi(arity);
    let target: f64 = prepared.iter().map(|p| p.target).product();
    let rel_err = ((estimate - target) / target).abs();
    Ok(AffineEstimate {
        t: nu.t,
        arity: terms.len(),
        raw,
        estimate,
        unit_theta_estimate: raw / 2f64.powi(arity),
        target,
        rel_err,
    })
}

/// The `theta` candidates of the fundamental identity, as floats.
pub fn theta_candidates() -> Vec<f64> {
    THETA_CANDIDATES.iter().map(rational_to_f64).collect()
}

/// `Q(b(g), c(h)) = 2 sum_{m <= |g|} (mu_h - mu_o)[g_1..g_m]`, where
/// `b(g) = b_.(o, g)`.
pub fn busemann_cocycle_pairing(group: &FreeGroup, g: &GroupWord, h: &GroupWord) -> f64 {
    let density = ConformalDensity::new(*group);
    let mut acc = Rational::zero();
    for m in 1..=g.len() {
        let c = crate::hypspace::Cylinder::new(g.prefix(m)).expect("nonempty");
        acc += density.mass_at(h, &c) - density.mass(&c);
    }
    2.0 * rational_to_f64(&acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `(t, sup_h int |Q(b(g), c(h))|^alpha dnu_{o,t})`.
    pub sups: Vec<(usize, f64)>,
    pub pass: bool,
}

/// Watches `sup_h int |Q(b(g), c(h))|^alpha dnu_{o,t}(g)` over `t`; passes
/// when the overall maximum stays within 10% of the maximum over the first
/// half of the range.
pub fn boundedness_monitor(
    group: &FreeGroup,
    params: &CoverParams,
    h_list: &[GroupWord],
    alpha: f64,
    t_range: std::ops::RangeInclusive<usize>,
) -> Result<BoundednessReport> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be >= 1")));
    }
    let mut sups = Vec::new();
    for t in t_range {
        let nu = nu_measure(&vitali_cover(group, params, t)?);
        let sup = h_list
            .iter()
            .map(|h| nu.integrate(|g| busemann_cocycle_pairing(group, g, h).abs().powf(alpha)))
            .fold(0.0f64, f64::max);
        sups.push((t, sup));
    }
    let half = sups.len().div_ceil(2).max(1);
    let early = sups[..half].iter().map(|s| s.1).fold(0.0f64, f64::max);
    let overall = sups.iter().map(|s| s.1).fold(0.0f64, f64::max);
    Ok(BoundednessReport {
        pass: overall <= 1.1 * early || overall == 0.0,
        sups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_ops::pi_zero;
    use crate::hypspace::Cylinder;

    fn f2() -> FreeGroup {
        FreeGroup::new(2).unwrap()
    }

    fn ind(g: &FreeGroup, s: &str) -> CylinderFunction<f64> {
        CylinderFunction::<Rational>::indicator(*g, &Cylinder::new(g.parse(s).unwrap()).unwrap())
            .unwrap()
            .to_f64()
    }

    #[test]
    fn annulus_examples() {
        let g = f2();
        assert_eq!(annulus(&g, 2, 1).unwrap().len(), 48);
        assert_eq!(annulus(&g, 2, 0).unwrap().len(), 5);
        let ratio = annulus_size(&g, 2, 9) as f64 / annulus_size(&g, 2, 8) as f64;
        assert!((ratio - 9.0).abs() < 1e-12);
    }

    #[test]
    fn cone_count_matches_membership() {
        let g = f2();
        let xi = BoundaryPoint::new(g.parse("ab").unwrap(), g.parse("ba").unwrap()).unwrap();
        for t in 1..=4 {
            for rho in 0..=(2 * t) {
                let direct = annulus(&g, 2, t)
                    .unwrap()
                    .iter()
                    .filter(|w| in_cone(w, &xi, rho as f64, 1.0))
                    .count() as u128;
                let fast = cone_count_check(&g, &xi, 2, rho as f64, 1.0, t).unwrap();
                assert_eq!(direct, fast.count, "t={t} rho={rho}");
            }
        }
    }

    #[test]
    fn small_cover_is_exact() {
        let g = f2();
        let cover = vitali_cover(&g, &CoverParams::default(), 1).unwrap();
        assert_eq!(cover.covered_mass, Rational::one());
        let nu = nu_measure(&cover);
        assert_eq!(nu.total_mass, Rational::one());
        for t in 2..=4 {
            let cover = vitali_cover(&g, &CoverParams::default(), t).unwrap();
            assert_eq!(cover.elements.len() as u128, (4 * 3u128.pow(t as u32 - 2)).pow(2));
        }
    }

    #[test]
    fn greedy_with_tight_radius_needs_completion_or_fails_loudly() {
        let g = f2();
        let params = CoverParams {
            annulus_width: 2,
            r: 0.0,
            r_prime: 3.0,
        };
        for t in 1..=3 {
            match vitali_cover(&g, &params, t) {
                Ok(cover) => assert_eq!(cover.covered_mass, Rational::one()),
                Err(e) => assert!(matches!(e, Error::CoverConstruction(_))),
            }
        }
    }

    #[test]
    fn pullback_pairing_matches_refined_pullback() {
        let g = f2();
        let phi = CylinderFunction::from_fn(g, 2, |w| (w[0].code() as f64 - 1.3) * (w[1].code() as f64 + 0.2)).unwrap();
        let psi = CylinderFunction::from_fn(g, 3, |w| w[2].code() as f64 - w[0].code() as f64).unwrap();
        let f = CylinderIntegrals::new(&phi);
        for word in ["a", "ab", "abA", "bbb", "aBaBB", "AAbab"] {
            let h = g.parse(word).unwrap();
            let direct = pi_zero(&h, &phi).unwrap().pair_q(&psi).unwrap();
            let fast = pullback_pairing(&h, &f, &psi);
            assert!((direct - fast).abs() < 1e-12, "{word}: {direct} vs {fast}");
        }
    }

    #[test]
    fn mixing_example() {
        let g = f2();
        let phi = ind(&g, "a").centered();
        let ray: Vec<_> = (0..6).map(|n| g.parse("a").unwrap().power(n)).collect();
        let rows = mixing_decay(&phi, &phi, &ray).unwrap();
        for (n, row) in rows.iter().enumerate() {
            let expected = 3.0 / 16.0 * 3f64.powi(-(n as i32));
            assert!((row.value - expected).abs() < 1e-14, "n={n}");
        }
        let one = CylinderFunction::constant(g, 1, 1.0).unwrap();
        assert!(mixing_decay(&phi, &one, &ray).is_err());
    }

    #[test]
    fn test_function_extension() {
        let g = f2();
        let f = TestFunction::new(ind(&g, "ab").centered()).unwrap();
        assert!(f.at(&GroupWord::identity()).abs() < 1e-15);
        assert!((f.at(&g.parse("a").unwrap()) - (1.0 / 3.0 - 1.0 / 12.0)).abs() < 1e-15);
        assert!((f.at(&g.parse("ab").unwrap()) - 11.0 / 12.0).abs() < 1e-15);
        assert!(TestFunction::new(ind(&g, "a")).is_err());
    }

    #[test]
    fn roblin_trivial_and_product() {
        let g = f2();
        let one = CylinderFunction::constant(g, 1, 1.0).unwrap();
        let nu = nu_measure(&vitali_cover(&g, &CoverParams::default(), 3).unwrap());
        let est = roblin_average(&nu, &CylinderPairFunction::tensor(&one, &one).unwrap());
        assert!((est.raw - 1.0).abs() < 1e-12);
        let est = roblin_average(&nu, &CylinderPairFunction::tensor(&ind(&g, "a"), &ind(&g, "b")).unwrap());
        assert!((est.normalized - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn affine_average_with_zero_u_vanishes() {
        let g = f2();
        let nu = nu_measure(&vitali_cover(&g, &CoverParams::default(), 2).unwrap());
        let f = TestFunction::new(ind(&g, "a").centered()).unwrap();
        let zero = CylinderFunction::zeros(g, 1).unwrap();
        let term = AffineTerm {
            f,
            u: zero.clone(),
            w: zero,
        };
        let est = affine_average(&nu, &[term], 0.5).unwrap();
        assert_eq!(est.raw, 0.0);
    }

    #[test]
    fn boundedness_rejects_small_alpha() {
        let g = f2();
        assert!(boundedness_monitor(&g, &CoverParams::default(), &[], 0.5, 1..=2).is_err());
        let report =
            boundedness_monitor(&g, &CoverParams::default(), &[GroupWord::identity()], 1.0, 1..=3).unwrap();
        assert!(report.sups.iter().all(|s| s.1 == 0.0) && report.pass);
    }
}
