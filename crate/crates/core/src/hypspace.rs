//! The free group `F_k` acting on its `2k`-regular Cayley tree.
//!
//! Group elements double as orbit points `g.o`; the basepoint `o` is the
//! identity word. The boundary is the space of infinite reduced words, of
//! which we keep the eventually periodic ones ([`BoundaryPoint`]) and the
//! cylinders `[w]` ([`Cylinder`]) that generate its Borel algebra.
//!
//! Depth-`n` cylinders are indexed in a fixed order: the first letter by its
//! code, every further letter by its rank among the `2k - 1` letters that do
//! not cancel the previous one. The children of cell `i` are therefore
//! `i * q .. i * q + q` with `q = 2k - 1`, and the level-`l` ancestor of a
//! depth-`n` cell is `i / q^(n - l)`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u128 = 20_000_000;
pub const DEFAULT_DENSE_CELL_CAP: u128 = 3_000;
pub const DEFAULT_CELL_CAP: u128 = 2_500_000;

/// Resource guards shared by every operation that enumerates words or cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    /// Largest number of words a sphere or annulus enumeration may yield.
    pub enumeration: u128,
    /// Largest number of cells for which a dense Galerkin matrix is built.
    pub dense_cells: u128,
    /// Largest number of cells any cylinder function may have.
    pub cells: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            enumeration: DEFAULT_ENUMERATION_CAP,
            dense_cells: DEFAULT_DENSE_CELL_CAP,
            cells: DEFAULT_CELL_CAP,
        }
    }
}

/// A letter of the alphabet `{a_1, .., a_k, a_1^-1, .., a_k^-1}`.
///
/// Code `2j` is the generator `a_{j+1}`, code `2j + 1` its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn generator(j: usize) -> Self {
        Letter((2 * j) as u8)
    }

    pub fn from_code(code: usize) -> Self {
        Letter(code as u8)
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    pub fn generator_index(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    /// Rank of `self` among the letters allowed after `prev`.
    fn digit_after(self, prev: Letter) -> usize {
        let forbidden = prev.inverse().code();
        let c = self.code();
        if c > forbidden {
            c - 1
        } else {
            c
        }
    }

    fn from_digit_after(digit: usize, prev: Letter) -> Self {
        let forbidden = prev.inverse().code();
        Letter::from_code(if digit >= forbidden { digit + 1 } else { digit })
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let j = self.generator_index();
        if j < 26 {
            let c = (b'a' + j as u8) as char;
            if self.is_inverse() {
                write!(f, "{}", c.to_ascii_uppercase())
            } else {
                write!(f, "{c}")
            }
        } else if self.is_inverse() {
            write!(f, "[a{}^-1]", j + 1)
        } else {
            write!(f, "[a{}]", j + 1)
        }
    }
}

/// A reduced word; the group element `g` and the orbit point `g.o`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GroupWord {
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a word, rejecting adjacent cancelling letters.
    pub fn from_letters(letters: Vec<Letter>) -> Result<Self> {
        if let Some(i) = letters.windows(2).position(|w| w[1] == w[0].inverse()) {
            return Err(Error::NotReduced(i, i + 1));
        }
        Ok(Self { letters })
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self { letters: out }
    }

    pub(crate) fn from_reduced_unchecked(letters: Vec<Letter>) -> Self {
        Self { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// Group law with free reduction.
    pub fn compose(&self, other: &GroupWord) -> GroupWord {
        let mut out = self.letters.clone();
        let mut rest = other.letters.iter();
        for l in rest.by_ref() {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(*l);
                break;
            }
        }
        out.extend(rest);
        GroupWord { letters: out }
    }

    /// The first `n` letters (all of them when `n >= len`).
    pub fn prefix(&self, n: usize) -> GroupWord {
        GroupWord {
            letters: self.letters[..n.min(self.len())].to_vec(),
        }
    }

    /// The last `n` letters.
    pub fn suffix(&self, n: usize) -> GroupWord {
        let n = n.min(self.len());
        GroupWord {
            letters: self.letters[self.len() - n..].to_vec(),
        }
    }

    pub fn common_prefix_len(&self, other: &GroupWord) -> usize {
        common_prefix(&self.letters, &other.letters)
    }

    pub fn starts_with(&self, other: &GroupWord) -> bool {
        self.letters.starts_with(&other.letters)
    }

    /// Appends a letter, failing if it cancels the last one.
    pub fn push(&mut self, l: Letter) -> Result<()> {
        if self.last() == Some(l.inverse()) {
            return Err(Error::NotReduced(self.len() - 1, self.len()));
        }
        self.letters.push(l);
        Ok(())
    }

    pub fn power(&self, n: usize) -> GroupWord {
        let mut out = GroupWord::identity();
        for _ in 0..n {
            out = out.compose(self);
        }
        out
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Serialize for GroupWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub(crate) fn common_prefix(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// The free group `F_k` with its resource limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeGroup {
    k: usize,
    limits: Limits,
}

impl FreeGroup {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidRank(k));
        }
        if k > 64 {
            return Err(Error::InvalidParams(format!("rank {k} exceeds 64")));
        }
        Ok(Self {
            k,
            limits: Limits::default(),
        })
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.k
    }

    /// Number of one-letter extensions of a nonempty word, `q = 2k - 1`.
    pub fn branching(&self) -> usize {
        2 * self.k - 1
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.alphabet_size()).map(Letter::from_code)
    }

    pub fn generator(&self, j: usize) -> Letter {
        assert!(j < self.k, "generator index out of range");
        Letter::generator(j)
    }

    /// `|S(n)| = 2k (2k-1)^(n-1)`, and 1 for `n = 0`.
    pub fn sphere_size(&self, n: usize) -> u128 {
        if n == 0 {
            1
        } else {
            let q = self.branching() as u128;
            (self.alphabet_size() as u128).saturating_mul(q.saturating_pow(n as u32 - 1))
        }
    }

    pub fn ball_size(&self, n: usize) -> u128 {
        (0..=n).map(|m| self.sphere_size(m)).fold(0u128, |a, b| a.saturating_add(b))
    }

    /// Number of depth-`depth` cylinders.
    pub fn cell_count(&self, depth: usize) -> u128 {
        self.sphere_size(depth)
    }

    /// Checks the cell budget for a cylinder function of the given depth.
    pub fn checked_cells(&self, depth: usize) -> Result<usize> {
        self.cells_within(depth, self.limits.cells)
    }

    pub(crate) fn cells_within(&self, depth: usize, cap: u128) -> Result<usize> {
        if depth == 0 {
            return Err(Error::InvalidArgument("cylinder depth must be at least 1".into()));
        }
        let cells = self.cell_count(depth);
        if cells > cap {
            return Err(Error::CellCap { depth, cells, cap });
        }
        Ok(cells as usize)
    }

    pub fn validate_word(&self, w: &GroupWord) -> Result<()> {
        for l in w.letters() {
            if l.code() >= self.alphabet_size() {
                return Err(Error::LetterOutOfRange {
                    code: l.code(),
                    k: self.k,
                });
            }
        }
        Ok(())
    }

    /// Index of a nonempty reduced word among the cells of its depth.
    pub fn cell_index(&self, letters: &[Letter]) -> usize {
        debug_assert!(!letters.is_empty());
        let q = self.branching();
        let mut idx = letters[0].code();
        for w in letters.windows(2) {
            idx = idx * q + w[1].digit_after(w[0]);
        }
        idx
    }

    /// Inverse of [`FreeGroup::cell_index`], writing into `buf`.
    pub fn decode_cell(&self, depth: usize, index: usize, buf: &mut Vec<Letter>) {
        let q = self.branching();
        buf.clear();
        buf.resize(depth, Letter(0));
        let mut idx = index;
        let mut digits = [0usize; 128];
        assert!(depth <= digits.len(), "cell depth too large");
        for slot in digits[1..depth].iter_mut().rev() {
            *slot = idx % q;
            idx /= q;
        }
        buf[0] = Letter::from_code(idx);
        for i in 1..depth {
            buf[i] = Letter::from_digit_after(digits[i], buf[i - 1]);
        }
    }

    pub fn cell_word(&self, depth: usize, index: usize) -> GroupWord {
        let mut buf = Vec::with_capacity(depth);
        self.decode_cell(depth, index, &mut buf);
        GroupWord::from_reduced_unchecked(buf)
    }

    /// Parses `a`, `b`, ... as generators and `A`, `B`, ... as inverses;
    /// `e` or the empty string is the identity.
    pub fn parse(&self, s: &str) -> Result<GroupWord> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(GroupWord::identity());
        }
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let (j, inv) = match ch {
                'a'..='z' => (ch as usize - 'a' as usize, false),
                'A'..='Z' => (ch as usize - 'A' as usize, true),
                _ => return Err(Error::Parse(format!("unexpected character {ch:?} in {s:?}"))),
            };
            if j >= self.k {
                return Err(Error::Parse(format!("generator {ch:?} not in F_{}", self.k)));
            }
            letters.push(Letter::from_code(2 * j + inv as usize));
        }
        GroupWord::from_letters(letters)
    }

    /// A uniformly random reduced word of length `len`.
    pub fn random_word<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> GroupWord {
        let mut letters: Vec<Letter> = Vec::with_capacity(len);
        for i in 0..len {
            let l = if i == 0 {
                Letter::from_code(rng.gen_range(0..self.alphabet_size()))
            } else {
                Letter::from_digit_after(rng.gen_range(0..self.branching()), letters[i - 1])
            };
            letters.push(l);
        }
        GroupWord::from_reduced_unchecked(letters)
    }

    /// All reduced words of length `n`, in cell order.
    pub fn sphere(&self, n: usize) -> Result<Sphere> {
        let count = self.sphere_size(n);
        if count > self.limits.enumeration {
            return Err(Error::EnumerationTooLarge {
                requested: count,
                cap: self.limits.enumeration,
            });
        }
        Ok(Sphere {
            group: *self,
            n,
            next: 0,
            end: count as usize,
        })
    }
}

/// Iterator over a sphere of the Cayley graph. Cheap to re-create, and
/// [`Sphere::split`] hands out disjoint index ranges for workers.
#[derive(Debug, Clone)]
pub struct Sphere {
    group: FreeGroup,
    n: usize,
    next: usize,
    end: usize,
}

impl Sphere {
    pub fn split(&self, parts: usize) -> Vec<Sphere> {
        let parts = parts.max(1);
        let len = self.end - self.next;
        let chunk = len.div_ceil(parts);
        (0..parts)
            .map(|p| {
                let start = self.next + p * chunk;
                Sphere {
                    group: self.group,
                    n: self.n,
                    next: start.min(self.end),
                    end: (start + chunk).min(self.end),
                }
            })
            .filter(|s| s.next < s.end)
            .collect()
    }
}

impl Iterator for Sphere {
    type Item = GroupWord;

    fn next(&mut self) -> Option<GroupWord> {
        if self.next >= self.end {
            return None;
        }
        let idx = self.next;
        self.next += 1;
        if self.n == 0 {
            return Some(GroupWord::identity());
        }
        Some(self.group.cell_word(self.n, idx))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = self.end - self.next;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for Sphere {}

/// Parameters of a model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Rank of the free group.
    pub k: usize,
    /// Annulus width `R` of the spheres `S(t) = {tR <= |g| < (t+1)R}`.
    #[serde(default = "default_annulus_width")]
    pub annulus_width: usize,
    /// Default cylinder depth.
    #[serde(default = "default_depth")]
    pub depth_default: usize,
}

fn default_annulus_width() -> usize {
    2
}

fn default_depth() -> usize {
    4
}

impl ModelParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            annulus_width: default_annulus_width(),
            depth_default: default_depth(),
        }
    }

    pub fn validate(&self) -> Result<FreeGroup> {
        let group = FreeGroup::new(self.k)?;
        if self.annulus_width == 0 {
            return Err(Error::InvalidParams("annulus width R must be positive".into()));
        }
        if self.depth_default == 0 {
            return Err(Error::InvalidParams("default depth must be at least 1".into()));
        }
        Ok(group)
    }

    /// Looks for a counterexample to the defining property of `R`: for all
    /// `g, h` some `g'` within `R` of `g` has `|g'h| >= |g'| + |h| - 2R`.
    /// Returns the first failing pair among `samples` random draws.
    pub fn find_annulus_violation<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        samples: usize,
        max_len: usize,
    ) -> Result<Option<(GroupWord, GroupWord)>> {
        let group = self.validate()?;
        let radius = self.annulus_width;
        let ball: Vec<GroupWord> = (0..=radius)
            .flat_map(|n| group.sphere(n).expect("small ball"))
            .collect();
        for _ in 0..samples {
            let (lg, lh) = (rng.gen_range(0..=max_len), rng.gen_range(0..=max_len));
            let g = group.random_word(rng, lg);
            let h = group.random_word(rng, lh);
            let ok = ball.iter().any(|step| {
                let g2 = g.compose(step);
                let lhs = g2.compose(&h).len() as i64;
                lhs >= g2.len() as i64 + h.len() as i64 - 2 * radius as i64
            });
            if !ok {
                return Ok(Some((g, h)));
            }
        }
        Ok(None)
    }
}

/// An eventually periodic infinite reduced word `prefix . period^inf`.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    prefix: GroupWord,
    period: GroupWord,
}

impl BoundaryPoint {
    pub fn new(prefix: GroupWord, period: GroupWord) -> Result<Self> {
        let (Some(first), Some(last)) = (period.first(), period.last()) else {
            return Err(Error::InvalidBoundaryPoint("empty period".into()));
        };
        if last == first.inverse() {
            return Err(Error::InvalidBoundaryPoint(format!(
                "period {period} is not cyclically reduced"
            )));
        }
        if prefix.last() == Some(first.inverse()) {
            return Err(Error::InvalidBoundaryPoint(format!(
                "prefix {prefix} cancels against period {period}"
            )));
        }
        Ok(Self { prefix, period })
    }

    /// The ray `w . l^inf` with `l` the last letter of `w`; a point of `[w]`.
    pub fn through(word: &GroupWord) -> Result<Self> {
        let last = word
            .last()
            .ok_or_else(|| Error::InvalidBoundaryPoint("empty word has no ray".into()))?;
        Self::new(word.clone(), GroupWord::from_reduced_unchecked(vec![last]))
    }

    pub fn prefix_word(&self) -> &GroupWord {
        &self.prefix
    }

    pub fn period_word(&self) -> &GroupWord {
        &self.period
    }

    pub fn letter(&self, i: usize) -> Letter {
        let p = self.prefix.len();
        if i < p {
            self.prefix.letters()[i]
        } else {
            self.period.letters()[(i - p) % self.period.len()]
        }
    }

    /// The first `n` letters.
    pub fn truncate(&self, n: usize) -> GroupWord {
        GroupWord::from_reduced_unchecked((0..n).map(|i| self.letter(i)).collect())
    }

    pub fn common_prefix_with_word(&self, w: &GroupWord) -> usize {
        w.letters()
            .iter()
            .enumerate()
            .take_while(|(i, l)| self.letter(*i) == **l)
            .count()
    }

    /// Length of the common prefix, `None` when the rays coincide.
    pub fn common_prefix(&self, other: &BoundaryPoint) -> Option<usize> {
        let a = self.period.len();
        let b = other.period.len();
        let bound = self.prefix.len().max(other.prefix.len()) + lcm(a, b);
        (0..bound).find(|&i| self.letter(i) != other.letter(i))
    }

    /// The image `g . xi`.
    pub fn translate(&self, g: &GroupWord) -> BoundaryPoint {
        let reps = g.len() / self.period.len() + 2;
        let mut word = g.clone();
        let tail = self
            .prefix
            .letters()
            .iter()
            .chain(self.period.letters().iter().cycle().take(reps * self.period.len()));
        word = word.compose(&GroupWord::from_reduced_unchecked(tail.copied().collect()));
        BoundaryPoint {
            prefix: word,
            period: self.period.clone(),
        }
    }

    pub fn in_cylinder(&self, c: &Cylinder) -> bool {
        self.common_prefix_with_word(c.word()) == c.depth()
    }
}

impl PartialEq for BoundaryPoint {
    fn eq(&self, other: &Self) -> bool {
        self.common_prefix(other).is_none()
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.prefix.is_empty() {
            write!(f, "{}", self.prefix)?;
        }
        write!(f, "({})^inf", self.period)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// The boundary set `[w]` of rays extending the nonempty word `w`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cylinder {
    word: GroupWord,
}

impl Cylinder {
    pub fn new(word: GroupWord) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::InvalidArgument("cylinders need a nonempty word".into()));
        }
        Ok(Self { word })
    }

    pub fn word(&self) -> &GroupWord {
        &self.word
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    /// Whether `other` is a subset of `self`.
    pub fn contains(&self, other: &Cylinder) -> bool {
        other.word.starts_with(&self.word)
    }

    pub fn intersects(&self, other: &Cylinder) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// The `2k - 1` one-letter extensions.
    pub fn children(&self, group: &FreeGroup) -> Vec<Cylinder> {
        let last = self.word.last().expect("nonempty");
        group
            .letters()
            .filter(|l| *l != last.inverse())
            .map(|l| {
                let mut w = self.word.letters().to_vec();
                w.push(l);
                Cylinder {
                    word: GroupWord::from_reduced_unchecked(w),
                }
            })
            .collect()
    }

    /// All depth-1 cylinders, a partition of the boundary.
    pub fn roots(group: &FreeGroup) -> Vec<Cylinder> {
        group
            .letters()
            .map(|l| Cylinder {
                word: GroupWord::from_reduced_unchecked(vec![l]),
            })
            .collect()
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.word)
    }
}

/// A point of the compactification `X ∪ ∂X`.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Interior(GroupWord),
    Boundary(BoundaryPoint),
}

impl Point {
    pub fn translate(&self, g: &GroupWord) -> Point {
        match self {
            Point::Interior(x) => Point::Interior(g.compose(x)),
            Point::Boundary(xi) => Point::Boundary(xi.translate(g)),
        }
    }
}

impl From<GroupWord> for Point {
    fn from(w: GroupWord) -> Self {
        Point::Interior(w)
    }
}

impl From<BoundaryPoint> for Point {
    fn from(b: BoundaryPoint) -> Self {
        Point::Boundary(b)
    }
}

/// An exact half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Value of a Gromov product in `[0, +inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GromovProduct {
    Finite(HalfInt),
    Infinite,
}

impl GromovProduct {
    pub fn to_f64(self) -> f64 {
        match self {
            GromovProduct::Finite(h) => h.to_f64(),
            GromovProduct::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<HalfInt> {
        match self {
            GromovProduct::Finite(h) => Some(h),
            GromovProduct::Infinite => None,
        }
    }
}

pub fn compose(g: &GroupWord, h: &GroupWord) -> GroupWord {
    g.compose(h)
}

/// Word metric `d(x, y) = |x^-1 y|`.
pub fn distance(x: &GroupWord, y: &GroupWord) -> usize {
    let c = x.common_prefix_len(y);
    x.len() + y.len() - 2 * c
}

/// `<x, y>_base`, extended to boundary points.
pub fn gromov_product(x: &Point, y: &Point, base: &GroupWord) -> GromovProduct {
    let shift = base.inverse();
    let (x, y) = (x.translate(&shift), y.translate(&shift));
    match (&x, &y) {
        (Point::Interior(a), Point::Interior(b)) => {
            let twice = a.len() as i64 + b.len() as i64 - distance(a, b) as i64;
            GromovProduct::Finite(HalfInt(twice))
        }
        (Point::Interior(a), Point::Boundary(xi)) | (Point::Boundary(xi), Point::Interior(a)) => {
            GromovProduct::Finite(HalfInt::from_int(xi.common_prefix_with_word(a) as i64))
        }
        (Point::Boundary(xi), Point::Boundary(eta)) => match xi.common_prefix(eta) {
            Some(n) => GromovProduct::Finite(HalfInt::from_int(n as i64)),
            None => GromovProduct::Infinite,
        },
    }
}

/// Visual distance `d_base(xi, eta) = exp(-<xi, eta>_base)`.
pub fn visual_distance(xi: &BoundaryPoint, eta: &BoundaryPoint, base: &GroupWord) -> f64 {
    let gp = gromov_product(&Point::Boundary(xi.clone()), &Point::Boundary(eta.clone()), base);
    (-gp.to_f64()).exp()
}

/// Busemann cocycle `b_xi(x, y) = lim d(x, xi_t) - d(y, xi_t)`.
pub fn busemann(xi: &BoundaryPoint, x: &GroupWord, y: &GroupWord) -> i64 {
    let cx = xi.common_prefix_with_word(x) as i64;
    let cy = xi.common_prefix_with_word(y) as i64;
    x.len() as i64 - 2 * cx - y.len() as i64 + 2 * cy
}

/// Busemann function of a point of the compactification; for interior
/// `z` this is `d(x, z) - d(y, z)`.
pub fn busemann_point(z: &Point, x: &GroupWord, y: &GroupWord) -> i64 {
    match z {
        Point::Interior(z) => distance(x, z) as i64 - distance(y, z) as i64,
        Point::Boundary(xi) => busemann(xi, x, y),
    }
}

/// `b_xi(x, y)` for `xi` ranging over a cylinder, if it is constant there.
pub fn busemann_on_cylinder(c: &Cylinder, x: &GroupWord, y: &GroupWord) -> Result<i64> {
    if x == y {
        return Ok(0);
    }
    busemann_on_word(c.word(), x, y).ok_or(Error::CylinderTooCoarse {
        depth: c.depth(),
        required: x.len().max(y.len()),
    })
}

/// Busemann value on `[w]`, `None` when it is not constant there.
pub(crate) fn busemann_on_word(w: &GroupWord, x: &GroupWord, y: &GroupWord) -> Option<i64> {
    let cx = w.common_prefix_len(x);
    let cy = w.common_prefix_len(y);
    if (cx == w.len() && w.len() < x.len()) || (cy == w.len() && w.len() < y.len()) {
        return None;
    }
    Some(x.len() as i64 - 2 * cx as i64 - y.len() as i64 + 2 * cy as i64)
}

/// The shadow `O_o(g.o, rho) = {xi : <xi, g.o>_o >= |g| - rho}` as cylinders.
pub fn shadow(group: &FreeGroup, g: &GroupWord, rho: f64) -> Result<Vec<Cylinder>> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("shadow radius {rho} must be >= 0")));
    }
    let need = (g.len() as f64 - rho).ceil();
    if need <= 0.0 {
        return Ok(Cylinder::roots(group));
    }
    Ok(vec![Cylinder::new(g.prefix(need as usize))?])
}

/// Prefix length of the shadow cylinder, 0 meaning the whole boundary.
pub fn shadow_depth(len: usize, rho: f64) -> usize {
    let need = (len as f64 - rho).ceil();
    if need <= 0.0 {
        0
    } else {
        need as usize
    }
}

pub fn sphere_enumerate(group: &FreeGroup, n: usize) -> Result<Sphere> {
    group.sphere(n)
}

/// A geometric model on which the boundary machinery can be instantiated.
///
/// Only the tree model is implemented; the trait fixes the primitives the
/// other modules need from a new model.
pub trait ModelSpace {
    type Point;
    type Boundary;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;
    fn busemann(&self, xi: &Self::Boundary, x: &Self::Point, y: &Self::Point) -> f64;
    fn gromov_product(&self, x: &Self::Point, y: &Self::Point, base: &Self::Point) -> f64;
    fn critical_exponent(&self) -> f64;
}

impl ModelSpace for FreeGroup {
    type Point = GroupWord;
    type Boundary = BoundaryPoint;

    fn distance(&self, x: &GroupWord, y: &GroupWord) -> f64 {
        distance(x, y) as f64
    }

    fn busemann(&self, xi: &BoundaryPoint, x: &GroupWord, y: &GroupWord) -> f64 {
        busemann(xi, x, y) as f64
    }

    fn gromov_product(&self, x: &GroupWord, y: &GroupWord, base: &GroupWord) -> f64 {
        gromov_product(&x.clone().into(), &y.clone().into(), base).to_f64()
    }

    fn critical_exponent(&self) -> f64 {
        (self.branching() as f64).ln()
    }
}
