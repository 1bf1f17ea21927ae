//! Patterson-Sullivan theory on the tree.
//!
//! The `delta`-conformal density is known in closed form,
//! `mu_o[w] = (2k)^-1 q^(1 - |w|)`, and every derived quantity (masses seen
//! from other basepoints, Radon-Nikodym derivatives) is an exact rational
//! because `e^delta = q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypspace::{busemann, busemann_on_word, shadow_depth, BoundaryPoint, Cylinder, FreeGroup, GroupWord};
use crate::scalar::{rational_pow, Rational};

/// `delta = log(2k - 1)`.
pub fn critical_exponent(group: &FreeGroup) -> f64 {
    (group.branching() as f64).ln()
}

/// The Patterson-Sullivan density `x -> mu_x` of a free group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformalDensity {
    group: FreeGroup,
}

impl ConformalDensity {
    pub fn new(group: FreeGroup) -> Self {
        Self { group }
    }

    pub fn group(&self) -> &FreeGroup {
        &self.group
    }

    pub fn delta(&self) -> f64 {
        critical_exponent(&self.group)
    }

    /// `e^delta`, an integer on the tree.
    pub fn exp_delta(&self) -> i128 {
        self.group.branching() as i128
    }

    /// Mass of any single depth-`depth` cylinder under `mu_o`.
    pub fn cell_mass(&self, depth: usize) -> Rational {
        debug_assert!(depth >= 1);
        let q = self.exp_delta();
        Rational::new(1, 2 * self.group.rank() as i128) * rational_pow(q, 1 - depth as i64)
    }

    pub fn cell_mass_f64(&self, depth: usize) -> f64 {
        let q = self.group.branching() as f64;
        q.powi(1 - depth as i32) / (2 * self.group.rank()) as f64
    }

    /// `mu_o([w])`.
    pub fn mass(&self, c: &Cylinder) -> Rational {
        self.cell_mass(c.depth())
    }

    /// `e^(-delta b_xi(x, y))` at a boundary point.
    pub fn rn_derivative(&self, xi: &BoundaryPoint, x: &GroupWord, y: &GroupWord) -> Rational {
        rational_pow(self.exp_delta(), -busemann(xi, x, y))
    }

    /// `d mu_x / d mu_y` on a cylinder where it is constant.
    pub fn rn_derivative_on(&self, c: &Cylinder, x: &GroupWord, y: &GroupWord) -> Result<Rational> {
        if x == y {
            return Ok(Rational::from_integer(1));
        }
        let b = busemann_on_word(c.word(), x, y).ok_or(Error::CylinderTooCoarse {
            depth: c.depth(),
            required: x.len().max(y.len()),
        })?;
        Ok(rational_pow(self.exp_delta(), -b))
    }

    /// `mu_x([w])`, splitting `[w]` where the derivative is not yet constant.
    pub fn mass_at(&self, x: &GroupWord, c: &Cylinder) -> Rational {
        let origin = GroupWord::identity();
        match busemann_on_word(c.word(), x, &origin) {
            Some(b) => rational_pow(self.exp_delta(), -b) * self.mass(c),
            None => c
                .children(&self.group)
                .iter()
                .map(|child| self.mass_at(x, child))
                .sum(),
        }
    }

    /// `e^(delta rho) mu_o(B(xi, e^-rho))` for integer `rho >= 1`; constant
    /// on the tree, which is Ahlfors regularity with exact constants.
    pub fn ahlfors_ratio(&self, xi: &BoundaryPoint, rho: usize) -> Rational {
        let ball = Cylinder::new(xi.truncate(rho.max(1))).expect("nonempty");
        rational_pow(self.exp_delta(), rho as i64) * self.mass(&ball)
    }
}

/// The orbit measure `mu_{o,t}` restricted to the ball of radius `radius`.
///
/// Atoms on a sphere share one weight, so the measure is stored radially.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOrbitMeasure {
    group: FreeGroup,
    t: f64,
    radius: usize,
    /// Weight of a single atom at each length, normalized within the ball.
    atom_weights: Vec<f64>,
    normalizer: f64,
}

pub fn orbit_measure(group: &FreeGroup, t: f64, radius: usize) -> Result<TruncatedOrbitMeasure> {
    let delta = critical_exponent(group);
    if !(t > delta) {
        return Err(Error::DivergentExponent { t, delta });
    }
    let atoms = group.ball_size(radius);
    if atoms > group.limits().enumeration {
        return Err(Error::EnumerationTooLarge {
            requested: atoms,
            cap: group.limits().enumeration,
        });
    }
    let raw: Vec<f64> = (0..=radius).map(|n| (-t * n as f64).exp()).collect();
    let normalizer: f64 = raw
        .iter()
        .enumerate()
        .map(|(n, w)| group.sphere_size(n) as f64 * w)
        .sum();
    Ok(TruncatedOrbitMeasure {
        group: *group,
        t,
        radius,
        atom_weights: raw.iter().map(|w| w / normalizer).collect(),
        normalizer,
    })
}

impl TruncatedOrbitMeasure {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// The truncated Poincare sum `W(t)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn atom_weight(&self, g: &GroupWord) -> f64 {
        self.atom_weights.get(g.len()).copied().unwrap_or(0.0)
    }

    /// Mass carried by the sphere of radius `n`.
    pub fn sphere_mass(&self, n: usize) -> f64 {
        self.atom_weights
            .get(n)
            .map_or(0.0, |w| w * self.group.sphere_size(n) as f64)
    }

    pub fn total_mass(&self) -> f64 {
        (0..=self.radius).map(|n| self.sphere_mass(n)).sum()
    }

    /// Mass of the atoms of length greater than `m`, summed directly.
    pub fn mass_beyond(&self, m: usize) -> f64 {
        (m + 1..=self.radius).map(|n| self.sphere_mass(n)).sum()
    }

    /// Bound on the mass beyond radius `m`: the full Poincare tail
    /// `sum_{n > m} |S(n)| e^{-tn}` in closed form, which decays like
    /// `e^{-(t - delta) m}`. At `m = radius` it is the truncation error.
    pub fn tail_bound(&self, m: usize) -> f64 {
        let q = self.group.branching() as f64;
        let r = (critical_exponent(&self.group) - self.t).exp();
        let growth = 2.0 * self.group.rank() as f64 / q;
        growth * r.powi(m as i32 + 1) / (1.0 - r) / self.normalizer
    }

    /// `mu_{o,t}(U(o, x, rho))` with `U` the set of `z` in the closed ball
    /// with `<z, x>_o >= |x| - rho`.
    pub fn shadow_mass(&self, x: &GroupWord, rho: f64) -> f64 {
        let m = shadow_depth(x.len(), rho);
        if m == 0 {
            return self.total_mass();
        }
        let q = self.group.branching() as f64;
        (m..=self.radius)
            .map(|n| q.powi((n - m) as i32) * self.atom_weights[n])
            .sum()
    }
}

/// Spread of the shadow-lemma ratio `mu(U) e^{delta d} e^{-delta rho}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowBand {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl ShadowBand {
    /// `max / min`; the smallest `C^2` with all ratios in `[C^-1, C]`
    /// after rescaling.
    pub fn width(&self) -> f64 {
        self.max / self.min
    }
}

pub fn shadow_lemma_check(
    measure: &TruncatedOrbitMeasure,
    rhos: &[f64],
    words: &[GroupWord],
) -> Result<ShadowBand> {
    let delta = critical_exponent(&measure.group);
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    let mut samples = 0;
    for x in words {
        if x.len() > measure.radius {
            return Err(Error::InvalidArgument(format!(
                "word {x} lies outside the truncation radius {}",
                measure.radius
            )));
        }
        for &rho in rhos {
            let ratio = measure.shadow_mass(x, rho) * (delta * (x.len() as f64 - rho)).exp();
            min = min.min(ratio);
            max = max.max(ratio);
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    Ok(ShadowBand { min, max, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn f(k: usize) -> FreeGroup {
        FreeGroup::new(k).unwrap()
    }

    fn cyl(g: &FreeGroup, s: &str) -> Cylinder {
        Cylinder::new(g.parse(s).unwrap()).unwrap()
    }

    #[test]
    fn critical_exponent_matches_sphere_growth() {
        for k in [2, 3, 4] {
            let g = f(k);
            let n = 40;
            let slope = (g.sphere_size(n + 1) as f64).ln() - (g.sphere_size(n) as f64).ln();
            assert!((critical_exponent(&g) - slope).abs() < 1e-12);
            assert!((critical_exponent(&g).exp() - (2 * k - 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_examples() {
        let g2 = f(2);
        let mu = ConformalDensity::new(g2);
        assert_eq!(mu.mass(&cyl(&g2, "a")), Rational::new(1, 4));
        assert_eq!(mu.mass(&cyl(&g2, "ab")), Rational::new(1, 12));
        let g3 = f(3);
        assert_eq!(ConformalDensity::new(g3).mass(&cyl(&g3, "ab")), Rational::new(1, 30));
    }

    #[test]
    fn rn_examples() {
        let g = f(2);
        let mu = ConformalDensity::new(g);
        let a = g.parse("a").unwrap();
        let e = GroupWord::identity();
        assert_eq!(mu.rn_derivative_on(&cyl(&g, "a"), &a, &e).unwrap(), Rational::from_integer(3));
        assert_eq!(mu.rn_derivative_on(&cyl(&g, "b"), &a, &e).unwrap(), Rational::new(1, 3));
        assert_eq!(mu.rn_derivative_on(&cyl(&g, "b"), &a, &a).unwrap(), Rational::one());
        let ab = g.parse("ab").unwrap();
        assert!(matches!(
            mu.rn_derivative_on(&cyl(&g, "a"), &ab, &e),
            Err(Error::CylinderTooCoarse { .. })
        ));
        let xi = BoundaryPoint::through(&a).unwrap();
        assert_eq!(mu.rn_derivative(&xi, &a, &e), Rational::from_integer(3));
    }

    #[test]
    fn masses_seen_from_a() {
        let g = f(2);
        let mu = ConformalDensity::new(g);
        let a = g.parse("a").unwrap();
        assert_eq!(mu.mass_at(&a, &cyl(&g, "a")), Rational::new(3, 4));
        assert_eq!(mu.mass_at(&a, &cyl(&g, "b")), Rational::new(1, 12));
        let total: Rational = Cylinder::roots(&g).iter().map(|c| mu.mass_at(&a, c)).sum();
        assert_eq!(total, Rational::one());
        let e = GroupWord::identity();
        assert_eq!(mu.mass_at(&e, &cyl(&g, "aB")), mu.mass(&cyl(&g, "aB")));
    }

    #[test]
    fn mass_at_needs_refinement_below_the_basepoint() {
        let g = f(2);
        let mu = ConformalDensity::new(g);
        let x = g.parse("abb").unwrap();
        let total: Rational = Cylinder::roots(&g).iter().map(|c| mu.mass_at(&x, c)).sum();
        assert_eq!(total, Rational::one());
        // [ab] sees x from below: the derivative is 9 on [abb] and varies on the rest.
        let direct: Rational = cyl(&g, "ab")
            .children(&g)
            .iter()
            .flat_map(|c| c.children(&g))
            .map(|c| mu.mass_at(&x, &c))
            .sum();
        assert_eq!(mu.mass_at(&x, &cyl(&g, "ab")), direct);
    }

    #[test]
    fn ahlfors_ratio_is_constant() {
        let g = f(3);
        let mu = ConformalDensity::new(g);
        let xi = BoundaryPoint::new(g.parse("ab").unwrap(), g.parse("cA").unwrap()).unwrap();
        for rho in 1..10 {
            assert_eq!(mu.ahlfors_ratio(&xi, rho), Rational::new(5, 6));
        }
    }

    #[test]
    fn orbit_measure_basics() {
        let g = f(2);
        let delta = critical_exponent(&g);
        assert!(matches!(orbit_measure(&g, delta, 5), Err(Error::DivergentExponent { .. })));
        assert!(matches!(orbit_measure(&g, 0.5, 5), Err(Error::DivergentExponent { .. })));
        let m = orbit_measure(&g, 1.2, 12).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        let a = g.parse("ab").unwrap();
        let b = g.parse("abA").unwrap();
        assert!((m.atom_weight(&b) / m.atom_weight(&a) - (-1.2f64).exp()).abs() < 1e-12);
        assert!(m.mass_beyond(8) <= m.tail_bound(8));
        assert!(m.tail_bound(12) < m.tail_bound(8));
        let hot = orbit_measure(&g, 60.0, 4).unwrap();
        assert!(hot.atom_weight(&GroupWord::identity()) >= 1.0 - 1e-15);
        assert!(m.shadow_mass(&a, 5.0) == m.total_mass());
    }

    #[test]
    fn shadow_band_near_the_critical_exponent() {
        let g = f(2);
        let m = orbit_measure(&g, critical_exponent(&g) + 0.05, 12).unwrap();
        let mut words = Vec::new();
        for len in 1..=8 {
            words.push(g.parse(&"ab".repeat(len)[..len]).unwrap());
        }
        for rho in 1..=5 {
            let eligible: Vec<_> = words.iter().filter(|x| x.len() >= rho).cloned().collect();
            let band = shadow_lemma_check(&m, &[rho as f64], &eligible).unwrap();
            assert!(band.width() <= 10.0, "rho {rho}: {band:?}");
        }
        // rho >= |x| makes U the whole ball and the ratio at most 1.
        let band = shadow_lemma_check(&m, &[3.0], &words[..3]).unwrap();
        assert!(band.max <= 1.0 + 1e-12);
    }

    #[test]
    fn orbit_measure_respects_enumeration_cap() {
        let g = f(2);
        assert!(matches!(orbit_measure(&g, 1.2, 30), Err(Error::EnumerationTooLarge { .. })));
    }
}
