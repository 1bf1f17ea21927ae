//! The cocycle `c(x, y) = mu_x - mu_y` of the special representation.
//!
//! Densities are taken relative to `mu_o`, so `c(g.o, o)` is the cylinder
//! function `q^{-b_xi(g.o, o)} - 1`. The quadratic form `Q'_1` of a cocycle
//! value splits as `d(x, y) + r(x, y)` where `r` only involves the
//! potential `F_x(z) = int <xi, z>_x dmu_x(xi)`, which has a closed form on
//! the tree.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary_ops::{fast_apply_exact, log_form, log_form_exact, CylinderFunction, Kernel};
use crate::error::{Error, Result};
use crate::hypspace::{busemann_on_word, distance, BoundaryPoint, FreeGroup, GroupWord, Point};
use crate::scalar::{rational_pow, rational_to_f64, Rational};

/// The density of `mu_x - mu_y` with respect to `mu_o` at a fixed depth.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleValue {
    pub x: GroupWord,
    pub y: GroupWord,
    pub density: CylinderFunction<Rational>,
}

/// `c(x, y)` at `depth >= max(|x|, |y|)`.
pub fn cocycle(group: &FreeGroup, x: &GroupWord, y: &GroupWord, depth: usize) -> Result<CocycleValue> {
    group.validate_word(x)?;
    group.validate_word(y)?;
    let need = x.len().max(y.len()).max(1);
    if depth < need {
        return Err(Error::CylinderTooCoarse { depth, required: need });
    }
    let q = group.branching() as i128;
    let origin = GroupWord::identity();
    let density = CylinderFunction::from_fn(*group, depth, |cell| {
        let w = GroupWord::from_letters(cell.to_vec()).expect("cells are reduced");
        let bx = busemann_on_word(&w, x, &origin).expect("depth covers x");
        let by = busemann_on_word(&w, y, &origin).expect("depth covers y");
        rational_pow(q, -bx) - rational_pow(q, -by)
    })?;
    Ok(CocycleValue {
        x: x.clone(),
        y: y.clone(),
        density,
    })
}

/// `c(g) = c(g.o, o)`, the density `e^{-delta b(g.o, o)} - 1`.
pub fn cocycle_density(group: &FreeGroup, g: &GroupWord, depth: usize) -> Result<CylinderFunction<Rational>> {
    Ok(cocycle(group, g, &GroupWord::identity(), depth)?.density)
}

/// `sup_z F_x(z) = q / (2k (q - 1))`, attained on the boundary.
pub fn potential_sup(group: &FreeGroup) -> Rational {
    let q = group.branching() as i128;
    Rational::new(q, 2 * group.rank() as i128 * (q - 1))
}

/// `F_o` at a point of length `len`: `sum_{m=1}^{len} mu_o(<xi, z>_o >= m)`.
pub fn potential_at_length(group: &FreeGroup, len: usize) -> Rational {
    let q = group.branching() as i128;
    let base = Rational::new(1, 2 * group.rank() as i128);
    // Geometric sum with ratio 1/q: base * (1 - q^-len) * q / (q - 1).
    let tail = Rational::one() - rational_pow(q, -(len as i64));
    base * tail * Rational::new(q, q - 1)
}

/// Floating-point [`potential_at_length`], usable at any length.
pub fn potential_at_length_f64(group: &FreeGroup, len: usize) -> f64 {
    let q = group.branching() as f64;
    let tail = -(-(len as f64) * q.ln()).exp_m1();
    tail * q / (2.0 * group.rank() as f64 * (q - 1.0))
}

/// `F_x(z) = int <xi, z>_x dmu_x(xi) = F_o(x^-1 z)`.
pub fn f_value(x: &GroupWord, z: &Point, group: &FreeGroup) -> Rational {
    match z.translate(&x.inverse()) {
        Point::Interior(w) => potential_at_length(group, w.len()),
        Point::Boundary(_) => potential_sup(group),
    }
}

/// `dF(x, y)[z] = F_x(z) - F_y(z)`.
pub fn df_value(x: &GroupWord, y: &GroupWord, z: &Point, group: &FreeGroup) -> Rational {
    f_value(x, z, group) - f_value(y, z, group)
}

/// `r(x, y) = Q'_1(c(x, y)) - d(x, y) = -F_x(y) - F_y(x)`.
pub fn kv_remainder(group: &FreeGroup, x: &GroupWord, y: &GroupWord) -> Rational {
    let d = distance(x, y);
    -Rational::from_integer(2) * potential_at_length(group, d)
}

/// `Q'_1(c(x, y))` through `d + r`, exact while `q^d` fits in `i128`.
pub fn energy_closed_form(group: &FreeGroup, x: &GroupWord, y: &GroupWord) -> Rational {
    Rational::from_integer(distance(x, y) as i128) + kv_remainder(group, x, y)
}

/// Floating-point [`energy_closed_form`] for long words, where the exact
/// remainder no longer fits in `i128`.
pub fn energy_closed_form_f64(group: &FreeGroup, x: &GroupWord, y: &GroupWord) -> f64 {
    let d = distance(x, y);
    d as f64 - 2.0 * potential_at_length_f64(group, d)
}

/// `Q'_1(c(x, y))` from the Galerkin form at `depth`.
pub fn energy_galerkin(group: &FreeGroup, x: &GroupWord, y: &GroupWord, depth: usize) -> Result<Rational> {
    let c = cocycle(group, x, y, depth)?.density;
    log_form_exact(&c, &c)
}

/// Same as [`energy_galerkin`] in floating point, for long words.
pub fn energy_galerkin_f64(group: &FreeGroup, x: &GroupWord, y: &GroupWord, depth: usize) -> Result<f64> {
    let c = cocycle(group, x, y, depth)?.density.to_f64();
    log_form(&c, &c)
}

/// Least-squares fit of the fundamental identity for one candidate `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaFit {
    pub theta: f64,
    /// `min_kappa || I'[c(x,y)] - theta b(y,x) - dF(x,y) - kappa ||_Q`.
    pub residual: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalFit {
    pub theta_best: f64,
    pub residual: f64,
    pub fits: Vec<ThetaFit>,
}

pub const THETA_CANDIDATES: [Rational; 2] = [Rational::new_raw(1, 1), Rational::new_raw(1, 2)];

/// Fits `I'[c(x, y)] = theta b_xi(y, x) + dF(x, y)|_boundary + kappa` over
/// depth-`depth` cylinders for each candidate `theta`.
pub fn fundamental_identity_residual(
    group: &FreeGroup,
    x: &GroupWord,
    y: &GroupWord,
    depth: usize,
) -> Result<FundamentalFit> {
    let c = cocycle(group, x, y, depth)?.density;
    let lhs = fast_apply_exact(Kernel::LogGromov, &c)?;
    let busemann_field = CylinderFunction::from_fn(*group, depth, |cell| {
        let w = GroupWord::from_letters(cell.to_vec()).expect("reduced");
        Rational::from_integer(busemann_on_word(&w, y, x).expect("depth covers x and y") as i128)
    })?;
    let df_field = CylinderFunction::from_fn(*group, depth, |cell| {
        let w = GroupWord::from_letters(cell.to_vec()).expect("reduced");
        let ray = BoundaryPoint::through(&w).expect("nonempty cell");
        df_value(x, y, &Point::Boundary(ray), group)
    })?;
    let base = lhs.sub(&df_field)?;
    let mut fits = Vec::new();
    for theta in THETA_CANDIDATES {
        let diff = base.sub(&busemann_field.scale(&theta))?;
        let kappa = diff.integral();
        let sq = diff.pair_q(&diff)? - kappa * kappa;
        fits.push(ThetaFit {
            theta: rational_to_f64(&theta),
            residual: rational_to_f64(&sq).max(0.0).sqrt(),
            kappa: rational_to_f64(&kappa),
        });
    }
    let best = *fits
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("two candidates");
    Ok(FundamentalFit {
        theta_best: best.theta,
        residual: best.residual,
        fits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KvRow {
    pub len: usize,
    pub q1prime: f64,
    pub dist: usize,
    pub r: f64,
    /// Whether `q1prime` came from the Galerkin form (otherwise `d + r`).
    pub galerkin: bool,
}

/// `(|g|, Q'_1(c(g)), d(o, g.o), r)` along a ray. Words up to
/// `galerkin_max_len` use the Galerkin form at depth `|g|`, longer ones the
/// closed form.
pub fn kuhn_vershik_profile(group: &FreeGroup, ray: &[GroupWord], galerkin_max_len: usize) -> Result<Vec<KvRow>> {
    let origin = GroupWord::identity();
    ray.iter()
        .map(|g| {
            let dist = g.len();
            let (q1, galerkin) = if dist == 0 {
                (0.0, true)
            } else if dist <= galerkin_max_len {
                (energy_galerkin_f64(group, g, &origin, dist)?, true)
            } else {
                (energy_closed_form_f64(group, g, &origin), false)
            };
            Ok(KvRow {
                len: dist,
                q1prime: q1,
                dist,
                r: q1 - dist as f64,
                galerkin,
            })
        })
        .collect()
}

/// `2 int F_o dmu_o` by the geometric series `2 sum_m (2k)^-1 q^{1-m}`.
pub fn twice_mean_potential(group: &FreeGroup) -> Rational {
    Rational::from_integer(2) * potential_sup(group)
}

/// A finitely supported step distribution together with sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkSpec {
    pub steps: Vec<(GroupWord, f64)>,
    pub seed: u64,
    pub horizon: usize,
    pub samples: usize,
}

impl RandomWalkSpec {
    /// Uniform measure on the `2k` generators and their inverses.
    pub fn uniform_generators(group: &FreeGroup, seed: u64, horizon: usize, samples: usize) -> Self {
        let p = 1.0 / group.alphabet_size() as f64;
        let steps = group
            .letters()
            .map(|l| (GroupWord::from_letters(vec![l]).expect("single letter"), p))
            .collect();
        Self {
            steps,
            seed,
            horizon,
            samples,
        }
    }

    pub fn validate(&self, group: &FreeGroup) -> Result<()> {
        if self.horizon == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("horizon and samples must be positive".into()));
        }
        let mut total = 0.0;
        for (g, p) in &self.steps {
            group.validate_word(g)?;
            if !(*p > 0.0) || !p.is_finite() {
                return Err(Error::InadmissibleStep(format!("weight {p} on {g}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InadmissibleStep(format!("weights sum to {total}")));
        }
        let weight = |g: &GroupWord| -> f64 { self.steps.iter().filter(|(h, _)| h == g).map(|(_, p)| p).sum() };
        for (g, _) in &self.steps {
            if (weight(g) - weight(&g.inverse())).abs() > 1e-12 {
                return Err(Error::InadmissibleStep(format!("admissible requires symmetric: beta({g}) != beta({g}^-1)")));
            }
        }
        let support: Vec<&GroupWord> = self.steps.iter().map(|(g, _)| g).filter(|g| !g.is_identity()).collect();
        if support.is_empty() {
            return Err(Error::InadmissibleStep("support is trivial".into()));
        }
        let noncommuting = support
            .iter()
            .any(|g| support.iter().any(|h| g.compose(h) != h.compose(g)));
        if !noncommuting {
            return Err(Error::InadmissibleStep("support generates an elementary subgroup".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimate {
    /// `E[d(o, X_n.o)] / n`.
    pub ell_distance: f64,
    /// `E[Q'_1(c(X_n))] / n`.
    pub ell_energy: f64,
    pub ratio: f64,
    pub se_distance: f64,
    pub se_energy: f64,
}

/// Monte Carlo estimate of the drift and the energy growth of the cocycle.
///
/// Sample `i` draws from its own ChaCha stream `i` under `seed`, so the
/// result does not depend on the number of worker threads.
pub fn drift_mc(group: &FreeGroup, spec: &RandomWalkSpec) -> Result<DriftEstimate> {
    spec.validate(group)?;
    let mut cumulative = Vec::with_capacity(spec.steps.len());
    let mut acc = 0.0;
    for (_, p) in &spec.steps {
        acc += p;
        cumulative.push(acc);
    }
    let origin = GroupWord::identity();
    let per_sample: Vec<(f64, f64)> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let mut x = GroupWord::identity();
            for _ in 0..spec.horizon {
                let u: f64 = rng.gen::<f64>() * acc;
                let k = cumulative.partition_point(|c| *c <= u).min(spec.steps.len() - 1);
                x = x.compose(&spec.steps[k].0);
            }
            let d = x.len() as f64;
            let e = energy_closed_form_f64(group, &x, &origin);
            (d, e)
        })
        .collect();
    let n = spec.horizon as f64;
    let m = spec.samples as f64;
    let stats = |sel: fn(&(f64, f64)) -> f64| -> (f64, f64) {
        let mean = per_sample.iter().map(sel).sum::<f64>() / m;
        let var = if spec.samples > 1 {
            per_sample.iter().map(|s| (sel(s) - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        (mean / n, (var / m).sqrt() / n)
    };
    let (ell_distance, se_distance) = stats(|s| s.0);
    let (ell_energy, se_energy) = stats(|s| s.1);
    Ok(DriftEstimate {
        ell_distance,
        ell_energy,
        ratio: ell_energy / ell_distance,
        se_distance,
        se_energy,
    })
}

/// Total variation `int |c(g)| dmu_o` of a cocycle value.
pub fn total_variation(c: &CylinderFunction<Rational>) -> Rational {
    let mass = c.cell_mass();
    c.values()
        .iter()
        .map(|v| if *v < Rational::zero() { -*v } else { *v })
        .sum::<Rational>()
        * mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_ops::pi_one_exact;

    fn f2() -> FreeGroup {
        FreeGroup::new(2).unwrap()
    }

    fn w(s: &str) -> GroupWord {
        f2().parse(s).unwrap()
    }

    #[test]
    fn cocycle_examples() {
        let g = f2();
        let zero = cocycle_density(&g, &GroupWord::identity(), 2).unwrap();
        assert!(zero.values().iter().all(|v| v.is_zero()));
        let c = cocycle_density(&g, &w("a"), 1).unwrap();
        assert_eq!(c.values()[0], Rational::from_integer(2));
        assert!(c.values()[1..].iter().all(|v| *v == Rational::new(-2, 3)));
        assert!(c.integral().is_zero());
        assert!(matches!(cocycle_density(&g, &w("ab"), 1), Err(Error::CylinderTooCoarse { .. })));
    }

    #[test]
    fn cocycle_identity_at_depth_two() {
        let g = f2();
        let (a, b) = (w("a"), w("b"));
        let lhs = cocycle_density(&g, &a.compose(&b), 2).unwrap();
        let rhs = pi_one_exact(&a, &cocycle_density(&g, &b, 1).unwrap())
            .unwrap()
            .add(&cocycle_density(&g, &a, 1).unwrap())
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn potential_examples() {
        let g = f2();
        let e = GroupWord::identity();
        assert!(f_value(&e, &Point::Interior(e.clone()), &g).is_zero());
        assert_eq!(f_value(&e, &Point::Interior(w("a")), &g), Rational::new(1, 4));
        let eta = BoundaryPoint::new(w("ab"), w("a")).unwrap();
        assert_eq!(f_value(&e, &Point::Boundary(eta.clone()), &g), Rational::new(3, 8));
        assert_eq!(f_value(&w("a"), &Point::Boundary(eta.clone()), &g), Rational::new(3, 8));
        // The boundary values do not depend on the basepoint, so dF vanishes there.
        assert!(df_value(&e, &w("a"), &Point::Boundary(eta), &g).is_zero());
        let z = Point::Interior(w("abb"));
        assert!((df_value(&e, &w("a"), &z, &g) + df_value(&w("a"), &e, &z, &g)).is_zero());
        assert!(df_value(&w("ab"), &w("ab"), &z, &g).is_zero());
    }

    #[test]
    fn energy_of_a_generator() {
        let g = f2();
        let e = GroupWord::identity();
        assert_eq!(energy_galerkin(&g, &w("a"), &e, 1).unwrap(), Rational::new(1, 2));
        assert_eq!(kv_remainder(&g, &w("a"), &e), Rational::new(-1, 2));
        for word in ["ab", "abA", "aaB", "bAbb"] {
            let x = w(word);
            assert_eq!(energy_galerkin(&g, &x, &e, x.len()).unwrap(), energy_closed_form(&g, &x, &e));
        }
        for n in [1, 7, 30, 70] {
            let x = w("a").power(n);
            let exact = rational_to_f64(&energy_closed_form(&g, &x, &e));
            assert!((energy_closed_form_f64(&g, &x, &e) - exact).abs() < 1e-12);
        }
        let long = w("ab").power(300);
        assert!((energy_closed_form_f64(&g, &long, &e) - (600.0 - 0.75)).abs() < 1e-12);
    }

    #[test]
    fn fundamental_identity_picks_one_half() {
        let g = f2();
        let fit = fundamental_identity_residual(&g, &GroupWord::identity(), &w("a"), 4).unwrap();
        assert_eq!(fit.theta_best, 0.5);
        assert!(fit.residual < 1e-12, "{fit:?}");
        let same = fundamental_identity_residual(&g, &w("ab"), &w("ab"), 3).unwrap();
        assert!(same.fits.iter().all(|f| f.residual == 0.0));
    }

    #[test]
    fn walk_validation() {
        let g = f2();
        let mut spec = RandomWalkSpec::uniform_generators(&g, 1, 10, 10);
        assert!(spec.validate(&g).is_ok());
        spec.steps = vec![(GroupWord::identity(), 1.0)];
        assert!(matches!(spec.validate(&g), Err(Error::InadmissibleStep(_))));
        spec.steps = vec![(w("a"), 0.5), (w("b"), 0.5)];
        assert!(matches!(spec.validate(&g), Err(Error::InadmissibleStep(m)) if m.contains("symmetric")));
        spec.steps = vec![(w("a"), 0.5), (w("A"), 0.5)];
        assert!(matches!(spec.validate(&g), Err(Error::InadmissibleStep(m)) if m.contains("elementary")));
    }

    #[test]
    fn drift_is_independent_of_thread_count() {
        let g = f2();
        let spec = RandomWalkSpec::uniform_generators(&g, 42, 50, 64);
        let a = drift_mc(&g, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| drift_mc(&g, &spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn total_variation_is_bounded_by_two() {
        let g = f2();
        for x in ["a", "ab", "abAb", "bbbbbb"] {
            let c = cocycle_density(&g, &w(x), w(x).len()).unwrap();
            assert!(total_variation(&c) <= Rational::from_integer(2));
        }
    }
}
