//! One function per subcommand. Each writes `<stem>.csv`, returns the
//! record that goes into `<stem>.json`, and never looks at the clock.

use std::path::Path;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use specrep::boundary_ops::{galerkin, negative_type_check_points, structured_zero_mean_spectrum, zero_mean_spectrum};
use specrep::equidist::{
    affine_average, annulus_size, cone_count, nu_measure, roblin_average, verify_cover, vitali_cover, AffineTerm,
    CylinderPairFunction, TestFunction,
};
use specrep::special_rep::{
    drift_mc, fundamental_identity_residual, kuhn_vershik_profile, twice_mean_potential, RandomWalkSpec,
};
use specrep::{critical_exponent, Cylinder, CylinderFunction, FreeGroup, GroupWord, Kernel, Rational};

use crate::config::Config;
use crate::output::{num, write_csv, ExperimentRecord};

pub const EXPERIMENTS: [(&str, &str); 8] = [
    ("spectrum", "spectrum"),
    ("kuhn-vershik", "kv"),
    ("fundamental-identity", "fundamental_identity"),
    ("drift", "drift"),
    ("equidist", "equidist"),
    ("affine-average", "affine_average"),
    ("negtype", "negtype"),
    ("counting", "counting"),
];

pub fn stem_of(name: &str) -> &'static str {
    EXPERIMENTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .expect("known experiment")
}

pub struct Context<'a> {
    pub config: &'a Config,
    pub group: FreeGroup,
    pub hash: String,
    pub out: &'a Path,
}

impl Context<'_> {
    fn record(&self, name: &str, params: impl serde::Serialize) -> ExperimentRecord {
        ExperimentRecord::new(name, stem_of(name), &self.hash, params)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_csv(self.out, stem_of(name), &self.hash, header, rows)?;
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }
}

pub fn run(name: &str, ctx: &Context) -> Result<ExperimentRecord> {
    match name {
        "spectrum" => spectrum(ctx),
        "kuhn-vershik" => kuhn_vershik(ctx),
        "fundamental-identity" => fundamental_identity(ctx),
        "drift" => drift(ctx),
        "equidist" => equidist(ctx),
        "affine-average" => affine(ctx),
        "negtype" => negtype(ctx),
        "counting" => counting(ctx),
        other => bail!("unknown experiment {other}"),
    }
}

fn indicator(group: &FreeGroup, word: &str) -> Result<CylinderFunction<f64>> {
    let c = Cylinder::new(group.parse(word)?)?;
    Ok(CylinderFunction::<Rational>::indicator(*group, &c)?.to_f64())
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn last_three(xs: &[f64]) -> &[f64] {
    &xs[xs.len().saturating_sub(3)..]
}

fn spectrum(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.spectrum;
    let group = ctx.group;
    let mut kernels: Vec<Kernel> = cfg.s_values.iter().map(|&s| Kernel::KnappStein(s)).collect();
    if cfg.log_kernel {
        kernels.push(Kernel::LogGromov);
    }
    let mut rec = ctx.record("spectrum", cfg);
    let mut rows = Vec::new();
    let mut min_eigen = f64::INFINITY;
    let mut dense_dev = 0.0f64;
    let mut dense_checked = 0;
    for &depth in &cfg.depths {
        group.checked_cells(depth)?;
        for &kernel in &kernels {
            let mut eigen: Vec<f64> = Vec::new();
            for space in structured_zero_mean_spectrum(&group, kernel, depth)? {
                eigen.extend(std::iter::repeat_n(space.eigenvalue, space.multiplicity as usize));
            }
            eigen.sort_by(f64::total_cmp);
            if group.cell_count(depth) <= group.limits().dense_cells {
                let dense = zero_mean_spectrum(&galerkin(&group, kernel, depth)?);
                let scale = eigen.iter().map(|v| v.abs()).fold(1.0, f64::max);
                let mut dev = dense.iter().zip(&eigen).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
                if dense.len() != eigen.len() {
                    dev = f64::INFINITY;
                }
                dense_dev = dense_dev.max(dev);
                dense_checked += 1;
            }
            let s = match kernel {
                Kernel::KnappStein(s) => num(s),
                Kernel::LogGromov => "log".to_string(),
            };
            min_eigen = min_eigen.min(eigen[0]);
            for (i, ev) in eigen.iter().enumerate() {
                rows.push(vec![depth.to_string(), s.clone(), i.to_string(), num(*ev)]);
            }
        }
    }
    ctx.csv("spectrum", &["depth", "s", "index", "eigenvalue"], &rows)?;
    rec.metric("min_eigenvalue", min_eigen);
    rec.metric("dense_relative_deviation", dense_dev);
    rec.metric("dense_cross_checks", dense_checked);
    rec.check("positive", min_eigen >= -1e-10);
    rec.check("dense_agrees", dense_dev <= 1e-9);
    Ok(rec)
}

fn kuhn_vershik(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.kuhn_vershik;
    let group = ctx.group;
    let period = group.parse(&cfg.ray)?;
    let long = period.power(cfg.max_len.div_ceil(period.len()));
    if long.len() < cfg.max_len {
        bail!("ray {} is not cyclically reduced", cfg.ray);
    }
    let ray: Vec<GroupWord> = (1..=cfg.max_len).map(|n| long.prefix(n)).collect();
    let profile = kuhn_vershik_profile(&group, &ray, cfg.galerkin_max_len)?;
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|r| vec![r.len.to_string(), num(r.q1prime), r.dist.to_string(), num(r.r)])
        .collect();
    ctx.csv("kuhn-vershik", &["len", "q1prime", "dist", "r"], &rows)?;
    let mut rec = ctx.record("kuhn-vershik", cfg);
    let rs: Vec<f64> = profile.iter().map(|r| r.r).collect();
    let lim = *rs.last().expect("nonempty ray");
    let cauchy = if rs.len() >= 3 { (lim - rs[rs.len() - 3]).abs() } else { f64::NAN };
    let target = specrep::scalar::rational_to_f64(&twice_mean_potential(&group));
    rec.metric("r_max_abs", rs.iter().map(|r| r.abs()).fold(0.0, f64::max));
    rec.metric("lim_r", lim);
    rec.metric("cauchy_gap", cauchy);
    rec.metric("twice_mean_potential", target);
    rec.metric("gap_to_plus_target", (lim - target).abs());
    rec.metric("gap_to_minus_target", (lim + target).abs());
    rec.check("bounded", rs.iter().all(|r| r.abs() <= 2.0));
    rec.check("cauchy", cauchy <= 1e-3);
    rec.check("limit_matches_plus_target", (lim - target).abs() <= 1e-3);
    Ok(rec)
}

fn fundamental_identity(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.fundamental_identity;
    let group = ctx.group;
    let mut rng = ctx.rng(4);
    let mut rows = Vec::new();
    let mut best = Vec::new();
    let mut worst = 0.0f64;
    while best.len() < cfg.pairs {
        let (lx, ly) = (rng.gen_range(0..=cfg.max_len), rng.gen_range(0..=cfg.max_len));
        let x = group.random_word(&mut rng, lx);
        let y = group.random_word(&mut rng, ly);
        if x == y {
            continue;
        }
        let fit = fundamental_identity_residual(&group, &x, &y, cfg.depth)?;
        for t in &fit.fits {
            rows.push(vec![x.to_string(), y.to_string(), num(t.theta), num(t.residual), num(t.kappa)]);
        }
        worst = worst.max(fit.residual);
        best.push(fit.theta_best);
    }
    ctx.csv("fundamental-identity", &["x", "y", "theta", "residual", "kappa"], &rows)?;
    let mut rec = ctx.record("fundamental-identity", cfg);
    let consistent = best.iter().all(|t| *t == best[0]);
    rec.metric("theta", best[0]);
    rec.metric("max_best_residual", worst);
    rec.check("residual", worst <= 1e-8);
    rec.check("consistent_theta", consistent);
    Ok(rec)
}

fn drift(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.drift;
    let group = ctx.group;
    let spec = if cfg.steps.is_empty() {
        RandomWalkSpec::uniform_generators(&group, ctx.config.seed, cfg.horizon, cfg.samples)
    } else {
        let steps = cfg
            .steps
            .iter()
            .map(|(w, p)| Ok((group.parse(w)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        RandomWalkSpec {
            steps,
            seed: ctx.config.seed,
            horizon: cfg.horizon,
            samples: cfg.samples,
        }
    };
    let est = drift_mc(&group, &spec)?;
    let rows = vec![vec![
        cfg.horizon.to_string(),
        cfg.samples.to_string(),
        num(est.ell_distance),
        num(est.se_distance),
        num(est.ell_energy),
        num(est.se_energy),
        num(est.ratio),
    ]];
    ctx.csv(
        "drift",
        &["horizon", "samples", "ell_distance", "se_distance", "ell_energy", "se_energy", "ratio"],
        &rows,
    )?;
    let mut rec = ctx.record("drift", cfg);
    rec.metric("ell_distance", est.ell_distance);
    rec.metric("ell_energy", est.ell_energy);
    rec.metric("ratio", est.ratio);
    if cfg.steps.is_empty() {
        // Simple random walk on the 2k-regular tree drifts at (k - 1) / k.
        let k = group.rank() as f64;
        let exact = (k - 1.0) / k;
        rec.metric("exact_drift", exact);
        rec.check("drift", (est.ell_distance - exact).abs() <= 0.02);
    }
    rec.check("energy_ratio", (est.ratio - 1.0).abs() <= 0.02);
    Ok(rec)
}

fn check_t_max(group: &FreeGroup, width: usize, t_max: usize) -> Result<()> {
    let size = annulus_size(group, width, t_max);
    if size > group.limits().enumeration {
        bail!(
            "t_max = {t_max} needs an annulus of {size} words, above the enumeration cap {}",
            group.limits().enumeration
        );
    }
    Ok(())
}

fn equidist(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.equidist;
    let group = ctx.group;
    let params = ctx.config.cover_params(&cfg.cover);
    check_t_max(&group, params.annulus_width, cfg.t_max)?;
    let psi = CylinderPairFunction::tensor(&indicator(&group, &cfg.psi.0)?, &indicator(&group, &cfg.psi.1)?)?;
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    let mut marginal = Vec::new();
    let mut masses = Vec::new();
    for t in 1..=cfg.t_max {
        let nu = nu_measure(&vitali_cover(&group, &params, t)?);
        let est = roblin_average(&nu, &psi);
        rows.push(vec![t.to_string(), num(est.normalized), num(est.target), num(est.rel_err)]);
        errs.push(est.rel_err);
        masses.push(est.total_mass);
        marginal = nu.first_letter_marginal(&group);
    }
    ctx.csv("equidist", &["t", "estimate", "target", "rel_err"], &rows)?;
    let mut rec = ctx.record("equidist", cfg);
    let mu1 = 1.0 / group.alphabet_size() as f64;
    let marginal_err = marginal.iter().map(|m| (m / mu1 - 1.0).abs()).fold(0.0, f64::max);
    rec.metric("final_rel_err", errs[errs.len() - 1]);
    rec.metric("total_masses", &masses);
    rec.metric("first_letter_marginal", &marginal);
    rec.check("final_within_10pct", errs[errs.len() - 1] <= 0.10);
    rec.check("error_non_increasing", non_increasing(last_three(&errs)));
    rec.check("marginal_within_10pct", marginal_err <= 0.10);
    Ok(rec)
}

fn affine(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.affine_average;
    let group = ctx.group;
    let params = ctx.config.cover_params(&cfg.cover);
    check_t_max(&group, params.annulus_width, cfg.t_max)?;
    let theta = fundamental_identity_residual(
        &group,
        &GroupWord::from_letters(vec![group.generator(0)])?,
        &GroupWord::identity(),
        6,
    )?
    .theta_best;
    let phi = indicator(&group, &cfg.f)?.centered();
    let u = indicator(&group, &cfg.u.0)?.sub(&indicator(&group, &cfg.u.1)?)?;
    let zero = CylinderFunction::zeros(group, u.depth())?;
    let term = |w: &CylinderFunction<f64>| -> Result<AffineTerm> {
        Ok(AffineTerm {
            f: TestFunction::new(phi.clone())?,
            u: u.clone(),
            w: w.clone(),
        })
    };
    let mut rows = Vec::new();
    let (mut plain, mut washed, mut double) = (Vec::new(), Vec::new(), Vec::new());
    for t in 1..=cfg.t_max {
        let nu = nu_measure(&vitali_cover(&group, &params, t)?);
        let runs = [
            ("0", affine_average(&nu, &[term(&zero)?], theta)?),
            ("u", affine_average(&nu, &[term(&u)?], theta)?),
            ("0", affine_average(&nu, &[term(&zero)?, term(&zero)?], theta)?),
        ];
        for (w, e) in &runs {
            rows.push(vec![
                t.to_string(),
                e.arity.to_string(),
                w.to_string(),
                num(e.raw),
                num(e.estimate),
                num(e.unit_theta_estimate),
                num(e.target),
                num(e.rel_err),
            ]);
        }
        plain.push(runs[0].1);
        washed.push(runs[1].1);
        double.push(runs[2].1);
    }
    ctx.csv(
        "affine-average",
        &["t", "arity", "w", "raw", "estimate", "unit_theta_estimate", "target", "rel_err"],
        &rows,
    )?;
    let mut rec = ctx.record("affine-average", cfg);
    let last = cfg.t_max - 1;
    let errs: Vec<f64> = plain.iter().map(|e| e.rel_err).collect();
    let gap = ((washed[last].estimate - plain[last].estimate) / plain[last].estimate).abs();
    let unit_err = ((plain[last].unit_theta_estimate - plain[last].target) / plain[last].target).abs();
    rec.metric("theta", theta);
    rec.metric("prefactor", 1.0 / (2.0 * theta));
    rec.metric("arity1_rel_err", errs[last]);
    rec.metric("arity1_rel_err_unit_theta", unit_err);
    rec.metric("arity2_rel_err", double[last].rel_err);
    rec.metric("washout_gap", gap);
    rec.check("arity1_within_15pct", errs[last] <= 0.15);
    rec.check("arity1_non_increasing", non_increasing(last_three(&errs)));
    rec.check("arity2_within_20pct", double[last].rel_err <= 0.20);
    rec.check("washout_within_5pct", gap <= 0.05);
    Ok(rec)
}

fn negtype(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.negtype;
    let mut rows = Vec::new();
    let mut all = true;
    let mut worst = f64::NEG_INFINITY;
    for (ki, &k) in cfg.ranks.iter().enumerate() {
        let group = FreeGroup::new(k)?.with_limits(ctx.group.limits());
        if group.ball_size(cfg.max_len) < cfg.points as u128 {
            bail!("ball of radius {} in F_{k} has fewer than {} points", cfg.max_len, cfg.points);
        }
        let mut rng = ctx.rng(100 + ki as u64);
        for trial in 0..cfg.trials {
            let mut pts: Vec<GroupWord> = Vec::with_capacity(cfg.points);
            while pts.len() < cfg.points {
                let len = rng.gen_range(0..=cfg.max_len);
                let w = group.random_word(&mut rng, len);
                if !pts.contains(&w) {
                    pts.push(w);
                }
            }
            let report = negative_type_check_points(&pts)?;
            all &= report.pass;
            worst = worst.max(report.max_rayleigh);
            rows.push(vec![
                k.to_string(),
                trial.to_string(),
                cfg.points.to_string(),
                num(report.max_rayleigh),
                report.pass.to_string(),
            ]);
        }
    }
    ctx.csv("negtype", &["k", "trial", "points", "max_rayleigh", "pass"], &rows)?;
    let mut rec = ctx.record("negtype", cfg);
    rec.metric("max_rayleigh", worst);
    rec.check("negative_type", all);
    Ok(rec)
}

fn counting(ctx: &Context) -> Result<ExperimentRecord> {
    let cfg = &ctx.config.counting;
    let group = ctx.group;
    let width = ctx.config.model.annulus_width;
    let delta = critical_exponent(&group);
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for t in 1..=cfg.t_max {
        for rho in 0..=(t * width) {
            let c = cone_count(&group, width, rho as f64, cfg.r, t)?;
            rows.push(vec!["cone".into(), t.to_string(), rho.to_string(), c.count.to_string(), num(c.ratio)]);
            ratios.push(c.ratio);
        }
    }
    let params = ctx.config.cover_params(&cfg.cover);
    check_t_max(&group, width, cfg.cover_t_max)?;
    let mut sizes = Vec::new();
    let mut exact = true;
    for t in 1..=cfg.cover_t_max {
        let cover = vitali_cover(&group, &params, t)?;
        exact &= verify_cover(&group, &cover).is_ok();
        let scaled = cover.elements.len() as f64 * (-delta * (t * width) as f64).exp();
        rows.push(vec![
            "cover".into(),
            t.to_string(),
            String::new(),
            cover.elements.len().to_string(),
            num(scaled),
        ]);
        sizes.push(scaled);
    }
    ctx.csv("counting", &["kind", "t", "rho", "count", "ratio"], &rows)?;
    let band = |xs: &[f64]| xs.iter().cloned().fold(0.0, f64::max) / xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rec = ctx.record("counting", json!({ "counting": cfg, "annulus_width": width }));
    rec.metric("cone_band", band(&ratios));
    rec.metric("cover_band", band(&sizes));
    rec.check("covers_exact", exact);
    rec.check("cone_band", band(&ratios) <= 10.0);
    rec.check("cover_band", band(&sizes) <= 10.0);
    Ok(rec)
}
