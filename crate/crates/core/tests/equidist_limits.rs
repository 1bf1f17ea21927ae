use specrep::equidist::{
    boundedness_monitor, nu_measure, roblin_average, vitali_cover, CoverParams, CylinderPairFunction,
};
use specrep::{Cylinder, CylinderFunction, FreeGroup, GroupWord, Rational};

fn indicator(g: &FreeGroup, s: &str) -> CylinderFunction<f64> {
    CylinderFunction::<Rational>::indicator(*g, &Cylinder::new(g.parse(s).unwrap()).unwrap())
        .unwrap()
        .to_f64()
}

#[test]
fn boundedness_monitor_passes_for_short_h() {
    let g = FreeGroup::new(2).unwrap();
    let hs: Vec<GroupWord> = (0..=4).flat_map(|n| g.sphere(n).unwrap()).collect();
    let report = boundedness_monitor(&g, &CoverParams::default(), &hs, 2.0, 1..=5).unwrap();
    assert!(report.pass, "{:?}", report.sups);
    let trivial = boundedness_monitor(&g, &CoverParams::default(), &[GroupWord::identity()], 1.0, 1..=3).unwrap();
    assert!(trivial.sups.iter().all(|s| s.1 == 0.0));
}

#[test]
fn single_variable_functions_equidistribute() {
    let g = FreeGroup::new(2).unwrap();
    let one = CylinderFunction::constant(g, 2, 1.0).unwrap();
    let psi = CylinderPairFunction::tensor(&indicator(&g, "ab"), &one).unwrap();
    // Exact once the inner shadows are at least as deep as the cells of psi.
    for t in 3..=5 {
        let nu = nu_measure(&vitali_cover(&g, &CoverParams::default(), t).unwrap());
        let est = roblin_average(&nu, &psi);
        assert!((est.normalized - 1.0 / 12.0).abs() < 1e-12, "t = {t}: {}", est.normalized);
    }
}

#[test]
fn covers_hold_for_rank_three() {
    let g = FreeGroup::new(3).unwrap();
    for t in 1..=3 {
        let cover = vitali_cover(&g, &CoverParams::default(), t).unwrap();
        assert_eq!(nu_measure(&cover).total_mass, Rational::from_integer(1));
    }
}
