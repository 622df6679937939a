mod support;

use proptest::prelude::*;
use support::{desk_system, microlp_objective};
use vfmga::esm::{compile, decompose, Profile, SystemModel, TimeSlice};
use vfmga::lp::solve;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Collapses every slice into one slice covering the whole year. Profiles become
/// weight-averaged constants and demands become annual totals.
fn collapse(model: &SystemModel) -> SystemModel {
    let weights: Vec<f64> = model.slices.iter().map(|s| s.weight).collect();
    let total: f64 = weights.iter().sum();
    let avg = |p: &Profile| match p {
        Profile::Constant(v) => Profile::Constant(*v),
        Profile::PerSlice(v) => Profile::Constant(v.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / total),
    };
    let mut m = model.clone();
    m.slices = vec![TimeSlice { id: "year".into(), weight: total }];
    for d in m.demands.values_mut() {
        *d = vec![d.iter().sum()];
    }
    for t in &mut m.technologies {
        t.availability = avg(&t.availability);
        if let Some(input) = &mut t.input {
            input.cop = avg(&input.cop);
        }
    }
    m
}

#[test]
fn fixture_optimum_matches_independent_solver() {
    let m = desk_system();
    assert_eq!(m.technologies.len(), 13);
    assert_eq!(m.carriers.len(), 3);
    assert_eq!(m.slices.len(), 48);
    let c = compile(&m).unwrap();
    let sol = solve(&c.lp).unwrap();
    assert!(sol.is_optimal());
    let oracle = microlp_objective(&c.lp).unwrap();
    assert!(rel(sol.objective, oracle) < 1e-7, "{} vs {oracle}", sol.objective);

    let one = collapse(&m);
    let c1 = compile(&one).unwrap();
    let s1 = solve(&c1.lp).unwrap();
    let o1 = microlp_objective(&c1.lp).unwrap();
    assert!(rel(s1.objective, o1) < 1e-7, "{} vs {o1}", s1.objective);
    // a single averaged slice hides peaks, so it can only be cheaper
    assert!(s1.objective <= sol.objective + 1e-6);
}

#[test]
fn fixture_breakdown_reproduces_objective_and_conserves_energy() {
    let m = desk_system();
    let c = compile(&m).unwrap();
    let sol = solve(&c.lp).unwrap();
    let d = decompose(&m, &c, &sol.values).unwrap();
    assert!(rel(d.costs.total, sol.objective) < 1e-6);
    let parts: f64 = d.costs.components().iter().map(|(_, v)| v).sum();
    assert!(rel(parts, d.costs.total) < 1e-6);
    for r in c.balance_residuals(&sol.values) {
        assert!(r.abs() < 1e-6, "balance residual {r}");
    }
    let annual: f64 = c.generation[0].iter().map(|v| sol.value(*v)).sum();
    assert!((d.technologies["ep"].generation - annual).abs() < 1e-12);
}

#[test]
fn geothermal_potential_binds_when_cheap() {
    let mut m = desk_system();
    let i = m.technology_index("gwhp").unwrap();
    assert_eq!(m.technologies[i].max_annual_generation, Some(48.0));
    m.technologies[i].invest_cost = 0.0;
    m.technologies[i].fom_cost = 0.0;
    m.technologies[i].vom_cost = 0.0;
    m.technologies[i].input = None;
    let c = compile(&m).unwrap();
    assert!(c.lp.constraints().iter().any(|r| r.name == "potential:gwhp" && r.rhs == 48.0));
    let sol = solve(&c.lp).unwrap();
    let d = decompose(&m, &c, &sol.values).unwrap();
    assert!((d.technologies["gwhp"].generation - 48.0).abs() < 1e-6);
}

#[test]
fn zero_emission_cap_excludes_emitters() {
    let mut m = desk_system();
    let i = m.technology_index("pellet_boiler").unwrap();
    m.technologies[i].emission_factor = 0.03;
    assert_eq!(m.emission_cap, Some(0.0));
    let c = compile(&m).unwrap();
    let sol = solve(&c.lp).unwrap();
    let d = decompose(&m, &c, &sol.values).unwrap();
    assert!(d.technologies["pellet_boiler"].generation.abs() < 1e-9);
    // without the emission factor pellets are part of the optimum
    let base = desk_system();
    let cb = compile(&base).unwrap();
    let db = decompose(&base, &cb, &solve(&cb.lp).unwrap().values).unwrap();
    assert!(db.technologies["pellet_boiler"].generation > 1.0);
}

/// Fixture with nothing that breaks homogeneity: no existing capacity, no
/// potentials, investment limits far above anything the demand needs.
fn homogeneous() -> SystemModel {
    let mut m = desk_system();
    for t in &mut m.technologies {
        t.max_annual_generation = None;
        if !t.procurement {
            t.max_investment = (t.max_investment + t.existing_capacity) * 100.0;
            t.existing_capacity = 0.0;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimal_cost_scales_with_demand(lambda in 0.25f64..4.0) {
        let m = homogeneous();
        let base = solve(&compile(&m).unwrap().lp).unwrap().objective;
        let mut scaled = m.clone();
        for d in scaled.demands.values_mut() {
            d.iter_mut().for_each(|x| *x *= lambda);
        }
        let c = compile(&scaled).unwrap();
        let sol = solve(&c.lp).unwrap();
        prop_assert!(rel(sol.objective, lambda * base) < 1e-7, "{} vs {}", sol.objective, lambda * base);
        for r in c.balance_residuals(&sol.values) {
            prop_assert!(r.abs() < 1e-6);
        }
    }
}
