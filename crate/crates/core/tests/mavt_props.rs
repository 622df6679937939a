use indexmap::IndexMap;
use proptest::prelude::*;
use vfmga::mavt::{
    aggregate, cluster_stakeholders, exponential, fit_savf, kendall_tau_distance, Midpoint, Ranking,
};

fn weights_and_values(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    n.prop_flat_map(|k| prop::collection::vec((0.0..1.0f64, 0.0..=1.0f64), k))
        .prop_filter("some weight", |t| t.iter().map(|p| p.0).sum::<f64>() > 1e-6)
        .prop_map(|t| {
            let s: f64 = t.iter().map(|p| p.0).sum();
            t.into_iter().map(|(w, v)| (w / s, v)).collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn power_mean_bounds(terms in weights_and_values(1..8), gamma in 0.0..=1.0f64) {
        let v = aggregate(&terms, gamma).unwrap();
        let active = terms.iter().filter(|t| t.0 > 0.0);
        let lo = active.clone().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let hi = active.map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= v && v <= hi, "{lo} <= {v} <= {hi}");
    }

    #[test]
    fn improving_one_value_never_lowers(terms in weights_and_values(2..6), gamma in 0.01..=1.0f64,
                                         k in 0usize..6, bump in 0.0..0.5f64) {
        let k = k % terms.len();
        let mut better = terms.clone();
        better[k].1 = (better[k].1 + bump).min(1.0);
        prop_assert!(aggregate(&better, gamma).unwrap() >= aggregate(&terms, gamma).unwrap() - 1e-12);
    }

    #[test]
    fn zero_weight_is_irrelevant(terms in weights_and_values(1..6), gamma in 0.0..=1.0f64, junk in 0.0..=1.0f64) {
        let mut more = terms.clone();
        more.push((0.0, junk));
        prop_assert_eq!(aggregate(&more, gamma).unwrap(), aggregate(&terms, gamma).unwrap());
    }

    #[test]
    fn ranking_invariant_under_increasing_transform(values in prop::collection::vec(0.0..1.0f64, 1..30)) {
        let named = |f: &dyn Fn(f64) -> f64| {
            values.iter().enumerate().map(|(i, v)| (format!("A{i:03}"), f(*v))).collect::<Vec<_>>()
        };
        let a = Ranking::from_values("s", named(&|v| v));
        let b = Ranking::from_values("s", named(&|v| (3.0 * v).exp() - 7.0));
        let ids = |r: &Ranking| r.entries.iter().map(|e| (e.alternative.clone(), e.rank)).collect::<Vec<_>>();
        prop_assert_eq!(ids(&a), ids(&b));
        prop_assert_eq!(kendall_tau_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn ranking_matches_pairwise_order(values in prop::collection::vec(0.0..1.0f64, 20)) {
        let r = Ranking::from_values("s", values.iter().enumerate().map(|(i, v)| (format!("A{i:03}"), *v)).collect());
        for i in 0..values.len() {
            for j in 0..values.len() {
                let (ri, rj) = (r.rank_of(&format!("A{i:03}")).unwrap(), r.rank_of(&format!("A{j:03}")).unwrap());
                prop_assert_eq!(values[i] >= values[j], ri <= rj);
            }
        }
    }

    #[test]
    fn fitted_savf_reproduces_midpoint(z in 0.05..0.95f64, v in 0.05..0.95f64) {
        if let Ok(f) = fit_savf(0.0, 1.0, &[Midpoint { state: z, value: v }]) {
            prop_assert_eq!(f.value(0.0), 0.0);
            prop_assert_eq!(f.value(1.0), 1.0);
            prop_assert!((f.value(z) - v).abs() < 1e-6);
        }
    }
}

#[test]
fn additive_and_geometric_limits() {
    let terms = [(0.2, 0.3), (0.5, 0.81), (0.3, 0.05)];
    let additive: f64 = terms.iter().map(|(w, v)| w * v).sum();
    assert!((aggregate(&terms, 1.0).unwrap() - additive).abs() < 1e-12);
    let geometric: f64 = terms.iter().map(|(w, v)| v.powf(*w)).product();
    assert!((aggregate(&terms, 1e-6).unwrap() - geometric).abs() < 1e-6);
    assert!((aggregate(&terms, 0.0).unwrap() - geometric).abs() < 1e-14);
}

/// Root of (1 - e^{-0.25c}) / (1 - e^{-c}) = 0.5, by plain bisection on the
/// closed form written out independently.
fn quarter_root() -> f64 {
    let f = |c: f64| (1.0 - (-0.25 * c).exp()) / (1.0 - (-c).exp()) - 0.5;
    let (mut lo, mut hi) = (0.1, 20.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if f(m) < 0.0 {
            lo = m
        } else {
            hi = m
        }
    }
    lo
}

#[test]
fn savf_quarter_midpoint_matches_root() {
    let f = fit_savf(0.0, 1.0, &[Midpoint { state: 0.25, value: 0.5 }]).unwrap();
    let vfmga::mavt::Shape::Exponential { c } = f.shape else { panic!("linear fit") };
    assert!((c - quarter_root()).abs() < 1e-4);
    assert!((exponential(0.25, c) - 0.5).abs() < 1e-6);
}

fn from_ranks(name: &str, ranks: &[usize]) -> Ranking {
    Ranking::from_values(name, ranks.iter().enumerate().map(|(i, r)| (format!("x{i}"), -(*r as f64))).collect())
}

/// Spearman via 1 - 6 Σd² / (n(n² - 1)), valid for untied ranks.
fn spearman_formula(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn clustering_matches_hand_trace() {
    let m: [[usize; 6]; 4] = [[1, 2, 3, 4, 5, 6], [2, 1, 3, 4, 6, 5], [6, 5, 4, 3, 2, 1], [5, 6, 4, 3, 1, 2]];
    let rankings: Vec<Ranking> = m.iter().enumerate().map(|(i, r)| from_ranks(&format!("S{}", i + 1), r)).collect();
    let d = cluster_stakeholders(&rankings).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { 0.0 } else { 1.0 - spearman_formula(&m[i], &m[j]) };
            assert!((d.distances[i][j] - want).abs() < 1e-12, "d[{i}][{j}]");
        }
    }
    // d12 = d34 = 4/35 tie: lower ids merge first; final height averages the
    // four cross distances 2, 66/35, 66/35, 2
    let trace: Vec<(usize, usize, f64)> = d.merges.iter().map(|g| (g.left, g.right, g.height)).collect();
    let want = [(0, 1, 4.0 / 35.0), (2, 3, 4.0 / 35.0), (4, 5, 68.0 / 35.0)];
    for (got, want) in trace.iter().zip(want) {
        assert_eq!((got.0, got.1), (want.0, want.1));
        assert!((got.2 - want.2).abs() < 1e-12);
    }
    assert_eq!(d.order, vec!["S1", "S2", "S3", "S4"]);
}

#[test]
fn swing_weights_feed_aggregate() {
    let mut r = IndexMap::new();
    r.insert("a".to_string(), 100.0);
    r.insert("b".to_string(), 50.0);
    r.insert("c".to_string(), 50.0);
    let w = vfmga::mavt::swing_weights(&r).unwrap();
    let terms: Vec<(f64, f64)> = w.values().zip([1.0, 0.0, 0.0]).map(|(w, v)| (*w, v)).collect();
    assert!((aggregate(&terms, 1.0).unwrap() - 0.5).abs() < 1e-15);
}
