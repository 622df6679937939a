mod support;

use vfmga::mavt::PreferenceSet;
use vfmga::orchestrator::{run_pipeline, Stage};

fn sha256(path: &std::path::Path) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(std::fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn manifest_counts_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&support::small_inputs(), dir.path(), Stage::Analyse).unwrap();
    let g = &m.counts.groups_per_strategy;
    assert_eq!((g["bm"], g["cb"], g["db"]), (13, 19, 19));
    // extreme scheme only: two vectors per group, one slack
    assert_eq!(m.counts.weight_vectors, 2 * 51);
    assert_eq!(m.counts.raw_runs, 102);
    assert_eq!(m.counts.failed_runs, 0);
    assert!(m.counts.alternatives <= m.counts.raw_runs + 1);
    assert_eq!(m.counts.stakeholders, 6);
    assert_eq!(m.stages, Stage::ALL.to_vec());

    let alts: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(dir.path().join("alternatives.json")).unwrap()).unwrap();
    assert_eq!(alts.len(), m.counts.alternatives);
    let rankings = std::fs::read_to_string(dir.path().join("rankings.csv")).unwrap();
    assert_eq!(rankings.lines().count(), 1 + 6 * alts.len());
    for (name, digest) in &m.artifacts {
        assert_eq!(&sha256(&dir.path().join(name)), digest, "{name}");
    }
    assert!(!m.artifacts.contains_key("timings.json"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let inputs = support::small_inputs();
    let ma = run_pipeline(&inputs, a.path(), Stage::Analyse).unwrap();
    let mb = run_pipeline(&inputs, b.path(), Stage::Analyse).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn empty_preferences_stop_after_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = support::small_inputs();
    inputs.preferences = PreferenceSet::default();
    let m = run_pipeline(&inputs, dir.path(), Stage::Analyse).unwrap();
    assert_eq!(m.stages.last(), Some(&Stage::Evaluate));
    for f in ["optimum.json", "groups.json", "alternatives.json", "profiles.csv", "impact_ranges.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    for f in ["rankings.csv", "classification.json", "dendrogram.json"] {
        assert!(!dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn stages_stop_where_asked() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&support::small_inputs(), dir.path(), Stage::Groups).unwrap();
    assert_eq!(m.stages, vec![Stage::Optimize, Stage::Groups]);
    assert!(dir.path().join("groups.json").exists());
    assert!(!dir.path().join("alternatives.json").exists());
    assert_eq!(m.counts.raw_runs, 0);
}

#[test]
fn invalid_top_fraction_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = support::small_inputs();
    inputs.config.top_fraction = 0.0;
    assert!(run_pipeline(&inputs, dir.path(), Stage::Optimize).is_err());
}
