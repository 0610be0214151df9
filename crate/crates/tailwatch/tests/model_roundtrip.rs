use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailwatch::model::{Model, ModelFile, Provenance};
use tailwatch_core::gem::partition_nominal;
use tailwatch_core::{GemBaseline, NominalBaseline, PcaBaseline, PointSet, ProjectedGemBaseline, RankRule};

fn cloud(n: usize, dim: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = (0..n * dim).map(|i| rng.random::<f64>() * (1 + i % dim) as f64).collect();
    PointSet::from_flat(dim, flat).unwrap()
}

fn assert_round_trip(model: Model) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let file = ModelFile { model, provenance: Provenance::new(b"data", 3, BTreeMap::new()) };
    file.save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap();
    assert_eq!(back, file);
    let dim = file.model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..8.0)).collect();
        let a = file.model.score(&x).unwrap();
        let b = back.model.score(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let a: Vec<u64> = file.model.sorted_stats().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = back.model.sorted_stats().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn gem_model_scores_identically_after_reload() {
    let data = cloud(500, 7, 1);
    assert_round_trip(Model::Gem(GemBaseline::build(&data, 200, 4, 11).unwrap()));
}

#[test]
fn pca_model_scores_identically_after_reload() {
    let data = cloud(400, 9, 2);
    let (s1, s2) = partition_nominal(&data, 200, 5).unwrap();
    assert_round_trip(Model::Pca(PcaBaseline::fit(&s1, &s2, RankRule::MinVariance(0.9)).unwrap()));
}

#[test]
fn projected_gem_model_scores_identically_after_reload() {
    let data = cloud(400, 9, 3);
    let (s1, s2) = partition_nominal(&data, 200, 5).unwrap();
    assert_round_trip(Model::PcaGem(ProjectedGemBaseline::fit(&s1, &s2, RankRule::Fixed(4), 3, 8).unwrap()));
}

#[test]
fn tampered_payload_is_rejected() {
    let data = cloud(50, 2, 4);
    let file = ModelFile {
        model: Model::Gem(GemBaseline::build(&data, 20, 2, 0).unwrap()),
        provenance: Provenance::new(b"", 0, BTreeMap::new()),
    };
    let json = file.to_json().unwrap();
    assert!(ModelFile::from_json(&json.replace("\"gem\"", "\"pca\"")).is_err());
    assert!(ModelFile::from_json(&json[..json.len() / 2]).is_err());
}
