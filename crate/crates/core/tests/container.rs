use std::fs;

use hmvr::model::{
    load_index, load_queries, save_index, save_queries, MANIFEST_FILE, VECTORS_FILE,
};
use hmvr::synth::{generate, SynthSpec};
use hmvr::{DecomposedQuery, Error, HierarchicalIndex, ImageRecord};
use proptest::prelude::*;
use serde_json::Value;

fn random_index(n: usize, dim: usize, levels: &[usize], values: &[f32]) -> HierarchicalIndex {
    let mut it = values.iter().copied().cycle();
    let images = (0..n)
        .map(|i| ImageRecord {
            id: format!("img-{:03}", (i * 7919) % 1000),
            levels: levels
                .iter()
                .map(|&g| (0..g * dim).map(|_| it.next().unwrap()).collect())
                .collect(),
        })
        .collect();
    HierarchicalIndex::new(dim, false, levels.to_vec(), images).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn container_round_trips_bit_for_bit(
        n in 0usize..20,
        dim in 1usize..6,
        extra in prop::collection::btree_set(2usize..10, 0..3),
        values in prop::collection::vec(-1e6f32..1e6, 1..64),
    ) {
        let mut levels = vec![1];
        levels.extend(extra);
        let index = random_index(n, dim, &levels, &values);
        let dir = tempfile::tempdir().unwrap();
        save_index(&index, dir.path()).unwrap();
        let back = load_index(dir.path()).unwrap();
        prop_assert_eq!(&back, &index);
        // a second write is byte-identical
        let again = tempfile::tempdir().unwrap();
        save_index(&back, again.path()).unwrap();
        for f in [MANIFEST_FILE, VECTORS_FILE] {
            prop_assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap());
        }
    }

    #[test]
    fn query_file_round_trips(
        subs in 1usize..5,
        values in prop::collection::vec(-10.0f32..10.0, 4),
        gt in proptest::option::of("[a-z]{1,8}"),
    ) {
        let q = DecomposedQuery {
            query_id: "q\"1\\".into(),
            global: values.clone(),
            subs: vec![values; subs],
            ground_truth: gt,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.jsonl");
        save_queries(std::slice::from_ref(&q), &path).unwrap();
        prop_assert_eq!(load_queries(&path, 4).unwrap(), vec![q]);
    }
}

#[test]
fn synthetic_dataset_round_trips_at_scale() {
    let ds = generate(&SynthSpec {
        images: 1000,
        dim: 16,
        queries: 500,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_index(&ds.index, dir.path().join("idx")).unwrap();
    save_queries(&ds.queries, dir.path().join("q.jsonl")).unwrap();
    assert_eq!(load_index(dir.path().join("idx")).unwrap(), ds.index);
    assert_eq!(
        load_queries(dir.path().join("q.jsonl"), 16).unwrap(),
        ds.queries
    );
}

fn saved() -> (tempfile::TempDir, Value) {
    let ds = generate(&SynthSpec {
        images: 5,
        dim: 4,
        queries: 1,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_index(&ds.index, dir.path()).unwrap();
    let manifest =
        serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    (dir, manifest)
}

type Mutation = Box<dyn FnOnce(&mut Value)>;

fn load_mutated(f: impl FnOnce(&mut Value)) -> Result<HierarchicalIndex, Error> {
    let (dir, mut manifest) = saved();
    f(&mut manifest);
    fs::write(
        dir.path().join(MANIFEST_FILE),
        serde_json::to_vec(&manifest).unwrap(),
    )
    .unwrap();
    load_index(dir.path())
}

#[test]
fn manifest_mutations_are_rejected() {
    let cases: Vec<(&str, Mutation)> = vec![
        ("format", Box::new(|m| m["format"] = "HMIX".into())),
        ("version", Box::new(|m| m["version"] = 2.into())),
        ("dim zero", Box::new(|m| m["dim"] = 0.into())),
        ("unknown key", Box::new(|m| m["extra"] = true.into())),
        (
            "missing offset",
            Box::new(|m| {
                m["images"][0]["offsets"]
                    .as_array_mut()
                    .unwrap()
                    .pop()
                    .map(drop)
                    .unwrap()
            }),
        ),
        (
            "unaligned offset",
            Box::new(|m| m["images"][0]["offsets"][1] = 6.into()),
        ),
        (
            "offset past end",
            Box::new(|m| m["images"][0]["offsets"][1] = 1_000_000.into()),
        ),
        (
            "level without whole image",
            Box::new(|m| m["levels"][0] = 2.into()),
        ),
        (
            "unsorted levels",
            Box::new(|m| m["levels"].as_array_mut().unwrap().swap(1, 2)),
        ),
        (
            "duplicate id",
            Box::new(|m| m["images"][1]["id"] = m["images"][0]["id"].clone()),
        ),
    ];
    for (name, mutate) in cases {
        assert!(load_mutated(mutate).is_err(), "{name} accepted");
    }
}

#[test]
fn payload_mutations_name_the_image_and_level() {
    let (dir, manifest) = saved();
    let vectors = dir.path().join(VECTORS_FILE);
    let mut bytes = fs::read(&vectors).unwrap();
    bytes.truncate(bytes.len() - 4 * 4);
    fs::write(&vectors, &bytes).unwrap();
    let last = manifest["images"].as_array().unwrap().last().unwrap()["id"]
        .as_str()
        .unwrap()
        .to_string();
    match load_index(dir.path()) {
        Err(Error::ImageData { image, level, .. }) => {
            assert_eq!(image, last);
            assert_eq!(level, 16);
        }
        other => panic!("{other:?}"),
    }

    // normalized container holding a non-unit vector
    let (dir, _) = saved();
    let vectors = dir.path().join(VECTORS_FILE);
    let mut bytes = fs::read(&vectors).unwrap();
    bytes[..4].copy_from_slice(&3.0f32.to_le_bytes());
    fs::write(&vectors, &bytes).unwrap();
    assert!(load_index(dir.path()).is_err());
}

#[test]
fn malformed_query_lines_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.jsonl");
    for line in [
        r#"{"query_id":"a","global":[1,0],"subs":[]}"#,
        r#"{"query_id":"a","global":[1,0,0],"subs":[[1,0]]}"#,
        r#"{"query_id":"a","global":[1,0],"subs":[[1]]}"#,
        r#"{"query_id":"a","global":[1,0]"#,
    ] {
        fs::write(&path, line).unwrap();
        assert!(load_queries(&path, 2).is_err(), "{line}");
    }
    assert!(load_queries(dir.path().join("absent.jsonl"), 2)
        .unwrap_err()
        .is_io());
}
