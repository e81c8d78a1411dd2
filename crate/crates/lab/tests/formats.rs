use std::path::Path;

use sublap::compare::compare_values;
use sublap::formats::{read_triplets, write_diagonal_triplets, write_triplets, Table};
use sublap::report::content_hash;
use sublap::{execute, ExperimentConfig, Pipeline, RunOptions};
use sublap_core::sparse::CsrMatrix;

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn triplets_round_trip_bit_identically() {
    let m = CsrMatrix::from_triplets(
        3,
        3,
        vec![
            (0, 0, 1.0 / 3.0),
            (0, 2, -1e-300),
            (1, 1, 2.5e17),
            (2, 0, -1e-300),
            (2, 2, f64::MIN_POSITIVE),
        ],
    );
    let mut buf = Vec::new();
    write_triplets(&m, &mut buf).unwrap();
    let back = read_triplets(buf.as_slice()).unwrap();
    let a: Vec<_> = m.triplets().collect();
    let b: Vec<_> = back.triplets().collect();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.0, x.1, x.2.to_bits()), (y.0, y.1, y.2.to_bits()));
    }
}

#[test]
fn diagonal_triplets_have_header() {
    let mut buf = Vec::new();
    write_diagonal_triplets(&[1.0, 2.0], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "2 2\n0 0 1.0\n1 1 2.0\n");
}

#[test]
fn malformed_triplets_are_rejected() {
    assert!(read_triplets("2 1\n0 5 1.0\n".as_bytes()).is_err());
    assert!(read_triplets("2 2\n0 0 1.0\n".as_bytes()).is_err());
    assert!(read_triplets("2 1\n0 0 x\n".as_bytes()).is_err());
    assert!(read_triplets("".as_bytes()).is_err());
}

#[test]
fn table_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut t = Table::new("curve.csv", &["t", "value"]);
    t.push(vec![0.1, 1.0 / 7.0]);
    t.push(vec![1.0, -2.5e-9]);
    t.write(tmp.path()).unwrap();
    let back = Table::read(&tmp.path().join("curve.csv")).unwrap();
    assert_eq!(back, t);
}

#[test]
fn exported_forms_match_assembly() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        config: shipped("ou_1d.toml"),
        out: Some(tmp.path().to_path_buf()),
        threads: 1,
        seed: None,
    };
    let outcome = execute(Pipeline::ExportForms, &opts).unwrap();
    assert!(outcome.report.assertions.is_empty());
    let read = |name: &str| read_triplets(std::fs::File::open(tmp.path().join(name)).unwrap()).unwrap();
    let d = read("dirichlet.triplets");
    let b = read("mass.triplets");
    assert_eq!(d.nrows(), 401);
    assert_eq!(b.nnz(), 401);
    // Constants lie in the kernel of the Dirichlet form.
    let ones = vec![1.0; 401];
    let y = d.mul_vec(&ones);
    let scale = d.triplets().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
    assert!(y.iter().all(|v| v.abs() < 1e-10 * scale));
    // The Dirichlet form is symmetric.
    let entries: std::collections::BTreeMap<(usize, usize), f64> = d.triplets().map(|(i, j, v)| ((i, j), v)).collect();
    for (&(i, j), &v) in &entries {
        assert_eq!(entries.get(&(j, i)).copied(), Some(v));
    }
}

#[test]
fn config_canonical_form_round_trips() {
    let cfg = ExperimentConfig::load(&shipped("heisenberg_small.toml")).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(
        content_hash(cfg.to_toml().as_bytes()),
        content_hash(again.to_toml().as_bytes())
    );
}

#[test]
fn content_hash_matches_git_blob_hash() {
    // `git hash-object` of "hello\n" in a SHA-256 repository.
    assert_eq!(
        content_hash(b"hello\n"),
        "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
    );
}

#[test]
fn compare_walks_nested_values() {
    let a = serde_json::json!({"x": {"y": [1.0, 2.0]}, "s": "same"});
    let b = serde_json::json!({"x": {"y": [1.0, 2.2]}, "s": "same"});
    let d = compare_values(&a, &b, 0.05);
    assert_eq!(d.diffs.len(), 1);
    assert_eq!(d.diffs[0].path, "/x/y/1");
    assert!(d.diffs[0].exceeds);
    assert!(compare_values(&a, &b, 0.1).within_tolerance());
}

#[test]
fn report_json_parses_back_to_the_same_report() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        config: shipped("ou_1d.toml"),
        out: Some(tmp.path().to_path_buf()),
        threads: 1,
        seed: None,
    };
    let outcome = execute(Pipeline::All, &opts).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let parsed: sublap::RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, outcome.report);
    assert_eq!(parsed.to_json(), text);
}
