use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gibbslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbslab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// `(sweep, estimate)` for one metric of a report CSV.
fn column(csv_path: &Path, metric: &str) -> Vec<(f64, f64)> {
    let mut rdr = csv::Reader::from_path(csv_path).unwrap();
    rdr.records()
        .map(|r| r.unwrap())
        .filter(|r| &r[2] == metric)
        .map(|r| (r[1].parse().unwrap(), r[3].parse().unwrap()))
        .collect()
}

#[test]
fn free_diagnostic_partition_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "free.toml",
        "[potential]\nkind = \"Constant\"\nc = 0.0\n[cutoff]\nkind = \"Diagnostic\"\n[fock]\npolicy = \"explicit\"\nn_max = 8\n[sweep]\nkind = \"tau\"\nvalues = [2.0]\n",
    );
    let out = gibbslab(tmp.path(), &["fock-partition", "--config", "free.toml", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("𝒵 = 1.0"));
    assert_eq!(column(&tmp.path().join("o/fock-partition.csv"), "relative_Z"), vec![(2.0, 1.0)]);
}

#[test]
fn sampling_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.toml", "[sampler]\nn_samples = 2000\nseed = 5\n");
    for d in ["a", "b"] {
        assert!(gibbslab(tmp.path(), &["sample-classical", "--config", "s.toml", "--out", d]).status.success());
    }
    assert!(gibbslab(tmp.path(), &["sample-classical", "--config", "s.toml", "--out", "c", "--seed", "6"]).status.success());
    let read = |d: &str| fs::read(tmp.path().join(d).join("ensemble.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sample-classical");
    let head = String::from_utf8(read("a")).unwrap();
    assert!(head.lines().next().unwrap().contains(manifest["config_hash"].as_str().unwrap()));
}

#[test]
fn default_convergence_is_monotone_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbslab(tmp.path(), &["convergence", "--out", "first"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e_z = column(&tmp.path().join("first/convergence.csv"), "e_z");
    assert!(e_z.len() > 1);
    assert!(e_z.windows(2).all(|w| w[1].1 < w[0].1), "{e_z:?}");

    let again = gibbslab(tmp.path(), &["convergence", "--config", "first/config.toml", "--out", "second"]);
    assert!(again.status.success());
    for metric in ["z_quantum", "e_z", "e_gamma", "z_classical"] {
        let estimates = |d: &str| -> Vec<u64> {
            column(&tmp.path().join(d).join("convergence.csv"), metric).iter().map(|p| p.1.to_bits()).collect()
        };
        assert_eq!(estimates("first"), estimates("second"));
    }
    let hash = |d: &str| {
        let m: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("first"), hash("second"));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "kappa = -1.0\n[sampler]\nn_samples = 0\nseed = 1\n");
    let out = gibbslab(tmp.path(), &["sample-classical", "--config", "bad.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kappa") && err.contains("sampler.n_samples"), "{err}");
    assert!(!tmp.path().join("o").exists());

    write(tmp.path(), "typo.toml", "[sampler]\nn_sample = 10\nseed = 1\n");
    let out = gibbslab(tmp.path(), &["sample-classical", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_sample"));

    let out = gibbslab(tmp.path(), &["invariance", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2), "the default sweep is over τ");
}

#[test]
fn oversized_basis_is_a_resource_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "big.toml", "[mode_set]\nk_max = 6\n[sweep]\nkind = \"tau\"\nvalues = [16.0]\n");
    let out = gibbslab(tmp.path(), &["fock-partition", "--config", "big.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evolution_reports_conservation() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "e.toml", "[mode_set]\nk_max = 2\n[potential]\nkind = \"ExactDelta\"\n[sweep]\nkind = \"time\"\nvalues = [0.5, 1.0]\n");
    let out = gibbslab(tmp.path(), &["nls-evolve", "--config", "e.toml", "--out", "o", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let drift = column(&tmp.path().join("o/nls-evolve.csv"), "mass_rel_drift");
    assert_eq!(drift.len(), 2);
    assert!(drift.iter().all(|(_, d)| d.abs() < 1e-12));
    assert_eq!(fs::read_to_string(tmp.path().join("o/trajectory.jsonl")).unwrap().lines().count(), 2);
}
