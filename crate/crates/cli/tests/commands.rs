use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 3
[array]
generator = "random"
num_antennas = 5
r_max = 500.0
num_batches = 4
[sky]
n1 = 16
k = 3
[sensing]
p = 10
m = 4
samples = 10000
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cri-rop"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn read_c128(path: &Path) -> Vec<f64> {
    std::fs::read(path)
        .unwrap()
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

#[test]
fn default_validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--out")
        .arg(dir.path())
        .arg("validate")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(manifest(dir.path())["summary"]["passed"], Value::Bool(true));
    assert!(dir.path().join("validate.json").exists());
}

#[test]
fn broken_adjoint_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[validate]\ninject_broken_adjoint = true\n");
    let out = run(&cfg, &dir.path().join("o"), &["validate"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("adjoint consistency"));
}

#[test]
fn missing_array_csv_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[array]\ncsv = \"nowhere.csv\"\n");
    let out = run(&cfg, &dir.path().join("o"), &["make-array"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        &dir.path().join("absent.toml"),
        &dir.path().join("o"),
        &["validate"],
    );
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "[sky]\nbogus = 1\n");
    assert_eq!(
        run(&cfg, &dir.path().join("o"), &["validate"]).status.code(),
        Some(2)
    );
}

#[test]
fn acquire_emits_compressed_measurements_and_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("p = 10", "p = 6").replace("m = 4", "m = 2");
    let cfg = write_config(dir.path(), &text);
    let a = dir.path().join("a");
    let out = run(&cfg, &a, &["acquire", "--side-by-side"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&a);
    assert_eq!(m["summary"]["z_length"], 12);
    let sizes: Vec<u64> = m["summary"]["accounting"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["max_size"].as_u64().unwrap())
        .collect();
    assert_eq!(sizes, vec![100, 25, 12]);
    assert_eq!(read_c128(&a.join("z.c128")).len(), 24);
    let csv = std::fs::read_to_string(a.join("accounting.csv")).unwrap();
    assert!(csv.starts_with("scheme,cost_per_batch,max_size"));

    // Same seeds, same z.
    let b = dir.path().join("b");
    run(&cfg, &b, &["acquire"]);
    assert_eq!(
        std::fs::read(a.join("z.c128")).unwrap(),
        std::fs::read(b.join("z.c128")).unwrap()
    );

    // Every listed output matches its digest.
    for o in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(a.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len() as u64, o["bytes"].as_u64().unwrap());
    }
}

#[test]
fn zero_sky_without_noise_gives_zero_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("k = 3", "k = 0"));
    let a = dir.path().join("a");
    assert_eq!(
        run(&cfg, &a, &["acquire", "--samples", "50"]).status.code(),
        Some(0)
    );
    assert!(read_c128(&a.join("z.c128")).iter().all(|v| *v == 0.0));
}

#[test]
fn acquisition_budget_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("samples = 10000", "samples = 100000000000"),
    );
    let out = run(&cfg, &dir.path().join("a"), &["acquire"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reduce"));
}

#[test]
fn reconstruct_small_sky() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let nufft = dir.path().join("nufft");
    let out = run(&cfg, &nufft, &["reconstruct"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = manifest(&nufft)["summary"].clone();
    assert_eq!(s["converged"], Value::Bool(true));
    let snr_fast = s["snr_db"].as_f64().unwrap();
    assert!(snr_fast >= 40.0, "{snr_fast}");
    for f in [
        "estimate.f64",
        "estimate.png",
        "truth.f64",
        "z.c128",
        "solver.jsonl",
    ] {
        assert!(nufft.join(f).exists(), "{f}");
    }

    let nudft = dir.path().join("nudft");
    assert_eq!(
        run(&cfg, &nudft, &["reconstruct", "--backend", "nudft"])
            .status
            .code(),
        Some(0)
    );
    let snr_exact = manifest(&nudft)["summary"]["snr_db"].as_f64().unwrap();
    assert!((snr_fast - snr_exact).abs() <= 0.1, "{snr_fast} vs {snr_exact}");

    let zero = dir.path().join("zero");
    assert_eq!(
        run(&cfg, &zero, &["reconstruct", "--k", "0"]).status.code(),
        Some(0)
    );
    assert_eq!(manifest(&zero)["summary"]["snr_db"].as_f64().unwrap(), 300.0);
}

#[test]
fn phase_diagram_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[sweep]\nrows = {{ param = \"K\", values = [1, 3] }}\ncols = {{ param = \"P\", values = [2, 8] }}\nfixed = {{ param = \"M\", value = 2 }}\ntrials = 1\n"
    );
    let cfg = write_config(dir.path(), &text);
    let a = dir.path().join("a");
    let out = run(&cfg, &a, &["phase-diagram"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rates = manifest(&a)["summary"]["rates"].clone();
    for r in rates
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap())
    {
        let r = r.as_f64().unwrap();
        assert!(r == 0.0 || r == 1.0);
    }
    assert!(a.join("phase.png").exists() && a.join("frontier.csv").exists());

    let b = dir.path().join("b");
    run(&cfg, &b, &["phase-diagram"]);
    assert_eq!(
        std::fs::read(a.join("phase.csv")).unwrap(),
        std::fs::read(b.join("phase.csv")).unwrap()
    );

    // Resuming from a complete checkpoint reproduces the same table.
    run(&cfg, &a, &["phase-diagram"]);
    assert_eq!(
        std::fs::read(a.join("phase.csv")).unwrap(),
        std::fs::read(b.join("phase.csv")).unwrap()
    );

    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(
        run(&cfg, &dir.path().join("c"), &["phase-diagram"]).status.code(),
        Some(2)
    );
}

#[test]
fn make_array_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sky]\nn1 = 32\n");
    let a = dir.path().join("a");
    let out = run(&cfg, &a, &["make-array", "--num-per-arm", "2", "--batches", "3"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let man = manifest(&a);
    assert_eq!(man["antennas"].as_array().unwrap().len(), 6);
    let s = man["summary"].clone();
    assert_eq!(s["Q"], 6);
    assert_eq!(s["visibilities"], 90);

    let text = format!(
        "[sky]\nn1 = 32\n[array]\ncsv = \"{}\"\nnum_batches = 3\n",
        a.join("array.csv").display()
    );
    let cfg = write_config(dir.path(), &text);
    let b = dir.path().join("b");
    assert_eq!(run(&cfg, &b, &["make-array"]).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("plan.bin")).unwrap(),
        std::fs::read(b.join("plan.bin")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&cfg, &a, &["--threads", "1", "acquire"]);
    let out = bin()
        .env("CRI_ROP_THREADS", "3")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .arg("acquire")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("z.c128")).unwrap(),
        std::fs::read(b.join("z.c128")).unwrap()
    );
}
