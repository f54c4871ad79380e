use std::path::Path;
use std::process::{Command, Output};

use poronlmc::geometry::{embed_fractures, FineMesh};
use poronlmc::harness::{Problem, RunConfig};
use poronlmc::io::read_fractures;

const BIN: &str = env!("CARGO_BIN_EXE_poronlmc");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn small(out: &Path) -> Vec<String> {
    ["--nx", "12", "--ny", "12", "--coarse-nx", "3", "--coarse-ny", "3", "--steps", "3", "--no-vtk", "-o"]
        .iter()
        .map(|s| s.to_string())
        .chain([out.display().to_string()])
        .collect()
}

fn with<'a>(head: &'a [&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(tail.iter().map(String::as_str)).collect()
}

fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn missing_fracture_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let tail = small(&out);
    let o = run(&with(&["fine", "--fractures", "/nonexistent/fractures.txt"], &tail));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[mesh]\nnx = 12\nbogus = 1\n").unwrap();
    let o = run(&["fine", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[mesh]\nnx = 10\n[coarse]\nnx = 3\n").unwrap();
    let o = run(&["fine", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn genfrac_with_zero_count_writes_only_comments() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("none.txt");
    let o = run(&["genfrac", "--count", "0", file.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(!text.is_empty());
    assert!(text.lines().all(|l| l.starts_with('#')));
    assert!(read_fractures(&file).unwrap().is_empty());
}

#[test]
fn genfrac_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for f in [&a, &b] {
        assert!(run(&["genfrac", "--count", "12", "--seed", "3", f.to_str().unwrap()]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_fractures(&a).unwrap().len(), 12);
}

#[test]
fn fracture_free_fine_run_counts_dofs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&with(&["fine", "--no-fractures"], &small(&out)));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("fine_summary.txt")).unwrap();
    let (n_c, n_v) = (2 * 12 * 12, 13 * 13);
    assert!(summary.contains(&format!("DOF_f = {}\n", n_c + 2 * n_v)), "{summary}");
    assert!(summary.contains("segments = 0\n"));
}

#[test]
fn dump_blocks_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&with(&["fine", "--fractures", &data("fractures_30.txt"), "--dump-blocks"], &small(&out)));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(out.join("blocks")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(files.iter().any(|p| p.extension().is_some_and(|e| e == "mtx")));
    for p in files.iter().filter(|p| p.extension().is_some_and(|e| e == "mtx")) {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"), "{}", p.display());
    }
}

fn compare_csv(out: &Path) -> String {
    let o = run(&with(&["compare", "--fractures", &data("fractures_30.txt"), "--layers", "1"], &small(out)));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(out.join("errors.csv")).unwrap());
    stdout
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

#[test]
fn single_layer_compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = compare_csv(&dir.path().join("a"));
    let second = compare_csv(&dir.path().join("b"));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "s,e_p,e_ux,e_uy,DOF_f,DOF_c,wall_time_s");
    assert!(lines[1].starts_with("1,"));
    assert_eq!(without_wall_time(&first), without_wall_time(&second));
    let by_step = std::fs::read_to_string(dir.path().join("a/errors_by_step.csv")).unwrap();
    assert_eq!(by_step, std::fs::read_to_string(dir.path().join("b/errors_by_step.csv")).unwrap());
}

#[test]
fn reference_geometry_sizes() {
    let mesh = FineMesh::structured(120, 120, 1.0, 1.0).unwrap();
    let lines = read_fractures(Path::new(&data("fractures_30.txt"))).unwrap();
    assert_eq!(lines.len(), 30);
    let fr = embed_fractures(&mesh, &lines).unwrap();
    assert_eq!(fr.n_segments(), 1054);

    let cfg = RunConfig::load(Path::new(&format!("{}/../../configs/default.toml", env!("CARGO_MANIFEST_DIR")))).unwrap();
    assert_eq!(cfg.mesh.nx, 120);
    let p = Problem::build(&cfg).unwrap();
    assert_eq!(p.fine_dofs(), 28800 + 1054 + 2 * 14641);
}
