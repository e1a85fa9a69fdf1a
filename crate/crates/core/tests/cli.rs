use std::path::PathBuf;

use clap::Parser;
use qgkpz::cli::{execute, main_with, write_outputs, Cli, FileConfig, Format};

fn args(s: &str) -> Vec<String> {
    std::iter::once("qgkpz").chain(s.split_whitespace()).map(String::from).collect()
}

fn cli(s: &str) -> Cli {
    Cli::try_parse_from(args(s)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qgkpz-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn trees_lists_the_three_negative_trees() {
    let rep = execute(&cli("trees --alpha 11/20 --even-noise --cutoff 0")).unwrap();
    let trees: Vec<&str> = rep.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(trees, ["z1[I[z1]]", "z2[I(0,1)[z1] I(0,1)[z1]]", "z3[I[z1] I(0,2)[z1]]"]);
    assert!(rep.rows.iter().all(|r| r[2] == "-9/10"));
}

#[test]
fn pam_example_gives_the_two_rows() {
    let rep = execute(&cli("counterterm --example pam")).unwrap();
    assert_eq!(rep.rows.len(), 2);
    let total = rep.meta["total"].as_str().unwrap();
    assert_eq!(total, "c_eps*f(u)*f'(u)*a(u)^-1 - c_eps*f(u)^2*a(u)^-2*a'(u)");
}

#[test]
fn formats_render() {
    let rep = execute(&cli("trees --even-noise")).unwrap();
    let csv = String::from_utf8(rep.render(Format::Csv).unwrap()).unwrap();
    assert!(csv.starts_with("tree,homogeneity,value,noises,symmetry\n"));
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_slice(&rep.render(Format::Json).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn outputs_are_deterministic_and_digested() {
    let argv = args("solve --config ../../configs/demo.toml --seed 4 --eps 0.125");
    let c = Cli::try_parse_from(&argv).unwrap();
    let mut digests = Vec::new();
    for run in ["a", "b"] {
        let dir = scratch(run);
        let rep = execute(&c).unwrap();
        let m = write_outputs(&dir, &c, &argv, &rep, 0).unwrap();
        assert_eq!(m.seeds, vec![4]);
        assert!(dir.join("manifest.json").exists() && dir.join("snapshots.bin").exists());
        digests.push(m.outputs);
        std::fs::remove_dir_all(&dir).unwrap();
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0].len(), 2);
}

#[test]
fn bad_input_exits_nonzero() {
    assert_eq!(main_with(args("trees --no-such-flag")), 2);
    assert_eq!(main_with(args("trees --alpha 1/0")), 2);
    assert_eq!(main_with(args("selftest --only 42")), 2);
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.toml");
    std::fs::write(&p, "alpha = \"11/20\"\nunknown_key = 1\n").unwrap();
    assert!(FileConfig::load(&p).is_err());
    std::fs::write(&p, "[solver]\nnx = 12\n").unwrap();
    assert!(FileConfig::load(&p).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("override");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("c.toml");
    std::fs::write(&p, "alpha = \"9/20\"\neven_noise = true\nmode = \"linear-forcing\"\n").unwrap();
    let from_file = execute(&cli(&format!("trees --config {}", p.display()))).unwrap();
    assert!(from_file.rows.len() > 3);
    let flagged = execute(&cli(&format!("trees --config {} --alpha 11/20 --mode general", p.display()))).unwrap();
    assert_eq!(flagged.rows.len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_subset_passes() {
    assert_eq!(main_with(args("selftest --only 1,2,3 --format csv")), 0);
}
