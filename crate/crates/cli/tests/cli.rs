use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_traits::{One, Zero};
use reslab_core::gap::{SaGapConfig, SdpGapConfig};
use reslab_core::gaussian::{Grid, PartitionedFunction};
use reslab_core::io::{DevSource, GameSpec};
use reslab_core::moments::{BiasVector, CubeDistribution};
use reslab_core::predicate::Predicate;
use reslab_core::rational::q;
use reslab_core::relax::{Constraint, CspInstance};
use reslab_core::rounding::{OddBiasMap, RoundingScheme};
use reslab_core::vanishing::{BiasMeasure, FiniteMeasure};
use reslab_core::Q;
use serde_json::Value;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_reslab"))
            .current_dir(self.dir.path())
            .env_remove("RESLAB_SIZE_BUDGET")
            .arg("--out-dir")
            .arg(out)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, out: &str, args: &[&str]) -> String {
        let o = self.run(out, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn json(&self, out: &str, file: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(out).join(file)).unwrap()).unwrap()
    }
}

fn field(tsv: &str, key: &str) -> String {
    tsv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in\n{tsv}"))
}

fn parity3() -> Predicate {
    Predicate::parity(3)
}

fn sha(path: &Path) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn predicate_analyze_parity() {
    let s = Sandbox::new();
    s.write("parity3.json", &parity3().to_json());
    let out = s.ok("out", &["predicate", "analyze", "parity3.json"]);
    assert_eq!(field(&out, "rho"), "1/2");
    assert_eq!(field(&out, "fhat{1,2,3}"), "1/2");
    assert_eq!(field(&out, "symmetric"), "true");
    assert_eq!(s.json("out", "report.json")["parseval"], "1/2");
}

#[test]
fn charlp_majority_is_not_member() {
    let s = Sandbox::new();
    s.write("maj3.json", &Predicate::majority(3).to_json());
    let out = s.ok("out", &["charlp", "check", "maj3.json"]);
    assert_eq!(field(&out, "verdict"), "not a member; all satisfying sums >= 1");
    s.write("lin.json", &Predicate::two_lin().to_json());
    let out = s.ok("out", &["charlp", "check", "lin.json"]);
    assert_eq!(field(&out, "member"), "true");
}

#[test]
fn usage_and_domain_errors() {
    let s = Sandbox::new();
    s.write("parity3.json", &parity3().to_json());
    assert_eq!(s.run("out", &["--frobnicate", "predicate", "analyze", "parity3.json"]).status.code(), Some(2));
    assert_eq!(s.run("out", &["predicate", "explode", "parity3.json"]).status.code(), Some(2));
    assert_eq!(s.run("out", &["predicate", "analyze", "missing.json"]).status.code(), Some(1));
    s.write("bad.json", r#"{"k": 2, "satisfying": ["+++"]}"#);
    let o = s.run("out", &["predicate", "analyze", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    assert_eq!(s.run("out", &["--size-budget", "zero", "predicate", "analyze", "parity3.json"]).status.code(), Some(2));
    // A symmetric predicate with no satisfying assignment is a domain error.
    s.write("empty.json", r#"{"k": 2, "satisfying": []}"#);
    assert_eq!(s.run("out", &["charlp", "check", "empty.json"]).status.code(), Some(1));
}

#[test]
fn manifest_digests_match_outputs() {
    let s = Sandbox::new();
    let input = s.write("parity3.json", &parity3().to_json());
    s.ok("out", &["vanishing", "search", "parity3.json", "--strategy", "pairwise"]);
    let m = s.json("out", "manifest.json");
    assert_eq!(m["command"][0], "--out-dir");
    assert_eq!(m["inputs"][0]["sha256"], sha(&input));
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"].as_str().unwrap().ends_with("measure.json")));
    for o in outputs {
        let p = s.dir.path().join(o["path"].as_str().unwrap());
        assert_eq!(o["sha256"], sha(&p));
    }
}

fn sdp_config() -> SdpGapConfig {
    let f = parity3();
    let nu = CubeDistribution::uniform_on(3, &f.satisfying()).unwrap();
    SdpGapConfig {
        lambda: FiniteMeasure::point(nu),
        f,
        delta: q(1, 10),
        d: 8,
        epsilon: 0.3,
        net_size: 200,
        m: 60,
        max_attempts_per_constraint: 2000,
        seed: 1,
    }
}

#[test]
fn sdp_pipeline_replays_bit_for_bit() {
    let s = Sandbox::new();
    s.write("sdp.json", &sdp_config().to_json());
    let a = s.ok("a", &["--seed", "5", "gap", "sdp", "sdp.json", "--collapse", "10"]);
    let b = s.ok("b", &["--seed", "5", "gap", "sdp", "sdp.json", "--collapse", "10"]);
    assert_eq!(a, b);
    for f in ["instance.json", "basic.json", "collapsed.json", "report.json"] {
        assert_eq!(sha(&s.path("a").join(f)), sha(&s.path("b").join(f)), "{f}");
    }
    assert_eq!(s.json("a", "manifest.json")["seed"], 5);
    let out = s.ok("v", &["--tol", "2", "verify", "basic", "a/instance.json", "a/basic.json"]);
    assert_eq!(field(&out, "passed"), "true");
    assert!(field(&out, "frac").parse::<f64>().unwrap() >= 0.9);

    let grid = Grid::new(0, 2).unwrap();
    let psi = PartitionedFunction::from_code(grid, &grid.canonical_cells(), 5);
    s.write("scheme.json", &RoundingScheme::gaussian(q(1, 10), psi, 500, 3).to_json());
    let r1 = s.ok("r1", &["round", "sdp", "a/instance.json", "a/basic.json", "scheme.json"]);
    let r2 = s.ok("r2", &["round", "sdp", "a/instance.json", "a/basic.json", "scheme.json"]);
    assert_eq!(r1, r2);
    assert_eq!(field(&r1, "seed"), "3");
}

#[test]
fn sa_gap_family_round_trip() {
    let s = Sandbox::new();
    let f = parity3();
    let nu = CubeDistribution::uniform_on(3, &f.satisfying()).unwrap();
    let cfg = SaGapConfig {
        lambda: BiasMeasure { k: 3, atoms: vec![(Q::one(), BiasVector::of(&nu), nu)] },
        f,
        epsilon: q(1, 5),
        n: 30,
        density: 0.5,
        eta: q(3, 20),
        d_ball: 2,
        r: 3,
        delta: q(1, 2),
        seed: 2,
    };
    s.write("sa.json", &cfg.to_json());
    let out = s.ok("g", &["gap", "sa", "sa.json", "--girth", "6", "--family"]);
    assert_eq!(field(&out, "already_consistent"), "true");
    let obj = field(&out, "sa_objective");
    let out = s.ok("o", &["sa", "objective", "g/instance.json", "g/family.json"]);
    assert_eq!(field(&out, "objective"), obj);
    assert_eq!(field(&out, "consistent"), "true");
    let out = s.ok("v", &["verify", "family", "g/family.json"]);
    assert_eq!(field(&out, "exact"), "true");

    let scheme = RoundingScheme::lp_bias(OddBiasMap::Linear(Q::zero()), 100, 1);
    s.write("lp.json", &scheme.to_json());
    let out = s.ok("r", &["round", "lp", "g/instance.json", "g/family.json", "lp.json"]);
    assert_eq!(field(&out, "expected_exact"), "1/2");
}

#[test]
fn verify_instance_and_sa_build() {
    let s = Sandbox::new();
    let cons = vec![
        Constraint { vars: vec![0, 1, 2], signs: vec![1, 1, 1] },
        Constraint { vars: vec![0, 1, 2], signs: vec![1, 1, -1] },
    ];
    let phi = CspInstance::new(parity3(), 3, cons).unwrap();
    s.write("inst.json", &phi.to_json());
    let out = s.ok("v", &["verify", "instance", "inst.json"]);
    assert_eq!(field(&out, "max"), "1/2");
    let out = s.ok("v", &["verify", "instance", "inst.json", "--assignment", "+++"]);
    assert_eq!(field(&out, "sat"), "1/2");
    assert_eq!(s.run("v", &["verify", "instance", "inst.json", "--assignment", "++"]).status.code(), Some(1));
    // Three rounds see the whole instance, so the relaxation is exact.
    let out = s.ok("b", &["sa", "build", "inst.json", "--r", "3"]);
    assert_eq!(field(&out, "objective"), "1/2");
    assert_eq!(s.run("b2", &["sa", "build", "inst.json", "--r", "2"]).status.code(), Some(1));
    assert_eq!(s.run("b3", &["--size-budget", "4", "sa", "build", "inst.json", "--r", "3"]).status.code(), Some(1));
}

#[test]
fn game_value_grid_report() {
    let s = Sandbox::new();
    let spec = GameSpec {
        f: Predicate::two_lin(),
        delta: q(1, 4),
        d: 2,
        samples: 500,
        seed: 0,
        guard: true,
        dev: DevSource::Dyadic,
        p_grid: vec![0],
        q_grid: vec![0],
    };
    s.write("game.json", &spec.to_json());
    let out = s.ok("g", &["--seed", "3", "game", "value", "game.json", "--p-grid", "0,1", "--q-grid", "0"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "p\tq\tvalue\tci_low\tci_high\texact_flag");
    assert_eq!(lines.len(), 3);
    assert_eq!(s.json("g", "manifest.json")["seed"], 3);
    assert_eq!(s.run("g", &["game", "value", "game.json", "--samples", "0"]).status.code(), Some(1));
}
