//! The checked-in fuzz seeds are valid inputs for their parsers, so the
//! fuzzer starts from the accepting paths.

use std::path::Path;

use reslab_core::gap::{SaGapConfig, SdpGapConfig};
use reslab_core::gaussian::PartitionedFunction;
use reslab_core::io::GameSpec;
use reslab_core::moments::MomentMatrix;
use reslab_core::predicate::Predicate;
use reslab_core::rational::parse_q;
use reslab_core::relax::{BasicSolution, CspInstance, LocalDistributionFamily};
use reslab_core::rounding::RoundingScheme;
use reslab_core::vanishing::parse_measure;

fn parse(target: &str, s: &str) -> Result<(), String> {
    let e = |e: reslab_core::Error| e.to_string();
    match target {
        "predicate" => Predicate::parse(s).map(drop).map_err(e),
        "measure" => parse_measure(s).map(drop).map_err(e),
        "moment_matrix" => MomentMatrix::parse(s).map(drop).map_err(e),
        "psi" => PartitionedFunction::parse(s).map(drop).map_err(e),
        "instance" => CspInstance::parse(s).map(drop).map_err(e),
        "family" => LocalDistributionFamily::parse(s).map(drop).map_err(e),
        "basic_solution" => BasicSolution::parse(s, 3).map(drop).map_err(e),
        "sa_config" => SaGapConfig::parse(s).map(drop).map_err(e),
        "sdp_config" => SdpGapConfig::parse(s).map(drop).map_err(e),
        "game_spec" => GameSpec::parse(s).map(drop).map_err(e),
        "rounding_scheme" => RoundingScheme::parse(s).map(drop).map_err(e),
        "rational" => parse_q(s).map(drop).map_err(e),
        other => Err(format!("unknown target {other}")),
    }
}

#[test]
fn every_seed_parses() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let targets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/fuzz_targets");
    let mut seen = 0;
    for entry in std::fs::read_dir(&targets).unwrap() {
        let name = entry.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned();
        let dir = root.join(&name);
        let seeds: Vec<_> = std::fs::read_dir(&dir).unwrap_or_else(|_| panic!("no corpus for {name}")).collect();
        assert!(!seeds.is_empty(), "empty corpus for {name}");
        for seed in seeds {
            let path = seed.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            if let Err(err) = parse(&name, &text) {
                panic!("{}: {err}", path.display());
            }
            seen += 1;
        }
    }
    assert!(seen >= 12);
}
