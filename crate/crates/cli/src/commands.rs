//! One function per subcommand. Each reads its inputs, runs the core
//! routine and returns the tables and artifacts; nothing here writes files.

use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde_json::{json, Value};

use reslab_core::game::{budget_from_f64, scan_limits};
use reslab_core::gap::{
    assemble_family, chernoff_slack, generate_sa_instance, generate_sdp_gap_instance, layers_used, prune_girth,
    SaGapConfig, SdpGapConfig, CHERNOFF_BETA,
};
use reslab_core::io::{read_text, tsv, GameSpec};
use reslab_core::moments::{pairwise_independent_point, CubeDistribution};
use reslab_core::predicate::{assignment_string, parse_assignment, subset_string, Predicate};
use reslab_core::rational::{fmt_q, to_f64};
use reslab_core::relax::{
    brute_force_opt, build_sherali_adams, constraint_subsets, correct_local_distributions, estimate_sat,
    sa_objective, solve_sherali_adams, verify_basic_solution, verify_consistency, BasicSolution, CspInstance,
    LocalDistributionFamily,
};
use reslab_core::rounding::{round_lp, round_sdp, RoundingReport, RoundingScheme};
use reslab_core::vanishing::{
    charlp_general_search, charlp_symmetric_check, find_vanishing_measure, measure_to_json, Strategy,
};
use reslab_core::{Error, Result};

use crate::{CharlpCmd, Cmd, GameCmd, GapCmd, Global, PredicateCmd, RoundCmd, SaCmd, StrategyArg, VanishingCmd, VerifyCmd};

pub struct Output {
    pub tsv: String,
    pub json: Value,
    /// Extra artifacts `(file name, contents)` for the output directory.
    pub files: Vec<(String, String)>,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
}

impl Output {
    fn new(rows: &[(&str, String)], json: Value, inputs: &[&Path]) -> Self {
        let body: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![(*k).to_string(), v.clone()]).collect();
        Self {
            tsv: tsv(&["field", "value"], &body),
            config: json.get("config").cloned().unwrap_or(Value::Null),
            json,
            files: vec![],
            seed: None,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        }
    }
}

pub fn parse_budget(text: &str) -> std::result::Result<u128, String> {
    let x: f64 = text.trim().parse().map_err(|_| format!("size budget {text:?} is not a number"))?;
    if !(x >= 1.0) {
        return Err(format!("size budget {text:?} must be at least 1"));
    }
    Ok(budget_from_f64(x))
}

pub fn run(cmd: &Cmd, g: &Global, budget: u128) -> Result<Output> {
    match cmd {
        Cmd::Predicate(PredicateCmd::Analyze { file }) => predicate_analyze(file),
        Cmd::Vanishing(VanishingCmd::Search { file, strategy }) => vanishing_search(file, *strategy),
        Cmd::Charlp(CharlpCmd::Check { file }) => charlp_check(file),
        Cmd::Game(GameCmd::Value { spec, p_grid, q_grid, samples }) => {
            game_value(spec, p_grid.as_deref(), q_grid.as_deref(), *samples, g.seed, budget)
        }
        Cmd::Gap(GapCmd::Sa { config, girth, family }) => gap_sa(config, *girth, *family, g.seed),
        Cmd::Gap(GapCmd::Sdp { config, collapse }) => gap_sdp(config, *collapse, g),
        Cmd::Round(RoundCmd::Sdp { instance, basic, scheme }) => round_sdp_cmd(instance, basic, scheme, g.seed),
        Cmd::Round(RoundCmd::Lp { instance, family, scheme }) => round_lp_cmd(instance, family, scheme, g.seed),
        Cmd::Verify(VerifyCmd::Instance { instance, assignment }) => verify_instance(instance, assignment.as_deref()),
        Cmd::Verify(VerifyCmd::Basic { instance, basic }) => verify_basic(instance, basic, g.tol),
        Cmd::Verify(VerifyCmd::Family { family }) => verify_family(family),
        Cmd::Sa(SaCmd::Build { instance, r }) => sa_build(instance, *r, budget),
        Cmd::Sa(SaCmd::Objective { instance, family }) => sa_objective_cmd(instance, family),
    }
}

fn predicate_analyze(file: &Path) -> Result<Output> {
    let f = Predicate::parse(&read_text(file)?)?;
    let spec = f.fourier();
    let mut rows = vec![
        ("k", f.k().to_string()),
        ("rho", fmt_q(&f.density())),
        ("satisfying", f.count().to_string()),
        ("symmetric", f.is_symmetric().to_string()),
        ("even", f.is_even().to_string()),
    ];
    let coeffs: Vec<(String, String)> =
        (0..1u32 << f.k()).filter(|&s| !spec.get(s).is_zero()).map(|s| (subset_string(s), fmt_q(spec.get(s)))).collect();
    let labels: Vec<String> = coeffs.iter().map(|(s, _)| format!("fhat{s}")).collect();
    for (label, (_, v)) in labels.iter().zip(&coeffs) {
        rows.push((label.as_str(), v.clone()));
    }
    let json = json!({
        "config": {"predicate": f.to_value()},
        "k": f.k(),
        "rho": fmt_q(&f.density()),
        "satisfying": f.count(),
        "symmetric": f.is_symmetric(),
        "even": f.is_even(),
        "fourier": coeffs.iter().map(|(s, v)| json!({"subset": s, "value": v})).collect::<Vec<_>>(),
        "parseval": fmt_q(&spec.parseval_sum()),
    });
    Ok(Output::new(&rows, json, &[file]))
}

fn vanishing_search(file: &Path, strategy: StrategyArg) -> Result<Output> {
    let f = Predicate::parse(&read_text(file)?)?;
    let strategy = match strategy {
        StrategyArg::Pairwise => Strategy::PairwisePoint,
        StrategyArg::PointMasses => Strategy::SatisfyingPointMasses,
        StrategyArg::Symmetrized => {
            let mut seeds: Vec<CubeDistribution> =
                f.satisfying().into_iter().map(|x| CubeDistribution::point_mass(f.k(), x)).collect();
            if let Some(nu) = pairwise_independent_point(&f)? {
                seeds.push(nu);
            }
            Strategy::SymmetrizedOrbits(seeds)
        }
    };
    let (measure, report) = find_vanishing_measure(&f, &strategy)?;
    let rows = vec![
        ("strategy", report.strategy.clone()),
        ("support_size", report.support_size.to_string()),
        ("found", report.found.to_string()),
        ("certificate_verified", report.certificate_verified.map_or("n/a".into(), |b| b.to_string())),
        ("note", report.note.clone()),
    ];
    let mut out = Output::new(&rows, json!({"config": {"predicate": f.to_value(), "strategy": report.strategy}, "report": report}), &[file]);
    if let Some(m) = measure {
        out.files.push(("measure.json".into(), measure_to_json(&f, &m) + "\n"));
    }
    Ok(out)
}

fn charlp_check(file: &Path) -> Result<Output> {
    let f = Predicate::parse(&read_text(file)?)?;
    let config = json!({"predicate": f.to_value()});
    if f.is_symmetric() {
        let c = charlp_symmetric_check(&f)?;
        let verdict = if c.member {
            format!("member; witnesses {} and {}", assignment_string(c.x, f.k()), assignment_string(c.y, f.k()))
        } else if c.min_sum > 0 {
            format!("not a member; all satisfying sums >= {}", c.min_sum)
        } else {
            format!("not a member; all satisfying sums <= {}", c.max_sum)
        };
        let rows = vec![("method", "symmetric".into()), ("member", c.member.to_string()), ("verdict", verdict.clone())];
        return Ok(Output::new(&rows, json!({"config": config, "method": "symmetric", "check": c, "verdict": verdict}), &[file]));
    }
    let support: Vec<CubeDistribution> =
        f.satisfying().into_iter().map(|x| CubeDistribution::point_mass(f.k(), x)).collect();
    let out = charlp_general_search(&f, &support)?;
    let member = out.measure.is_some();
    let verdict = if member { "member on point-mass support".to_string() } else { "not found on point-mass support".to_string() };
    let rows = vec![
        ("method", "point_mass_lp".into()),
        ("member", member.to_string()),
        ("certificate_verified", out.certificate_verified().map_or("n/a".into(), |b| b.to_string())),
        ("verdict", verdict.clone()),
    ];
    let mut o = Output::new(&rows, json!({"config": config, "method": "point_mass_lp", "member": member, "verdict": verdict}), &[file]);
    if let Some(m) = out.measure {
        o.files.push(("bias_measure.json".into(), m.to_json(&f) + "\n"));
    }
    Ok(o)
}

fn game_value(
    path: &Path,
    p_grid: Option<&[u32]>,
    q_grid: Option<&[u32]>,
    samples: Option<usize>,
    seed: Option<u64>,
    budget: u128,
) -> Result<Output> {
    let mut spec = GameSpec::parse(&read_text(path)?)?;
    if let Some(p) = p_grid {
        spec.p_grid = p.to_vec();
    }
    if let Some(q) = q_grid {
        spec.q_grid = q.to_vec();
    }
    if let Some(s) = samples {
        spec.samples = s;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if spec.p_grid.is_empty() || spec.q_grid.is_empty() {
        return Err(Error::Invalid("empty p or q grid".into()));
    }
    let mut qs = spec.q_grid.clone();
    qs.sort_unstable();
    qs.dedup();
    let sets = spec.dev_sets()?;
    let base = spec.config(sets[0].clone(), qs[0]);
    let scan = scan_limits(&base, &sets, &qs, budget)?;
    let config: Value = serde_json::from_str(&spec.to_json())?;
    Ok(Output {
        tsv: scan.to_tsv(),
        json: json!({"config": config, "scan": scan}),
        files: vec![],
        config,
        seed: Some(spec.seed),
        inputs: vec![path.to_path_buf()],
    })
}

fn gap_sa(path: &Path, girth: Option<usize>, family: bool, seed: Option<u64>) -> Result<Output> {
    let mut cfg = SaGapConfig::parse(&read_text(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut inst = generate_sa_instance(&cfg)?;
    let generated = inst.phi.m();
    let mut removed = 0;
    if let Some(g) = girth {
        let (_, report) = prune_girth(&inst.phi, g);
        removed = report.removed.len();
        inst = inst.without(&report.removed)?;
    }
    let active = inst.active_variables().len();
    let slack = chernoff_slack(active.max(1), inst.phi.m().max(1), CHERNOFF_BETA);
    let mut rows = vec![
        ("variables", cfg.num_vars().to_string()),
        ("active_variables", active.to_string()),
        ("constraints_generated", generated.to_string()),
        ("constraints_removed", removed.to_string()),
        ("constraints", inst.phi.m().to_string()),
        ("layers_used", format!("{:?}", layers_used(&inst))),
        ("epsilon_eff", format!("{:.6}", to_f64(&cfg.epsilon) + slack)),
    ];
    let mut files = vec![
        ("instance.json".to_string(), inst.phi.to_json() + "\n"),
        ("provenance.json".to_string(), inst.provenance_json() + "\n"),
    ];
    let mut objective = None;
    if family {
        let ctx = inst.tree_context()?;
        let subsets: Vec<Vec<usize>> = constraint_subsets(&inst.phi).into_iter().collect();
        let fam = assemble_family(&ctx, &subsets, cfg.r)?;
        let (fixed, report) = correct_local_distributions(&fam)?;
        let obj = sa_objective(&inst.phi, &fixed)?;
        rows.push(("already_consistent", report.already_consistent.to_string()));
        rows.push(("sa_objective", fmt_q(&obj)));
        objective = Some(fmt_q(&obj));
        files.push(("family.json".to_string(), fixed.to_json() + "\n"));
    }
    let config: Value = serde_json::from_str(&cfg.to_json())?;
    let json = json!({
        "config": config,
        "constraints": inst.phi.m(),
        "removed": removed,
        "active_variables": active,
        "chernoff_slack": slack,
        "sa_objective": objective,
    });
    let mut out = Output::new(&rows, json, &[path]);
    out.files = files;
    out.seed = Some(cfg.seed);
    Ok(out)
}

fn gap_sdp(path: &Path, collapse: Option<usize>, g: &Global) -> Result<Output> {
    let mut cfg = SdpGapConfig::parse(&read_text(path)?)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let inst = generate_sdp_gap_instance(&cfg)?;
    let rep = verify_basic_solution(&inst.phi, &inst.solution, 5.0 * cfg.epsilon)?;
    let mut rows = vec![
        ("constraints", inst.phi.m().to_string()),
        ("variables", inst.phi.n.to_string()),
        ("attempts", inst.stats.attempts.to_string()),
        ("rejected", inst.stats.rejected.to_string()),
        ("collisions", inst.stats.collisions.to_string()),
        ("frac", fmt_q(&inst.frac_exact())),
        ("pairs", format!("{:.6}", rep.pairs)),
        ("drift", format!("{:.6}", inst.stats.drift)),
    ];
    let mut files = vec![
        ("instance.json".to_string(), inst.phi.to_json() + "\n"),
        ("basic.json".to_string(), inst.solution.to_json() + "\n"),
    ];
    let mut collapsed = Value::Null;
    if let Some(size) = collapse {
        let (phi, dropped) = inst.collapse_to_net(size, cfg.epsilon, cfg.seed)?;
        rows.push(("collapsed_dropped", dropped.to_string()));
        if phi.n <= reslab_core::relax::MAX_BRUTE_FORCE_VARS && phi.m() > 0 {
            let bf = brute_force_opt(&phi)?;
            rows.push(("collapsed_max", fmt_q(&bf.opt)));
            rows.push(("collapsed_min", fmt_q(&bf.min)));
            collapsed = json!({"dropped": dropped, "max": fmt_q(&bf.opt), "min": fmt_q(&bf.min)});
        }
        files.push(("collapsed.json".to_string(), phi.to_json() + "\n"));
    }
    let config: Value = serde_json::from_str(&cfg.to_json())?;
    let json = json!({"config": config, "stats": inst.stats, "basic": rep, "frac": fmt_q(&inst.frac_exact()), "collapsed": collapsed});
    let mut out = Output::new(&rows, json, &[path]);
    out.files = files;
    out.seed = Some(cfg.seed);
    Ok(out)
}

fn rounding_output(rep: &RoundingReport, scheme: &RoundingScheme, inputs: &[&Path]) -> Result<Output> {
    let rows = vec![
        ("scheme", rep.scheme.clone()),
        ("seed", rep.seed.to_string()),
        ("samples", rep.samples.to_string()),
        ("rho", format!("{:.6}", rep.rho)),
        ("expected_exact", rep.expected_exact.clone().unwrap_or_else(|| "n/a".into())),
        ("expected_value", format!("{:.6}", rep.expected_value)),
        ("mc_mean", format!("{:.6}", rep.mc_mean)),
        ("ci_low", format!("{:.6}", rep.ci_low)),
        ("ci_high", format!("{:.6}", rep.ci_high)),
    ];
    let config: Value = serde_json::from_str(&scheme.to_json())?;
    let mut out = Output::new(&rows, json!({"config": config, "report": rep}), inputs);
    let x: String = rep.assignment.iter().map(|&b| if b > 0 { '+' } else { '-' }).collect();
    out.files.push(("assignment.txt".into(), x + "\n"));
    out.seed = Some(scheme.seed);
    Ok(out)
}

fn load_scheme(path: &Path, seed: Option<u64>) -> Result<RoundingScheme> {
    let mut scheme = RoundingScheme::parse(&read_text(path)?)?;
    if let Some(s) = seed {
        scheme.seed = s;
    }
    Ok(scheme)
}

fn round_sdp_cmd(instance: &Path, basic: &Path, scheme: &Path, seed: Option<u64>) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(instance)?)?;
    let sol = BasicSolution::parse(&read_text(basic)?, phi.f.k())?;
    let s = load_scheme(scheme, seed)?;
    let rep = round_sdp(&phi, &sol, &s)?;
    rounding_output(&rep, &s, &[instance, basic, scheme])
}

fn round_lp_cmd(instance: &Path, family: &Path, scheme: &Path, seed: Option<u64>) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(instance)?)?;
    let fam = LocalDistributionFamily::parse(&read_text(family)?)?;
    let s = load_scheme(scheme, seed)?;
    let rep = round_lp(&phi, &fam, &s)?;
    rounding_output(&rep, &s, &[instance, family, scheme])
}

fn verify_instance(path: &Path, assignment: Option<&str>) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(path)?)?;
    if let Some(a) = assignment {
        if a.chars().count() != phi.n {
            return Err(Error::Dimension(format!("assignment has {} values for {} variables", a.chars().count(), phi.n)));
        }
        let bits = parse_assignment(a, phi.n)?;
        let x: Vec<i8> = (0..phi.n).map(|i| if (bits >> i) & 1 == 1 { -1 } else { 1 }).collect();
        let v = estimate_sat(&phi, &x)?;
        let rows = vec![("n", phi.n.to_string()), ("m", phi.m().to_string()), ("sat", fmt_q(&v))];
        return Ok(Output::new(&rows, json!({"config": {"assignment": a}, "sat": fmt_q(&v)}), &[path]));
    }
    let bf = brute_force_opt(&phi)?;
    let rows = vec![
        ("n", phi.n.to_string()),
        ("m", phi.m().to_string()),
        ("max", fmt_q(&bf.opt)),
        ("min", fmt_q(&bf.min)),
        ("mean", fmt_q(&bf.mean())),
    ];
    Ok(Output::new(&rows, json!({"config": Value::Null, "brute_force": bf}), &[path]))
}

fn verify_basic(instance: &Path, basic: &Path, tol: f64) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(instance)?)?;
    let sol = BasicSolution::parse(&read_text(basic)?, phi.f.k())?;
    let rep = verify_basic_solution(&phi, &sol, tol)?;
    let rows = vec![
        ("frac", format!("{:.6}", rep.frac)),
        ("orthogonality", format!("{:e}", rep.orthogonality)),
        ("vector_sum", format!("{:e}", rep.vector_sum)),
        ("singles", format!("{:e}", rep.singles)),
        ("pairs", format!("{:e}", rep.pairs)),
        ("unit_u", format!("{:e}", rep.unit_u)),
        ("passed", rep.passed.to_string()),
    ];
    Ok(Output::new(&rows, json!({"config": {"tol": tol}, "report": rep}), &[instance, basic]))
}

fn verify_family(path: &Path) -> Result<Output> {
    let fam = LocalDistributionFamily::parse(&read_text(path)?)?;
    let rep = verify_consistency(&fam);
    let rows = vec![
        ("exact", rep.exact.to_string()),
        ("max_violation", format!("{:e}", rep.max_violation)),
        ("pairs_checked", rep.pairs_checked.to_string()),
    ];
    Ok(Output::new(&rows, json!({"config": {"r": fam.r}, "report": rep}), &[path]))
}

fn sa_build(path: &Path, r: usize, budget: u128) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(path)?)?;
    let prog = build_sherali_adams(&phi, r, budget)?;
    let (value, fam) = solve_sherali_adams(&prog)?;
    let rows = vec![
        ("r", r.to_string()),
        ("lp_variables", prog.lp.num_vars.to_string()),
        ("lp_constraints", prog.lp.constraints.len().to_string()),
        ("objective", fmt_q(&value)),
    ];
    let mut out = Output::new(&rows, json!({"config": {"r": r}, "objective": fmt_q(&value)}), &[path]);
    out.files.push(("family.json".into(), fam.to_json() + "\n"));
    Ok(out)
}

fn sa_objective_cmd(instance: &Path, family: &Path) -> Result<Output> {
    let phi = CspInstance::parse(&read_text(instance)?)?;
    let fam = LocalDistributionFamily::parse(&read_text(family)?)?;
    let obj = sa_objective(&phi, &fam)?;
    let rep = verify_consistency(&fam);
    let rows = vec![("objective", fmt_q(&obj)), ("consistent", rep.exact.to_string())];
    Ok(Output::new(&rows, json!({"config": Value::Null, "objective": fmt_q(&obj), "consistency": rep}), &[instance, family]))
}
