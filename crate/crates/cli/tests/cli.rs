use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fwbnb::problems::generators::GeometricNetworkParams;
use fwbnb::problems::oedp::numerical_rank;
use fwbnb_cli::schema::{CriterionSpec, InstanceFile};
use fwbnb_cli::{
    generate, generate_to, read_trace, GenerateSpec, GipPair, SolutionFile, EXIT_ERROR, EXIT_LIMIT, EXIT_OK,
    SOLUTION_FILE, TRACE_FILE,
};
use nalgebra::DMatrix;

fn fwbnb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fwbnb"))
}

fn run_cli(instance: &Path, out: &Path, extra: &[&str]) -> Output {
    fwbnb()
        .arg("run")
        .arg(instance)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_solution(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(SOLUTION_FILE)).unwrap()).unwrap()
}

fn assert_trace_monotone(out: &Path) -> usize {
    let rows = read_trace(&out.join(TRACE_FILE)).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].0 >= w[0].0, "time went backwards");
        assert!(w[1].1 >= w[0].1, "node count went backwards");
        assert!(w[1].2 >= w[0].2, "lb decreased: {} -> {}", w[0].2, w[1].2);
        if let (Some(a), Some(b)) = (w[0].3, w[1].3) {
            assert!(b <= a, "ub increased: {a} -> {b}");
        }
        assert!(!(w[0].3.is_some() && w[1].3.is_none()), "incumbent disappeared");
    }
    rows.len()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn tiny_cube_quadratic_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let q = [[2.0, 0.6], [0.6, 1.0]];
    let c = [1.4, 2.3];
    let inst = write(
        dir.path(),
        "cube.json",
        r#"{
            "kind": "cube_quadratic",
            "q": [[2.0, 0.6], [0.6, 1.0]],
            "c": [1.4, 2.3],
            "lower": [0, 0],
            "upper": [3, 3],
            "settings": {"tolerances.rel_gap": 0.0, "tolerances.abs_gap": 1e-9}
        }"#,
    );
    let out = dir.path().join("out");
    let o = run_cli(&inst, &out, &[]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("cube_quadratic: optimal"), "{}", stdout(&o));

    let f = |x: [f64; 2]| {
        let d = [x[0] - c[0], x[1] - c[1]];
        0.5 * (0..2).map(|i| (0..2).map(|j| d[i] * q[i][j] * d[j]).sum::<f64>()).sum::<f64>()
    };
    let (best_x, best) = (0..4)
        .flat_map(|a| (0..4).map(move |b| [a as f64, b as f64]))
        .map(|x| (x, f(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let sol = read_solution(&out);
    assert_eq!(sol["status"], "optimal");
    assert!((sol["objective"].as_f64().unwrap() - best).abs() < 1e-6);
    let x: Vec<f64> = serde_json::from_value(sol["x"].clone()).unwrap();
    assert_eq!(x, best_x.to_vec());
    assert_trace_monotone(&out);
}

#[test]
fn petersen_pair_is_certified_isomorphic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("petersen.json");
    let g = fwbnb().args(["generate", "gip", "--pair", "petersen", "--out"]).arg(&inst).output().unwrap();
    assert_eq!(g.status.code(), Some(EXIT_OK));
    let out = dir.path().join("out");
    let o = run_cli(&inst, &out, &[]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(stdout(&o).starts_with("graph_isomorphism: isomorphic "), "{}", stdout(&o));
    let sol: SolutionFile = serde_json::from_value(read_solution(&out)).unwrap();
    assert_eq!(sol.verdict.as_deref(), Some("isomorphic"));
    assert!(sol.objective.unwrap() <= 1e-8);
    assert_trace_monotone(&out);
}

#[test]
fn tiny_time_limit_exits_with_limit_code_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        GenerateSpec::GraphIsomorphism {
            n: 30,
            degree: 3,
            pair: GipPair::Independent,
        },
        GenerateSpec::Oedp {
            m: 60,
            n: 8,
            budget: 16,
            upper: 2,
            criterion: CriterionSpec::D,
        },
    ];
    for (i, spec) in cases.iter().enumerate() {
        let inst = dir.path().join(format!("large{i}.json"));
        generate_to(spec, 11, &inst).unwrap();
        let out = dir.path().join(format!("out{i}"));
        let o = run_cli(&inst, &out, &["--time-limit", "0.001"]);
        assert_eq!(o.status.code(), Some(EXIT_LIMIT), "{}", stdout(&o));
        assert!(assert_trace_monotone(&out) > 0);
    }
}

#[test]
fn node_limit_and_set_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("oedp.json");
    let spec = GenerateSpec::Oedp {
        m: 30,
        n: 5,
        budget: 10,
        upper: 2,
        criterion: CriterionSpec::A,
    };
    generate_to(&spec, 5, &inst).unwrap();
    let out = dir.path().join("out");
    let o = run_cli(
        &inst,
        &out,
        &["--node-limit", "3", "--set", "frank_wolfe.variant=away", "--set", "heuristic.follow_gradient_prob=0.5"],
    );
    let sol: SolutionFile = serde_json::from_value(read_solution(&out)).unwrap();
    assert!(sol.nodes <= 3);
    if sol.status == "node_limit" {
        assert_eq!(o.status.code(), Some(EXIT_LIMIT));
    }
    assert_trace_monotone(&out);

    let bad = run_cli(&inst, &out, &["--set", "frank_wolfe.speed=3"]);
    assert_eq!(bad.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown setting `frank_wolfe.speed`"));
}

#[test]
fn schema_errors_exit_with_error_and_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (r#"{"kind": "graph_isomorphism", "a": [[0]], "b": [[0]], "colour": 1}"#, "colour"),
        (r#"{"kind": "oedp", "a": [[1.0, 0.0], [0.0, true]], "budget": 2, "upper": [1, 1], "criterion": "D"}"#, "a[1][1]"),
        (r#"{"kind": "knapsack"}"#, "knapsack"),
        (r#"{"kind": "cube_quadratic", "q": [[1.0]], "c": [0.0], "lower": [0], "upper": ["2"]}"#, "upper[0]"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let inst = write(dir.path(), &format!("bad{i}.json"), text);
        let o = run_cli(&inst, &out, &[]);
        assert_eq!(o.status.code(), Some(EXIT_ERROR));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "`{needle}` missing from: {err}");
    }
}

#[test]
fn generate_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let o = fwbnb()
            .args(["generate", "gip", "--n", "10", "--seed", seed, "--out"])
            .arg(&p)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(EXIT_OK));
        std::fs::read(p).unwrap()
    };
    let a = gen("a.json", "7");
    let b = gen("b.json", "7");
    let c = gen("c.json", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn generate_rejects_invalid_sizes() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["gip", "--n", "7", "--degree", "3"][..],
        &["oedp", "--m", "3", "--n", "5"],
        &["cube", "--n", "0"],
        &["nd", "--nodes", "1"],
    ] {
        let o = fwbnb()
            .arg("generate")
            .args(args)
            .arg("--out")
            .arg(dir.path().join("x.json"))
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(EXIT_ERROR), "{args:?}");
    }
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn generated_oedp_has_full_column_rank_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("oedp.json");
    let spec = GenerateSpec::Oedp {
        m: 60,
        n: 8,
        budget: 16,
        upper: 1,
        criterion: CriterionSpec::D,
    };
    generate_to(&spec, 2, &p).unwrap();
    let InstanceFile::Oedp(f) = InstanceFile::load(&p).unwrap() else {
        panic!("wrong kind");
    };
    let a = DMatrix::from_fn(60, 8, |i, j| f.a[i][j]);
    assert_eq!(numerical_rank(&a), 8);
}

fn reachable(n: usize, arcs: &[(usize, usize)], from: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(t, h) in arcs {
            if t == u && !seen[h] {
                seen[h] = true;
                queue.push_back(h);
            }
        }
    }
    seen
}

#[test]
fn generated_networks_route_every_demand_over_existing_arcs() {
    for seed in 0..20 {
        let params = GeometricNetworkParams {
            num_nodes: 5,
            radius: 0.2,
            num_candidates: 3,
            num_demands: 4,
            num_destinations: 2,
        };
        let InstanceFile::NetworkDesign(f) = generate(&GenerateSpec::NetworkDesign(params), seed).unwrap() else {
            panic!("wrong kind");
        };
        assert_eq!(f.num_nodes, 5);
        let arcs: Vec<(usize, usize)> = f.existing_arcs.iter().map(|a| (a.tail, a.head)).collect();
        for d in &f.demands {
            assert!(reachable(5, &arcs, d.source)[d.dest], "seed {seed}: {} -> {}", d.source, d.dest);
        }
    }
}

#[test]
fn generate_load_serialize_round_trips() {
    let specs = [
        GenerateSpec::CubeQuadratic { n: 4, width: 2 },
        GenerateSpec::NetworkDesign(GeometricNetworkParams::default()),
        GenerateSpec::GraphIsomorphism {
            n: 12,
            degree: 4,
            pair: GipPair::Isomorphic,
        },
        GenerateSpec::GraphIsomorphism {
            n: 10,
            degree: 3,
            pair: GipPair::Petersen,
        },
        GenerateSpec::Oedp {
            m: 15,
            n: 3,
            budget: 5,
            upper: 2,
            criterion: CriterionSpec::A,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, spec) in specs.iter().enumerate() {
        let p = dir.path().join(format!("{i}.json"));
        generate_to(spec, 42 + i as u64, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let loaded = InstanceFile::load(&p).unwrap();
        assert_eq!(loaded.to_json(), text);
        assert_eq!(InstanceFile::from_json(&loaded.to_json()).unwrap(), loaded);
    }
}

#[test]
fn every_generated_kind_solves_with_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let specs = [
        GenerateSpec::CubeQuadratic { n: 3, width: 3 },
        GenerateSpec::NetworkDesign(GeometricNetworkParams {
            num_nodes: 5,
            radius: 0.4,
            num_candidates: 3,
            num_demands: 3,
            num_destinations: 2,
        }),
        GenerateSpec::GraphIsomorphism {
            n: 8,
            degree: 3,
            pair: GipPair::Isomorphic,
        },
        GenerateSpec::Oedp {
            m: 10,
            n: 3,
            budget: 4,
            upper: 1,
            criterion: CriterionSpec::D,
        },
    ];
    for (i, spec) in specs.iter().enumerate() {
        let inst = dir.path().join(format!("{i}.json"));
        generate_to(spec, 3, &inst).unwrap();
        let out = dir.path().join(format!("out{i}"));
        let o = run_cli(&inst, &out, &["--seed", "9"]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stdout(&o));
        assert_eq!(stdout(&o).lines().count(), 1);
        assert!(assert_trace_monotone(&out) > 0);
        let header = std::fs::read_to_string(out.join(TRACE_FILE)).unwrap();
        assert!(header.starts_with("time_s,nodes,lb,ub\n"));
    }
}
