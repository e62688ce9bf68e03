use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const NET: &str = "<NUMBER OF ZONES> 4
<NUMBER OF NODES> 4
<FIRST THRU NODE> 1
<NUMBER OF LINKS> 5
<END OF METADATA>

~ init term capacity length fftt b power speed toll type ;
1 2 300 1 2 0.15 4 0 0 1 ;
1 3 200 1 3 0.15 4 0 0 1 ;
2 4 250 1 2 0.15 4 0 0 1 ;
3 4 300 1 1 0.15 4 0 0 1 ;
2 3 100 1 1 0.15 4 0 0 1 ;
";

const TRIPS: &str = "<NUMBER OF ZONES> 4
<TOTAL OD FLOW> 600
<END OF METADATA>

Origin 1
    4 : 400.0;    3 : 100.0;
Origin 2
    4 : 100.0;
";

fn wardrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wardrop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_inputs(dir: &Path, trips: &str) -> (PathBuf, PathBuf) {
    let net = dir.join("net.tntp");
    let t = dir.join("trips.tntp");
    fs::write(&net, NET).unwrap();
    fs::write(&t, trips).unwrap();
    (net, t)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sioux_falls(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/SiouxFalls")
        .join(file)
}

/// `j,beta` rows after the `---` separator.
fn betas(result: &str) -> Vec<f64> {
    result
        .split("---")
        .nth(1)
        .unwrap()
        .lines()
        .skip(2)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn assign_sioux_falls() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = wardrop(&[
        "assign",
        "--net",
        s(&sioux_falls("SiouxFalls_net.tntp")),
        "--trips",
        s(&sioux_falls("SiouxFalls_trips.tntp")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let flows = fs::read_to_string(out.join("flows.csv")).unwrap();
    assert_eq!(flows.lines().count(), 1 + 76 * 2);
    let stats = fs::read_to_string(out.join("stats.txt")).unwrap();
    assert!(stats.contains("iterations = 1000"));
}

#[test]
fn assign_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (net, trips) = write_inputs(tmp.path(), TRIPS);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = wardrop(&[
            "assign",
            "--net",
            s(&net),
            "--trips",
            s(&trips),
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (
            fs::read(out.join("flows.csv")).unwrap(),
            fs::read(out.join("stats.txt")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn zero_demand_assigns_nothing() {
    let tmp = TempDir::new().unwrap();
    let (net, trips) = write_inputs(
        tmp.path(),
        "<NUMBER OF ZONES> 4\n<END OF METADATA>\nOrigin 1\n 4 : 0.0;\n",
    );
    let out = tmp.path().join("out");
    let o = wardrop(&[
        "assign",
        "--net",
        s(&net),
        "--trips",
        s(&trips),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let flows = fs::read_to_string(out.join("flows.csv")).unwrap();
    assert!(flows.lines().skip(1).all(|l| l.ends_with(",0")), "{flows}");
    let stats = fs::read_to_string(out.join("stats.txt")).unwrap();
    assert!(stats.contains("final_rg = 0e0"), "{stats}");
}

#[test]
fn missing_network_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere.tntp");
    let o = wardrop(&["assign", "--net", s(&missing), "--trips", s(&missing)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nowhere.tntp"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&wardrop(&["frobnicate"])), 1);
    assert_eq!(code(&wardrop(&["assign", "--bogus"])), 1);
    assert_eq!(code(&wardrop(&["--help"])), 0);
    assert_eq!(code(&wardrop(&["assign"])), 1);

    let tmp = TempDir::new().unwrap();
    let (net, trips) = write_inputs(tmp.path(), TRIPS);
    let o = wardrop(&[
        "estimate",
        "--net",
        s(&net),
        "--trips",
        s(&trips),
        "--c",
        "0",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("kernel parameter"));
}

#[test]
fn estimate_from_constant_costs() {
    let tmp = TempDir::new().unwrap();
    let net = tmp.path().join("net.tntp");
    fs::write(
        &net,
        "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 2 100 1 4 0.15 4 0 0 1 ;\n",
    )
    .unwrap();
    let trips = tmp.path().join("trips.tntp");
    fs::write(
        &trips,
        "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 2 : 50.0;\n",
    )
    .unwrap();
    let flows = tmp.path().join("flows.csv");
    fs::write(&flows, "link_index,class_index,flow\n0,0,40\n0,1,10\n").unwrap();
    let out = tmp.path().join("out");
    let o = wardrop(&[
        "estimate",
        "--net",
        s(&net),
        "--trips",
        s(&trips),
        "--flows",
        s(&flows),
        "--out",
        s(&out),
        "--n",
        "1",
        "--c",
        "1",
        "--gamma",
        "0.01",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = betas(&fs::read_to_string(out.join("result.txt")).unwrap());
    assert_eq!(b.len(), 2);
    assert_eq!(b[0], 1.0);
    assert!(b[1].abs() < 1e-6, "{b:?}");
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 102);
    assert_eq!(curve.lines().nth(1).unwrap(), "0,,1");
}

#[test]
fn flows_of_the_wrong_shape_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let (net, trips) = write_inputs(tmp.path(), TRIPS);
    let flows = tmp.path().join("flows.csv");
    fs::write(&flows, "link_index,class_index,flow\n0,0,1\n").unwrap();
    let o = wardrop(&[
        "estimate",
        "--net",
        s(&net),
        "--trips",
        s(&trips),
        "--flows",
        s(&flows),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_curve_per_grid_point() {
    let tmp = TempDir::new().unwrap();
    write_inputs(tmp.path(), TRIPS);
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        r#"
network = "net.tntp"
trips = "trips.tntp"
output = "sweep"
truth = "bpr015"

[classes]
theta = [1.0, 2.0]
t0_multiplier = [1.0, 1.1]
demand_share = [0.8, 0.2]

[msa]
epsilon = 1e-6
max_iters = 500

[estimation]
degree = [2, 3]
kernel_c = [1.5]
gamma = [0.01, 100.0]
slack_norm = "l1"
grouping = "origin"
curve_points = 101
"#,
    )
    .unwrap();
    let o = wardrop(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("sweep");
    let manifest = fs::read_to_string(dir.join("manifest.csv")).unwrap();
    let rows: Vec<&str> = manifest.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "{manifest}");
    for (n, g) in [(2, "0.01"), (2, "100"), (3, "0.01"), (3, "100")] {
        let name = format!("curve_n{n}_c1.5_g{g}.csv");
        let row = rows
            .iter()
            .find(|r| r.starts_with(&name))
            .expect("row in manifest");
        assert!(row.contains(",ok,"), "{row}");
        let curve = fs::read_to_string(dir.join(&name)).unwrap();
        assert_eq!(curve.lines().nth(1).unwrap(), "0,1,1");
    }

    let o = wardrop(&[
        "sweep",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("again")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(dir.join("curve_n3_c1.5_g0.01.csv")).unwrap(),
        fs::read(tmp.path().join("again/curve_n3_c1.5_g0.01.csv")).unwrap()
    );
}

#[test]
fn empty_sweep_grid_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    write_inputs(tmp.path(), TRIPS);
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "network = \"net.tntp\"\ntrips = \"trips.tntp\"\n[estimation]\ndegree = []\nkernel_c = [1.5]\ngamma = [0.01]\nslack_norm = \"l1\"\ngrouping = \"origin\"\ncurve_points = 101\n",
    )
    .unwrap();
    let o = wardrop(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}
