use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FINITE: &str = r#"
statistics = "fermi"
t_max = 1e5
[lattice]
sites = 6
eps_s = 2.0
gamma = 0.5
[reservoirs]
beta = 1.0
omega = [0.2, 0.2, 0.05]
mu_l = 1.2
mu_r = 0.7
"#;

const STATIONARY: &str = r#"
statistics = "fermi"
t_max = 20.0
[lattice]
sites = 6
eps_s = 2.0
gamma = 0.5
[reservoirs]
n_l = 0.310
n_r = 0.214
[grid]
kind = "linear"
points = 41
"#;

fn qcme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcme")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Csv {
    header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Csv {
        let text = fs::read_to_string(path).unwrap();
        let mut header = Vec::new();
        let mut body = Vec::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix('#') {
                assert!(body.is_empty(), "comment after the column line");
                header.push(h.to_string());
            } else {
                body.push(line.split(',').map(str::to_string).collect::<Vec<_>>());
            }
        }
        let columns = body.remove(0);
        Csv { header, columns, rows: body }
    }

    fn col(&self, name: &str) -> usize {
        self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    fn num(&self, row: usize, name: &str) -> f64 {
        self.rows[row][self.col(name)].parse().unwrap()
    }

    fn header_value(&self, key: &str) -> f64 {
        let prefix = format!("   {key} = ");
        self.header
            .iter()
            .find_map(|h| h.strip_prefix(&prefix))
            .unwrap_or_else(|| panic!("no header entry {key}"))
            .parse()
            .unwrap()
    }

    fn config(&self) -> String {
        let start = self.header.iter().position(|h| h == " [config]").unwrap();
        self.header[start + 1..]
            .iter()
            .take_while(|h| h.starts_with("   "))
            .map(|h| format!("{}\n", &h[3..]))
            .collect()
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn spectrum_reports_the_slowest_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[lattice]\nsites = 6\neps_s = 2.0\ngamma_l = 0.5\ngamma_r = 0.5\n");
    let out_path = dir.path().join("spec.csv");
    assert_exit(&qcme(&["spectrum", "--config", s(&cfg), "--out", s(&out_path)]), 0);
    let csv = Csv::read(&out_path);
    assert_eq!(csv.rows.len(), 6);
    let gmin = csv.num(0, "gamma");
    assert!((gmin - 0.0530209).abs() < 1e-6, "{gmin}");
    assert_eq!(csv.header_value("gamma_min"), gmin);
    let side = json(&dir.path().join("spec.json"));
    assert_eq!(side["summary"]["gamma_min"].as_f64().unwrap(), gmin);
    assert_eq!(side["tau_rel_kind"]["kind"], "finite");
}

#[test]
fn equilibrium_and_derived_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", FINITE);
    let out_path = dir.path().join("eq.csv");
    assert_exit(&qcme(&["equilibrium", "--config", s(&cfg), "--out", s(&out_path)]), 0);
    let csv = Csv::read(&out_path);
    assert_eq!(csv.header_value("big_n_l0").round(), 1276.0);
    assert_eq!(csv.header_value("big_n_r0").round(), 838.0);
    assert_eq!(csv.header_value("big_n0").round(), 2114.0);
    assert!((csv.header_value("e0") - 0.225).abs() < 1e-15);
    let n_l0 = csv.header_value("n_l0");
    assert!((n_l0 - 0.310).abs() < 5e-4, "{n_l0}");

    let value = |q: &str| -> f64 {
        let row = csv.rows.iter().find(|r| r[0] == q).unwrap();
        row[1].parse().unwrap()
    };
    assert!((value("mu_inf") - 0.972).abs() < 5e-4);
    assert!((value("n_inf") - 0.263).abs() < 5e-4);
    assert_eq!(value("N_inf").round(), 1056.0);
    let alpha = value("alpha_exact");
    assert!((alpha / 1.032e-4 - 1.0).abs() < 5e-3);
    assert!((value("alpha_approx") / alpha - 1.0).abs() < 1e-2);
}

#[test]
fn stationary_run_without_reservoir_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", STATIONARY);
    let out_path = dir.path().join("st.csv");
    assert_exit(&qcme(&["stationary", "--config", s(&cfg), "--out", s(&out_path)]), 0);
    let csv = Csv::read(&out_path);
    assert_eq!(csv.rows.len(), 41);
    for r in 0..csv.rows.len() {
        assert_eq!(csv.num(r, "n_L"), 0.310);
        assert_eq!(csv.num(r, "n_R"), 0.214);
        for empty in ["mu_L", "mu_R", "N_L", "N_R", "conservation_residual"] {
            assert_eq!(csv.rows[r][csv.col(empty)], "");
        }
    }
    assert_eq!(csv.num(40, "t"), 20.0);
    assert!(csv.num(40, "n_1") > 0.2);
    assert_eq!(csv.columns.len(), 8 + 6 + 5 + 1 + 10 + 1);
    assert!(!csv.columns.iter().any(|c| c.starts_with("var_")));
}

#[test]
fn tpdm_flag_adds_variance_columns() {
    let dir = TempDir::new().unwrap();
    let text = STATIONARY.replace("sites = 6", "sites = 3").replace("\"fermi\"", "\"bose\"");
    let cfg = write(&dir, "c.toml", &text);
    let out_path = dir.path().join("t.csv");
    assert_exit(&qcme(&["stationary", "--config", s(&cfg), "--out", s(&out_path), "--tpdm"]), 0);
    let csv = Csv::read(&out_path);
    for l in 0..csv.rows.len() {
        let n = csv.num(l, "n_1");
        let var = csv.num(l, "var_n_1");
        // product-state Bose statistics for the edge site
        assert!(var >= n * (1.0 + n) - 1e-6, "{var} vs {n}");
    }
    assert!(csv.columns.contains(&"var_j_2_3".to_string()));
    assert!(csv.config().contains("tpdm = true"));
}

#[test]
fn finite_run_writes_onset_and_fits() {
    let dir = TempDir::new().unwrap();
    let text = format!("{FINITE}[simulation]\nfit = true\n");
    let cfg = write(&dir, "c.toml", &text);
    let out_path = dir.path().join("f.csv");
    let out = qcme(&[
        "simulate", "--config", s(&cfg), "--out", s(&out_path), "--t-max", "3000", "--grid", "linear",
    ]);
    assert_exit(&out, 0);
    let csv = Csv::read(&out_path);
    assert_eq!(csv.rows.len(), 1001);
    let residual: f64 = (0..csv.rows.len())
        .map(|r| csv.num(r, "conservation_residual").abs())
        .fold(0.0, f64::max);
    assert!(residual < 1e-10);
    let side = json(&dir.path().join("f.json"));
    let t_star = side["summary"]["t_star"].as_f64().unwrap();
    assert!(t_star > 100.0 && t_star < 200.0, "{t_star}");
    let fits = side["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 4);
    let j12 = fits.iter().find(|f| f["quantity"] == "j_1_2").unwrap();
    assert_eq!(j12["class"], "alpha");
    assert_eq!(side["config"]["t_max"].as_f64(), Some(3000.0));
    assert_eq!(side["rows"].as_u64(), Some(1001));
}

#[test]
fn identical_runs_are_bit_identical_and_rerunnable() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", FINITE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert_exit(&qcme(&["simulate", "--config", s(&cfg), "--out", s(p), "--t-max", "50"]), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );

    // the echoed configuration reproduces the file on its own
    let echoed = write(&dir, "echo.toml", &Csv::read(&a).config());
    let c = dir.path().join("c.csv");
    assert_exit(&qcme(&["simulate", "--config", s(&echoed), "--out", s(&c)]), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", STATIONARY);
    let out_path = dir.path().join("st.csv");
    assert_exit(&qcme(&["stationary", "--config", s(&cfg), "--out", s(&out_path)]), 0);
    let csv = Csv::read(&out_path);
    for row in &csv.rows {
        for cell in row.iter().filter(|c| !c.is_empty()) {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), *cell);
        }
    }
}

#[test]
fn ness_and_shorttime_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", STATIONARY);
    let n_path = dir.path().join("n.csv");
    assert_exit(&qcme(&["ness", "--config", s(&cfg), "--out", s(&n_path)]), 0);
    let csv = Csv::read(&n_path);
    assert_eq!(csv.rows.len(), 6);
    let j = csv.header_value("j_inf");
    assert!(j > 0.0);
    assert_eq!(csv.num(0, "j_to_next"), j);
    assert_eq!(csv.rows[5][csv.col("j_to_next")], "");
    assert!(csv.num(0, "n") > csv.num(2, "n") && csv.num(2, "n") > csv.num(5, "n"));

    let st_path = dir.path().join("st.csv");
    assert_exit(&qcme(&["shorttime", "--config", s(&cfg), "--out", s(&st_path)]), 0);
    let csv = Csv::read(&st_path);
    assert_eq!(csv.rows.len(), 21);
    for r in 0..csv.rows.len() {
        let p = csv.num(r, "leading_power") as usize;
        for q in 1..=3 {
            let mag = csv.num(r, &format!("c{q}_re")).hypot(csv.num(r, &format!("c{q}_im")));
            if q < p {
                assert_eq!(mag, 0.0);
            } else if q == p {
                assert!(mag > 0.0);
            }
        }
    }
    let bad = write(&dir, "bad.toml", &format!("{STATIONARY}[shorttime]\norder = 4\n"));
    assert_exit(&qcme(&["shorttime", "--config", s(&bad)]), 2);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = TempDir::new().unwrap();
    let text = format!("{FINITE}[sweep]\nkind = \"spectrum\"\nsites = [5, 10, 15, 20, 25]\ngamma = [0.1, 0.3, 0.5, 0.7, 0.9]\n");
    let cfg = write(&dir, "c.toml", &text);
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    assert_exit(&qcme(&["sweep", "--config", s(&cfg), "--out", s(&one), "--workers", "1"]), 0);
    assert_exit(&qcme(&["sweep", "--config", s(&cfg), "--out", s(&many), "--workers", "4"]), 0);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&many).unwrap());

    let csv = Csv::read(&one);
    assert_eq!(csv.rows.len(), 25);
    let tau = |r: usize| csv.num(r, "tau_rel");
    for m in 0..5 {
        for g in 0..4 {
            assert!(tau(5 * m + g) > tau(5 * m + g + 1), "tau_rel must fall with gamma");
        }
    }
    for g in 0..5 {
        for m in 0..4 {
            assert!(tau(5 * m + g) < tau(5 * (m + 1) + g), "tau_rel must grow with M");
        }
    }
    assert!(csv.num(0, "alpha_exact") > 0.0);
}

#[test]
fn simulation_sweep_runs_each_point() {
    let dir = TempDir::new().unwrap();
    let text = format!("{STATIONARY}[sweep]\nkind = \"stationary\"\nsites = [2, 4]\ngamma = [0.3, 0.6]\n");
    let cfg = write(&dir, "c.toml", &text);
    let out_path = dir.path().join("w.csv");
    assert_exit(&qcme(&["sweep", "--config", s(&cfg), "--out", s(&out_path), "--workers", "2"]), 0);
    let csv = Csv::read(&out_path);
    assert_eq!(csv.rows.len(), 4);
    for r in 0..4 {
        assert!(csv.num(r, "accepted_steps") > 0.0);
        assert!(csv.num(r, "j_1_2") > 0.0);
        assert_eq!(csv.rows[r][csv.col("alpha_exact")], "");
    }
}

#[test]
fn empty_document_lists_required_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "");
    let out = qcme(&["simulate", "--config", s(&cfg)]);
    assert_exit(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[config]"));
    for key in ["statistics", "lattice.sites", "lattice.eps_s", "reservoirs.beta", "t_max"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn config_errors_name_the_key() {
    let dir = TempDir::new().unwrap();
    let unknown = write(&dir, "u.toml", &FINITE.replace("gamma = 0.5", "gamma = 0.5\ngama = 1"));
    let out = qcme(&["equilibrium", "--config", s(&unknown)]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice.gama"));

    let bose = write(&dir, "b.toml", &FINITE.replace("\"fermi\"", "\"bose\""));
    let out = qcme(&["equilibrium", "--config", s(&bose)]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reservoirs.mu_l"));

    let both = write(&dir, "p.toml", &FINITE.replace("mu_r = 0.7", "mu_r = 0.7\nn_l = 0.3\nn_r = 0.2"));
    assert_exit(&qcme(&["equilibrium", "--config", s(&both)]), 2);

    let typed = write(&dir, "t.toml", &FINITE.replace("sites = 6", "sites = \"six\""));
    let out = qcme(&["spectrum", "--config", s(&typed)]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice.sites"));
}

#[test]
fn io_and_numerical_failures_have_their_own_codes() {
    let dir = TempDir::new().unwrap();
    assert_exit(&qcme(&["spectrum", "--config", "/definitely/not/here.toml"]), 4);
    let cfg = write(&dir, "c.toml", STATIONARY);
    let missing_dir = dir.path().join("no").join("such").join("out.csv");
    assert_exit(&qcme(&["stationary", "--config", s(&cfg), "--out", s(&missing_dir)]), 4);

    let sloppy = write(&dir, "s.toml", FINITE);
    let out = qcme(&[
        "simulate", "--config", s(&sloppy), "--t-max", "100", "--rtol", "1e-2", "--atol", "1e-2", "--grid", "linear",
    ]);
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[numerical]"));
}
