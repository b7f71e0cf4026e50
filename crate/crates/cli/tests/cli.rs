use std::process::{Command, Output};

fn hyperaz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperaz")).args(args).output().expect("binary runs")
}

fn hyperaz_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperaz"))
        .args(args)
        .env("HYPERAZ_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn beta_recurrence_text() {
    let o = hyperaz(&["az-direct", "x^n", "--var", "x=0:1"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("telescoper: (-n - 1) + (n + 2)*N"), "{}", s);
    assert!(s.contains("homogeneous: yes"));
}

#[test]
fn json_document() {
    let o = hyperaz(&["az", "x^n*(1-x)^n", "--var", "x=0:1", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["mode"], "discrete");
    assert_eq!(v["L"], 1);
    assert_eq!(v["telescoper"][1]["coeff"], "4*n + 6");
    assert_eq!(v["homogeneous"], true);
    assert!(v.get("stats").is_some());
}

#[test]
fn input_document_and_flags() {
    let dir = std::env::temp_dir().join(format!("hyperaz-doc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("gauss.json");
    std::fs::write(
        &path,
        r#"{"integrand": "exp(-x*t^2)", "param": "x", "mode": "continuous",
            "bounds": [{"name": "t", "lower": "-inf", "upper": "inf"}],
            "options": {"L_max": 2}}"#,
    )
    .unwrap();
    let o = hyperaz(&["caz", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("telescoper: 1 + 2*x*D_x"), "{}", stdout(&o));
    // Flags override the document.
    let o = hyperaz(&["caz", "--input", path.to_str().unwrap(), "--var", "t=0:1"]);
    assert!(stdout(&o).contains("homogeneous: no"), "{}", stdout(&o));
}

#[test]
fn tree_and_expansion() {
    let o = hyperaz(&["caz-integrate", "exp(-x*t)", "--var", "t=0:1", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tree"]["rhs"].as_array().unwrap().len(), 2);

    let o = hyperaz(&["expand", "exp(-x*t)", "--var", "t=0:1", "--mode", "continuous", "--order", "3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ep^0: 1 - 1/2*x + 1/6*x^2 - 1/24*x^3 + O(x^4)"), "{}", stdout(&o));

    let o = hyperaz(&["expand", "x^(n+ep)", "--var", "x=0:1", "--mode", "discrete", "--eps", "0:1", "--order", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ep^1: n: 0=-1, 1=-1/4, 2=-1/9"), "{}", stdout(&o));
}

#[test]
fn init_file() {
    let dir = std::env::temp_dir().join(format!("hyperaz-init-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.init");
    std::fs::write(&good, "# ep^0\n0 0 1 -1/2\n").unwrap();
    let o = hyperaz(&["expand", "exp(-x*t)", "--var", "t=0:1", "--mode", "continuous", "--init", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let bad = dir.join("bad.init");
    std::fs::write(&bad, "0 0 1/23\n").unwrap();
    let o = hyperaz(&["expand", "exp(-x*t)", "--var", "t=0:1", "--mode", "continuous", "--init", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 7);
    let o = hyperaz(&["expand", "exp(-x*t)", "--var", "t=0:1", "--mode", "continuous", "--init", "/nonexistent/file"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_command() {
    let o = hyperaz(&["verify", "x^n", "--var", "x=0:1", "--mode", "discrete", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["verify"]["residual"].as_f64().unwrap() < 1e-10);
    assert!(v["verify"]["perturbed_residual"].as_f64().unwrap() > 1e-2);
}

#[test]
fn exit_codes() {
    // 1: usage
    assert_eq!(code(&hyperaz(&["bogus"])), 1);
    assert_eq!(code(&hyperaz(&["az", "x^n"])), 1);
    assert_eq!(code(&hyperaz(&["expand", "x^n", "--var", "x=0:1"])), 1);
    assert_eq!(code(&hyperaz(&["az", "x^n", "--var", "x=0"])), 1);
    assert_eq!(code(&hyperaz(&["--help"])), 0);
    // 2: parse
    assert_eq!(code(&hyperaz(&["az", "x^n*(", "--var", "x=0:1"])), 2);
    assert_eq!(code(&hyperaz(&["az", "log(x)^n", "--var", "x=0:1"])), 2);
    assert_eq!(code(&hyperaz(&["caz", "exp(exp(x*t))", "--var", "t=0:1"])), 2);
    // 3: no telescoper within the bounds
    assert_eq!(code(&hyperaz(&["az-direct", "x^n", "--var", "x=0:1", "--lmax", "0", "--degmax", "0"])), 3);
    // 4: boundary term that cannot be evaluated
    assert_eq!(code(&hyperaz(&["caz-integrate", "exp(x*t)", "--var", "t=0:inf"])), 4);
    // 5: no power series solution
    assert_eq!(code(&hyperaz(&["expand", "exp(-x*t^2)", "--var", "t=0:inf", "--mode", "continuous"])), 5);
    // 6: numeric failure
    assert_eq!(code(&hyperaz(&["verify", "x^n", "--var", "x=0:1", "--mode", "discrete", "--at=-1"])), 6);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["caz-direct", "exp(-x*(w1*w2))", "--var", "w1=-1:1", "--var", "w2=-1:1", "--format", "json"];
    let a = hyperaz_threads(&args, "1");
    let b = hyperaz_threads(&args, "4");
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
