use std::path::Path;
use std::process::{Command, Output};

fn attrfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrfuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = attrfuse(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path) {
    ok(&[
        "generate",
        "--nodes",
        "5",
        "--samples",
        "800",
        "--noise",
        "0.2",
        "--local-missing",
        "0.1",
        "--seed",
        "3",
        "--out-dir",
        p(dir),
    ]);
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d);
    for f in ["catalog.csv", "labels.csv", "states.txt", "truth.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let catalog = d.join("catalog.csv");
    let labels = d.join("labels.csv");
    let bundle = d.join("model.json");
    let tree = ok(&[
        "train",
        "--catalog",
        p(&catalog),
        "--labels",
        p(&labels),
        "--target",
        "category",
        "--states",
        p(&d.join("states.txt")),
        "--eta",
        "4",
        "--seed",
        "1",
        "--out",
        p(&bundle),
    ]);
    assert!(tree.trim_start().starts_with("category("), "{tree}");

    let calibrated = d.join("calibrated.json");
    let line = ok(&[
        "calibrate",
        "--bundle",
        p(&bundle),
        "--catalog",
        p(&catalog),
        "--labels",
        p(&labels),
        "--temperatures",
        "1,0.1,0.05",
        "--out",
        p(&d.join("calibration.csv")),
        "--bundle-out",
        p(&calibrated),
    ]);
    assert!(line.starts_with("tau "), "{line}");
    let report = std::fs::read_to_string(d.join("calibration.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "tau,pc_pct,pi_pct,np_pct,objective"
    );
    assert_eq!(report.lines().count(), 22);

    let summary = ok(&[
        "predict",
        "--bundle",
        p(&calibrated),
        "--catalog",
        p(&catalog),
        "--out",
        p(&d.join("pred.csv")),
        "--queue",
        p(&d.join("queue.csv")),
    ]);
    let preds = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    let queue = std::fs::read_to_string(d.join("queue.csv")).unwrap();
    assert_eq!(
        preds.lines().count() + queue.lines().count() - 2,
        800,
        "{summary}"
    );
    assert!(queue.starts_with("id,descriptions_sha256,state_1,prob_1"));

    // Threshold 1 sends every record to the queue.
    ok(&[
        "predict",
        "--bundle",
        p(&calibrated),
        "--catalog",
        p(&catalog),
        "--tau",
        "1",
        "--out",
        p(&d.join("pred1.csv")),
        "--queue",
        p(&d.join("queue1.csv")),
    ]);
    assert_eq!(
        std::fs::read_to_string(d.join("pred1.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );

    ok(&[
        "evaluate",
        "--bundle",
        p(&calibrated),
        "--catalog",
        p(&catalog),
        "--labels",
        p(&labels),
        "--model",
        "sbm",
        "--out",
        p(&d.join("metrics.csv")),
    ]);
    let metrics = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with(
        "tau,pc_pct,pi_pct,np_pct,accuracy_on_predicted_pct,overall_accuracy_pct,records"
    ));

    ok(&[
        "sweep",
        "--bundle",
        p(&calibrated),
        "--catalog",
        p(&catalog),
        "--labels",
        p(&labels),
        "--split",
        "all",
        "--step",
        "0.25",
        "--out",
        p(&d.join("sweep.csv")),
    ]);
    assert_eq!(
        std::fs::read_to_string(d.join("sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}

#[test]
fn train_all_writes_one_bundle_per_attribute() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d);
    let out = d.join("models");
    ok(&[
        "train",
        "--all",
        "--catalog",
        p(&d.join("catalog.csv")),
        "--labels",
        p(&d.join("labels.csv")),
        "--out",
        p(&out),
    ]);
    assert!(out.join("category.json").exists());
}

#[test]
fn failures_exit_nonzero_with_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d);
    let out = attrfuse(&[
        "train",
        "--catalog",
        p(&d.join("catalog.csv")),
        "--labels",
        p(&d.join("labels.csv")),
        "--target",
        "colour",
        "--out",
        p(&d.join("m.json")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour"), "{err}");

    std::fs::write(d.join("bad.csv"), "id,a,description\nx,1,foo\ny,2\n").unwrap();
    let out = attrfuse(&[
        "predict",
        "--bundle",
        p(&d.join("missing.json")),
        "--catalog",
        p(&d.join("bad.csv")),
        "--out",
        p(&d.join("o.csv")),
        "--queue",
        p(&d.join("q.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("load_bundle"));

    let out = attrfuse(&["generate", "--samples", "0", "--out-dir", p(d)]);
    assert!(!out.status.success());
}
