use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heredity_svm::bench::Method;
use heredity_svm::heredity::HeredityPolicy;
use hsvm_cli::data::CsvDataset;
use hsvm_cli::model::ModelArtifact;
use tempfile::TempDir;

fn hsvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsvm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn generate(dir: &TempDir, name: &str, example: &str, n: &str, seed: &str) -> PathBuf {
    let out = path(dir, name);
    let o = hsvm(&["generate", "--example", example, "--rho", "0.5", "--n", n, "--seed", seed, "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

fn load_artifact(p: &Path) -> ModelArtifact {
    ModelArtifact::from_json(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn shsvm_with_cv_respects_strong_heredity() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "train.csv", "1", "120", "3");
    let model = path(&dir, "m.json");
    let o = hsvm(&["train", s(&data), "--method", "shsvm", "--cv", "5", "--out", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("active effects") && stdout.contains("training hinge"));
    let a = load_artifact(&model);
    assert_eq!(a.method, Method::Shsvm);
    assert_eq!(a.graph.policy(), HeredityPolicy::Strong);
    let theta = a.theta.as_ref().unwrap();
    assert!(a.graph.theta_violations(theta, HeredityPolicy::Strong, 1e-8).is_empty());
    let active: Vec<bool> = theta.iter().map(|&t| t > 1e-8).collect();
    assert!(a.graph.selection_complies(&active, HeredityPolicy::Strong));
    assert_eq!(a.cv.as_ref().unwrap().grid.len(), 30);
}

#[test]
fn huge_lambda_gives_intercept_only_model() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "train.csv", "3", "80", "4");
    for method in ["l1", "shsvm"] {
        let model = path(&dir, &format!("{method}.json"));
        let o = hsvm(&["train", s(&data), "--method", method, "--lambda", "1e9", "--out", s(&model)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let a = load_artifact(&model);
        assert!(a.weights.iter().all(|&w| w == 0.0), "{method}: {:?}", a.weights);
        assert!(a.active_effects.is_empty());
    }
}

/// Error rate recomputed here from the raw columns, the stored
/// standardization and the weights, without the library's transform.
#[test]
fn l1_predictions_match_independent_recomputation() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "train.csv", "3", "150", "5");
    let model = path(&dir, "m.json");
    let o = hsvm(&[
        "train", s(&data), "--method", "l1", "--lambda", "2", "--no-quadratic", "--out", s(&model),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let labels_path = path(&dir, "pred.txt");
    let o = hsvm(&["predict", s(&model), s(&data), "--out", s(&labels_path)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let predicted: Vec<f64> = std::fs::read_to_string(&labels_path)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();

    let a = load_artifact(&model);
    let st = a.expansion.standardizer().unwrap();
    let csv = CsvDataset::load(&data).unwrap();
    let y = csv.labels.clone().unwrap();
    let q = csv.names.len();
    let mut correct = 0;
    for i in 0..y.len() {
        let z: Vec<f64> = (0..q).map(|j| csv.features[(i, j)]).collect();
        let mut cols = z.clone();
        for r in 0..q {
            for j in r + 1..q {
                cols.push(z[r] * z[j]);
            }
        }
        let f: f64 = a.intercept
            + cols
                .iter()
                .enumerate()
                .map(|(c, v)| a.weights[c] * (v - st.means[c]) / st.scales[c])
                .sum::<f64>();
        let label = if f >= 0.0 { 1.0 } else { -1.0 };
        assert_eq!(label, predicted[i], "row {i}");
        correct += (label == y[i]) as usize;
    }
    let wrong = predicted.iter().zip(&y).filter(|(p, t)| p != t).count();
    assert_eq!(wrong, y.len() - correct);
    assert!(stderr(&o).contains("error rate"));
}

#[test]
fn nonparametric_training_and_prediction() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "train.csv", "4", "100", "6");
    let test = generate(&dir, "test.csv", "4", "50", "7");
    let model = path(&dir, "m.json");
    let o = hsvm(&["train", s(&data), "--method", "np-whsvm", "--big-m", "5", "--out", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = load_artifact(&model);
    assert!(a.theta.as_ref().unwrap().iter().sum::<f64>() <= 5.0 + 1e-9);
    let o = hsvm(&["predict", s(&model), s(&test)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 50);
}

#[test]
fn zero_one_labels_and_categorical_schema() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "d.csv");
    let mut text = String::from("age,group,y\n");
    for i in 0..40 {
        let age = 20.0 + (i * 7 % 23) as f64;
        let group = i % 3;
        let y = u8::from(age + 4.0 * group as f64 > 30.0);
        text.push_str(&format!("{age},{group},{y}\n"));
    }
    std::fs::write(&data, text).unwrap();
    let schema = path(&dir, "schema.json");
    std::fs::write(&schema, r#"{"categorical": {"group": 3}}"#).unwrap();
    let model = path(&dir, "m.json");
    let o = hsvm(&[
        "train", s(&data), "--method", "whsvm", "--lambda", "0.5", "--schema", s(&schema), "--out", s(&model),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("1/0"), "expected a label-mapping warning: {}", stderr(&o));
    let a = load_artifact(&model);
    let groups: Vec<_> = a.expansion.effects().iter().filter(|e| e.group_id.is_some()).collect();
    assert!(!groups.is_empty());
    assert!(a.active_effects.iter().all(|e| !e.contains("group^2")));

    std::fs::write(&data, "age,group,y\n30,5,1\n").unwrap();
    let o = hsvm(&["predict", s(&model), s(&data)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn reloaded_artifact_predicts_bit_identically() {
    let dir = TempDir::new().unwrap();
    let train = generate(&dir, "train.csv", "2", "100", "8");
    let probe = generate(&dir, "probe.csv", "2", "1000", "9");
    let data = CsvDataset::load(&train).unwrap();
    let probe = CsvDataset::load(&probe).unwrap();
    let variables = vec![heredity_svm::expand::RawVariable::Continuous; data.names.len()];
    for method in [Method::Whsvm, Method::L2, Method::L1] {
        let opts = hsvm_cli::model::TrainOptions {
            method,
            tuning: hsvm_cli::model::TuningChoice::Fixed(hsvm_cli::model::Tuning::Lambda(0.7)),
            seed: 1,
            initial_lambda: None,
            quadratic: true,
            basis_functions: 5,
        };
        let a = hsvm_cli::model::train(&data, &variables, &opts).unwrap();
        let back = ModelArtifact::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(a.decision_values(&probe).unwrap()), bits(back.decision_values(&probe).unwrap()));
    }
}

#[test]
fn bundled_config_reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example1_desk.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = path(&dir, run);
        let o = hsvm(&["benchmark", s(&config), "--replications", "1", "--seed", "7", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let json = std::fs::read(out.join("example1_desk.json")).unwrap();
        let csv = std::fs::read_to_string(out.join("example1_desk.csv")).unwrap();
        outputs.push((json, csv));
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows: Vec<&str> = outputs[0].1.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, vec!["SHSVM", "l2 SVM", "l1 SVM", "Bayes"]);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hsvm(&["--help"])), 0);
    assert_eq!(code(&hsvm(&["train", "--method", "l1"])), 1);
    assert_eq!(code(&hsvm(&["frobnicate"])), 1);

    let missing = hsvm(&["train", "/nonexistent.csv", "--method", "l1", "--lambda", "1", "--out", "/tmp/x.json"]);
    assert_eq!(code(&missing), 2);

    let one_class = path(&dir, "one.csv");
    std::fs::write(&one_class, "a,y\n1,1\n2,1\n3,1\n").unwrap();
    let model = path(&dir, "m.json");
    let o = hsvm(&["train", s(&one_class), "--method", "l2", "--lambda", "1", "--out", s(&model)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("single class"));

    let data = generate(&dir, "train.csv", "3", "60", "2");
    let o = hsvm(&["train", s(&data), "--method", "l2", "--big-m", "3", "--out", s(&model)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = hsvm(&["train", s(&data), "--method", "l2", "--lambda", "1", "--out", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let swapped = path(&dir, "swapped.csv");
    std::fs::write(&swapped, "z2,z1,z3,z4,z5\n0,0,0,0,0\n").unwrap();
    let o = hsvm(&["predict", s(&model), s(&swapped)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("order"));

    let bad_config = path(&dir, "bad.json");
    std::fs::write(
        &bad_config,
        r#"{"example":1,"rho":0,"n_train":50,"replications":1,"methods":["l2"],"seed":1,"replicates":3}"#,
    )
    .unwrap();
    let o = hsvm(&["benchmark", s(&bad_config)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("replicates"));
}
