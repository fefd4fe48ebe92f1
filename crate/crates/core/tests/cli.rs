use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snm::io::{read_model, read_scores, write_particle_file};

fn snm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snm"))
        .args(args)
        .env_remove("SNM_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = snm(args);
    assert!(
        out.status.success(),
        "snm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a failing command and returns its single error code.
fn fails(args: &[&str]) -> String {
    let out = snm(args);
    assert!(!out.status.success(), "snm {args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    let codes: Vec<&str> = err.lines().filter(|l| l.starts_with("E_")).collect();
    assert_eq!(codes.len(), 1, "{err}");
    codes[0].split(':').next().unwrap().to_string()
}

fn value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, body: &str) -> PathBuf {
    let spec = dir.join("spec.toml");
    fs::write(&spec, body).unwrap();
    let out = dir.join("pop");
    ok(&["-q", "synth", "--spec", s(&spec), "--out", s(&out)]);
    out
}

const FAR: &str = r#"
seed = 11
particles = 30
n_normal = 36
n_pathological = 12
sigma = 1.0
latent_scales = [10.0, 6.0, 3.0]

[deformation]
mode = "null-space"
amplitude = 10.0
extent = 10
"#;

#[test]
fn train_on_synthetic_normals() {
    let dir = tempfile::tempdir().unwrap();
    let pop = synth(
        dir.path(),
        "seed = 5\nparticles = 40\nn_normal = 74\nn_pathological = 2\nsigma = 1.0\nlatent_scales = [8.0, 5.0, 3.0, 2.0]\n[deformation]\nmode = \"random\"\namplitude = 1.0\n",
    );
    assert_eq!(fs::read_dir(pop.join("normal")).unwrap().count(), 74);
    let model = dir.path().join("m.model");
    let out = ok(&[
        "-q",
        "train",
        "--particles",
        s(&pop.join("normal")),
        "--explained-variance",
        "0.95",
        "--out",
        s(&model),
    ]);
    assert_eq!(value(&out, "n"), 74.0);
    assert_eq!(value(&out, "p"), 120.0);
    assert!(value(&out, "d") <= 72.0);
    assert!(value(&out, "explained_ratio") >= 0.95);
    assert!(value(&out, "sigma2") > 0.0);
    assert!(read_model(&model).unwrap().d() <= 72);
}

#[test]
fn bad_particle_directories() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let m = dir.path().join("m.model");
    assert_eq!(
        fails(&["train", "--particles", s(&empty), "--out", s(&m)]),
        "E_NO_INPUT"
    );
    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    for (name, k) in [("a", 4), ("b", 4), ("c", 5)] {
        write_particle_file(
            &mixed.join(format!("{name}.particles")),
            &vec![[1.0, 2.0, 3.0]; k],
        )
        .unwrap();
    }
    assert_eq!(
        fails(&["train", "--particles", s(&mixed), "--out", s(&m)]),
        "E_PARTICLE_COUNT_MISMATCH"
    );
    assert!(!m.exists());
}

#[test]
fn scoring_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let pop = synth(dir.path(), FAR);
    let model_path = dir.path().join("m.model");
    let normals = pop.join("normal");
    ok(&[
        "-q",
        "train",
        "--particles",
        s(&normals),
        "--dim",
        "3",
        "--out",
        s(&model_path),
    ]);
    let model = read_model(&model_path).unwrap();

    let mean_file = dir.path().join("mean.particles");
    write_particle_file(
        &mean_file,
        &snm::correspondence::to_triples(model.mean().as_slice()),
    )
    .unwrap();
    let mean_scores = dir.path().join("mean.csv");
    ok(&[
        "-q",
        "score",
        "--model",
        s(&model_path),
        "--particles",
        s(&mean_file),
        "--out",
        s(&mean_scores),
    ]);
    let rows = read_scores(&mean_scores).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].full < 1e-9, "{}", rows[0].full);

    let train_scores = dir.path().join("train.csv");
    let maps = dir.path().join("maps");
    ok(&[
        "-q",
        "score",
        "--model",
        s(&model_path),
        "--particles",
        s(&normals),
        "--out",
        s(&train_scores),
        "--whiten-out",
        s(&maps),
    ]);
    let rows = read_scores(&train_scores).unwrap();
    let n = rows.len() as f64;
    let mean_sq = rows.iter().map(|r| r.full * r.full).sum::<f64>() / n;
    let dof = n - 2.0;
    assert!(
        mean_sq >= 0.5 * dof && mean_sq <= 1.5 * dof,
        "{mean_sq} vs {dof}"
    );

    let first = fs::read_to_string(maps.join(format!("{}.csv", rows[0].id))).unwrap();
    assert!(first.starts_with("particle_index,x,y,z,wx,wy,wz,raw_norm,whitened_norm\n"));
    assert_eq!(first.lines().count(), 31);
    let tiled: f64 = first
        .lines()
        .skip(1)
        .map(|l| {
            l.rsplit(',')
                .next()
                .unwrap()
                .parse::<f64>()
                .unwrap()
                .powi(2)
        })
        .sum();
    assert!((tiled - rows[0].full.powi(2)).abs() <= 1e-8 * tiled);

    let corrupt = dir.path().join("bad.model");
    let text = fs::read_to_string(&model_path).unwrap();
    fs::write(
        &corrupt,
        text.replace("format_version = 1", "format_version = 9"),
    )
    .unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(
        fails(&[
            "score",
            "--model",
            s(&corrupt),
            "--particles",
            s(&normals),
            "--out",
            s(&out)
        ]),
        "E_MODEL_VERSION"
    );
    fs::write(&corrupt, &text[..text.len() / 2]).unwrap();
    fails(&[
        "score",
        "--model",
        s(&corrupt),
        "--particles",
        s(&normals),
        "--out",
        s(&out),
    ]);
    write_particle_file(&mean_file, &[[0.0; 3]; 7]).unwrap();
    assert_eq!(
        fails(&[
            "score",
            "--model",
            s(&model_path),
            "--particles",
            s(&mean_file),
            "--out",
            s(&out)
        ]),
        "E_DIM_MISMATCH"
    );
}

#[test]
fn evaluate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    let labels = dir.path().join("l.csv");
    let header = "id,snm_full,snm_latent_paper,snm_latent_exact,snm_null\n";
    let row = |id: &str, v: f64| format!("{id},{v},{v},{v},{v}\n");

    fs::write(
        &scores,
        [
            header.to_string(),
            row("a", 0.1),
            row("b", 0.4),
            row("c", 0.35),
            row("d", 0.8),
        ]
        .concat(),
    )
    .unwrap();
    fs::write(&labels, "id,diagnosis\na,0\nb,0\nc,1\nd,1\n").unwrap();
    let out = ok(&["evaluate", "--scores", s(&scores), "--labels", s(&labels)]);
    assert_eq!(value(&out, "auc"), 0.75);
    assert!(!out.contains("pearson"));

    fs::write(
        &labels,
        "id,diagnosis,severity\na,0,0.1\nb,0,0.4\nc,1,0.35\nd,1,0.8\nzz,1,9\n",
    )
    .unwrap();
    let out = ok(&["evaluate", "--scores", s(&scores), "--labels", s(&labels)]);
    assert!((value(&out, "pearson") - 1.0).abs() < 1e-12);
    assert!((value(&out, "spearman") - 1.0).abs() < 1e-12);

    fs::write(&labels, "id,diagnosis\na,0\nb,0\nc,1\nd,1\n").unwrap();
    fs::write(
        &scores,
        [
            header.to_string(),
            row("a", 0.1),
            row("b", 0.2),
            row("c", 3.0),
            row("d", 4.0),
        ]
        .concat(),
    )
    .unwrap();
    assert_eq!(
        value(
            &ok(&["evaluate", "--scores", s(&scores), "--labels", s(&labels)]),
            "auc"
        ),
        1.0
    );

    fs::write(&labels, "id,diagnosis\na,0\nb,0\nc,1\n").unwrap();
    assert_eq!(
        fails(&["evaluate", "--scores", s(&scores), "--labels", s(&labels)]),
        "E_ID_MISMATCH"
    );
    fs::write(&labels, "id,diagnosis\na,0\nb,0\nc,0\nd,0\n").unwrap();
    assert_eq!(
        fails(&["evaluate", "--scores", s(&scores), "--labels", s(&labels)]),
        "E_SINGLE_CLASS"
    );
}

#[test]
fn cross_validation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let pop = synth(dir.path(), FAR);
    let (n, p) = (pop.join("normal"), pop.join("pathological"));
    let args = [
        "cv",
        "--normals",
        s(&n),
        "--pathological",
        s(&p),
        "--seed",
        "4",
    ];
    let a = snm(&args);
    let b = snm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let out = String::from_utf8(a.stdout).unwrap();
    assert_eq!(value(&out, "mean_auc"), 1.0);
    assert_eq!(out.lines().filter(|l| l.starts_with("repeat=")).count(), 9);

    let null_dir = tempfile::tempdir().unwrap();
    let null = synth(
        null_dir.path(),
        &FAR.replace("amplitude = 10.0", "amplitude = 0.0")
            .replace("n_normal = 36", "n_normal = 90")
            .replace("n_pathological = 12", "n_pathological = 90"),
    );
    let out = ok(&[
        "cv",
        "--normals",
        s(&null.join("normal")),
        "--pathological",
        s(&null.join("pathological")),
        "--seed",
        "4",
    ]);
    let auc = value(&out, "mean_auc");
    assert!((0.35..=0.65).contains(&auc), "{auc}");
}

#[test]
fn synth_reproduces_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 77\nparticles = 5\nn_normal = 200\nn_pathological = 200\nsigma = 1.0\nlatent_scales = [6.0, 3.0]\n[deformation]\nmode = \"null-space\"\namplitude = 8.0\n";
    let pop = synth(dir.path(), body);
    let scores = dir.path().join("s.csv");
    ok(&[
        "-q",
        "score",
        "--model",
        s(&pop.join("truth.model")),
        "--particles",
        s(&pop.join("pathological")),
        "--out",
        s(&scores),
    ]);
    let rows = read_scores(&scores).unwrap();
    let mean_null = rows.iter().map(|r| r.null).sum::<f64>() / rows.len() as f64;
    assert!((mean_null - 8.0).abs() <= 2.0, "{mean_null}");
    let labels = fs::read_to_string(pop.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 401);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, body.replace("sigma = 1.0", "sigma = -1.0")).unwrap();
    fails(&[
        "synth",
        "--spec",
        s(&bad),
        "--out",
        s(&dir.path().join("o")),
    ]);
    fs::write(&bad, body.replace("sigma = 1.0", "sigma = [")).unwrap();
    let out = snm(&[
        "synth",
        "--spec",
        s(&bad),
        "--out",
        s(&dir.path().join("o")),
    ]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("E_CONFIG") && err.contains("line"), "{err}");
}

#[test]
fn synth_output_is_byte_identical() {
    let body = FAR;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = synth(a.path(), body);
    let pb = synth(b.path(), body);
    for sub in ["normal", "pathological"] {
        let mut names: Vec<_> = fs::read_dir(pa.join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            assert_eq!(
                fs::read(pa.join(sub).join(&name)).unwrap(),
                fs::read(pb.join(sub).join(&name)).unwrap()
            );
        }
    }
    assert_eq!(
        fs::read(pa.join("truth.model")).unwrap(),
        fs::read(pb.join("truth.model")).unwrap()
    );
}

#[test]
fn raters_consensus_and_range() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("r.csv");
    let consensus = [1, 2, 2, 3, 4, 5, 5, 1, 3, 4];
    let mut text = String::from("subject_id,rater_id,rating\n");
    for r in 0..3 {
        for (i, k) in consensus.iter().enumerate() {
            text.push_str(&format!("s{i:02},r{r},{k}\n"));
        }
    }
    fs::write(&ratings, &text).unwrap();
    let labels = dir.path().join("l.csv");
    let mut lt = String::from("id,diagnosis\n");
    for (i, k) in consensus.iter().enumerate() {
        lt.push_str(&format!("s{i:02},{}\n", u8::from(*k >= 4)));
    }
    fs::write(&labels, lt).unwrap();
    let out_csv = dir.path().join("sev.csv");
    let out = ok(&[
        "raters",
        "--ratings",
        s(&ratings),
        "--labels",
        s(&labels),
        "--out",
        s(&out_csv),
    ]);
    assert_eq!(value(&out, "aggregated_auc"), 1.0);
    assert!(out.contains("converged=true"));

    let mut rdr = csv::Reader::from_path(&out_csv).unwrap();
    let sev: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    let consensus: Vec<f64> = consensus.iter().map(|&k| k as f64).collect();
    assert!((snm::spearman(&sev, &consensus).unwrap() - 1.0).abs() < 1e-12);

    fs::write(&ratings, text.replace("s03,r1,3", "s03,r1,7")).unwrap();
    assert_eq!(
        fails(&["raters", "--ratings", s(&ratings), "--out", s(&out_csv)]),
        "E_RATING_RANGE"
    );
}

#[test]
fn usage_errors_are_one_line() {
    assert_eq!(fails(&["train"]), "E_USAGE");
    assert_eq!(fails(&["bogus"]), "E_USAGE");
    assert!(snm(&["--help"]).status.success());
}
