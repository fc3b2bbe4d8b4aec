use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use efmix::families::{Rayleigh, RayleighSource};
use efmix::learners::{sample_mixture, MixtureModel};
use efmix_cli::model::ModelFile;
use efmix_cli::ppm::{encode_p3, encode_p6, Image};
use tempfile::TempDir;

fn efmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efmix")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rayleigh_csv(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let r = Rayleigh;
    let truth = MixtureModel::new(
        "rayleigh",
        vec![0.5, 0.5],
        vec![
            Some(r.to_natural(RayleighSource::new(1.0).unwrap())),
            Some(r.to_natural(RayleighSource::new(4.0).unwrap())),
        ],
    )
    .unwrap();
    let (data, _) = sample_mixture(&r, &truth, n, seed).unwrap();
    let mut text = String::from("x\n");
    for p in data.points() {
        text.push_str(&format!("{:?}\n", p[0]));
    }
    write(dir, "data.csv", &text)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn fit_writes_model_and_monotone_trace() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 500, 1);
    let model = dir.path().join("m.json");
    let trace = dir.path().join("t.csv");
    let o = efmix(&[
        "fit", "--family", "rayleigh", "--k", "2", "--algo", "kmle", "--input", s(&data), "--output", s(&model),
        "--trace", s(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("avg_loglik="));
    assert!(model.exists());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "iteration,phase,complete_ll,incomplete_ll,kmeans_loss");
    let complete: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(!complete.is_empty());
    assert!(complete.windows(2).all(|w| w[1] >= w[0] - 1e-10));
}

#[test]
fn k_larger_than_data_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "1.0\n2.0\n3.0\n");
    let o = efmix(&["fit", "--family", "rayleigh", "--k", "5", "--input", s(&data), "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k exceeds sample size"));
}

#[test]
fn out_of_support_row_is_named() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "x\n1.0\n2.0\n-0.5\n");
    let o = efmix(&["fit", "--family", "rayleigh", "--k", "1", "--input", s(&data), "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn non_finite_csv_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "1.0\nNaN\n");
    let o = efmix(&["fit", "--family", "gaussian", "--k", "1", "--input", s(&data), "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 2"));
}

#[test]
fn degenerate_data_exits_with_four() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "1.0\n1.0\n1.0\n1.0\n");
    let o = efmix(&["fit", "--family", "gaussian", "--k", "2", "--input", s(&data), "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let data = write(&dir, "e.csv", "1.0\n1.0\n2.0\n2.0\n");
    let o = efmix(&["fit", "--family", "gaussian", "--k", "1", "--input", s(&data), "--output", "/dev/null"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_with_two() {
    assert_eq!(efmix(&["fit", "--family", "weibull"]).status.code(), Some(2));
    assert_eq!(efmix(&["frobnicate"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_efmix"))
        .args(["eval", "--model", "m", "--input", "i"])
        .env("EFMIX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn fit_model(dir: &TempDir, data: &Path, k: &str, algo: &str, extra: &[&str]) -> (PathBuf, String) {
    let model = dir.path().join(format!("model-{k}-{algo}.json"));
    let mut args = vec!["fit", "--family", "rayleigh", "--k", k, "--algo", algo, "--input", s(data), "--output", s(&model)];
    args.extend_from_slice(extra);
    let o = efmix(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (model, stdout(&o))
}

#[test]
fn sample_outputs() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 400, 2);
    let (model, _) = fit_model(&dir, &data, "2", "kmle", &[]);
    let out = dir.path().join("s.csv");
    let o = efmix(&["sample", "--model", s(&model), "--count", "0", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "x\n");

    let o = efmix(&["sample", "--model", s(&model), "--count", "100000", "--seed", "3", "--output", s(&out), "--with-labels"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let weights = ModelFile::load(&model).unwrap().weights;
    let mut counts = vec![0usize; weights.len()];
    for line in text.lines().skip(1) {
        counts[line.split(',').nth(1).unwrap().parse::<usize>().unwrap()] += 1;
    }
    for (c, w) in counts.iter().zip(&weights) {
        assert!((*c as f64 / 1e5 - w).abs() < 0.01);
    }

    let o = efmix(&["sample", "--model", s(&data), "--count", "3", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sample_then_fit_recovers_parameters() {
    let dir = TempDir::new().unwrap();
    let truth = write(
        &dir,
        "truth.json",
        &ModelFile::new(
            &efmix::Family::Rayleigh(Rayleigh),
            &MixtureModel::new(
                "rayleigh",
                vec![0.5, 0.5],
                vec![
                    Some(Rayleigh.to_natural(RayleighSource::new(1.0).unwrap())),
                    Some(Rayleigh.to_natural(RayleighSource::new(4.0).unwrap())),
                ],
            )
            .unwrap(),
            None,
        )
        .unwrap()
        .to_json(),
    );
    let data = dir.path().join("draws.csv");
    let o = efmix(&["sample", "--model", s(&truth), "--count", "1000", "--seed", "0", "--output", s(&data)]);
    assert_eq!(o.status.code(), Some(0));
    let (model, _) = fit_model(&dir, &data, "2", "softem", &[]);
    let file = ModelFile::load(&model).unwrap();
    let mut sig: Vec<f64> = file.components.iter().filter_map(|c| c.source.as_ref()?.sigma).collect();
    sig.sort_by(f64::total_cmp);
    assert!((sig[0] - 1.0).abs() < 0.1 && (sig[1] - 4.0).abs() < 0.4, "{sig:?}");
}

#[test]
fn eval_reproduces_fit_likelihood() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 300, 4);
    for algo in ["kmle", "hardem", "softem"] {
        let (model, summary) = fit_model(&dir, &data, "2", algo, &[]);
        let o = efmix(&["eval", "--model", s(&model), "--input", s(&data)]);
        assert_eq!(o.status.code(), Some(0));
        let line = stdout(&o);
        let reported = ModelFile::load(&model).unwrap().fit.unwrap().avg_loglik;
        assert!((field(&line, "avg_loglik") - reported).abs() <= 1e-12);
        assert!((field(&line, "avg_loglik") - field(&summary, "avg_loglik")).abs() <= 1e-12);
        assert!((field(&line, "likelihood") - reported.exp()).abs() <= 1e-12);
    }
    let (model, _) = fit_model(&dir, &data, "1", "kmle", &[]);
    let line = stdout(&efmix(&["eval", "--model", s(&model), "--input", s(&data)]));
    assert_eq!(field(&line, "avg_loglik"), field(&line, "avg_complete_loglik"));

    let bad = write(&dir, "bad.csv", "1.0\n0.0\n");
    let o = efmix(&["eval", "--model", s(&model), "--input", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn model_files_round_trip_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 200, 5);
    let (model, _) = fit_model(&dir, &data, "3", "kmle", &[]);
    let text = std::fs::read_to_string(&model).unwrap();
    let loaded = ModelFile::load(&model).unwrap();
    assert_eq!(loaded.to_json(), text);
    let (_, m) = loaded.to_model().unwrap();
    let again = ModelFile::new(&efmix::Family::Rayleigh(Rayleigh), &m, loaded.fit.clone()).unwrap();
    assert_eq!(again.to_json(), text);
}

#[test]
fn init_model_and_options_are_accepted() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 300, 6);
    let (start, _) = fit_model(&dir, &data, "2", "kmle", &["--init", "split"]);
    for extra in [
        vec!["--init-model", s(&start)],
        vec!["--init", "global", "--heuristic", "hartigan"],
        vec!["--init", "random", "--empty-clusters", "reseed", "--restarts", "3"],
        vec!["--heuristic", "lloyd-hartigan", "--ridge", "1e-6"],
    ] {
        fit_model(&dir, &data, "2", "hardem", &extra);
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = rayleigh_csv(&dir, 300, 7);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let model = dir.path().join(format!("m{run}.json"));
        let trace = dir.path().join(format!("t{run}.csv"));
        let draws = dir.path().join(format!("s{run}.csv"));
        let o = efmix(&[
            "fit", "--family", "rayleigh", "--k", "3", "--algo", "softem", "--seed", "9", "--input", s(&data),
            "--output", s(&model), "--trace", s(&trace),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let o = efmix(&["sample", "--model", s(&model), "--count", "500", "--seed", "4", "--output", s(&draws)]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push([model, trace, draws].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn ppm_conversion() {
    let dir = TempDir::new().unwrap();
    let white = write(&dir, "w.ppm", "P3\n2 1\n255\n255 255 255  255 255 255\n");
    let out = dir.path().join("w.csv");
    let o = efmix(&["ppm-to-points", "--input", s(&white), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "x,y,r,g,b\n0.0,0.0,255.0,255.0,255.0\n1.0,0.0,255.0,255.0,255.0\n"
    );

    let img = Image {
        width: 4,
        height: 3,
        pixels: (0..12u8).map(|i| [i, 2 * i, 255 - i]).collect(),
    };
    let p6 = dir.path().join("a.ppm");
    std::fs::write(&p6, encode_p6(&img)).unwrap();
    let p3 = write(&dir, "b.ppm", &encode_p3(&img));
    let (o6, o3) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(efmix(&["ppm-to-points", "--input", s(&p6), "--output", s(&o6)]).status.code(), Some(0));
    assert_eq!(efmix(&["ppm-to-points", "--input", s(&p3), "--output", s(&o3)]).status.code(), Some(0));
    let a = std::fs::read_to_string(&o6).unwrap();
    assert_eq!(a, std::fs::read_to_string(&o3).unwrap());
    assert_eq!(a.lines().count(), 1 + 12);

    let op = dir.path().join("p.csv");
    let o = efmix(&["ppm-to-points", "--input", s(&p6), "--output", s(&op), "--patch", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&op).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 2 + 3 * 4);

    let broken = write(&dir, "x.ppm", "P6\n4 4\n255\nabc");
    let o = efmix(&["ppm-to-points", "--input", s(&broken), "--output", s(&op)]);
    assert_eq!(o.status.code(), Some(3));
}
