use std::process::{Command, Output};

fn cotlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cotlab"))
        .args(args)
        .env_remove("COTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn c0_of_one_third() {
    let out = cotlab(&["c0", "--r", "1", "--b", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(data_lines(&text), vec!["0.19245008972987526"]);
    assert!(text.contains("# command = c0"));
    assert!(text.contains("# r = 1") && text.contains("# b = 3"));
}

#[test]
fn non_coprime_input_is_a_usage_error() {
    let out = cotlab(&["c0", "--r", "4", "--b", "6"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("r and b must be coprime"), "{err}");
    assert!(err.contains("Usage:"), "{err}");
}

#[test]
fn unknown_flag_is_rejected() {
    let out = cotlab(&["c0", "--r", "1", "--b", "3", "--colour", "red"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cost_guards_exit_three() {
    let out = cotlab(&["moments", "--q", "1009", "--cap-exponent", "13"]);
    assert_eq!(out.status.code(), Some(3));
    let out = cotlab(&["qsplit", "--r", "3", "--q", "11", "--m1", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn vasyunin_matches_negated_c0_of_inverse() {
    let v = cotlab(&["vasyunin", "--r", "3", "--b", "7"]);
    let c = cotlab(&["c0", "--r", "5", "--b", "7"]);
    let v: f64 = data_lines(&stdout(&v))[0].parse().unwrap();
    let c: f64 = data_lines(&stdout(&c))[0].parse().unwrap();
    assert!((v + c).abs() <= 1e-12 * c.abs());
}

#[test]
fn decompose_csv_rows() {
    let out = cotlab(&["decompose", "--r", "3", "--q", "11", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(
        data_lines(&stdout(&out)),
        vec!["j,s,d,t", "0,3,2,2", "1,1,3,1", "2,2,2,3"]
    );
}

#[test]
fn identity_csv_row() {
    let out = cotlab(&[
        "identity", "--r", "1", "--b", "1", "--T", "10000", "--format", "csv", "-q",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>()[..5],
        ["name", "empirical", "target", "abs_gap", "rel_gap"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let lhs: f64 = rows[0][1].parse().unwrap();
    let rhs: f64 = rows[0][2].parse().unwrap();
    let gap: f64 = rows[0][3].parse().unwrap();
    assert_eq!(&rows[0][0], "identity_1_1");
    assert!((rhs - 1.26066).abs() < 1e-5);
    assert!(gap <= 0.02 && (lhs - rhs).abs() == gap);
}

#[test]
fn csv_values_roundtrip_exactly() {
    let csv_out = cotlab(&[
        "moments",
        "--q",
        "1009",
        "--k",
        "3",
        "--format",
        "csv",
        "--no-timing",
        "-q",
    ]);
    let json_out = cotlab(&[
        "moments",
        "--q",
        "1009",
        "--k",
        "3",
        "--format",
        "json",
        "--no-timing",
        "-q",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    let records = json[0]["records"].as_array().unwrap();
    let text = stdout(&csv_out);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), records.len());
    for (row, rec) in rows.iter().zip(records) {
        assert_eq!(&row[0], rec["name"].as_str().unwrap());
        let parsed: f64 = row[1].parse().unwrap();
        assert_eq!(
            parsed.to_bits(),
            rec["empirical"].as_f64().unwrap().to_bits()
        );
        let target: f64 = row[2].parse().unwrap();
        assert_eq!(target.to_bits(), rec["target"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "theorem11",
        "--q",
        "10007",
        "--shifts",
        "0,5",
        "--f",
        "gaussian",
        "--f",
        "gaussian:0.5:0.5",
        "--g-samples",
        "5000",
        "--format",
        "csv",
        "--no-timing",
        "-q",
    ];
    let a = cotlab(&args);
    let b = cotlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut threads = args.to_vec();
    threads.extend(["--threads", "1"]);
    assert_eq!(cotlab(&threads).stdout, a.stdout);
}

#[test]
fn batch_runs_config_and_writes_file() {
    let dir = std::env::temp_dir().join(format!("cotlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "[experiment.box]\nkind = inverse-box\nq = 10007\nshifts = 0, 1\nbox.alphas = 0.1, 0.5\nbox.delta = 0.25\nbox.cells = 4\n",
    )
    .unwrap();
    let out_path = dir.join("out.csv");
    let out = cotlab(&[
        "batch",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--output",
        out_path.to_str().unwrap(),
        "-q",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("# experiment = box"));
    let names: Vec<&str> = data_lines(&text)
        .iter()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, vec!["box_count", "box_ratio", "partition_total"]);

    std::fs::write(&cfg, "[experiment.bad]\nkind = inverse-box\nq = 100\n").unwrap();
    let out = cotlab(&["batch", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("`q`"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn table_format_uses_six_digits() {
    let out = cotlab(&["moments", "--q", "1009", "-q"]);
    let text = stdout(&out);
    let row = data_lines(&text)
        .into_iter()
        .find(|l| l.trim_start().starts_with("moment "))
        .unwrap();
    assert!(
        row.contains(" 1.2422 ") && !row.contains("1.24219766"),
        "{row}"
    );
}
