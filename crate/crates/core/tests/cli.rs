use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn noderoles(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noderoles"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&noderoles(&["--help"], d)), 0);
    assert_eq!(code(&noderoles(&["--version"], d)), 0);
    assert_eq!(code(&noderoles(&["frobnicate"], d)), 1);
    assert_eq!(code(&noderoles(&["run", "--out", "x"], d)), 1);
    assert_eq!(
        code(&noderoles(
            &["run", "--input", "missing.txt", "--out", "x"],
            d
        )),
        1
    );

    fs::write(d.join("bad.txt"), "1 2\n3 three\n").unwrap();
    let out = noderoles(
        &[
            "run",
            "--input",
            "bad.txt",
            "--convention",
            "follow",
            "--out",
            "r",
        ],
        d,
    );
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("ingest") && stderr.contains("line 2"),
        "{stderr}"
    );

    fs::write(d.join("g.txt"), "1 2\n2 1\n").unwrap();
    fs::write(d.join("p.txt"), "1 0\n").unwrap();
    let out = noderoles(
        &[
            "measures",
            "--input",
            "g.txt",
            "--convention",
            "follow",
            "--partition",
            "p.txt",
            "--out",
            "m",
        ],
        d,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_convention_warns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.txt"), "1 2\n").unwrap();
    let out = noderoles(&["ingest", "--input", "g.txt", "--out", "i"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--convention"));

    let out = noderoles(
        &[
            "ingest",
            "--input",
            "g.txt",
            "--convention",
            "reverse",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(out.stderr.is_empty());
    assert_eq!(
        fs::read_to_string(dir.path().join("r/edges.txt")).unwrap(),
        "2 1\n"
    );
}

/// Each stage run on the previous stage's files reproduces the full run.
#[test]
fn staged_run_matches_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let out = noderoles(args, d);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    ok(&[
        "synth", "--out", "syn", "--hub", "3:45", "--hub", "60:45", "--seed", "2",
    ]);
    let g = ["--input", "syn/edges.txt", "--convention", "follow"];
    ok(&[
        &["run"][..],
        &g,
        &["--out", "full", "--approximate-capitalists", "--k-max", "6"],
    ]
    .concat());

    ok(&[&["ingest"][..], &g, &["--out", "s0"]].concat());
    ok(&[
        "communities",
        "--input",
        "s0/edges.txt",
        "--convention",
        "follow",
        "--out",
        "s1",
    ]);
    ok(&[
        &["measures"][..],
        &g,
        &["--partition", "s1/partition.txt", "--out", "s2"],
    ]
    .concat());
    ok(&[
        "cluster",
        "--measures",
        "s2/measures.csv",
        "--k-max",
        "6",
        "--out",
        "s3",
    ]);
    ok(&[
        &[
            "roles",
            "--measures",
            "s2/measures.csv",
            "--assignment",
            "s3/assignment.csv",
        ][..],
        &g,
        &["--partition", "s1/partition.txt", "--out", "s4"],
    ]
    .concat());
    ok(&[
        &["capitalists"][..],
        &g,
        &[
            "--assignment",
            "s3/assignment.csv",
            "--approximate-capitalists",
            "--out",
            "s5",
        ],
    ]
    .concat());
    ok(&[
        "stats",
        "--measures",
        "s2/measures.csv",
        "--assignment",
        "s3/assignment.csv",
        "--out",
        "s6",
    ]);

    for (stage, file) in [
        ("s1", "partition.txt"),
        ("s1", "levels.txt"),
        ("s2", "raw_features.csv"),
        ("s2", "measures.csv"),
        ("s2", "correlations.csv"),
        ("s3", "sweep.csv"),
        ("s3", "assignment.csv"),
        ("s4", "roles.csv"),
        ("s4", "baseline_roles.csv"),
        ("s5", "crosstab.csv"),
        ("s5", "capitalists.csv"),
        ("s6", "anova.csv"),
        ("s6", "posthoc.csv"),
    ] {
        let staged = fs::read(d.join(stage).join(file)).unwrap();
        let full = fs::read(d.join("full").join(file)).unwrap();
        assert!(staged == full, "{file} differs");
    }
    assert!(!d.join("full/.noderoles.lock").exists());
}
