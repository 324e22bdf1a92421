use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diamond_core::fixtures::sales_csv;
use serde_json::Value;

fn diamond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diamond")).args(args).output().expect("spawn diamond")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn sales(dir: &Path) -> PathBuf {
    let p = dir.join("sales.csv");
    fs::write(&p, sales_csv()).unwrap();
    p
}

fn trace_rows(p: &Path) -> Vec<(usize, usize)> {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pass,cells_remaining"));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn sales_dice() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let out = path(dir.path(), "diamond.csv");
    let o = diamond(&[
        "dice", "--input", input.to_str().unwrap(), "--dims", "product,store", "--measure", "sales", "--agg", "sum",
        "--carats", "4,10", "--output", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("product,store,sales"));
    assert_eq!(text.lines().count(), 1 + 9);

    let stats = json(dir.path().join("diamond.stats.json"));
    assert_eq!(stats["deleting_passes"], 2);
    assert_eq!(stats["passes"], 3);
    assert_eq!(stats["cells"], 9);

    let trace = trace_rows(&dir.path().join("diamond.trace.csv"));
    assert_eq!(trace, [(1, 21), (2, 9), (3, 9)]);

    let manifest = json(dir.path().join("diamond.manifest.json"));
    assert_eq!(manifest["subcommand"], "dice");
    assert_eq!(manifest["passes"], 3);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("diamond.manifest.json"));
}

#[test]
fn dice_files_storage_and_oracle_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let mem = path(dir.path(), "mem.csv");
    let files = path(dir.path(), "files.csv");
    let passes = dir.path().join("passes");
    fs::create_dir(&passes).unwrap();
    for (out, storage) in [(&mem, "memory"), (&files, "files")] {
        let o = Command::new(env!("CARGO_BIN_EXE_diamond"))
            .env("DIAMOND_TMPDIR", &passes)
            .args([
                "dice", "--input", input.to_str().unwrap(), "--measure", "sales", "--agg", "sum", "--carats", "4,10",
                "--storage", storage, "--oracle", "--output", out,
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&mem).unwrap(), fs::read(&files).unwrap());
    assert_eq!(json(dir.path().join("files.stats.json"))["oracle_agrees"], true);
    // The run directory is removed once the dice succeeds.
    assert_eq!(fs::read_dir(&passes).unwrap().count(), 0);
}

#[test]
fn zero_carats_copy_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let out = path(dir.path(), "same.csv");
    let o = diamond(&[
        "dice", "--input", input.to_str().unwrap(), "--measure", "sales", "--agg", "sum", "--carats", "0,0",
        "--output", &out,
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), sales_csv());
}

#[test]
fn kappa_of_full_binary_cube() {
    let dir = tempfile::tempdir().unwrap();
    let full3 = path(dir.path(), "full3.csv");
    assert!(diamond(&["gen", "--kind", "binary", "--n", "3", "--output", &full3]).status.success());
    let out = path(dir.path(), "kappa.json");
    let o = diamond(&["kappa", "--input", &full3, "--dims", "x0,x1,x2", "--agg", "count", "--method", "binary", "--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["kappa"], 4.0);
    assert_eq!(r["method"], "binary");
    assert!(!r["probes"].as_array().unwrap().is_empty());
}

#[test]
fn empty_diamond_is_success() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let out = path(dir.path(), "none.csv");
    let o = diamond(&["dice", "--input", input.to_str().unwrap(), "--measure", "sales", "--carats", "100", "--output", &out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap(), "product,store,sales\n");
    assert_eq!(trace_rows(&dir.path().join("none.trace.csv")).last().unwrap().1, 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let input = input.to_str().unwrap();
    let out = path(dir.path(), "x.csv");
    // Usage and input errors.
    assert_eq!(diamond(&["dice", "--carats", "1"]).status.code(), Some(2));
    assert_eq!(diamond(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(diamond(&["dice", "--input", "missing.csv", "--carats", "1", "--output", &out]).status.code(), Some(2));
    assert_eq!(diamond(&["dice", "--input", input, "--measure", "sales", "--carats", "1,2,3", "--output", &out]).status.code(), Some(2));
    assert_eq!(diamond(&["dice", "--input", input, "--measure", "sales", "--carats", "1.5", "--output", &out]).status.code(), Some(2));
    assert_eq!(diamond(&["kappa", "--input", input, "--method", "linear", "--output", &out]).status.code(), Some(2));
    // Runtime: unwritable output and an oracle over budget.
    let nowhere = path(dir.path(), "no/such/dir/x.csv");
    assert_eq!(diamond(&["dice", "--input", input, "--carats", "1", "--output", &nowhere]).status.code(), Some(3));
    let big = path(dir.path(), "big.csv");
    assert!(diamond(&["gen", "--shape", "20,20", "--facts", "200", "--seed", "1", "--output", &big]).status.success());
    assert_eq!(diamond(&["dice", "--input", &big, "--carats", "2", "--oracle", "--output", &out]).status.code(), Some(3));
}

#[test]
fn gen_and_perturb_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    for out in [&a, &b] {
        let o = diamond(&["gen", "--shape", "10,20,30", "--skew", "0.5", "--facts", "500", "--seed", "9", "--output", out]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(json(dir.path().join("a.spec.json"))["facts"], 500);

    let pa = path(dir.path(), "pa.csv");
    let pb = path(dir.path(), "pb.csv");
    for out in [&pa, &pb] {
        assert!(diamond(&["perturb", "--input", &a, "--p-missing", "0.1", "--seed", "3", "--output", out]).status.success());
    }
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    let kept = fs::read_to_string(&pa).unwrap().lines().count() - 1;
    assert!(kept < 500 && kept > 400, "kept {kept}");
}

#[test]
fn dcld_on_sales() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    for method in ["diamond", "local"] {
        let out = path(dir.path(), &format!("{method}.csv"));
        let o = diamond(&[
            "dcld", "--input", input.to_str().unwrap(), "--measure", "sales", "--agg", "sum", "--p", "3", "--method",
            method, "--oracle", "--output", &out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r = json(dir.path().join(format!("{method}.stats.json")));
        assert_eq!(r["method"], method);
        assert!(r["shape"].as_array().unwrap().iter().all(|n| n.as_u64().unwrap() <= 3));
        assert!(r["objective"].as_f64().unwrap() <= r["oracle_objective"].as_f64().unwrap() + 1e-9);
    }
}

#[test]
fn bounds_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    let out = path(dir.path(), "b.json");
    let o = diamond(&[
        "bounds", "--input", input.to_str().unwrap(), "--measure", "sales", "--agg", "sum", "--carats", "4,10",
        "--output", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    let sum_bound = r["bounds"].as_array().unwrap().iter().find(|b| b["name"] == "max_sum_without_diamond").unwrap();
    assert_eq!(sum_bound["value"], 98.0);
    assert_eq!(sum_bound["guarantee"], "existence");
}

#[test]
fn robustness_table_columns_sum_to_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cube = path(dir.path(), "p.csv");
    assert!(diamond(&["gen", "--shape", "10,20", "--skew", "0.5", "--facts", "100", "--seed", "3", "--output", &cube]).status.success());
    let out = path(dir.path(), "r.csv");
    let o = diamond(&["--threads", "2", "robustness", "--input", &cube, "--trials", "6", "--probs", "0.1,0.2", "--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut totals = [0u64; 2];
    for line in text.lines().skip(1) {
        let f: Vec<u64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        totals[0] += f[0];
        totals[1] += f[1];
    }
    assert_eq!(totals, [6, 6]);
}

/// Checks the subset of JSON Schema the published schema uses: `type`,
/// `required`, `properties`, `items`, `enum`, `minimum`, `maximum`.
fn conforms(value: &Value, schema: &Value, at: &str) -> Result<(), String> {
    let ty = schema["type"].as_str().unwrap_or("");
    let ok = match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "integer" => value.is_u64() || value.is_i64(),
        "number" => value.is_number(),
        _ => true,
    };
    if !ok {
        return Err(format!("{at}: expected {ty}, got {value}"));
    }
    if let Some(allowed) = schema["enum"].as_array() {
        if !allowed.contains(value) {
            return Err(format!("{at}: {value} not in {allowed:?}"));
        }
    }
    if let (Some(x), Some(min)) = (value.as_f64(), schema["minimum"].as_f64()) {
        if x < min {
            return Err(format!("{at}: {x} below {min}"));
        }
    }
    if let (Some(x), Some(max)) = (value.as_f64(), schema["maximum"].as_f64()) {
        if x > max {
            return Err(format!("{at}: {x} above {max}"));
        }
    }
    for key in schema["required"].as_array().into_iter().flatten() {
        let key = key.as_str().unwrap();
        if value.get(key).is_none() {
            return Err(format!("{at}: missing '{key}'"));
        }
    }
    if let Some(props) = schema["properties"].as_object() {
        for (key, sub) in props {
            if let Some(v) = value.get(key) {
                conforms(v, sub, &format!("{at}.{key}"))?;
            }
        }
    }
    if let (Some(items), Some(sub)) = (value.as_array(), schema.get("items")) {
        for (i, v) in items.iter().enumerate() {
            conforms(v, sub, &format!("{at}[{i}]"))?;
        }
    }
    Ok(())
}

#[test]
fn dice_stats_match_the_published_schema() {
    let schema = json(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/dice-stats.schema.json"));
    let dir = tempfile::tempdir().unwrap();
    let input = sales(dir.path());
    for (carats, agg) in [("4,10", "sum"), ("2", "count"), ("100", "count")] {
        let out = path(dir.path(), "d.csv");
        let o = diamond(&["dice", "--input", input.to_str().unwrap(), "--measure", "sales", "--agg", agg, "--carats", carats, "--output", &out]);
        assert!(o.status.success());
        let stats = json(dir.path().join("d.stats.json"));
        conforms(&stats, &schema, "$").unwrap();
        let trace = trace_rows(&dir.path().join("d.trace.csv"));
        assert!(trace.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}
