use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rop")).args(args).output().expect("spawn rop")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 60 genes x 4 studies; the first 10 genes are small in 3 studies.
fn pvalue_table(dir: &Path) -> PathBuf {
    let mut text = String::from("gene\ts1\ts2\ts3\ts4\n");
    for g in 0..60 {
        let row: Vec<String> = (0..4)
            .map(|k| {
                let base = ((g * 37 + k * 11) % 97) as f64 / 97.0 + 0.005;
                let p = if g < 10 && k < 3 { base * 1e-4 } else { base };
                format!("{p}")
            })
            .collect();
        text.push_str(&format!("g{g}\t{}\n", row.join("\t")));
    }
    write(dir, "p.tsv", &text)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn combine_writes_table_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let p = pvalue_table(d.path());
    let out = d.path().join("out");
    let o = rop(&["combine", "--pvalues", path_str(&p), "--r", "3", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("method\trop(r=3)"));
    let table = std::fs::read_to_string(out.join("genes.tsv")).unwrap();
    assert!(table.starts_with("gene\tstatistic\tmeta_p\tq_value\teffective_mask\n"));
    assert_eq!(table.lines().count(), 61);
    assert!(out.join("manifest.json").exists());

    // Re-running from the manifest reproduces the gene table byte for byte.
    let again = d.path().join("again");
    let o = rop(&["combine", "--config", path_str(&out.join("manifest.json")), "--out", path_str(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(again.join("genes.tsv")).unwrap(), table.as_bytes());
}

#[test]
fn toml_config_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let p = pvalue_table(d.path());
    let out = d.path().join("cfg-out");
    let cfg = format!(
        "method = \"rop\"\nr = 2\nroute = \"parametric_by\"\noutput_dir = {:?}\n\n[input]\nkind = \"pvalues\"\npvalues = {:?}\n",
        path_str(&out),
        path_str(&p)
    );
    let cfg_path = write(d.path(), "run.toml", &cfg);
    let o = rop(&["combine", "--config", path_str(&cfg_path), "--method", "fisher", "--r", "2"]);
    // Fisher takes no r, so the override combination is rejected.
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let o = rop(&["combine", "--config", path_str(&cfg_path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rop(r=2)"));
}

#[test]
fn select_r_reports_counts() {
    let d = tempfile::tempdir().unwrap();
    let p = pvalue_table(d.path());
    let out = d.path().join("sel");
    let o = rop(&["select-r", "--pvalues", path_str(&p), "--shuffle-permutations", "20", "--seed", "3", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("selected_r_counts")).unwrap();
    let r: usize = line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((1..=4).contains(&r));
    let diag = std::fs::read_to_string(out.join("r_diagnostics.tsv")).unwrap();
    assert_eq!(diag.lines().count(), 5);
}

#[test]
fn vote_count_runs() {
    let d = tempfile::tempdir().unwrap();
    let p = pvalue_table(d.path());
    let out = d.path().join("vc");
    let o = rop(&["vote-count", "--pvalues", path_str(&p), "--alpha-vc", "0.01", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("vote_count(alpha=0.01)"));
}

#[test]
fn power_tables() {
    let o = rop(&["power", "--k", "10", "--r0", "6", "--beta-prime", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("k\tr\tr0\talpha\tbeta_prime\tbeta\tpower\n"));

    let o = rop(&["power", "--k", "10", "--vote-counting", "0.3", "--ks", "10,50,200"]);
    assert!(o.status.success());
    let powers: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(powers.len(), 3);
    assert!(powers[0] > powers[1] && powers[1] > powers[2] && powers[2] < 0.01);
}

#[test]
fn simulate_small_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "replicates = 2\ntarget_r = 2\nstability_r = [2, 3]\n\n[sim]\nn_genes = 200\nn_clusters = 2\nn_studies = 3\nn_cases = 6\nn_controls = 6\nn_de_genes = 30\nseed = 9\n\n[[methods]]\nmethod = \"rop\"\nr = 2\ncorrection = \"bh\"\n";
    let cfg_path = write(d.path(), "bench.toml", cfg);
    let out = d.path().join("sim");
    let o = rop(&["simulate", "--config", path_str(&cfg_path), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["bench.tsv", "per_tg_power.tsv", "r_stability.tsv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("rop(r=2) BH"));
}

#[test]
fn exit_codes_by_category() {
    let d = tempfile::tempdir().unwrap();
    // Usage: unknown flag.
    assert_eq!(rop(&["combine", "--frobnicate"]).status.code(), Some(2));
    // Usage: no input at all.
    assert_eq!(rop(&["combine", "--r", "2"]).status.code(), Some(2));
    // Parse: non-numeric cell.
    let bad = write(d.path(), "bad.tsv", "gene\ts1\ts2\ng1\t0.1\tabc\n");
    let o = rop(&["combine", "--pvalues", path_str(&bad), "--r", "1", "--out", path_str(&d.path().join("o1"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:3:"));
    // Validation: r larger than K.
    let p = pvalue_table(d.path());
    let o = rop(&["combine", "--pvalues", path_str(&p), "--r", "9", "--out", path_str(&d.path().join("o2"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!d.path().join("o2").join("genes.tsv").exists());
    // I/O: missing input file.
    let o = rop(&["combine", "--pvalues", path_str(&d.path().join("nope.tsv")), "--r", "1"]);
    assert_eq!(o.status.code(), Some(6));
    // Parse: malformed TOML.
    let cfg = write(d.path(), "broken.toml", "method = [\n");
    assert_eq!(rop(&["combine", "--config", path_str(&cfg)]).status.code(), Some(3));
}
