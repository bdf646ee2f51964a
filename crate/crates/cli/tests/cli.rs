use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CRD_DESIGN: &str = "kind = \"crd\"\nresponse = \"Yield\"\n\n[[factors]]\nname = \"Treatment\"\nrole = \"fixed\"\n";

fn plotwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plotwise")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let line = text.lines().next().expect("an error line on stderr");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn help_and_version_go_to_stdout() {
    let o = plotwise(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("analyze"));
    let o = plotwise(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("plotwise "));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["frobnicate"][..],
        &["analyze"],
        &["analyze", "--dataset", "crd", "--alpha", "1.5"],
        &["analyze", "--dataset", "crd", "--alpha", "0"],
        &["analyze", "--dataset", "crd", "--alpha-v", "abc"],
        &["analyze", "--data", "x.csv"],
    ] {
        let o = plotwise(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert_eq!(error_line(&o)["error"], "UsageError", "{args:?}");
    }
}

#[test]
fn datasets_list_and_show() {
    let o = plotwise(&["datasets", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(names, ["crd", "rcbd", "factorial", "split_plot", "lmm", "gxe"]);

    let o = plotwise(&["datasets", "show", "crd"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("Treatment,"));

    let o = plotwise(&["datasets", "show", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "UnknownDataset");
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let design = write(dir.path(), "d.toml", CRD_DESIGN);
    let o = plotwise(&["analyze", "--data", "/nonexistent/data.csv", "--design", &design]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "IoError");
}

#[test]
fn unbalanced_data_names_the_cell() {
    let dir = TempDir::new().unwrap();
    let design = write(dir.path(), "d.toml", CRD_DESIGN);
    let data = write(dir.path(), "d.csv", "Treatment,Yield\nA,10\nA,12\nA,11\nB,10\nB,12\nC,11\nC,10\nC,12\n");
    let out = dir.path().join("out");
    let o = plotwise(&["analyze", "--data", &data, "--design", &design, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["error"], "UnbalancedDesign");
    assert!(e["message"].as_str().unwrap().contains("Treatment=B"));
    assert!(!out.exists(), "no bundle is written for a failed analysis");
}

#[test]
fn crd_bundle_contents() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("crd");
    let o = plotwise(&["analyze", "--dataset", "crd", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Analysis of variance"));

    let anova = read(&out, "anova.csv");
    let lines: Vec<&str> = anova.lines().collect();
    assert_eq!(lines[0], "Source,DF,SS,MS,F,p,ErrorTerm");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("Treatment,3,1090.000,363.333,145.333,"));
    assert!(lines[2].starts_with("Residual,16,40.000,2.500,"));

    let plots: Vec<String> = fs::read_dir(out.join("plots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(plots.len(), 1, "{plots:?}");
    let svg = read(&out, &format!("plots/{}", plots[0]));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let letters = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("letter"))
        .count();
    assert_eq!(letters, 4);
    assert!(svg.contains("Letters denote Tukey HSD groupings"));
    assert!(read(&out, "recommendation.txt").contains("Top group"));
}

#[test]
fn factorial_interaction_plot_caption() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f");
    let o = plotwise(&["analyze", "--dataset", "factorial", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let svg = read(&out, "plots/interaction_Nitrogen_Spacing.svg");
    assert!(svg.contains("Nearly parallel response profiles"));
}

#[test]
fn no_significant_effect_gives_no_comparison_plots() {
    let dir = TempDir::new().unwrap();
    let design = write(dir.path(), "d.toml", CRD_DESIGN);
    let data = write(dir.path(), "d.csv", "Treatment,Yield\nA,10\nA,12\nA,11\nB,10\nB,12\nB,11\nC,11\nC,10\nC,12\n");
    let out = dir.path().join("out");
    let o = plotwise(&["analyze", "--data", &data, "--design", &design, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.join("plots").exists());
    let manifest = read(&out, "manifest.txt");
    assert!(manifest.contains("# note: comparison plots skipped: no treatment effect is significant"));
    let rec: serde_json::Value = serde_json::from_str(&read(&out, "recommendation.json")).unwrap();
    assert_eq!(rec["scope"], "none");
    assert_eq!(rec["top_group"], serde_json::json!([]));
}

#[test]
fn grouped_analysis_isolates_failures() {
    let dir = TempDir::new().unwrap();
    let design = write(dir.path(), "d.toml", CRD_DESIGN);
    let mut csv = String::from("Year,Treatment,Yield\n");
    for (year, shift) in [("2021", 0.0), ("2022", 5.0)] {
        for (t, base) in [("A", 10.0), ("B", 20.0)] {
            for r in [-1.0, 0.0, 1.5] {
                csv.push_str(&format!("{year},{t},{}\n", base + shift + r));
            }
        }
    }
    csv.push_str("2023,A,10\n2023,A,11\n2023,B,20\n");
    let data = write(dir.path(), "d.csv", &csv);
    let out = dir.path().join("out");
    let o = plotwise(&[
        "analyze", "--data", &data, "--design", &design, "--groups", "Year", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("== Year=2021 ==") && text.contains("== Year=2022 =="));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("Year=2023"));

    let groups = read(&out, "groups.csv");
    assert_eq!(groups.lines().count(), 4);
    assert!(groups.lines().next().unwrap().starts_with("Group,Directory,Status"));
    assert!(read(&out, "Year=2021/anova.csv").contains("Treatment,1,"));
    assert!(read(&out, "Year=2023/error.txt").starts_with("UnbalancedDesign:"));
}

#[test]
fn rerun_overwrites_own_bundle_but_not_foreign_directories() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b");
    let o = out.to_str().unwrap();
    assert_eq!(plotwise(&["analyze", "--dataset", "gxe", "--out", o]).status.code(), Some(0));
    let first = read(&out, "manifest.txt");
    // a smaller bundle into the same directory removes the stale files
    assert_eq!(plotwise(&["analyze", "--dataset", "crd", "--out", o]).status.code(), Some(0));
    assert!(!out.join("stability").exists());
    assert!(!out.join("blup.csv").exists());
    assert_ne!(first, read(&out, "manifest.txt"));

    let foreign = dir.path().join("foreign");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("thesis.tex"), "keep me").unwrap();
    let o = plotwise(&["analyze", "--dataset", "crd", "--out", foreign.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read(&foreign, "thesis.tex"), "keep me");
}

#[test]
fn structured_output_parses() {
    for name in ["crd", "split_plot", "gxe"] {
        let o = plotwise(&["analyze", "--dataset", name, "--format", "structured"]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(v["anova"].is_array(), "{name}");
        assert!(v["recommendation"]["narrative"].is_string(), "{name}");
    }
    let o = plotwise(&["analyze", "--dataset", "gxe", "--format", "structured"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["heritability"]["h2"].as_f64().unwrap() - 0.999).abs() < 1e-3);
}

#[test]
fn csv_format_prints_the_anova() {
    let o = plotwise(&["analyze", "--dataset", "rcbd", "--format", "csv"]);
    let text = stdout(&o);
    assert!(text.starts_with("Source,DF,SS,MS,F,p,ErrorTerm\n"));
    assert!(text.contains("\nVariety,3,"));
}

#[test]
fn minimize_reverses_the_objective() {
    let o = plotwise(&["analyze", "--dataset", "crd", "--minimize", "--format", "structured"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["recommendation"]["top_group"], serde_json::json!(["Control"]));
    assert_eq!(v["recommendation"]["minimize"], true);
}

#[test]
fn validate_reports_error_terms() {
    let o = plotwise(&["validate", "--dataset", "split_plot"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = |effect: &str| {
        text.lines()
            .find(|l| {
                let mut cols = l.split_whitespace();
                cols.next() == Some(effect) && cols.next().is_some_and(|df| df.parse::<usize>().is_ok())
            })
            .unwrap_or_else(|| panic!("no {effect} line in\n{text}"))
            .to_string()
    };
    assert!(line("Irrigation").trim_end().ends_with("Block:Irrigation"));
    assert!(line("Variety").trim_end().ends_with("Residual"));
}

#[test]
fn custom_design_over_builtin_data() {
    let dir = TempDir::new().unwrap();
    let design = write(
        dir.path(),
        "d.toml",
        "kind = \"rcbd\"\nresponse = \"Yield\"\nblock = \"Block\"\nalpha = 0.01\n\n[[factors]]\nname = \"Variety\"\nrole = \"fixed\"\n",
    );
    let o = plotwise(&["analyze", "--dataset", "rcbd", "--design", &design, "--format", "structured"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["design"]["alpha"], 0.01);
}
