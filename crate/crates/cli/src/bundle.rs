//! The exported report bundle: every table, document and figure of an
//! analysis, plus `manifest.txt` with a SHA-256 checksum per file.
//!
//! The bundle is assembled in memory and only then written, in manifest
//! order, so a failed analysis never leaves a half-written directory.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use plotwise::{Analysis, GroupResult};
use sha2::{Digest, Sha256};

use crate::{json, plots, report, tables};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleFile {
    /// Path relative to the bundle root, `/`-separated.
    pub path: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bundle {
    files: Vec<BundleFile>,
    /// Parts of the bundle that were skipped, with the reason.
    notes: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Bundle {
    pub fn files(&self) -> &[BundleFile] {
        &self.files
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.path == path).map(|f| f.contents.as_slice())
    }

    fn add(&mut self, path: String, contents: impl Into<Vec<u8>>) {
        self.files.push(BundleFile {
            path,
            contents: contents.into(),
        });
    }

    /// `<sha256>  <path>` per file, then one `# note:` line per skipped part.
    /// The manifest does not list itself.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            out.push_str(&format!("{}  {}\n", sha256_hex(&f.contents), f.path));
        }
        for n in &self.notes {
            out.push_str(&format!("# note: {n}\n"));
        }
        out
    }

    /// Writes the bundle under `dir`, replacing an earlier bundle there.
    /// A non-empty directory holding anything else is left untouched.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        if dir.exists() {
            clear_previous(dir)?;
        }
        fs::create_dir_all(dir)?;
        for f in &self.files {
            let path = dir.join(&f.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &f.contents)?;
        }
        fs::write(dir.join(MANIFEST), self.manifest())
    }
}

fn walk(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(root.join(rel))? {
        let entry = entry?;
        let r = rel.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            walk(root, &r, out)?;
        } else {
            out.push(r);
        }
    }
    Ok(())
}

fn listed_paths(manifest: &str) -> BTreeSet<PathBuf> {
    manifest
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once("  ").map(|(_, p)| p))
        .filter(|p| !p.is_empty() && !p.starts_with('/') && !p.split('/').any(|c| c == ".." || c.is_empty()))
        .map(PathBuf::from)
        .collect()
}

fn clear_previous(dir: &Path) -> io::Result<()> {
    let mut present = Vec::new();
    walk(dir, Path::new(""), &mut present)?;
    if present.is_empty() {
        return Ok(());
    }
    let listed = match fs::read_to_string(dir.join(MANIFEST)) {
        Ok(m) => listed_paths(&m),
        Err(_) => {
            return Err(io::Error::other(
                "output directory is not empty and holds no previous bundle",
            ))
        }
    };
    let manifest = PathBuf::from(MANIFEST);
    if let Some(stray) = present.iter().find(|p| **p != manifest && !listed.contains(*p)) {
        return Err(io::Error::other(format!(
            "output directory holds `{}`, which is not part of the previous bundle",
            stray.display()
        )));
    }
    for p in &present {
        fs::remove_file(dir.join(p))?;
    }
    // Deepest directories first; directories that still hold something stay.
    let mut dirs: Vec<PathBuf> = present
        .iter()
        .flat_map(|p| p.ancestors().skip(1).map(Path::to_path_buf).collect::<Vec<_>>())
        .filter(|d| !d.as_os_str().is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    dirs.sort_by_key(|d| std::cmp::Reverse(d.components().count()));
    for d in dirs {
        let _ = fs::remove_dir(dir.join(d));
    }
    Ok(())
}

/// Directory name for a group label such as `Year=2021,Site=North`.
fn group_dir(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_alphanumeric() || "=,-._".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("group_{s}")
    } else {
        s
    }
}

fn add_analysis(b: &mut Bundle, prefix: &str, note_prefix: &str, a: &Analysis) {
    let p = |name: &str| format!("{prefix}{name}");
    b.add(p("anova.csv"), tables::anova_csv(a));
    b.add(p("comparisons.csv"), tables::comparisons_csv(a));
    b.add(p("comparisons_pairs.csv"), tables::pairs_csv(a));
    b.add(
        p("diagnostics.json"),
        pretty(&json::diagnostics_json(&a.diagnostics)),
    );
    match tables::variance_components_csv(a) {
        Some(t) => b.add(p("variance_components.csv"), t),
        None => b
            .notes
            .push(format!("{note_prefix}variance_components.csv skipped: the design has no random terms")),
    }
    match tables::blup_csv(a) {
        Some(t) => b.add(p("blup.csv"), t),
        None => b
            .notes
            .push(format!("{note_prefix}blup.csv skipped: BLUPs apply to mixed and multi-environment designs")),
    }
    match &a.stability {
        Some(s) => {
            for (name, t) in tables::stability_csvs(s) {
                b.add(p(&format!("stability/{name}")), t);
            }
        }
        None => b.notes.push(format!(
            "{note_prefix}stability tables skipped: not a multi-environment trial or stability analysis unavailable"
        )),
    }
    let response = &a.design.spec.response;
    b.add(
        p("recommendation.txt"),
        report::recommendation_text(&a.recommendation, response),
    );
    b.add(
        p("recommendation.json"),
        pretty(&json::recommendation_json(&a.recommendation)),
    );
    b.add(p("report.txt"), report::report_text(a));
    b.add(p("analysis.json"), pretty(&json::analysis_json(a)));
    let figures = plots::emit_plots(a);
    for f in figures.plots {
        b.add(p(&format!("plots/{}", f.file)), f.svg);
    }
    for n in figures.notes {
        b.notes.push(format!("{note_prefix}{n}"));
    }
}

fn pretty(v: &serde_json::Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("JSON values serialise"))
}

/// Assembles the bundle for the outcome of a (possibly grouped) analysis.
/// An ungrouped analysis fills the bundle root; groups get one directory
/// each, and a failed group leaves only `error.txt`.
pub fn build_bundle(results: &[GroupResult]) -> Bundle {
    let mut b = Bundle::default();
    if let [only] = results {
        if only.label.is_empty() {
            if let Ok(a) = &only.result {
                add_analysis(&mut b, "", "", a);
            }
            return b;
        }
    }
    let mut summary = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = summary.write_record(["Group", "Directory", "Status", "Scope", "TopGroup", "Error"]);
    for g in results {
        let dir = group_dir(&g.label);
        match &g.result {
            Ok(a) => {
                add_analysis(&mut b, &format!("{dir}/"), &format!("{}: ", g.label), a);
                let r = &a.recommendation;
                let _ = summary.write_record([
                    g.label.as_str(),
                    dir.as_str(),
                    "ok",
                    r.scope.as_str(),
                    r.top_group.join(" ").as_str(),
                    "",
                ]);
            }
            Err(e) => {
                b.add(format!("{dir}/error.txt"), format!("{}: {e}\n", e.kind()));
                let _ = summary.write_record([g.label.as_str(), dir.as_str(), "failed", "", "", e.kind()]);
            }
        }
    }
    let bytes = summary.into_inner().expect("in-memory flush");
    b.files.insert(0, BundleFile {
        path: "groups.csv".into(),
        contents: bytes,
    });
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_then_notes() {
        let mut b = Bundle::default();
        b.add("a.csv".into(), "x\n");
        b.notes.push("plot skipped".into());
        let m = b.manifest();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].ends_with("  a.csv"));
        assert_eq!(lines[0].split("  ").next().unwrap().len(), 64);
        assert_eq!(lines[1], "# note: plot skipped");
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_paths_are_confined() {
        let listed = listed_paths("aa  ok.csv\nbb  ../evil\ncc  /abs\n# note: x\ndd  plots/p.svg\n");
        let v: Vec<_> = listed.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        assert_eq!(v, vec!["ok.csv", "plots/p.svg"]);
    }

    #[test]
    fn group_directory_names() {
        assert_eq!(group_dir("Year=2021"), "Year=2021");
        assert_eq!(group_dir("Site=N/S"), "Site=N_S");
        assert_eq!(group_dir(".."), "group_..");
    }
}
