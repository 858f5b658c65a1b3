//! On-disk corpus layout: `<root>/{train,val,test}/<project>/**.ts`, with a
//! per-project `graph.json` cache keyed by a hash of the sources.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tdg_core::eval::GeneratedCorpus;
use tdg_core::frontend::{compile_project, SourceProject};
use tdg_core::graph::{build_graph, LibraryManifest, TypeDependencyGraph, GRAPH_FORMAT_VERSION};
use tdg_core::trainer::{Corpus, Project};

pub const SPLITS: [&str; 3] = ["train", "val", "test"];
const CACHE_FILE: &str = "graph.json";
const HASH_FILE: &str = "graph.json.sha256";

pub fn source_hash(src: &SourceProject) -> String {
    let mut h = Sha256::new();
    h.update(format!("tdg-graph-v{GRAPH_FORMAT_VERSION}\0"));
    for f in &src.files {
        h.update(f.path.as_bytes());
        h.update([0]);
        h.update(f.text.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub fn extract(src: &SourceProject) -> Result<TypeDependencyGraph> {
    let ir = compile_project(src)?;
    Ok(build_graph(&ir, &LibraryManifest::default()))
}

/// Loads one project directory, reusing the cached graph when the sources
/// are unchanged.
pub fn load_project(dir: &Path, use_cache: bool) -> Result<Project> {
    let src = SourceProject::from_dir(dir)?;
    let hash = source_hash(&src);
    let (cache, stamp) = (dir.join(CACHE_FILE), dir.join(HASH_FILE));
    if use_cache && fs::read_to_string(&stamp).is_ok_and(|s| s.trim() == hash) {
        if let Ok(text) = fs::read_to_string(&cache) {
            if let Ok(graph) = TypeDependencyGraph::from_json(&text) {
                return Ok(Project {
                    name: src.project_id,
                    graph,
                });
            }
        }
    }
    let graph = extract(&src).with_context(|| format!("extracting {}", dir.display()))?;
    if use_cache {
        fs::write(&cache, graph.to_json())
            .with_context(|| format!("writing {}", cache.display()))?;
        fs::write(&stamp, format!("{hash}\n"))?;
    }
    Ok(Project {
        name: src.project_id,
        graph,
    })
}

fn project_dirs(split: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(split).with_context(|| format!("reading {}", split.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn load_split(root: &Path, split: &str, use_cache: bool) -> Result<Vec<Project>> {
    let dir = root.join(split);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    project_dirs(&dir)?
        .par_iter()
        .map(|d| load_project(d, use_cache))
        .collect()
}

pub fn load_corpus(root: &Path, use_cache: bool) -> Result<Corpus> {
    if !root.join("train").is_dir() {
        bail!(
            "{}: not a corpus directory (missing train/)",
            root.display()
        );
    }
    Ok(Corpus {
        train: load_split(root, "train", use_cache)?,
        val: load_split(root, "val", use_cache)?,
        test: load_split(root, "test", use_cache)?,
    })
}

pub fn write_corpus(root: &Path, corpus: &GeneratedCorpus) -> Result<usize> {
    let mut files = 0;
    for (split, projects) in corpus.splits() {
        for p in projects {
            let dir = root.join(split).join(&p.name);
            for f in &p.files {
                let path = dir.join(&f.path);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, &f.text).with_context(|| format!("writing {}", path.display()))?;
                files += 1;
            }
        }
    }
    Ok(files)
}
