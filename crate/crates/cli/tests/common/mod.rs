#![allow(dead_code)]

use std::path::{Path, PathBuf};

use divpref::features::save_embeddings;
use divpref::prefdata::{split_dataset, write_records, PreferencePair};
use divpref::synthetic::{generate_population, PopulationConfig};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub embeddings: PathBuf,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn features_flag(&self) -> String {
        format!("file:{}", self.embeddings.display())
    }
}

fn write_pairs(path: &Path, pairs: &[PreferencePair]) {
    let mut out = std::fs::File::create(path).unwrap();
    write_records(&mut out, pairs).unwrap();
}

/// A small synthetic population split into files, with its embedding table and a
/// short training config.
pub fn population_files(pairs: usize, seed: u64) -> Fixture {
    let config = PopulationConfig {
        pairs,
        noise_dims: 6,
        seed,
        ..PopulationConfig::default()
    };
    let pop = generate_population(&config).unwrap();
    let split = split_dataset(&pop.pairs, seed, pairs / 4, pairs / 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let fx = Fixture {
        train: p("train.jsonl"),
        dev: p("dev.jsonl"),
        test: p("test.jsonl"),
        embeddings: p("embeddings.jsonl"),
        config: p("train.toml"),
        dir,
    };
    write_pairs(&fx.train, &split.train);
    write_pairs(&fx.dev, &split.dev);
    write_pairs(&fx.test, &split.test);
    save_embeddings(&pop.embeddings, &fx.embeddings).unwrap();
    std::fs::write(&fx.config, "learning_rate = 0.01\nmax_epochs = 3\nhidden = 8\n").unwrap();
    fx
}

pub fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["divpref"];
    argv.extend_from_slice(args);
    divpref_cli::run(&argv)
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}
