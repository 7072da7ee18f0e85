//! Experiment runners behind the command line: sampling in checkpointed
//! batches, analysis into named checks, and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};

pub mod grr;
pub mod identities;
pub mod regularity;
pub mod sups;
pub mod walsh;

/// Version of the manifest layout.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One acceptance check of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub target: String,
    /// Secondary checks are reported but do not change the exit status.
    pub primary: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, value: f64, target: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            target: target.into(),
            primary: true,
        }
    }

    pub fn secondary(mut self) -> Self {
        self.primary = false;
        self
    }

    pub fn line(&self) -> String {
        let tag = match (self.pass, self.primary) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        format!("{tag} {}: {} (target {})", self.name, fmt_value(self.value), self.target)
    }
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass || !c.primary)
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub experiment: ExperimentKind,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        all_pass(&self.checks)
    }
}

/// Seed of an independent random stream for a named sampling stage.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finaliser
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checksum of one persisted batch of per-path rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub stage: String,
    pub seed: u64,
    pub index: usize,
    pub first_path: u64,
    pub paths: usize,
    pub sha256: String,
}

/// Runs per-path computations in batches. On disk, each batch is one CSV
/// of rows plus an entry in `index.json`; with `resume` set, batches whose
/// file still matches its recorded checksum are read back instead of
/// recomputed. Rows are written in shortest round-trip form, so resumed
/// and fresh runs agree bit for bit.
pub struct BatchStore {
    dir: Option<PathBuf>,
    resume: bool,
    batch_size: usize,
    previous: Vec<BatchRecord>,
    pub records: Vec<BatchRecord>,
}

impl BatchStore {
    pub fn in_memory(batch_size: usize) -> Self {
        Self {
            dir: None,
            resume: false,
            batch_size: batch_size.max(1),
            previous: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn on_disk(dir: &Path, batch_size: usize, resume: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let index = dir.join("index.json");
        let previous = if resume && index.exists() {
            serde_json::from_str(&fs::read_to_string(&index)?)?
        } else {
            Vec::new()
        };
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            resume,
            batch_size: batch_size.max(1),
            previous,
            records: Vec::new(),
        })
    }

    fn batch_file(&self, stage: &str, index: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{stage}-{index:05}.csv")))
    }

    fn reuse(&self, rec: &BatchRecord) -> Option<Vec<Vec<f64>>> {
        if !self.resume {
            return None;
        }
        let old = self.previous.iter().find(|p| p.stage == rec.stage && p.seed == rec.seed && p.index == rec.index && p.first_path == rec.first_path && p.paths == rec.paths)?;
        let bytes = fs::read(self.batch_file(&rec.stage, rec.index)?).ok()?;
        if sha256_hex(&bytes) != old.sha256 {
            return None;
        }
        let text = String::from_utf8(bytes).ok()?;
        let rows: Option<Vec<Vec<f64>>> = text.lines().map(|l| l.split(',').map(|v| v.parse().ok()).collect()).collect();
        rows.filter(|r| r.len() == rec.paths)
    }

    fn save_index(&self) -> Result<()> {
        if let Some(d) = &self.dir {
            let mut all = self.previous.clone();
            for r in &self.records {
                all.retain(|p| !(p.stage == r.stage && p.index == r.index));
                all.push(r.clone());
            }
            let tmp = d.join("index.json.tmp");
            fs::write(&tmp, serde_json::to_string_pretty(&all)?)?;
            fs::rename(tmp, d.join("index.json"))?;
        }
        Ok(())
    }

    /// Rows f(0), …, f(n−1) of stage `stage` computed with `seed`.
    pub fn rows(&mut self, stage: &str, seed: u64, n: usize, mut f: impl FnMut(u64) -> Result<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n);
        let bs = self.batch_size;
        for (index, first) in (0..n).step_by(bs).enumerate() {
            let len = bs.min(n - first);
            let mut rec = BatchRecord {
                stage: stage.to_string(),
                seed,
                index,
                first_path: first as u64,
                paths: len,
                sha256: String::new(),
            };
            if let Some(rows) = self.reuse(&rec) {
                rec.sha256 = self.previous.iter().find(|p| p.stage == rec.stage && p.index == index).map(|p| p.sha256.clone()).unwrap_or_default();
                self.records.push(rec);
                out.extend(rows);
                continue;
            }
            let rows = (first..first + len).map(|p| f(p as u64)).collect::<Result<Vec<_>>>()?;
            let mut text = String::new();
            for r in &rows {
                let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            rec.sha256 = sha256_hex(text.as_bytes());
            if let Some(path) = self.batch_file(stage, index) {
                let tmp = path.with_extension("tmp");
                fs::write(&tmp, &text)?;
                fs::rename(tmp, &path)?;
            }
            self.records.push(rec);
            self.save_index()?;
            out.extend(rows);
        }
        Ok(out)
    }
}

/// Where an experiment writes its artifacts; `None` keeps everything in
/// memory.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub files: Vec<PathBuf>,
}

impl Sink {
    pub fn none() -> Self {
        Self { dir: None, files: Vec::new() }
    }

    pub fn at(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            files: Vec::new(),
        })
    }

    /// Writes an artifact produced by `f` into the run directory.
    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if let Some(d) = &self.dir {
            let mut buf = Vec::new();
            f(&mut buf)?;
            let p = d.join(name);
            fs::write(&p, buf)?;
            self.files.push(p);
        }
        Ok(())
    }
}

/// Everything an experiment needs.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub store: BatchStore,
    pub sink: Sink,
    pub warnings: Vec<String>,
}

impl<'a> Ctx<'a> {
    pub fn in_memory(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            store: BatchStore::in_memory(cfg.mc.batch_size),
            sink: Sink::none(),
            warnings: Vec::new(),
        }
    }

    pub fn seed(&self, stage: &str) -> u64 {
        stage_seed(self.cfg.mc.seed, stage)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

/// Provenance of a run: config hash, code version, seeds, batch and
/// artifact checksums, and wall-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub n_paths: usize,
    pub batches: Vec<BatchRecord>,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_clock_seconds: f64,
    pub pass: bool,
}

impl RunManifest {
    /// Seeds of every sampled stream, in first-use order.
    pub fn seed_list(&self) -> Vec<u64> {
        let mut s = vec![self.seed];
        for b in &self.batches {
            if !s.contains(&b.seed) {
                s.push(b.seed);
            }
        }
        s
    }
}

/// Dispatches to the selected experiment without touching the disk.
pub fn execute(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    match ctx.cfg.experiment {
        ExperimentKind::Identities => identities::run(ctx),
        ExperimentKind::Regularity => regularity::run(ctx),
        ExperimentKind::GrrCheck => grr::run(ctx),
        ExperimentKind::DensityF => sups::run_density_f(ctx),
        ExperimentKind::DensityM0 => sups::run_density_m0(ctx),
        ExperimentKind::Tails => sups::run_tails(ctx),
        ExperimentKind::WalshScaling => walsh::run_walsh(ctx),
        ExperimentKind::Gamma22Moments => walsh::run_gamma22(ctx),
    }
}

/// Validates, runs and writes `checks.csv`, `outcome.json` and
/// `manifest.json` under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, resume: bool) -> Result<RunOutcome> {
    let diags = cfg.validate()?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        store: BatchStore::on_disk(&out.join("batches"), cfg.mc.batch_size, resume)?,
        sink: Sink::at(out)?,
        warnings: diags.iter().filter(|d| !d.check.holds).map(|d| d.line()).collect(),
    };
    let checks = execute(&mut ctx)?;
    let outcome = RunOutcome {
        experiment: cfg.experiment,
        checks,
        warnings: ctx.warnings.clone(),
    };
    ctx.sink.write("checks.csv", |w| {
        writeln!(w, "name,pass,value,target,primary")?;
        for c in &outcome.checks {
            writeln!(w, "\"{}\",{},{},\"{}\",{}", c.name, c.pass, c.value, c.target, c.primary)?;
        }
        Ok(())
    })?;
    ctx.sink.write("outcome.json", |w| Ok(serde_json::to_writer_pretty(w, &outcome)?))?;
    let config_text = cfg.to_toml_string()?;
    ctx.sink.write("config.toml", |w| Ok(w.write_all(config_text.as_bytes())?))?;
    let mut artifacts = Vec::new();
    for f in &ctx.sink.files {
        artifacts.push(ArtifactRecord {
            file: f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: sha256_hex(&fs::read(f)?),
        });
    }
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        experiment: cfg.experiment,
        config_hash: sha256_hex(config_text.as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.mc.seed,
        n_paths: cfg.mc.n_paths,
        batches: ctx.store.records.clone(),
        artifacts,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        pass: outcome.pass(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(outcome)
}

/// Reads a finished run and checks every artifact against the manifest.
/// Returns the manifest, the outcome and the names of mismatching files.
pub fn report(out: &Path) -> Result<(RunManifest, RunOutcome, Vec<String>)> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json"))?)?;
    let outcome: RunOutcome = serde_json::from_str(&fs::read_to_string(out.join("outcome.json"))?)?;
    let mut bad = Vec::new();
    for a in &manifest.artifacts {
        match fs::read(out.join(&a.file)) {
            Ok(b) if sha256_hex(&b) == a.sha256 => {}
            _ => bad.push(a.file.clone()),
        }
    }
    Ok((manifest, outcome, bad))
}

pub(crate) fn require_paths(n: usize, needed: usize) -> Result<()> {
    if n < needed {
        return Err(Error::InsufficientSamples { needed, got: n });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_resume_identically() {
        let dir = tempfile::tempdir().unwrap();
        let f = |p: u64| Ok(vec![p as f64 / 3.0, (p as f64).sqrt(), -1e-300]);
        let mut a = BatchStore::on_disk(dir.path(), 4, false).unwrap();
        let ra = a.rows("s", 1, 10, f).unwrap();
        let mut b = BatchStore::on_disk(dir.path(), 4, true).unwrap();
        let mut calls = 0;
        let rb = b
            .rows("s", 1, 10, |p| {
                calls += 1;
                f(p)
            })
            .unwrap();
        assert_eq!(ra, rb);
        assert_eq!(calls, 0);
        assert_eq!(a.records, b.records);
        // a corrupted batch is recomputed
        fs::write(dir.path().join("s-00001.csv"), "garbage\n").unwrap();
        let mut c = BatchStore::on_disk(dir.path(), 4, true).unwrap();
        let mut calls = 0;
        let rc = c
            .rows("s", 1, 10, |p| {
                calls += 1;
                f(p)
            })
            .unwrap();
        assert_eq!(ra, rc);
        assert_eq!(calls, 4);
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, "a"), stage_seed(1, "b"));
        assert_eq!(stage_seed(7, "x"), stage_seed(7, "x"));
    }
}
