//! Artifact bundles written by `almost-iso`: a directory of JSON tables, a
//! verification log and a manifest of SHA-256 checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use loopshift::loopgraph::EdgeNamer;
use loopshift::series::Series;
use loopshift::shiftspec::ShiftSpec;
use loopshift::spectral::{inflate_period, DEFAULT_TOL};
use loopshift::transform::{almost_iso, verify_magic, CodeChain, PipelineConfig, PipelineResult, Side};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Failure;
use crate::report;

pub const BUNDLE_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const DEFAULT_BUDGET: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub version: u32,
    pub degree: Option<usize>,
    pub tol: f64,
    pub beta: Option<String>,
    /// Length budget of the stage tables and of the injectivity check.
    pub budget: usize,
}

impl BundleConfig {
    pub fn new(degree: Option<usize>, tol: Option<f64>, beta: Option<String>, budget: Option<usize>) -> Self {
        BundleConfig {
            version: BUNDLE_VERSION,
            degree,
            tol: tol.unwrap_or(DEFAULT_TOL),
            beta,
            budget: budget.unwrap_or(DEFAULT_BUDGET),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, Failure> {
        Ok(PipelineConfig {
            tol: self.tol,
            beta: self.beta.as_deref().map(parse_beta).transpose()?,
            degree: self.degree,
            ..PipelineConfig::default()
        })
    }
}

pub fn parse_beta(s: &str) -> Result<BigRational, Failure> {
    BigRational::from_str(s.trim()).map_err(|_| Failure::usage(format!("beta {s:?} is not a fraction p/q")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub stages: BTreeMap<String, usize>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        ok,
        detail: detail.into(),
    }
}

/// Every identity and certificate of a pipeline result, with injectivity
/// over periodic points of period at most `budget`.
pub fn verify(res: &PipelineResult, budget: usize) -> Result<Vec<Check>, Failure> {
    let diag = &res.diagnostics;
    let mut out = vec![
        check(
            "common series identical on both sides",
            diag.common_equal && res.left.common_inflated() == res.right.common_inflated(),
            "",
        ),
        check("gap: short-loop identity", diag.gap.short_loop_identity, ""),
        check("gap: no short orbits", diag.gap.no_short_orbits, ""),
        check("gap: orbit discrepancy preserved", diag.gap.discrepancy_preserved, ""),
        check("gap: coefficients above beta^n", diag.gap.gap, ""),
    ];
    for (side, sd) in [(Side::F, &diag.f), (Side::G, &diag.g)] {
        let ll = &sd.loops_lemma;
        out.push(check(format!("{side}: loop deletion product identity"), ll.product_identity, ""));
        out.push(check(format!("{side}: loop deletion orbit identity"), ll.orbit_identity, ""));
        let optional = [
            ("condition (***) counting certificate", ll.condition_star),
            ("explicit graph census", ll.graph_census),
            ("explicit graph labels distinct", ll.graph_labels_distinct),
            ("explicit graph condition (***)", ll.graph_condition_star),
            ("deletions inside the R loops", ll.deletions_in_r),
        ];
        for (name, v) in optional {
            if let Some(ok) = v {
                out.push(check(format!("{side}: {name}"), ok, ""));
            }
        }
        out.push(check(format!("{side}: per-stage certificates"), sd.stage_certificates, ""));
        out.push(check(format!("{side}: condition (***) through the chain"), sd.condition_star, ""));
        let chain = res.chain(side);
        let verdicts = verify_magic(chain, &chain.magic)?;
        let good = verdicts.iter().filter(|v| v.is_none()).count();
        out.push(check(
            format!("{side}: magic words verified"),
            !verdicts.is_empty() && good == verdicts.len(),
            format!("{good}/{}", verdicts.len()),
        ));
        let code = chain.materialize(budget)?;
        let rep = code.verify_injectivity_periodic(budget);
        let mut detail = format!("{}/{} points, period <= {budget}", rep.points_passed, rep.points_checked);
        if let Some(first) = rep.failures.first() {
            let _ = write!(detail, "; first failure {first}");
        }
        out.push(check(format!("{side}: injectivity on periodic points"), rep.all_pass(), detail));
    }
    Ok(out)
}

pub fn log_text(f: &ShiftSpec, g: &ShiftSpec, res: &PipelineResult, checks: &[Check]) -> String {
    let diag = &res.diagnostics;
    let mut s = String::from("loopshift verification log\n");
    let _ = writeln!(s, "F: {}", f.name);
    let _ = writeln!(s, "G: {}", g.name);
    let _ = writeln!(
        s,
        "period {}, stripped degree {}, gamma {:.6}, beta {}, N {}",
        diag.period, diag.degree, diag.gamma, diag.beta, diag.n
    );
    for c in checks {
        let tail = if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) };
        let _ = writeln!(s, "{:<4} {}{tail}", report::mark(c.ok), c.name);
    }
    let pass = checks.iter().all(|c| c.ok);
    let _ = writeln!(s, "result: {}", if pass { "PASS" } else { "FAIL" });
    s
}

fn magic_json(chain: &CodeChain) -> Value {
    let names = EdgeNamer::new(&inflate_period(&chain.target, chain.period));
    let words: Vec<Value> = chain
        .magic
        .iter()
        .zip(chain.magic_symbols())
        .map(|(w, sym)| json!({"loops": report::loops(&w.loops), "symbols": names.word(sym)}))
        .collect();
    Value::Array(words)
}

fn stage_json(chain: &CodeChain, s: usize, budget: usize) -> Result<Value, Failure> {
    let st = &chain.stages[s];
    let code = chain.stage_code(s, budget)?;
    let table: Vec<Value> = code
        .loop_table
        .iter()
        .map(|(d, img)| json!({"domain": report::loop_ref(d), "image": report::loops(img)}))
        .collect();
    Ok(json!({
        "index": s,
        "kind": st.kind,
        "period": chain.period,
        "codomain": report::series(&st.codomain),
        "k": report::loops(&st.k),
        "h": report::series(&st.h),
        "domain": report::series(&st.domain),
        "magic_loop": st.magic_loop().map(|w| report::loop_ref(&w)),
        "budget": budget,
        "code": table,
    }))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("bundle json serializes");
    s.push('\n');
    s
}

fn common_json(common: &Series, res: &PipelineResult) -> Value {
    json!({
        "period": res.diagnostics.period,
        "degree": common.degree(),
        "coeffs": report::series(common),
    })
}

/// Relative path → contents, excluding the manifest.
pub fn files(
    f: &ShiftSpec,
    g: &ShiftSpec,
    cfg: &BundleConfig,
    res: &PipelineResult,
    checks: &[Check],
) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    out.insert("inputs/F.json".to_string(), format!("{}\n", f.to_json()));
    out.insert("inputs/G.json".to_string(), format!("{}\n", g.to_json()));
    out.insert("config.json".to_string(), pretty(cfg));
    out.insert("common.json".to_string(), pretty(&common_json(res.left.common_inflated(), res)));
    out.insert("diagnostics.json".to_string(), pretty(&res.diagnostics));
    let gp = &res.gap;
    out.insert(
        "gap.json".to_string(),
        pretty(&json!({
            "n": gp.n,
            "beta": gp.beta.to_string(),
            "b": report::series(&gp.b),
            "f_bar": report::series(&gp.f_bar),
            "g_bar": report::series(&gp.g_bar),
            "f": report::series(&gp.f),
            "g": report::series(&gp.g),
            "checks": gp.checks,
        })),
    );
    out.insert(
        "magic.json".to_string(),
        pretty(&json!({"F": magic_json(&res.left), "G": magic_json(&res.right)})),
    );
    for side in [Side::F, Side::G] {
        let chain = res.chain(side);
        for s in 0..chain.levels() {
            out.insert(format!("stages/{side}/{s:04}.json"), pretty(&stage_json(chain, s, cfg.budget)?));
        }
    }
    out.insert("verification.log".to_string(), log_text(f, g, res, checks));
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the files and the manifest. Files listed in an older manifest at
/// the same place are removed first, so a rerun leaves no stale stages.
pub fn write(dir: &Path, files: &BTreeMap<String, String>, res: &PipelineResult) -> Result<Manifest, Failure> {
    if let Ok(old) = read_manifest(dir) {
        for e in &old.files {
            if is_safe_relative(&e.path) {
                let _ = std::fs::remove_file(dir.join(&e.path));
            }
        }
    }
    let mut entries = Vec::new();
    for (path, contents) in files {
        let full = dir.join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&full, contents)?;
        entries.push(ManifestEntry {
            path: path.clone(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
    }
    let manifest = Manifest {
        version: BUNDLE_VERSION,
        stages: [
            ("F".to_string(), res.left.levels()),
            ("G".to_string(), res.right.levels()),
        ]
        .into(),
        files: entries,
    };
    std::fs::write(dir.join(MANIFEST), pretty(&manifest))?;
    Ok(manifest)
}

fn is_safe_relative(p: &str) -> bool {
    let path = Path::new(p);
    path.is_relative() && path.components().all(|c| matches!(c, std::path::Component::Normal(_)))
}

fn read_manifest(dir: &Path) -> Result<Manifest, Failure> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    serde_json::from_str(&text).map_err(|e| Failure::verification(format!("manifest: {e}")))
}

pub struct Loaded {
    pub f: ShiftSpec,
    pub g: ShiftSpec,
    pub result: PipelineResult,
}

/// Checks every checksum, then rebuilds the pipeline from the recorded
/// inputs and configuration and compares the common series.
pub fn load(dir: &Path) -> Result<Loaded, Failure> {
    let manifest = read_manifest(dir)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Failure::verification(format!("bundle version {}", manifest.version)));
    }
    let mut contents = BTreeMap::new();
    for e in &manifest.files {
        if !is_safe_relative(&e.path) {
            return Err(Failure::verification(format!("manifest path {:?}", e.path)));
        }
        let bytes = std::fs::read(dir.join(&e.path))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(Failure::verification(format!("checksum mismatch for {}", e.path)));
        }
        contents.insert(e.path.clone(), String::from_utf8_lossy(&bytes).into_owned());
    }
    let get = |p: &str| {
        contents
            .get(p)
            .ok_or_else(|| Failure::verification(format!("bundle lacks {p}")))
    };
    let f = ShiftSpec::parse(get("inputs/F.json")?)?;
    let g = ShiftSpec::parse(get("inputs/G.json")?)?;
    let config: BundleConfig =
        serde_json::from_str(get("config.json")?).map_err(|e| Failure::verification(format!("config.json: {e}")))?;
    let pcfg = config.pipeline()?;
    let result = almost_iso(&f.expand(None)?, &g.expand(None)?, &pcfg)?;
    let common: Value = serde_json::from_str(get("common.json")?)?;
    if common != common_json(result.left.common_inflated(), &result) {
        return Err(Failure::verification("rebuilt common series differs from common.json"));
    }
    Ok(Loaded { f, g, result })
}
