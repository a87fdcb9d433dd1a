use std::fmt::Write as _;
use std::path::Path;

use loopshift::codec::{coding_time_stats, return_time_tail, BlockCode};
use loopshift::loopgraph::first_return_series;
use loopshift::series::Series;
use loopshift::shiftspec::ShiftSpec;
use loopshift::spectral::{self, EntropyConfig, LambdaEnclosure, DEFAULT_SPR_MARGIN, DEFAULT_TOL};
use loopshift::transform::{
    almost_iso as run_pipeline, choose_beta, gapprep as run_gapprep, loops_lemma_run, CodeChain, LoopsLemmaConfig, Side,
};
use loopshift::zeta::{self, OrbitData};
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::bundle::{self, BundleConfig};
use crate::error::Failure;
use crate::report::{self, mark, strings, table, Report};
use crate::{Global, Mode, SideArg};

pub fn load_spec(path: &Path) -> Result<ShiftSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(crate::error::IO, "Io", format!("{}: {e}", path.display())))?;
    Ok(ShiftSpec::parse(&text)?)
}

/// Shift spec with `degree` pinned so that it expands on its own to `f`.
fn pinned(spec: &ShiftSpec, f: &Series) -> ShiftSpec {
    let mut out = spec.clone();
    out.degree = Some(f.degree());
    if let Some(c) = out.coeffs.as_mut() {
        c.truncate(f.degree());
    }
    out
}

fn entropy_config(g: &Global) -> EntropyConfig {
    EntropyConfig {
        tol: g.tol.unwrap_or(DEFAULT_TOL),
        spr_margin: DEFAULT_SPR_MARGIN,
    }
}

fn lambda_json(lam: &LambdaEnclosure) -> Value {
    json!({
        "lo": lam.lo,
        "hi": lam.hi,
        "estimate": lam.estimate,
        "method": lam.method,
        "exact": lam.exact,
    })
}

fn lambda_line(lam: &LambdaEnclosure) -> String {
    if lam.exact {
        format!("{} (exact root)", lam.estimate)
    } else {
        format!("{} in [{}, {}] ({:?})", lam.estimate, lam.lo, lam.hi, lam.method)
    }
}

pub fn analyze(g: &Global, path: &Path) -> Result<Report, Failure> {
    let spec = load_spec(path)?;
    let f = spec.expand(g.degree)?;
    let rep = spectral::analyze(&f, &entropy_config(g))?;
    let od = OrbitData::of(&f);
    let residual = zeta::product_formula_residual(&f, &od.orbits);
    let residual_ok = residual.is_zero();
    let ev = &rep.evidence;
    let json = json!({
        "name": spec.name,
        "degree": f.degree(),
        "coeffs": report::series(&f),
        "lambda": lambda_json(&rep.lambda),
        "entropy": rep.lambda.estimate.ln(),
        "period": rep.period,
        "vere_jones": rep.vere_jones,
        "spr": rep.spr,
        "evidence": ev,
        "fix": report::bigs(&od.fix),
        "orbits": report::bigs(&od.orbits),
        "product_residual_zero": residual_ok,
    });
    let mut t = String::new();
    let _ = writeln!(t, "{} (degree {})", spec.name, f.degree());
    let _ = writeln!(t, "lambda      {}", lambda_line(&rep.lambda));
    let _ = writeln!(t, "entropy     {}", rep.lambda.estimate.ln());
    let _ = writeln!(t, "period      {}", rep.period);
    let _ = writeln!(t, "class       {:?}", rep.vere_jones);
    let _ = writeln!(t, "SPR         {:?} (growth {:.6}, ratio {:.6}, tail {})", rep.spr, ev.growth, ev.ratio, ev.tail_model);
    let _ = writeln!(t, "partial sum {} + tail {}", ev.partial_sum, ev.tail_estimate);
    let _ = writeln!(t, "product formula residual {}", if residual_ok { "OK (zero)" } else { "NONZERO" });
    let n: Vec<usize> = (1..=f.degree()).collect();
    t.push_str(&table(
        &["n", "f_n", "Fix_n", "O_n"],
        &[strings(&n), strings(f.coeffs()), strings(&od.fix), strings(&od.orbits)],
    ));
    let mut out = Report::new(json, t);
    if !residual_ok {
        out.verdict = Some(Failure::verification("product formula residual is nonzero"));
    }
    Ok(out)
}

pub fn almost_iso(g: &Global, f_path: &Path, g_path: &Path) -> Result<Report, Failure> {
    let dir = g
        .output
        .as_deref()
        .ok_or_else(|| Failure::usage("almost-iso needs --output DIR"))?;
    let fs = load_spec(f_path)?;
    let gs = load_spec(g_path)?;
    let big_f = fs.expand(g.degree)?;
    let big_g = gs.expand(g.degree)?;
    let (fs, gs) = (pinned(&fs, &big_f), pinned(&gs, &big_g));
    let cfg = BundleConfig::new(g.degree, g.tol, g.beta.clone(), g.budget);
    let res = run_pipeline(&big_f, &big_g, &cfg.pipeline()?)?;
    let checks = bundle::verify(&res, cfg.budget)?;
    let files = bundle::files(&fs, &gs, &cfg, &res, &checks)?;
    std::fs::create_dir_all(dir)?;
    let manifest = bundle::write(dir, &files, &res)?;
    let pass = checks.iter().all(|c| c.ok);
    let diag = &res.diagnostics;
    let json = json!({
        "bundle": dir.display().to_string(),
        "pass": pass,
        "period": diag.period,
        "beta": diag.beta,
        "n": diag.n,
        "common": report::series(res.left.common_inflated()),
        "stages": manifest.stages,
        "files": manifest.files.len() + 1,
        "checks": checks,
    });
    let mut t = bundle::log_text(&fs, &gs, &res, &checks);
    let _ = writeln!(t, "common {}", report::series_line(res.left.common_inflated()));
    let _ = writeln!(
        t,
        "bundle {} ({} files, stages F {} G {})",
        dir.display(),
        manifest.files.len() + 1,
        res.left.levels(),
        res.right.levels()
    );
    let mut out = Report::new(json, t);
    if !pass {
        out.verdict = Some(Failure::verification("bundle verification failed"));
    }
    Ok(out)
}

/// A bundle directory yields a pipeline chain; a spec file the identity.
fn chain_for(input: &Path, g: &Global, side: SideArg) -> Result<(String, CodeChain), Failure> {
    if input.is_dir() {
        let loaded = bundle::load(input)?;
        let side = match side {
            SideArg::F => Side::F,
            SideArg::G => Side::G,
        };
        let name = format!("{} <-> {} ({side})", loaded.f.name, loaded.g.name);
        Ok((name, loaded.result.chain(side).clone()))
    } else {
        let spec = load_spec(input)?;
        let f = spec.expand(g.degree)?;
        Ok((spec.name.clone(), CodeChain::identity(f, 1)))
    }
}

pub fn simulate(
    g: &Global,
    input: &Path,
    mode: Mode,
    samples: usize,
    period: usize,
    n_max: usize,
    side: SideArg,
) -> Result<Report, Failure> {
    match mode {
        Mode::ReturnTimes => {
            if input.is_dir() {
                return Err(Failure::usage("return-times takes a spec file"));
            }
            let spec = load_spec(input)?;
            let f = spec.expand(g.degree)?;
            let lam = spectral::entropy_with(&f, &entropy_config(g))?;
            let rep = return_time_tail(&f, &lam, n_max);
            let json = json!({
                "mode": "return-times",
                "name": spec.name,
                "degree": f.degree(),
                "lambda": lambda_json(&lam),
                "report": rep,
            });
            let mut t = String::new();
            let _ = writeln!(t, "return-time tail of {} (degree {})", spec.name, f.degree());
            let _ = writeln!(t, "lambda {}", lambda_line(&lam));
            let _ = writeln!(t, "mass   {}", rep.mass);
            let _ = writeln!(t, "ratio  {:.6} ({})", rep.ratio, if rep.exponential { "exponential" } else { "not exponential" });
            let n: Vec<usize> = (1..=rep.tails_f64.len()).collect();
            let tails: Vec<String> = rep.tails_f64.iter().map(|x| format!("{x:.6e}")).collect();
            t.push_str(&table(&["n", "T(n)/T(1)"], &[strings(&n), tails]));
            Ok(Report::new(json, t))
        }
        Mode::CodingTimes => {
            let (name, chain) = chain_for(input, g, side)?;
            let seed = g.seed.unwrap_or(0);
            let lam = spectral::entropy_with(chain.common_inflated(), &entropy_config(g))?;
            let stats = coding_time_stats(&chain, &lam, samples, seed)?;
            let json = json!({"mode": "coding-times", "name": name, "stats": stats});
            let mut t = String::new();
            let _ = writeln!(t, "coding times for {name}: {samples} samples, seed {seed}");
            let _ = writeln!(t, "mean      {}", stats.mean);
            let _ = writeln!(t, "censored  {}", stats.censored);
            match stats.tail_ratio {
                Some(r) => {
                    let _ = writeln!(t, "tail ratio {r:.6}");
                }
                None => t.push_str("tail ratio n/a\n"),
            }
            let keys: Vec<&usize> = stats.histogram.keys().collect();
            let vals: Vec<&usize> = stats.histogram.values().collect();
            t.push_str(&table(&["n(x)", "count"], &[strings(&keys), strings(&vals)]));
            Ok(Report::new(json, t))
        }
        Mode::Injectivity => {
            let (name, code) = if input.is_dir() {
                let (name, chain) = chain_for(input, g, side)?;
                (name, chain.materialize(period)?)
            } else {
                let spec = load_spec(input)?;
                let f = spec.expand(g.degree)?;
                (spec.name.clone(), BlockCode::identity(&f, period.min(f.degree())))
            };
            let rep = code.verify_injectivity_periodic(period);
            let pass = rep.all_pass();
            let json = json!({"mode": "injectivity", "name": name, "pass": pass, "report": rep});
            let mut t = String::new();
            let _ = writeln!(t, "injectivity of {name}, periods <= {period}");
            let _ = writeln!(t, "sequences        {}", rep.sequences);
            let _ = writeln!(t, "points checked   {}", rep.points_checked);
            let _ = writeln!(t, "points passed    {}", rep.points_passed);
            let _ = writeln!(t, "without magic    {}", rep.points_without_magic);
            for f in rep.failures.iter().take(10) {
                let _ = writeln!(t, "failure: {f}");
            }
            let _ = writeln!(t, "result: {}", if pass { "PASS" } else { "FAIL" });
            let mut out = Report::new(json, t);
            if !pass {
                out.verdict = Some(Failure::verification("injectivity check failed"));
            }
            Ok(out)
        }
    }
}

/// `"1:1,3:2"` → `R` with `R_1 = 1`, `R_3 = 2`, zero-padded to `degree`.
pub fn parse_r(s: &str, degree: usize) -> Result<Vec<BigUint>, Failure> {
    let mut r = vec![BigUint::default(); degree];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::usage(format!("--r entry {part:?} is not length:count"));
        let (n, c) = part.split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let c: BigUint = c.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        if n > degree {
            return Err(Failure::usage(format!("--r length {n} exceeds degree {degree}")));
        }
        r[n - 1] += c;
    }
    Ok(r)
}

pub fn loops_lemma(g: &Global, path: &Path, r: &str, require_magic: bool, restrict: bool) -> Result<Report, Failure> {
    let spec = load_spec(path)?;
    let f = spec.expand(g.degree)?;
    let rv = parse_r(r, f.degree())?;
    let cfg = LoopsLemmaConfig {
        require_magic,
        restrict_to_r: restrict,
        explicit_budget: g.budget.unwrap_or(LoopsLemmaConfig::default().explicit_budget),
        ..LoopsLemmaConfig::default()
    };
    let run = loops_lemma_run(&f, &rv, &cfg)?;
    let c = &run.checks;
    let mut checks = vec![("product identity", c.product_identity), ("orbit identity", c.orbit_identity)];
    let optional = [
        ("condition (***) counting certificate", c.condition_star),
        ("explicit graph census", c.graph_census),
        ("explicit graph labels distinct", c.graph_labels_distinct),
        ("explicit graph condition (***)", c.graph_condition_star),
        ("deletions inside the R loops", c.deletions_in_r),
    ];
    checks.extend(optional.iter().filter_map(|(n, v)| v.map(|ok| (*n, ok))));
    let pass = checks.iter().all(|(_, ok)| *ok);
    let json = json!({
        "name": spec.name,
        "degree": f.degree(),
        "r": run.r,
        "f_inf": report::series(&run.f_inf),
        "magic_loop": run.w.as_ref().map(report::loop_ref),
        "deleted": report::loops(&run.deleted),
        "checks": c,
        "pass": pass,
    });
    let mut t = String::new();
    let _ = writeln!(t, "loop deletion on {} (degree {})", spec.name, f.degree());
    let _ = writeln!(t, "deleted lengths {:?}", run.r);
    let _ = writeln!(t, "deleted loops   {}", strings(&run.deleted).join(" "));
    if let Some(w) = &run.w {
        let _ = writeln!(t, "magic loop      {w}");
    }
    let _ = writeln!(t, "f               {}", report::series_line(&f));
    let _ = writeln!(t, "f_inf           {}", report::series_line(&run.f_inf));
    for (name, ok) in &checks {
        let _ = writeln!(t, "{:<4} {name}", mark(*ok));
    }
    let mut out = Report::new(json, t);
    if !pass {
        out.verdict = Some(Failure::verification("loop deletion checks failed"));
    }
    Ok(out)
}

pub fn gapprep(g: &Global, f_path: &Path, g_path: &Path) -> Result<Report, Failure> {
    let fs = load_spec(f_path)?;
    let gs = load_spec(g_path)?;
    let big_f = fs.expand(g.degree)?;
    let big_g = gs.expand(g.degree)?;
    let d = big_f.degree().min(big_g.degree());
    let (big_f, big_g) = (big_f.truncate(d), big_g.truncate(d));
    let beta = match &g.beta {
        Some(b) => bundle::parse_beta(b)?,
        None => {
            let ecfg = entropy_config(g);
            let lf = spectral::entropy_with(&big_f, &ecfg)?;
            let lg = spectral::entropy_with(&big_g, &ecfg)?;
            let gamma = zeta::discrepancy_growth(&big_f, &big_g);
            let lambda = lf.lo.min(lg.lo);
            choose_beta(gamma, lambda)
                .ok_or(loopshift::transform::TransformError::NoValidBeta { gamma, lambda })?
        }
    };
    let gp = run_gapprep(&big_f, &big_g, &beta, g.budget.unwrap_or(d))?;
    let pass = gp.checks.all();
    let json = json!({
        "n": gp.n,
        "beta": gp.beta.to_string(),
        "b": report::series(&gp.b),
        "f_bar": report::series(&gp.f_bar),
        "g_bar": report::series(&gp.g_bar),
        "f": report::series(&gp.f),
        "g": report::series(&gp.g),
        "short_stages": {"F": gp.left.levels() - 1, "G": gp.right.levels() - 1},
        "checks": gp.checks,
        "pass": pass,
    });
    let mut t = String::new();
    let _ = writeln!(t, "gap preparation of {} and {}", fs.name, gs.name);
    let _ = writeln!(t, "beta {}, N {}", gp.beta, gp.n);
    for (label, s) in [("b", &gp.b), ("F_bar", &gp.f_bar), ("G_bar", &gp.g_bar), ("f", &gp.f), ("g", &gp.g)] {
        let _ = writeln!(t, "{label:<6} {}", report::series_line(s));
    }
    let ch = &gp.checks;
    for (name, ok) in [
        ("short-loop identity", ch.short_loop_identity),
        ("no short orbits", ch.no_short_orbits),
        ("orbit discrepancy preserved", ch.discrepancy_preserved),
        ("coefficients above beta^n", ch.gap),
    ] {
        let _ = writeln!(t, "{:<4} {name}", mark(ok));
    }
    let mut out = Report::new(json, t);
    if !pass {
        out.verdict = Some(Failure::verification("gap preparation checks failed"));
    }
    Ok(out)
}

pub fn first_return(
    g: &Global,
    spec: Option<&Path>,
    matrix: Option<&str>,
    vertex: Option<usize>,
) -> Result<Report, Failure> {
    let (name, adj, v, spec_degree) = match (spec, matrix) {
        (Some(p), _) => {
            let s = load_spec(p)?;
            let adj = s
                .matrix
                .clone()
                .ok_or_else(|| Failure::new(crate::error::SPEC, "InvalidSpec", "spec has no matrix"))?;
            (s.name.clone(), adj, vertex.or(s.vertex).unwrap_or(0), s.degree)
        }
        (None, Some(m)) => {
            let adj: Vec<Vec<u64>> =
                serde_json::from_str(m).map_err(|e| Failure::usage(format!("--matrix: {e}")))?;
            ("matrix".to_string(), adj, vertex.unwrap_or(0), None)
        }
        (None, None) => return Err(Failure::usage("first-return needs a spec file or --matrix")),
    };
    let degree = g.degree.or(spec_degree).unwrap_or(20);
    let f = first_return_series(&adj, v, degree)?;
    let explicit = ShiftSpec::explicit(&name, &f);
    let json = json!({
        "name": name,
        "vertex": v,
        "degree": degree,
        "coeffs": report::series(&f),
        "spec": serde_json::to_value(&explicit)?,
    });
    let mut t = String::new();
    let _ = writeln!(t, "first returns to vertex {v} of {name}");
    let n: Vec<usize> = (1..=degree).collect();
    t.push_str(&table(&["n", "f_n"], &[strings(&n), strings(f.coeffs())]));
    Ok(Report::new(json, t))
}
