//! Result bundle of a clustering run, the run manifest, and the key=value
//! form of the run configuration.
//!
//! * `theta.tsv`: `object_id<TAB>k<TAB>prob`, one row per object and cluster (k is 0-based)
//! * `gamma.tsv`: `relation<TAB>gamma`
//! * `beta.<attr>.tsv`: `k<TAB>term<TAB>prob` (categorical, 1-based terms) or
//!   `k<TAB>mean<TAB>variance` (numerical)
//! * `trace.tsv`: one row per outer iteration
//! * `gamma_trace.tsv`: `outer_iter<TAB>relation<TAB>gamma`, iteration 0 is the all-ones start
//! * `g1_trace.tsv`: `outer_iter<TAB>inner_iter<TAB>g1`
//! * `labels_trace.tsv`: `outer_iter<TAB>object_id<TAB>label`, argmax labels per outer iteration
//! * `manifest.txt`: key=value

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::driver::{GenClusConfig, GenClusResult};
use crate::error::{Error, Result};
use crate::graph::HinGraph;
use crate::io::{content_lines, read_text, write_text, KeyValues};
use crate::model::{ComponentParams, Membership, StrengthVector};
use crate::synth::GeneratorConfig;

pub const THETA_FILE: &str = "theta.tsv";
pub const GAMMA_FILE: &str = "gamma.tsv";
pub const TRACE_FILE: &str = "trace.tsv";
pub const GAMMA_TRACE_FILE: &str = "gamma_trace.tsv";
pub const G1_TRACE_FILE: &str = "g1_trace.tsv";
pub const LABELS_TRACE_FILE: &str = "labels_trace.tsv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn beta_file(attribute: &str) -> String {
    format!("beta.{attribute}.tsv")
}

fn columns<'a>(path: &Path, line: usize, l: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = l.split('\t').collect();
    if cols.len() != n {
        return Err(Error::parse(path, line, format!("expected {n} tab-separated columns, got {}", cols.len())));
    }
    Ok(cols)
}

fn parse_col<T: FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} `{s}`")))
}

pub fn write_theta(path: &Path, ids: &[String], theta: &Membership) -> Result<()> {
    let mut out = String::from("# object_id\tk\tprob\n");
    for (id, row) in ids.iter().zip(theta.rows()) {
        for (k, p) in row.iter().enumerate() {
            writeln!(out, "{id}\t{k}\t{p}").unwrap();
        }
    }
    write_text(path, &out)
}

/// Object ids in file order and their membership rows.
pub fn read_theta(path: &Path) -> Result<(Vec<String>, Membership)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = read_text(path)?;
    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let cols = columns(path, line, l, 3)?;
        let k: usize = parse_col(path, line, cols[1], "cluster index")?;
        let p: f64 = parse_col(path, line, cols[2], "probability")?;
        if ids.last().map(String::as_str) != Some(cols[0]) {
            if ids.iter().any(|id| id == cols[0]) {
                return Err(Error::parse(path, line, format!("rows of `{}` are not contiguous", cols[0])));
            }
            ids.push(cols[0].to_string());
            rows.push(Vec::new());
        }
        let row = rows.last_mut().unwrap();
        if k != row.len() {
            return Err(Error::parse(path, line, format!("expected cluster {} for `{}`, got {k}", row.len(), cols[0])));
        }
        row.push(p);
    }
    if let Some(first) = rows.first() {
        if let Some(bad) = rows.iter().position(|r| r.len() != first.len()) {
            return Err(Error::parse(
                path,
                0,
                format!("`{}` has {} clusters, expected {}", ids[bad], rows[bad].len(), first.len()),
            ));
        }
    }
    Ok((ids, Membership::from_rows(&rows)?))
}

pub fn write_gamma(path: &Path, graph: &HinGraph, gamma: &StrengthVector) -> Result<()> {
    let mut out = String::from("# relation\tgamma\n");
    for (rel, g) in graph.relations().iter().zip(gamma.as_slice()) {
        writeln!(out, "{}\t{g}", rel.name).unwrap();
    }
    write_text(path, &out)
}

pub fn read_gamma(path: &Path) -> Result<Vec<(String, f64)>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            let cols = columns(path, line, l, 2)?;
            Ok((cols[0].to_string(), parse_col(path, line, cols[1], "strength")?))
        })
        .collect()
}

pub fn write_beta(path: &Path, params: &ComponentParams) -> Result<()> {
    let mut out = String::new();
    match params {
        ComponentParams::Categorical(c) => {
            out.push_str("# k\tterm\tprob\n");
            for k in 0..c.k() {
                for (t, p) in c.row(k).iter().enumerate() {
                    writeln!(out, "{k}\t{}\t{p}", t + 1).unwrap();
                }
            }
        }
        ComponentParams::Gaussian(g) => {
            out.push_str("# k\tmean\tvariance\n");
            for (k, (m, v)) in g.mean.iter().zip(&g.variance).enumerate() {
                writeln!(out, "{k}\t{m}\t{v}").unwrap();
            }
        }
    }
    write_text(path, &out)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

/// Writes every artifact of a finished run into `dir`, which must exist.
/// Returns the written paths.
pub fn write_result(dir: &Path, graph: &HinGraph, result: &GenClusResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join(THETA_FILE);
    write_theta(&p, graph.ids(), &result.theta)?;
    written.push(p);
    let p = dir.join(GAMMA_FILE);
    write_gamma(&p, graph, &result.gamma)?;
    written.push(p);
    for (name, params) in result.attributes.iter().zip(&result.params) {
        let p = dir.join(beta_file(name));
        write_beta(&p, params)?;
        written.push(p);
    }

    let mut trace = String::from("# outer_iter\tg1\tg2\tsurrogate\tdelta_gamma\tinner_iters\tnmi\n");
    let mut gamma_trace = String::from("# outer_iter\trelation\tgamma\n");
    let mut g1_trace = String::from("# outer_iter\tinner_iter\tg1\n");
    let mut labels = String::from("# outer_iter\tobject_id\tlabel\n");
    for (r, rel) in graph.relations().iter().enumerate() {
        let g0 = result.trace.first().map_or(1.0, |t| t.gamma_in.get(r));
        writeln!(gamma_trace, "0\t{}\t{g0}", rel.name).unwrap();
    }
    for it in &result.trace {
        writeln!(
            trace,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            it.iter,
            it.g1,
            it.g2,
            it.surrogate,
            it.gamma.max_abs_diff(&it.gamma_in),
            it.g1_trace.len() - 1,
            fmt_opt(it.nmi)
        )
        .unwrap();
        for (rel, g) in graph.relations().iter().zip(it.gamma.as_slice()) {
            writeln!(gamma_trace, "{}\t{}\t{g}", it.iter, rel.name).unwrap();
        }
        for (i, g) in it.g1_trace.iter().enumerate() {
            writeln!(g1_trace, "{}\t{i}\t{g}", it.iter).unwrap();
        }
        for (v, id) in graph.ids().iter().enumerate() {
            writeln!(labels, "{}\t{id}\t{}", it.iter, it.theta.argmax(v)).unwrap();
        }
    }
    for (name, text) in [
        (TRACE_FILE, trace),
        (GAMMA_TRACE_FILE, gamma_trace),
        (G1_TRACE_FILE, g1_trace),
        (LABELS_TRACE_FILE, labels),
    ] {
        let p = dir.join(name);
        write_text(&p, &text)?;
        written.push(p);
    }
    Ok(written)
}

/// Argmax labels per outer iteration, keyed by object id, in iteration order.
pub fn read_labels_trace(path: &Path) -> Result<Vec<(usize, Vec<(String, usize)>)>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = read_text(path)?;
    let mut out: Vec<(usize, Vec<(String, usize)>)> = Vec::new();
    for (line, l) in content_lines(&text) {
        let cols = columns(path, line, l, 3)?;
        let iter: usize = parse_col(path, line, cols[0], "iteration")?;
        let label: usize = parse_col(path, line, cols[2], "label")?;
        if out.last().map(|(i, _)| *i) != Some(iter) {
            out.push((iter, Vec::new()));
        }
        out.last_mut().unwrap().1.push((cols[1].to_string(), label));
    }
    Ok(out)
}

/// Ordered key=value record of a command invocation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m
    }

    /// Sets `key`, replacing an earlier value.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn extend(&mut self, pairs: impl IntoIterator<Item = (String, String)>) {
        for (k, v) in pairs {
            self.set(&k, v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let kv = KeyValues::read(path)?;
        let mut m = Manifest::default();
        m.extend(kv.entries.into_iter().map(|(k, v, _)| (k, v)));
        Ok(m)
    }
}

fn get_parsed<T: FromStr>(kv: &KeyValues, key: &str, slot: &mut T) -> Result<()> {
    if let Some(v) = kv.get(key) {
        *slot = v
            .parse()
            .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))?;
    }
    Ok(())
}

/// Extra run options that live outside [`GenClusConfig`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub materialize_inverses: bool,
    /// Fraction of links held out from training, 0 to disable.
    pub holdout: f64,
    /// Worker threads, 0 for the rayon default.
    pub threads: usize,
}

/// Key=value form of a clustering configuration. Round-trips through
/// [`cluster_config_from_kv`].
pub fn cluster_config_to_kv(config: &GenClusConfig, options: &RunOptions) -> Vec<(String, String)> {
    let pairs: Vec<(&str, String)> = vec![
        ("k", config.k.to_string()),
        ("attributes", config.attributes.join(",")),
        ("seed", config.seed.to_string()),
        ("outer_iters", config.max_outer_iters.to_string()),
        ("outer_tol", config.outer_tol.to_string()),
        ("warm_theta", config.warm_theta.to_string()),
        ("inner_iters", config.em.max_inner_iters.to_string()),
        ("rel_tol", config.em.rel_tol.to_string()),
        ("restarts", config.em.n_restarts.to_string()),
        ("probe_steps", config.em.restart_probe_steps.to_string()),
        ("sigma", config.newton.sigma.to_string()),
        ("newton_iters", config.newton.max_iters.to_string()),
        ("grad_tol", config.newton.grad_tol.to_string()),
        ("fd_validation", config.newton.fd_validation.to_string()),
        ("materialize_inverses", options.materialize_inverses.to_string()),
        ("holdout", options.holdout.to_string()),
        ("threads", options.threads.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Overrides fields of `config` and `options` with any keys present in `kv`.
/// Unrelated keys are ignored so that a manifest can serve as a config.
pub fn cluster_config_from_kv(kv: &KeyValues, config: &mut GenClusConfig, options: &mut RunOptions) -> Result<()> {
    get_parsed(kv, "k", &mut config.k)?;
    if let Some(a) = kv.get("attributes") {
        config.attributes = a.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    }
    get_parsed(kv, "seed", &mut config.seed)?;
    get_parsed(kv, "outer_iters", &mut config.max_outer_iters)?;
    get_parsed(kv, "outer_tol", &mut config.outer_tol)?;
    get_parsed(kv, "warm_theta", &mut config.warm_theta)?;
    get_parsed(kv, "inner_iters", &mut config.em.max_inner_iters)?;
    get_parsed(kv, "rel_tol", &mut config.em.rel_tol)?;
    get_parsed(kv, "restarts", &mut config.em.n_restarts)?;
    get_parsed(kv, "probe_steps", &mut config.em.restart_probe_steps)?;
    get_parsed(kv, "sigma", &mut config.newton.sigma)?;
    get_parsed(kv, "newton_iters", &mut config.newton.max_iters)?;
    get_parsed(kv, "grad_tol", &mut config.newton.grad_tol)?;
    get_parsed(kv, "fd_validation", &mut config.newton.fd_validation)?;
    get_parsed(kv, "materialize_inverses", &mut options.materialize_inverses)?;
    get_parsed(kv, "holdout", &mut options.holdout)?;
    get_parsed(kv, "threads", &mut options.threads)?;
    Ok(())
}

/// Key=value form of a generator configuration. Pattern means are written
/// as `t:p` pairs separated by commas.
pub fn generator_config_to_kv(config: &GeneratorConfig) -> Vec<(String, String)> {
    let means = config.means.iter().map(|(t, p)| format!("{t}:{p}")).collect::<Vec<_>>().join(",");
    let pairs: Vec<(&str, String)> = vec![
        ("n_temp", config.n_temp.to_string()),
        ("n_precip", config.n_precip.to_string()),
        ("knn", config.knn.to_string()),
        ("means", means),
        ("temp_std", config.temp_std.to_string()),
        ("precip_std", config.precip_std.to_string()),
        ("correlation", config.correlation.to_string()),
        ("n_obs", config.n_obs.to_string()),
        ("ring_epsilon", config.ring_epsilon.to_string()),
        ("temp_support", config.temp_support.to_string()),
        ("precip_support", config.precip_support.to_string()),
        ("seed", config.seed.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Builds a generator configuration: `setting` (1 or 2, default 1) picks the
/// pattern layout, every other key overrides one field.
pub fn generator_config_from_kv(kv: &KeyValues) -> Result<GeneratorConfig> {
    let mut setting: u8 = 1;
    get_parsed(kv, "setting", &mut setting)?;
    let mut c = GeneratorConfig::setting(setting, 1000, 250, 5, 0)?;
    get_parsed(kv, "n_temp", &mut c.n_temp)?;
    get_parsed(kv, "n_precip", &mut c.n_precip)?;
    get_parsed(kv, "knn", &mut c.knn)?;
    if let Some(m) = kv.get("means") {
        c.means = m
            .split(',')
            .map(|pair| {
                let (t, p) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("bad pattern mean `{pair}`, expected t:p")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad pattern mean `{pair}`")))
                };
                Ok((parse(t)?, parse(p)?))
            })
            .collect::<Result<_>>()?;
    }
    get_parsed(kv, "temp_std", &mut c.temp_std)?;
    get_parsed(kv, "precip_std", &mut c.precip_std)?;
    get_parsed(kv, "correlation", &mut c.correlation)?;
    get_parsed(kv, "n_obs", &mut c.n_obs)?;
    get_parsed(kv, "ring_epsilon", &mut c.ring_epsilon)?;
    get_parsed(kv, "temp_support", &mut c.temp_support)?;
    get_parsed(kv, "precip_support", &mut c.precip_support)?;
    get_parsed(kv, "seed", &mut c.seed)?;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::run_genclus;
    use crate::synth::generate;

    fn kv(text: &str) -> KeyValues {
        KeyValues::parse(text, Path::new("test")).unwrap()
    }

    #[test]
    fn theta_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let theta = Membership::from_rows(&[vec![0.1, 0.9], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        let p = dir.path().join(THETA_FILE);
        write_theta(&p, &ids, &theta).unwrap();
        let (ids2, theta2) = read_theta(&p).unwrap();
        assert_eq!(ids2, ids);
        assert_eq!(theta2, theta);
    }

    #[test]
    fn missing_theta_is_a_missing_artifact() {
        let dir = tempfile::tempdir().unwrap();
        match read_theta(&dir.path().join(THETA_FILE)) {
            Err(Error::MissingArtifact(p)) => assert!(p.ends_with(THETA_FILE)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_theta_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(THETA_FILE);
        std::fs::write(&p, "a\t0\t0.5\na\t1\t0.5\nb\t0\t1\n").unwrap();
        assert!(matches!(read_theta(&p), Err(Error::Parse { .. })));
        std::fs::write(&p, "a\t0\t0.5\na\t2\t0.5\n").unwrap();
        assert!(matches!(read_theta(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn cluster_config_round_trip() {
        let mut c = GenClusConfig::new(3, vec!["x".into(), "y".into()]);
        c.seed = 99;
        c.warm_theta = true;
        c.newton.sigma = 0.25;
        c.em.rel_tol = 1e-7;
        let o = RunOptions { materialize_inverses: true, holdout: 0.2, threads: 4 };
        let text: String = cluster_config_to_kv(&c, &o).iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut c2 = GenClusConfig::new(2, vec![]);
        let mut o2 = RunOptions::default();
        cluster_config_from_kv(&kv(&text), &mut c2, &mut o2).unwrap();
        assert_eq!(c2, c);
        assert_eq!(o2, o);
    }

    #[test]
    fn bad_config_value_names_the_key() {
        let mut c = GenClusConfig::new(2, vec![]);
        let err = cluster_config_from_kv(&kv("k = four"), &mut c, &mut RunOptions::default()).unwrap_err();
        assert!(err.to_string().contains("`k`"));
    }

    #[test]
    fn generator_config_round_trip() {
        let mut c = GeneratorConfig::setting(2, 40, 30, 3, 7).unwrap();
        c.knn = 4;
        let text: String = generator_config_to_kv(&c).iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(generator_config_from_kv(&kv(&text)).unwrap(), c);
        assert!(generator_config_from_kv(&kv("n_precip = 2")).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("cluster");
        m.set("seed", 3);
        m.set("seed", 4);
        m.set("digest.nodes", "abc");
        let p = dir.path().join(MANIFEST_FILE);
        m.write(&p).unwrap();
        let back = Manifest::read(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("seed"), Some("4"));
    }

    #[test]
    fn result_bundle_files() {
        let (g, t, _) = generate(&GeneratorConfig::setting(1, 20, 12, 2, 1).unwrap()).unwrap();
        let mut c = GenClusConfig::new(4, vec!["temperature".into(), "precipitation".into()]);
        c.max_outer_iters = 2;
        let res = run_genclus(&g, &t, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_result(dir.path(), &g, &res).unwrap();
        assert_eq!(files.len(), 8);
        let (ids, theta) = read_theta(&dir.path().join(THETA_FILE)).unwrap();
        assert_eq!(ids, g.ids());
        assert_eq!(theta, res.theta);
        let gamma = read_gamma(&dir.path().join(GAMMA_FILE)).unwrap();
        assert_eq!(gamma.iter().map(|x| x.1).collect::<Vec<_>>(), res.gamma.as_slice());
        let labels = read_labels_trace(&dir.path().join(LABELS_TRACE_FILE)).unwrap();
        assert_eq!(labels.len(), res.trace.len());
        assert_eq!(labels.last().unwrap().1.len(), g.num_objects());
        let gt = std::fs::read_to_string(dir.path().join(GAMMA_TRACE_FILE)).unwrap();
        assert_eq!(gt.lines().filter(|l| l.starts_with("0\t")).count(), 4);
    }
}
