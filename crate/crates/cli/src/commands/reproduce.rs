use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use genclus::bundle::{cluster_config_to_kv, Manifest, RunOptions, MANIFEST_FILE};
use genclus::experiment::{grid, run_weather_trial, weather_cluster_config, WeatherTrial, GRID_N_OBS, GRID_N_PRECIP};
use genclus::synth::GeneratorConfig;
use log::info;

use crate::util::{apply_tuning, ensure_dir, secs, with_threads};
use crate::ReproduceArgs;

pub const REPORT_FILE: &str = "report.txt";
pub const ROWS_FILE: &str = "report.tsv";
const RELATIONS: [&str; 4] = ["TT", "TP", "PT", "PP"];

pub fn run(a: &ReproduceArgs) -> Result<()> {
    let start = Instant::now();
    let seed = a.tuning.seed.unwrap_or(0);
    let mut base = weather_cluster_config(4, seed);
    let mut options = RunOptions::default();
    apply_tuning(&a.tuning, &mut base, &mut options);

    let mut trials: Vec<WeatherTrial> = Vec::new();
    for (n_precip, n_obs) in grid() {
        let gen = GeneratorConfig::setting(a.setting.id(), a.n_temp, n_precip, n_obs, seed)?;
        let trial = with_threads(options.threads, || run_weather_trial(&gen, &base))??;
        info!(
            "#P={n_precip} obs={n_obs}: genclus {:.4} kmeans {:.4}",
            trial.genclus_nmi, trial.kmeans_nmi
        );
        trials.push(trial);
    }
    let total = start.elapsed();

    let mut rows = String::from(
        "# n_temp\tn_precip\tn_obs\tgenclus_nmi\tkmeans_nmi\tnmi_T\tnmi_P\tgamma_TT\tgamma_TP\tgamma_PT\tgamma_PP\touter_iters\tgenclus_s\tkmeans_s\n",
    );
    for t in &trials {
        let per_type = |name: &str| {
            t.genclus_nmi_per_type
                .iter()
                .find(|(n, _)| n == name)
                .map_or(f64::NAN, |x| x.1)
        };
        write!(
            rows,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            t.generator.n_temp,
            t.generator.n_precip,
            t.generator.n_obs,
            t.genclus_nmi,
            t.kmeans_nmi,
            per_type("T"),
            per_type("P")
        )
        .unwrap();
        for r in RELATIONS {
            write!(rows, "\t{:.4}", t.gamma(r).unwrap_or(f64::NAN)).unwrap();
        }
        writeln!(
            rows,
            "\t{}\t{:.3}\t{:.3}",
            t.result.trace.len(),
            t.genclus_seconds,
            t.kmeans_seconds
        )
        .unwrap();
    }

    let find = |p: usize, o: usize| {
        trials
            .iter()
            .find(|t| t.generator.n_precip == p && t.generator.n_obs == o)
            .expect("grid cell")
    };
    let mut report = String::new();
    writeln!(report, "weather setting {}, #T = {}, seed {seed}", a.setting.id(), a.n_temp).unwrap();
    writeln!(report).unwrap();
    writeln!(report, "NMI, GenClus / k-means on interpolated means (W: GenClus >= k-means)").unwrap();
    write!(report, "{:>8}", "#P").unwrap();
    for o in GRID_N_OBS {
        write!(report, "  {:>21}", format!("{o} obs")).unwrap();
    }
    writeln!(report).unwrap();
    for p in GRID_N_PRECIP {
        write!(report, "{p:>8}").unwrap();
        for o in GRID_N_OBS {
            let t = find(p, o);
            let mark = if t.genclus_wins() { "W" } else { "L" };
            write!(report, "  {:>21}", format!("{:.4} / {:.4} {mark}", t.genclus_nmi, t.kmeans_nmi)).unwrap();
        }
        writeln!(report).unwrap();
    }
    let wins = trials.iter().filter(|t| t.genclus_wins()).count();
    writeln!(report, "GenClus wins {wins} of {}", trials.len()).unwrap();

    for o in GRID_N_OBS {
        writeln!(report).unwrap();
        writeln!(report, "learned strengths, {o} obs").unwrap();
        write!(report, "{:>8}", "#P").unwrap();
        for r in RELATIONS {
            write!(report, "{r:>8}").unwrap();
        }
        writeln!(report).unwrap();
        for p in GRID_N_PRECIP {
            write!(report, "{p:>8}").unwrap();
            for r in RELATIONS {
                write!(report, "{:>8.2}", find(p, o).gamma(r).unwrap_or(f64::NAN)).unwrap();
            }
            writeln!(report).unwrap();
        }
    }
    writeln!(report).unwrap();
    writeln!(report, "total runtime {:.1} s", total.as_secs_f64()).unwrap();

    ensure_dir(&a.out)?;
    fs::write(a.out.join(REPORT_FILE), &report).context("writing report")?;
    fs::write(a.out.join(ROWS_FILE), &rows).context("writing report rows")?;
    let mut m = Manifest::new("reproduce");
    m.set("setting", a.setting.id());
    m.set("n_temp", a.n_temp);
    m.extend(cluster_config_to_kv(&base, &options));
    m.set("time.total_s", secs(total));
    m.write(&a.out.join(MANIFEST_FILE))?;
    print!("{report}");
    Ok(())
}
