use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mbfusion::clustering::cluster;
use mbfusion::gci::{naive_gci_mb_fuse, pairwise_distances, FusionWeights, NaiveOptions};
use mbfusion::mb::MultiBernoulliDensity;
use mbfusion::pgci::{
    hypothesis_count_report, inter_cluster_hypotheses, l1_error_bound, PgciConfig,
};
use mbfusion::sim::{fusion_snapshots, run_montecarlo, Layout, RunOptions, Scale, ScenarioConfig};
use mbfusion::{count_hypotheses, naive_fuse, pgci_fuse, FusionError};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::instances::{line_layout, random_mb};
use crate::{Common, ScaleArg};

fn load_config(c: &Common) -> Result<ScenarioConfig, CliError> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg: ScenarioConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // A built-in layout fills in its objects and network unless the file
    // lists its own objects; an explicit --scale always regenerates them.
    if cfg.layout == Some(Layout::Scenario2) && (cfg.objects.is_empty() || c.scale.is_some()) {
        cfg.apply_scale(match c.scale {
            Some(ScaleArg::Full) => Scale::Full,
            _ => Scale::Desk,
        });
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = c.runs {
        cfg.runs = runs;
    }
    if let Some(gamma) = c.gamma {
        cfg.fusion.gamma = gamma;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
    Ok(path)
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let summary = run_montecarlo(&cfg, &RunOptions { timings: c.timings })?;

    let mut csv = Vec::new();
    summary.write_csv(&mut csv).expect("write to memory");
    let report = summary.report();
    let mut written = vec![
        write_out(&c.out, &format!("{}.csv", cfg.name), &csv)?,
        write_out(
            &c.out,
            &format!("{}_summary.txt", cfg.name),
            report.as_bytes(),
        )?,
    ];
    if summary.has_oracle() {
        let mut oracle = Vec::new();
        summary
            .write_oracle_csv(&mut oracle)
            .expect("write to memory");
        written.push(write_out(
            &c.out,
            &format!("{}_oracle.csv", cfg.name),
            &oracle,
        )?);
    }
    print!("{report}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

struct OracleRow {
    case: usize,
    n1: usize,
    n2: usize,
    max_dr: f64,
    max_mean_gap: f64,
    truncated_mass: f64,
    bound: f64,
}

fn compare_pair(
    case: usize,
    mb1: &MultiBernoulliDensity<f64>,
    mb2: &MultiBernoulliDensity<f64>,
    w: &FusionWeights<f64>,
    cfg: &PgciConfig<f64>,
) -> Result<OracleRow, FusionError> {
    let opts = NaiveOptions {
        max_hypotheses: cfg.naive_cap,
        reduction: cfg.reduction,
        parallel: cfg.parallel,
    };
    let (slow, g) = naive_gci_mb_fuse(mb1, mb2, w, &opts)?;
    let (fast, _) = pgci_fuse(mb1, mb2, w, cfg)?;

    let mut by_id: HashMap<u64, [Option<&_>; 2]> = HashMap::new();
    for c in fast.components() {
        by_id.entry(c.id).or_default()[0] = Some(c);
    }
    for c in slow.components() {
        by_id.entry(c.id).or_default()[1] = Some(c);
    }
    let (mut max_dr, mut max_mean_gap) = (0.0f64, 0.0f64);
    for pair in by_id.values() {
        match pair {
            [Some(a), Some(b)] => {
                max_dr = max_dr.max((a.r - b.r).abs());
                if let (Some(ma), Some(mb)) = (a.pdf.mean(), b.pdf.mean()) {
                    max_mean_gap = max_mean_gap.max((ma - mb).norm());
                }
            }
            [Some(x), None] | [None, Some(x)] => max_dr = max_dr.max(x.r),
            [None, None] => {}
        }
    }

    let (_, lic) = cluster(g.distances(), cfg.gamma);
    let dropped = inter_cluster_hypotheses(&g, &lic);
    let (truncated_mass, bound) = l1_error_bound(&g, &dropped, cfg.gamma);
    Ok(OracleRow {
        case,
        n1: mb1.len(),
        n2: mb2.len(),
        max_dr,
        max_mean_gap,
        truncated_mass,
        bound,
    })
}

pub fn compare_oracle(c: &Common, instances: usize) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let label = if c.config.is_some() {
        let cfg = load_config(c)?;
        let pcfg = cfg.pgci_config();
        for snap in fusion_snapshots(&cfg, 0)? {
            if snap.inputs.len() < 2 {
                continue;
            }
            let w =
                FusionWeights::from_first(snap.weights[0] / (snap.weights[0] + snap.weights[1]))?;
            let row = compare_pair(snap.step, &snap.inputs[0], &snap.inputs[1], &w, &pcfg)
                .map_err(|e| FusionError::AtStep {
                    run: 0,
                    step: snap.step,
                    source: Box::new(e),
                })?;
            rows.push(row);
        }
        cfg.name
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(0));
        let pcfg = PgciConfig {
            gamma: c.gamma.unwrap_or(4.0),
            ..PgciConfig::default()
        };
        for case in 0..instances {
            let (n1, n2) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let mb1 = random_mb(&mut rng, n1, 10.0, 2);
            let mb2 = random_mb(&mut rng, n2, 10.0, 2);
            let w = FusionWeights::from_first(rng.random_range(0.2..0.8))?;
            rows.push(compare_pair(case, &mb1, &mb2, &w, &pcfg)?);
        }
        "random".to_string()
    };

    let mut csv = String::from("case,n1,n2,max_abs_dr,max_mean_gap,truncated_mass,l1_bound\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.case, r.n1, r.n2, r.max_dr, r.max_mean_gap, r.truncated_mass, r.bound
        );
    }
    let path = write_out(
        &c.out,
        &format!("{label}_oracle_report.csv"),
        csv.as_bytes(),
    )?;

    let worst = |f: fn(&OracleRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let covered = rows
        .iter()
        .filter(|r| r.max_dr <= r.truncated_mass + 1e-12)
        .count();
    let bounded = rows
        .iter()
        .filter(|r| r.truncated_mass <= r.bound * (1.0 + 1e-12))
        .count();
    println!("compared {} fusions ({label})", rows.len());
    println!("max |dr|: {:.3e}", worst(|r| r.max_dr));
    println!("max mean gap: {:.3e}", worst(|r| r.max_mean_gap));
    println!("max truncated mass: {:.3e}", worst(|r| r.truncated_mass));
    println!("|dr| <= truncated mass: {covered}/{}", rows.len());
    println!("truncated mass <= bound: {bounded}/{}", rows.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn median_ms(
    reps: usize,
    mut f: impl FnMut() -> Result<(), FusionError>,
) -> Result<f64, FusionError> {
    let mut t: Vec<Duration> = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed());
    }
    t.sort();
    Ok(t[reps / 2].as_secs_f64() * 1e3)
}

pub fn bench_counts(c: &Common, max_objects: usize) -> Result<(), CliError> {
    let gamma = c.gamma.unwrap_or(4.0);
    let cfg = PgciConfig {
        gamma,
        ..PgciConfig::default()
    };
    let opts = NaiveOptions {
        max_hypotheses: cfg.naive_cap,
        ..NaiveOptions::default()
    };
    let w = FusionWeights::equal();
    let fmt_ms = |t: Option<f64>| t.map_or_else(|| "-".to_string(), |t| format!("{t:.3}"));

    let mut csv = String::from(
        "layout,objects,N_H,N_H_distinct,N'_H,N''_H,largest_cluster,t_pgci_ms,t_naive_ms\n",
    );
    println!(
        "{:<12} {:>3} {:>12} {:>12} {:>12} {:>10} {:>7} {:>10} {:>10}",
        "layout", "|L|", "N_H", "distinct", "N'_H", "N''_H", "largest", "pgci ms", "naive ms"
    );
    for (layout, spacing) in [("separated", 300.0), ("overlapping", 1.0)] {
        for n in 1..=max_objects {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(0) ^ (n as u64) << 8);
            let mb1 = line_layout(&mut rng, n, spacing);
            let mb2 = line_layout(&mut rng, n, spacing);
            let d = pairwise_distances(&mb1, &mb2, &w)?;
            let (_, lic) = cluster(&d, gamma);
            let report = hypothesis_count_report(n, n, &lic);
            let largest = report.largest_cluster().unwrap_or((0, 0));
            let fits = lic
                .joint()
                .all(|g| count_hypotheses(g.l1.len(), g.l2.len()) <= cfg.cluster_cap.into());
            let t_pgci = if fits {
                Some(median_ms(3, || pgci_fuse(&mb1, &mb2, &w, &cfg).map(drop))?)
            } else {
                None
            };
            let t_naive = if report.n_h_distinct <= opts.max_hypotheses.into() {
                let reps = if report.n_h_distinct.to_f64().unwrap_or(f64::INFINITY) > 1e5 {
                    1
                } else {
                    3
                };
                Some(median_ms(reps, || {
                    naive_fuse(&mb1, &mb2, &w, &opts).map(drop)
                })?)
            } else {
                None
            };
            let shape = format!("{}x{}", largest.0, largest.1);
            let _ = writeln!(
                csv,
                "{layout},{n},{},{},{},{},{shape},{},{}",
                report.n_h,
                report.n_h_distinct,
                report.n_h_truncated,
                report.n_h_clustered,
                fmt_ms(t_pgci),
                fmt_ms(t_naive)
            );
            println!(
                "{:<12} {:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>10} {:>7} {:>10} {:>10}",
                layout,
                n,
                report.n_h.to_f64().unwrap_or(f64::INFINITY),
                report.n_h_distinct.to_f64().unwrap_or(f64::INFINITY),
                report.n_h_truncated.to_f64().unwrap_or(f64::INFINITY),
                report.n_h_clustered,
                shape,
                fmt_ms(t_pgci),
                fmt_ms(t_naive)
            );
        }
    }
    let path = write_out(&c.out, "bench_counts.csv", csv.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn bound_check(c: &Common, instances: usize) -> Result<(), CliError> {
    let gammas: Vec<f64> = match c.gamma {
        Some(g) => vec![g],
        None => (1..=8).map(f64::from).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed.unwrap_or(0));
    let mut csv = String::from("instance,gamma,n1,n2,truncated_hypotheses,exact,bound,holds\n");
    let (mut checked, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for i in 0..instances {
        let (n1, n2) = (rng.random_range(1..=5), rng.random_range(1..=5));
        // Single Gaussians keep every divergence nonnegative.
        let mb1 = random_mb(&mut rng, n1, 15.0, 1);
        let mb2 = random_mb(&mut rng, n2, 15.0, 1);
        let w = FusionWeights::from_first(rng.random_range(0.2..0.8))?;
        let (_, g) = naive_gci_mb_fuse(&mb1, &mb2, &w, &NaiveOptions::default())?;
        for &gamma in &gammas {
            let (_, lic) = cluster(g.distances(), gamma);
            let dropped = inter_cluster_hypotheses(&g, &lic);
            let (exact, bound) = l1_error_bound(&g, &dropped, gamma);
            let holds = exact <= bound * (1.0 + 1e-12) + f64::MIN_POSITIVE;
            if bound > 0.0 {
                worst = worst.max(exact / bound);
            }
            checked += 1;
            violations += usize::from(!holds);
            let _ = writeln!(
                csv,
                "{i},{gamma},{n1},{n2},{},{exact},{bound},{holds}",
                dropped.len()
            );
        }
    }
    let path = write_out(&c.out, "bound_check.csv", csv.as_bytes())?;
    println!("checked {checked} (instance, gamma) pairs");
    println!("largest truncated mass / bound: {worst:.4}");
    println!("wrote {}", path.display());
    if violations > 0 {
        return Err(CliError::Check(format!(
            "bound violated in {violations} cases"
        )));
    }
    Ok(())
}
