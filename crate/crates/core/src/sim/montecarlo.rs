use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{BirthMode, ScenarioConfig, UpdateMode};
use super::network::NetworkTopology;
use super::ospa::ospa;
use super::truth::{generate_measurements, generate_truth, GroundTruth};
use crate::error::{FusionError, Result};
use crate::gci::{naive_fuse, FusionWeights, NaiveOptions};
use crate::gm::GaussianMixture;
use crate::mb::{
    adaptive_birth, association_probabilities, bernoulli_track_update, extract_estimates, predict,
    reduce, update, BernoulliComponent, BirthConfig, MbReduction, MotionModel,
    MultiBernoulliDensity, SensorModel,
};
use crate::pgci::{multi_sensor_fuse, FusionDiagnostics};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Write measured fusion times to the CSV and summary. Off by default so
    /// that outputs are byte-identical across repeated runs.
    pub timings: bool,
}

/// What happened at the designated node in one step of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub truth_cardinality: usize,
    pub cardinality: usize,
    pub ospa_local: f64,
    pub ospa_fused: f64,
    pub fuse_time: Duration,
    /// Summed over the pairwise steps of the fusion fold.
    pub n_h: f64,
    pub n_h_clustered: f64,
    pub largest_cluster: (usize, usize),
    pub ospa_naive: Option<f64>,
    /// Largest existence difference between clustered and exhaustive fusion,
    /// matched by component id.
    pub max_abs_dr: Option<f64>,
    pub naive_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub steps: Vec<StepRecord>,
}

/// Across-run statistics of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    pub truth_cardinality: usize,
    pub ospa_local_mean: f64,
    pub ospa_fused_mean: f64,
    pub card_mean: f64,
    /// Population standard deviation over runs.
    pub card_std: f64,
    pub t_fuse_ms_mean: f64,
    pub t_fuse_ms_max: f64,
    pub n_h_mean: f64,
    pub n_h_clustered_mean: f64,
    pub largest_cluster: (usize, usize),
    pub ospa_naive_mean: Option<f64>,
    pub max_abs_dr: Option<f64>,
    pub t_naive_ms_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub name: String,
    pub runs: usize,
    pub timings: bool,
    pub steps: Vec<StepSummary>,
}

/// Posteriors entering the fusion at the designated node in one step, the
/// designated node first, with their Metropolis weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSnapshot {
    pub step: usize,
    pub inputs: Vec<MultiBernoulliDensity<f64>>,
    pub weights: Vec<f64>,
}

/// Runs `cfg.runs` independent Monte-Carlo runs in parallel and aggregates
/// them in run order.
pub fn run_montecarlo(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    let topo = cfg.topology()?;
    let results: Vec<RunResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| simulate_run_with(cfg, &topo, run, None))
        .collect::<Result<_>>()?;
    Ok(summarize(cfg, &results, opts))
}

/// One run: truth, scans of every sensor, local filtering and fusion.
pub fn simulate_run(cfg: &ScenarioConfig, run: usize) -> Result<RunResult> {
    cfg.validate()?;
    let topo = cfg.topology()?;
    simulate_run_with(cfg, &topo, run, None)
}

/// Runs one Monte-Carlo run and keeps the fusion inputs of every step.
pub fn fusion_snapshots(cfg: &ScenarioConfig, run: usize) -> Result<Vec<FusionSnapshot>> {
    cfg.validate()?;
    let topo = cfg.topology()?;
    let mut out = Vec::with_capacity(cfg.steps);
    simulate_run_with(cfg, &topo, run, Some(&mut out))?;
    Ok(out)
}

fn rng_for(cfg: &ScenarioConfig, run: usize, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_run = cfg.network.sensors as u64 + 1;
    rng.set_stream(run as u64 * per_run + stream as u64);
    rng
}

fn known_births(
    cfg: &ScenarioConfig,
    truth: &GroundTruth,
    k: usize,
    first_id: u64,
) -> Vec<BernoulliComponent<f64>> {
    if cfg.filter.birth != BirthMode::Known {
        return Vec::new();
    }
    let f = &cfg.filter;
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
        f.known_position_std.powi(2),
        f.known_position_std.powi(2),
        f.known_velocity_std.powi(2),
        f.known_velocity_std.powi(2),
    ]));
    truth[k]
        .iter()
        .filter(|(i, _)| cfg.objects[*i].birth == k)
        .enumerate()
        .map(|(n, (_, x))| {
            BernoulliComponent::new(
                f.known_existence,
                GaussianMixture::single(1.0, x.clone(), cov.clone()),
                first_id + n as u64,
            )
        })
        .collect()
}

fn positions(states: &[DVector<f64>]) -> Vec<DVector<f64>> {
    states.iter().map(|x| x.rows(0, 2).into_owned()).collect()
}

fn fusion_inputs(
    topo: &NetworkTopology,
    node: usize,
    posteriors: &[MultiBernoulliDensity<f64>],
) -> (Vec<MultiBernoulliDensity<f64>>, Vec<f64>) {
    let mut inputs = vec![posteriors[node].clone()];
    inputs.extend(topo.neighbours(node).iter().map(|&j| posteriors[j].clone()));
    (inputs, topo.metropolis_weights(node))
}

/// Same fold as `multi_sensor_fuse`, with exhaustive pairwise fusion.
fn naive_fold(
    cfg: &ScenarioConfig,
    posteriors: &[MultiBernoulliDensity<f64>],
    weights: &[f64],
) -> Result<MultiBernoulliDensity<f64>> {
    let opts = NaiveOptions {
        max_hypotheses: cfg.fusion.naive_cap,
        reduction: cfg.gm_reduction(),
        parallel: true,
    };
    let mbr = cfg.mb_reduction();
    let mut acc = posteriors[0].clone();
    let mut w_acc = weights[0];
    for (post, &w_i) in posteriors.iter().zip(weights).skip(1) {
        let pair = FusionWeights::from_first(w_acc / (w_acc + w_i))?;
        let (fused, _) = naive_fuse(&acc, post, &pair, &opts)?;
        acc = reduce(&fused, &mbr);
        w_acc += w_i;
    }
    Ok(acc)
}

fn max_abs_dr(a: &MultiBernoulliDensity<f64>, b: &MultiBernoulliDensity<f64>) -> f64 {
    let mut by_id: HashMap<u64, (f64, f64)> = HashMap::new();
    for c in a.components() {
        by_id.entry(c.id).or_default().0 = c.r;
    }
    for c in b.components() {
        by_id.entry(c.id).or_default().1 = c.r;
    }
    by_id
        .values()
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

struct Models {
    motion: MotionModel<f64>,
    sensor: SensorModel<f64>,
    mbr: MbReduction<f64>,
    birth: BirthConfig<f64>,
}

/// Posterior of one node plus the association probabilities of its last
/// scan, which drive the next step's births.
#[derive(Clone)]
struct Node {
    post: MultiBernoulliDensity<f64>,
    assoc: Vec<f64>,
}

/// Predict (with births), update against the scan of step `k` and reduce.
fn local_step(
    cfg: &ScenarioConfig,
    m: &Models,
    truth: &GroundTruth,
    scans: &[Vec<DVector<f64>>],
    node: &mut Node,
    k: usize,
) -> Result<()> {
    let post = &node.post;
    let mut births = known_births(cfg, truth, k, post.next_id());
    if k > 0 && cfg.filter.birth == BirthMode::Adaptive {
        let first = post.next_id() + births.len() as u64;
        births.extend(adaptive_birth(
            &scans[k - 1],
            &node.assoc,
            &m.birth,
            4,
            first,
        ));
    }
    let predicted = if k == 0 {
        MultiBernoulliDensity::from_components(4, births)?
    } else {
        predict(post, &m.motion, &births)
    };
    if cfg.filter.birth == BirthMode::Adaptive {
        node.assoc = association_probabilities(&predicted, &scans[k], &m.sensor)?;
    }
    let updated = match cfg.filter.update {
        UpdateMode::Track => bernoulli_track_update(&predicted, &scans[k], &m.sensor)?,
        UpdateMode::CbMember => update(&predicted, &scans[k], &m.sensor)?,
    };
    node.post = reduce(&updated, &m.mbr);
    Ok(())
}

fn posts(nodes: &[Node]) -> Vec<MultiBernoulliDensity<f64>> {
    nodes.iter().map(|n| n.post.clone()).collect()
}

fn pgci_at(
    cfg: &ScenarioConfig,
    topo: &NetworkTopology,
    nodes: &[MultiBernoulliDensity<f64>],
    i: usize,
) -> Result<(MultiBernoulliDensity<f64>, Vec<FusionDiagnostics>)> {
    let (inputs, weights) = fusion_inputs(topo, i, nodes);
    multi_sensor_fuse(&inputs, &weights, &cfg.pgci_config(), &cfg.mb_reduction())
}

fn naive_at(
    cfg: &ScenarioConfig,
    topo: &NetworkTopology,
    nodes: &[MultiBernoulliDensity<f64>],
    i: usize,
) -> Result<MultiBernoulliDensity<f64>> {
    let (inputs, weights) = fusion_inputs(topo, i, nodes);
    naive_fold(cfg, &inputs, &weights)
}

fn simulate_run_with(
    cfg: &ScenarioConfig,
    topo: &NetworkTopology,
    run: usize,
    mut snapshots: Option<&mut Vec<FusionSnapshot>>,
) -> Result<RunResult> {
    let n_sensors = cfg.network.sensors;
    let designated = cfg.network.designated;
    let feedback = cfg.fusion.feedback;
    let m = Models {
        motion: cfg.motion_model(),
        sensor: cfg.sensor_model(),
        mbr: cfg.mb_reduction(),
        birth: cfg.birth_config(),
    };

    let truth = generate_truth(
        &cfg.objects,
        cfg.steps,
        &cfg.motion,
        cfg.truth_process_noise,
        &mut rng_for(cfg, run, 0),
    );
    let scans: Vec<Vec<Vec<DVector<f64>>>> = (0..n_sensors)
        .map(|s| generate_measurements(&truth, &m.sensor, &mut rng_for(cfg, run, s + 1)))
        .collect();

    let empty = Node {
        post: MultiBernoulliDensity::empty(4),
        assoc: Vec::new(),
    };
    // Node states of the clustered-fusion network.
    let mut nodes = vec![empty.clone(); n_sensors];
    // With feedback the exhaustive fusion runs its own network, and the
    // local reference is a filter at the designated node that never fuses.
    let mut naive_nodes =
        (feedback && cfg.fusion.compare_naive).then(|| vec![empty.clone(); n_sensors]);
    let mut standalone = feedback.then(|| empty.clone());

    let mut records = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let at = |e: FusionError| e.at_step(run, k);
        let step =
            |node: &mut Node, s: usize| local_step(cfg, &m, &truth, &scans[s], node, k).map_err(at);
        for (s, node) in nodes.iter_mut().enumerate() {
            step(node, s)?;
        }
        if let Some(nn) = naive_nodes.as_mut() {
            for (s, node) in nn.iter_mut().enumerate() {
                step(node, s)?;
            }
        }
        if let Some(sa) = standalone.as_mut() {
            step(sa, designated)?;
        }
        let current = posts(&nodes);
        let naive_current = naive_nodes.as_deref().map(posts);

        let truth_pos: Vec<DVector<f64>> = truth[k]
            .iter()
            .map(|(_, x)| x.rows(0, 2).into_owned())
            .collect();
        let local_mb = standalone
            .as_ref()
            .map_or(&current[designated], |n| &n.post);
        let local = positions(&extract_estimates(local_mb, cfg.filter.extraction));

        if let Some(out) = snapshots.as_deref_mut() {
            let (inputs, weights) = fusion_inputs(topo, designated, &current);
            out.push(FusionSnapshot {
                step: k,
                inputs,
                weights,
            });
        }

        let start = Instant::now();
        let (fused, diags) = pgci_at(cfg, topo, &current, designated).map_err(at)?;
        let fuse_time = start.elapsed();
        let estimates = positions(&extract_estimates(&fused, cfg.filter.extraction));

        let mut naive_fused = None;
        let (ospa_naive, dr, naive_time) = if cfg.fusion.compare_naive {
            let start = Instant::now();
            let naive = naive_at(
                cfg,
                topo,
                naive_current.as_deref().unwrap_or(&current),
                designated,
            )
            .map_err(at)?;
            let t = start.elapsed();
            let est = positions(&extract_estimates(&naive, cfg.filter.extraction));
            let out = (
                Some(ospa(&est, &truth_pos, cfg.ospa.cutoff, cfg.ospa.order)),
                Some(max_abs_dr(&fused, &naive)),
                Some(t),
            );
            naive_fused = Some(naive);
            out
        } else {
            (None, None, None)
        };

        records.push(StepRecord {
            truth_cardinality: truth_pos.len(),
            cardinality: estimates.len(),
            ospa_local: ospa(&local, &truth_pos, cfg.ospa.cutoff, cfg.ospa.order),
            ospa_fused: ospa(&estimates, &truth_pos, cfg.ospa.cutoff, cfg.ospa.order),
            fuse_time,
            n_h: sum_counts(&diags, |d| d.n_h.to_f64()),
            n_h_clustered: sum_counts(&diags, |d| d.n_h_clustered.to_f64()),
            largest_cluster: diags
                .iter()
                .filter_map(FusionDiagnostics::largest_cluster)
                .max_by_key(|&(a, b)| (a * b, a + b))
                .unwrap_or((0, 0)),
            ospa_naive,
            max_abs_dr: dr,
            naive_time,
        });

        if feedback {
            for (i, node) in nodes.iter_mut().enumerate() {
                node.post = if i == designated {
                    fused.clone()
                } else {
                    pgci_at(cfg, topo, &current, i).map_err(at)?.0
                };
            }
            if let (Some(nn), Some(cur)) = (naive_nodes.as_mut(), naive_current.as_deref()) {
                for (i, node) in nn.iter_mut().enumerate() {
                    let own = if i == designated {
                        naive_fused.take()
                    } else {
                        None
                    };
                    node.post = match own {
                        Some(f) => f,
                        None => naive_at(cfg, topo, cur, i).map_err(at)?,
                    };
                }
            }
        }
    }
    Ok(RunResult {
        run,
        steps: records,
    })
}

fn sum_counts(diags: &[FusionDiagnostics], f: impl Fn(&FusionDiagnostics) -> Option<f64>) -> f64 {
    diags.iter().map(|d| f(d).unwrap_or(f64::INFINITY)).sum()
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn summarize(cfg: &ScenarioConfig, runs: &[RunResult], opts: &RunOptions) -> MonteCarloSummary {
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&StepRecord) -> f64, k: usize| {
        runs.iter().map(|r| f(&r.steps[k])).sum::<f64>() / n
    };
    let steps = (0..cfg.steps)
        .map(|k| {
            let card_mean = mean(&|s| s.cardinality as f64, k);
            let var = mean(&|s| (s.cardinality as f64 - card_mean).powi(2), k);
            let naive = cfg.fusion.compare_naive;
            StepSummary {
                step: k,
                truth_cardinality: runs[0].steps[k].truth_cardinality,
                ospa_local_mean: mean(&|s| s.ospa_local, k),
                ospa_fused_mean: mean(&|s| s.ospa_fused, k),
                card_mean,
                card_std: var.sqrt(),
                t_fuse_ms_mean: mean(&|s| ms(s.fuse_time), k),
                t_fuse_ms_max: runs
                    .iter()
                    .map(|r| ms(r.steps[k].fuse_time))
                    .fold(0.0, f64::max),
                n_h_mean: mean(&|s| s.n_h, k),
                n_h_clustered_mean: mean(&|s| s.n_h_clustered, k),
                largest_cluster: runs
                    .iter()
                    .map(|r| r.steps[k].largest_cluster)
                    .max_by_key(|&(a, b)| (a * b, a + b))
                    .unwrap_or((0, 0)),
                ospa_naive_mean: naive.then(|| mean(&|s| s.ospa_naive.unwrap_or(f64::NAN), k)),
                max_abs_dr: naive.then(|| {
                    runs.iter()
                        .map(|r| r.steps[k].max_abs_dr.unwrap_or(f64::NAN))
                        .fold(0.0, f64::max)
                }),
                t_naive_ms_mean: naive.then(|| mean(&|s| s.naive_time.map_or(f64::NAN, ms), k)),
            }
        })
        .collect();
    MonteCarloSummary {
        name: cfg.name.clone(),
        runs: runs.len(),
        timings: opts.timings,
        steps,
    }
}

impl MonteCarloSummary {
    pub const CSV_HEADER: &'static str =
        "step,ospa_local_mean,ospa_fused_mean,card_mean,card_std,t_fuse_ms,N_H,N''_H";

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.steps {
            let t = if self.timings { s.t_fuse_ms_mean } else { 0.0 };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.step,
                s.ospa_local_mean,
                s.ospa_fused_mean,
                s.card_mean,
                s.card_std,
                t,
                s.n_h_mean,
                s.n_h_clustered_mean
            )?;
        }
        Ok(())
    }

    pub fn has_oracle(&self) -> bool {
        self.steps.iter().any(|s| s.ospa_naive_mean.is_some())
    }

    /// Per-step comparison with exhaustive fusion; empty unless the scenario
    /// enabled it.
    pub fn write_oracle_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "step,ospa_fused_mean,ospa_naive_mean,max_abs_dr,t_fuse_ms,t_naive_ms"
        )?;
        for s in &self.steps {
            let (Some(naive), Some(dr)) = (s.ospa_naive_mean, s.max_abs_dr) else {
                continue;
            };
            let (tf, tn) = if self.timings {
                (s.t_fuse_ms_mean, s.t_naive_ms_mean.unwrap_or(0.0))
            } else {
                (0.0, 0.0)
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.step, s.ospa_fused_mean, naive, dr, tf, tn
            )?;
        }
        Ok(())
    }

    pub fn max_fuse_ms(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.t_fuse_ms_max)
            .fold(0.0, f64::max)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let n = self.steps.len().max(1) as f64;
        let avg = |f: &dyn Fn(&StepSummary) -> f64| self.steps.iter().map(f).sum::<f64>() / n;
        let _ = writeln!(out, "experiment: {}", self.name);
        let _ = writeln!(out, "runs: {}  steps: {}", self.runs, self.steps.len());
        let _ = writeln!(out, "mean OSPA local: {:.3}", avg(&|s| s.ospa_local_mean));
        let _ = writeln!(out, "mean OSPA fused: {:.3}", avg(&|s| s.ospa_fused_mean));
        if self.has_oracle() {
            let _ = writeln!(
                out,
                "mean OSPA exhaustive: {:.3}",
                avg(&|s| s.ospa_naive_mean.unwrap_or(0.0))
            );
            let dr = self
                .steps
                .iter()
                .filter_map(|s| s.max_abs_dr)
                .fold(0.0, f64::max);
            let _ = writeln!(out, "max |dr| vs exhaustive: {dr:.3e}");
        }
        let within = self
            .steps
            .iter()
            .filter(|s| (s.card_mean - s.truth_cardinality as f64).abs() <= 1.0)
            .count();
        let _ = writeln!(
            out,
            "cardinality within 1 of truth: {within}/{} steps",
            self.steps.len()
        );
        let big = self
            .steps
            .iter()
            .map(|s| s.largest_cluster)
            .max_by_key(|&(a, b)| (a * b, a + b))
            .unwrap_or((0, 0));
        let _ = writeln!(out, "largest joint cluster: {} x {}", big.0, big.1);
        let _ = writeln!(out, "mean N_H per step: {:.4e}", avg(&|s| s.n_h_mean));
        let _ = writeln!(
            out,
            "mean N''_H per step: {:.4e}",
            avg(&|s| s.n_h_clustered_mean)
        );
        if self.timings {
            let _ = writeln!(
                out,
                "mean fusion time: {:.3} ms",
                avg(&|s| s.t_fuse_ms_mean)
            );
            let _ = writeln!(out, "max fusion time: {:.3} ms", self.max_fuse_ms());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::scenario1();
        cfg.steps = 12;
        cfg.runs = 2;
        for o in &mut cfg.objects {
            o.death = 12;
        }
        cfg
    }

    #[test]
    fn repeated_runs_identical() {
        let cfg = small();
        let a = run_montecarlo(&cfg, &RunOptions::default()).unwrap();
        let b = run_montecarlo(&cfg, &RunOptions::default()).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), cfg.steps + 1);
    }

    #[test]
    fn fused_tracks_known_objects() {
        let s = run_montecarlo(&small(), &RunOptions::default()).unwrap();
        let last = s.steps.last().unwrap();
        assert!((last.card_mean - 3.0).abs() <= 1.0);
        assert!(last.ospa_fused_mean < 50.0);
        assert!(last.max_abs_dr.unwrap() < 0.05);
    }

    #[test]
    fn seed_changes_output() {
        let mut cfg = small();
        let a = run_montecarlo(&cfg, &RunOptions::default()).unwrap();
        cfg.seed = 99;
        let b = run_montecarlo(&cfg, &RunOptions::default()).unwrap();
        assert_ne!(a.steps, b.steps);
    }

    #[test]
    fn feedback_mode_runs() {
        let mut cfg = small();
        cfg.fusion.feedback = true;
        cfg.fusion.compare_naive = false;
        cfg.network.sensors = 3;
        let s = run_montecarlo(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(s.steps.len(), 12);
    }
}
