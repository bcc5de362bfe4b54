use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::config::{MotionConfig, ObjectSpec};
use crate::mb::SensorModel;

/// Object states per step: `truth[k]` lists `(object index, state)` for the
/// objects alive at step `k`, in object order.
pub type GroundTruth = Vec<Vec<(usize, DVector<f64>)>>;

/// Propagates every object with the constant-velocity model from its birth
/// to its death. With `process_noise`, acceleration noise `σ_v` is sampled
/// at each step.
pub fn generate_truth<R: Rng>(
    objects: &[ObjectSpec],
    steps: usize,
    motion: &MotionConfig,
    process_noise: bool,
    rng: &mut R,
) -> GroundTruth {
    let dt = motion.dt;
    let mut f = DMatrix::<f64>::identity(4, 4);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let mut truth = vec![Vec::new(); steps];
    for (i, o) in objects.iter().enumerate() {
        let mut x = DVector::from_column_slice(&o.state);
        for (k, slot) in truth
            .iter_mut()
            .enumerate()
            .take(o.death.min(steps))
            .skip(o.birth)
        {
            if k > o.birth {
                x = &f * x;
                if process_noise {
                    let ax: f64 = rng.sample::<f64, _>(StandardNormal) * motion.sigma_v;
                    let ay: f64 = rng.sample::<f64, _>(StandardNormal) * motion.sigma_v;
                    x[0] += 0.5 * dt * dt * ax;
                    x[1] += 0.5 * dt * dt * ay;
                    x[2] += dt * ax;
                    x[3] += dt * ay;
                }
            }
            slot.push((i, x.clone()));
        }
    }
    truth
}

/// One scan: detections of the given states in order, then clutter drawn
/// uniformly over the sensor's region.
pub fn generate_scan<R: Rng>(
    states: &[DVector<f64>],
    sensor: &SensorModel<f64>,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let h = &sensor.observation;
    let chol = sensor
        .noise
        .clone()
        .cholesky()
        .expect("sensor noise validated positive definite");
    let l = chol.l();
    let mut scan = Vec::new();
    for x in states {
        if rng.random::<f64>() < sensor.detection {
            let e = DVector::from_fn(h.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
            scan.push(h * x + &l * e);
        }
    }
    if sensor.clutter_rate > 0.0 {
        let n = Poisson::new(sensor.clutter_rate)
            .expect("positive clutter rate")
            .sample(rng) as usize;
        let reg = &sensor.region;
        for _ in 0..n {
            let x = rng.random_range(reg.x_min..reg.x_max);
            let y = rng.random_range(reg.y_min..reg.y_max);
            scan.push(DVector::from_vec(vec![x, y]));
        }
    }
    scan
}

/// Scans of one sensor for every step of `truth`.
pub fn generate_measurements<R: Rng>(
    truth: &GroundTruth,
    sensor: &SensorModel<f64>,
    rng: &mut R,
) -> Vec<Vec<DVector<f64>>> {
    truth
        .iter()
        .map(|alive| {
            let states: Vec<DVector<f64>> = alive.iter().map(|(_, x)| x.clone()).collect();
            generate_scan(&states, sensor, rng)
        })
        .collect()
}
