//! Benchmark sweeps over instance families, reproducing the experiment
//! tables at desk scale.
//!
//! A spec expands into cells (one per size/lambda/shape and
//! sub-algorithm); every cell runs `trials` seeded solves. Tasks are
//! independent and run on a rayon pool; each derives its generator purely
//! from (master seed, cell, trial), with the sub-algorithm excluded from
//! the derivation so all sub-algorithms see the same instances and
//! starting points. Results are gathered in spec order, so the output
//! does not depend on the number of jobs.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rsmooth::cpfact::{
    cp_factorize, cp_solver_config, gen_boundary, gen_random_cp, gen_structured, CpInstance,
};
use rsmooth::fsv::{fsv_solve, fsv_solver_config, gen_fsv_instance, FsvOptions};
use rsmooth::smoothing::AbsKind;
use rsmooth::solver::{SolverConfig, SubAlgorithm};
use rsmooth::{Error, Result};

/// Reference solver settings per experiment family; the preset
/// configurations are asserted against this table in tests.
#[allow(dead_code)]
pub mod presets {
    pub const CP_MU0: f64 = 100.0;
    pub const CP_THETA: f64 = 0.8;
    pub const CP_GAMMA: f64 = 0.5;
    pub const CP_MAX_TOTAL_ITERS: usize = 5000;
    pub const FSV_MU0: f64 = 1.0;
    pub const FSV_THETA: f64 = 0.5;
    pub const FSV_DELTA0: f64 = 0.1;
    pub const FSV_RHO: f64 = 0.5;
    /// The truncation grid of the success tables.
    pub const FSV_TAUS: [f64; 8] = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12];
}

/// A benchmark family with its sweep parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum BenchmarkSpec {
    /// A = C C^T for folded-Gaussian C; one start per instance.
    RandomCp {
        sizes: Vec<usize>,
        /// r = ceil(r_factor * n).
        r_factor: f64,
        trials: usize,
        sub_algorithms: Vec<SubAlgorithm>,
    },
    /// The interior family A_n with r = n; one instance, many starts.
    StructuredCp {
        sizes: Vec<usize>,
        trials: usize,
        sub_algorithms: Vec<SubAlgorithm>,
    },
    /// The 5x5 boundary blend A_lambda with r = 12; many starts.
    BoundaryCp {
        lambdas: Vec<f64>,
        r: usize,
        trials: usize,
        sub_algorithms: Vec<SubAlgorithm>,
    },
    /// Planted sparse vector; instance and start drawn per trial, one run
    /// evaluated at every truncation level.
    Fsv {
        shapes: Vec<(usize, usize)>,
        kinds: Vec<AbsKind>,
        taus: Vec<f64>,
        trials: usize,
        sub_algorithms: Vec<SubAlgorithm>,
    },
}

const THREE_SUBS: [SubAlgorithm; 3] = [SubAlgorithm::Sd, SubAlgorithm::Cg, SubAlgorithm::Rtr];

impl BenchmarkSpec {
    /// Named presets mirroring the experiment tables at desk scale.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "table2" => Ok(BenchmarkSpec::RandomCp {
                sizes: vec![20, 30, 40],
                r_factor: 1.5,
                trials: 20,
                sub_algorithms: THREE_SUBS.to_vec(),
            }),
            "table3" => Ok(BenchmarkSpec::StructuredCp {
                sizes: vec![10, 20, 50],
                trials: 20,
                sub_algorithms: THREE_SUBS.to_vec(),
            }),
            "table3-n10" => Ok(BenchmarkSpec::StructuredCp {
                sizes: vec![10],
                trials: 20,
                sub_algorithms: THREE_SUBS.to_vec(),
            }),
            "table4" => Ok(BenchmarkSpec::BoundaryCp {
                lambdas: vec![0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999, 1.0],
                r: 12,
                trials: 20,
                sub_algorithms: THREE_SUBS.to_vec(),
            }),
            "table5" => Ok(BenchmarkSpec::Fsv {
                shapes: vec![(5, 20), (5, 30), (5, 40), (5, 50)],
                kinds: vec![AbsKind::F1],
                taus: presets::FSV_TAUS.to_vec(),
                trials: 50,
                sub_algorithms: SubAlgorithm::ALL.to_vec(),
            }),
            other => Err(Error::Domain(format!(
                "unknown preset '{other}' (expected table2|table3|table3-n10|table4|table5)"
            ))),
        }
    }

    fn trials(&self) -> usize {
        match self {
            BenchmarkSpec::RandomCp { trials, .. }
            | BenchmarkSpec::StructuredCp { trials, .. }
            | BenchmarkSpec::BoundaryCp { trials, .. }
            | BenchmarkSpec::Fsv { trials, .. } => *trials,
        }
    }
}

/// One aggregated output row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub family: String,
    pub n: usize,
    pub r_or_m: usize,
    /// Family parameter (lambda for the boundary blend), if any.
    pub param: Option<f64>,
    pub sub_algorithm: String,
    pub kind: String,
    pub tau: Option<f64>,
    /// successes / trials rounded to two decimals.
    pub rate: f64,
    pub successes: usize,
    pub trials: usize,
    /// Mean wall time over successful runs.
    pub time_s: Option<f64>,
    /// Mean total iterations over successful runs.
    pub iter_s: Option<f64>,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "family,n,r_or_m,param,sub_algorithm,kind,tau,rate,time_s,iter_s,trials,seed";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| match v {
            Some(v) => format!("{v:.digits$}"),
            None => "-".to_string(),
        };
        let tau = match self.tau {
            Some(t) => format!("{t:e}"),
            None => "-".to_string(),
        };
        let param = match self.param {
            Some(p) => format!("{p}"),
            None => "-".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{:.2},{},{},{},{}",
            self.family,
            self.n,
            self.r_or_m,
            param,
            self.sub_algorithm,
            self.kind,
            tau,
            self.rate,
            opt(self.time_s, 4),
            opt(self.iter_s, 1),
            self.trials,
            self.seed
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one (cell, trial) task. Sub-algorithms are not part of the
/// derivation: they must all see the same instance and starting point.
pub fn task_seed(master: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(cell.wrapping_mul(0x100_0003).wrapping_add(trial)))
}

struct TrialOutcome {
    success: bool,
    total_iters: usize,
    wall_s: f64,
    /// Qx of an FSV solve, for per-tau evaluation.
    fsv_coords: Option<nalgebra::DVector<f64>>,
    fsv_n: usize,
}

enum CellKind {
    Cp {
        family: &'static str,
        n: usize,
        r: usize,
        param: Option<f64>,
        instance: Instance,
    },
    Fsv {
        n: usize,
        m: usize,
        kind: AbsKind,
    },
}

enum Instance {
    /// Generated fresh per trial from the trial generator.
    RandomCp,
    /// One fixed matrix shared by all trials of the cell.
    Fixed(Box<CpInstance>),
}

struct Cell {
    id: u64,
    kind: CellKind,
    sub_algorithm: SubAlgorithm,
    config: SolverConfig,
}

fn expand(spec: &BenchmarkSpec) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    match spec {
        BenchmarkSpec::RandomCp {
            sizes,
            r_factor,
            sub_algorithms,
            ..
        } => {
            if r_factor.is_nan() || *r_factor < 1.0 {
                return Err(Error::Domain(format!(
                    "r_factor must be >= 1, got {r_factor}"
                )));
            }
            for (i, &n) in sizes.iter().enumerate() {
                let r = (*r_factor * n as f64).ceil() as usize;
                for &sub in sub_algorithms {
                    cells.push(Cell {
                        id: i as u64,
                        kind: CellKind::Cp {
                            family: "random_cp",
                            n,
                            r,
                            param: None,
                            instance: Instance::RandomCp,
                        },
                        sub_algorithm: sub,
                        config: cp_solver_config(sub),
                    });
                }
            }
        }
        BenchmarkSpec::StructuredCp {
            sizes,
            sub_algorithms,
            ..
        } => {
            for (i, &n) in sizes.iter().enumerate() {
                let inst = gen_structured(n)?;
                for &sub in sub_algorithms {
                    cells.push(Cell {
                        id: i as u64,
                        kind: CellKind::Cp {
                            family: "structured_cp",
                            n,
                            r: n,
                            param: None,
                            instance: Instance::Fixed(Box::new(inst.clone())),
                        },
                        sub_algorithm: sub,
                        config: cp_solver_config(sub),
                    });
                }
            }
        }
        BenchmarkSpec::BoundaryCp {
            lambdas,
            r,
            sub_algorithms,
            ..
        } => {
            for (i, &lambda) in lambdas.iter().enumerate() {
                let inst = gen_boundary(lambda)?;
                for &sub in sub_algorithms {
                    cells.push(Cell {
                        id: i as u64,
                        kind: CellKind::Cp {
                            family: "boundary_cp",
                            n: inst.order(),
                            r: *r,
                            param: Some(lambda),
                            instance: Instance::Fixed(Box::new(inst.clone())),
                        },
                        sub_algorithm: sub,
                        config: cp_solver_config(sub),
                    });
                }
            }
        }
        BenchmarkSpec::Fsv {
            shapes,
            kinds,
            sub_algorithms,
            ..
        } => {
            let mut id = 0u64;
            for &(n, m) in shapes {
                for &kind in kinds {
                    for &sub in sub_algorithms {
                        cells.push(Cell {
                            id,
                            kind: CellKind::Fsv { n, m, kind },
                            sub_algorithm: sub,
                            config: fsv_solver_config(sub),
                        });
                    }
                    id += 1;
                }
            }
        }
    }
    Ok(cells)
}

fn run_trial(cell: &Cell, seed: u64) -> Result<TrialOutcome> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let started = Instant::now();
    match &cell.kind {
        CellKind::Cp { n, r, instance, .. } => {
            let owned;
            let inst = match instance {
                Instance::RandomCp => {
                    owned = gen_random_cp(*n, &mut rng)?;
                    &owned
                }
                Instance::Fixed(inst) => inst.as_ref(),
            };
            let res = cp_factorize(inst, Some(*r), &cell.config, &mut rng)?;
            Ok(TrialOutcome {
                success: res.success && res.residual <= rsmooth::cpfact::CP_RESIDUAL_TOL,
                total_iters: res.trace.total_iters(),
                wall_s: started.elapsed().as_secs_f64(),
                fsv_coords: None,
                fsv_n: 0,
            })
        }
        CellKind::Fsv { n, m, kind } => {
            let inst = gen_fsv_instance(*n, *m, &mut rng)?;
            let opts = FsvOptions {
                kind: *kind,
                ..FsvOptions::default()
            };
            let res = fsv_solve(&inst, &cell.config, &opts, &mut rng)?;
            Ok(TrialOutcome {
                success: res.success,
                total_iters: res.trace.total_iters(),
                wall_s: started.elapsed().as_secs_f64(),
                fsv_coords: Some(res.coords),
                fsv_n: *n,
            })
        }
    }
}

/// Runs a spec on `jobs` worker threads and aggregates rows in
/// deterministic spec order.
pub fn run_benchmark(spec: &BenchmarkSpec, master_seed: u64, jobs: usize) -> Result<Vec<BenchRow>> {
    let cells = expand(spec)?;
    let trials = spec.trials();
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("could not build thread pool: {e}")))?;

    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| {
                let cell = &cells[c];
                run_trial(cell, task_seed(master_seed, cell.id, t as u64))
            })
            .collect()
    });

    let mut per_cell: Vec<Vec<TrialOutcome>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for (&(c, _), outcome) in tasks.iter().zip(outcomes) {
        per_cell[c].push(outcome?);
    }

    let taus: &[f64] = match spec {
        BenchmarkSpec::Fsv { taus, .. } => taus,
        _ => &[],
    };

    let mut rows = Vec::new();
    for (cell, outcomes) in cells.iter().zip(per_cell) {
        match &cell.kind {
            CellKind::Cp {
                family,
                n,
                r,
                param,
                ..
            } => {
                let successes: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.success).collect();
                rows.push(BenchRow {
                    family: family.to_string(),
                    n: *n,
                    r_or_m: *r,
                    param: *param,
                    sub_algorithm: cell.sub_algorithm.to_string(),
                    kind: "lse".to_string(),
                    tau: None,
                    rate: round2(successes.len() as f64 / trials as f64),
                    successes: successes.len(),
                    trials,
                    time_s: mean(successes.iter().map(|o| o.wall_s)),
                    iter_s: mean(successes.iter().map(|o| o.total_iters as f64)),
                    seed: master_seed,
                });
            }
            CellKind::Fsv { n, m, kind } => {
                for &tau in taus {
                    let successes: Vec<&TrialOutcome> = outcomes
                        .iter()
                        .filter(|o| {
                            o.fsv_coords.as_ref().is_some_and(|z| {
                                rsmooth::fsv::truncated_support_size(z, tau) == o.fsv_n
                            })
                        })
                        .collect();
                    rows.push(BenchRow {
                        family: "fsv".to_string(),
                        n: *n,
                        r_or_m: *m,
                        param: None,
                        sub_algorithm: cell.sub_algorithm.to_string(),
                        kind: kind.to_string(),
                        tau: Some(tau),
                        rate: round2(successes.len() as f64 / trials as f64),
                        successes: successes.len(),
                        trials,
                        time_s: mean(successes.iter().map(|o| o.wall_s)),
                        iter_s: mean(successes.iter().map(|o| o.total_iters as f64)),
                        seed: master_seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}
