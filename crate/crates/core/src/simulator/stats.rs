use alloc::format;
use alloc::vec::Vec;

use super::engine::Tally;
use super::SimConfig;
use crate::regenerative::RegenerationLaw;
use crate::stationary::{evaluate_cdf, CdfTable};
use crate::{Error, Level, PhaseCdf, Result, RowVector};

/// Minimum completed cycles for [`regen_stats_compare`].
pub const MIN_CYCLES: u64 = 1000;

/// Pooled simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub grid: Vec<f64>,
    /// `occupation[k][i]`: fraction of time with level `≤ grid[k]` and
    /// phase `i`.
    pub occupation: Vec<RowVector>,
    pub phase_marginal: RowVector,
    /// Fraction of time at level exactly zero, per phase.
    pub zero_fraction: RowVector,
    pub regen_phase_freq: RowVector,
    pub n_regenerations: u64,
    pub mean_cycle: f64,
    pub n_cycles: u64,
    /// Batch-means standard errors, valid under serial dependence between
    /// consecutive cycles.
    pub regen_freq_se: RowVector,
    pub mean_cycle_se: f64,
    /// The same errors if cycles were independent.
    pub regen_freq_se_iid: RowVector,
    pub mean_cycle_se_iid: f64,
    pub observed_time: f64,
}

fn add(a: &Tally, b: &Tally) -> Tally {
    let zip = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u + v).collect::<Vec<_>>();
    let zipu = |x: &[u64], y: &[u64]| x.iter().zip(y).map(|(u, v)| u + v).collect::<Vec<_>>();
    Tally {
        phases: a.phases,
        ramp_w: zip(&a.ramp_w, &b.ramp_w),
        ramp_wv: zip(&a.ramp_wv, &b.ramp_wv),
        top_bin: a.top_bin.iter().zip(&b.top_bin).map(|(x, y)| *x.max(y)).collect(),
        zero_time: zip(&a.zero_time, &b.zero_time),
        phase_time: zip(&a.phase_time, &b.phase_time),
        observed_time: a.observed_time + b.observed_time,
        regen: zipu(&a.regen, &b.regen),
        cycles: zipu(&a.cycles, &b.cycles),
        cycle_sum: zip(&a.cycle_sum, &b.cycle_sum),
        cycle_sumsq: zip(&a.cycle_sumsq, &b.cycle_sumsq),
    }
}

/// Pairwise sum over a fixed tree, so the result does not depend on how
/// replications were scheduled.
fn tree_sum(ts: &[Tally]) -> Tally {
    match ts.len() {
        1 => ts[0].clone(),
        n => add(&tree_sum(&ts[..n / 2]), &tree_sum(&ts[n / 2..])),
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Pools replication tallies, in index order, into an [`EmpiricalLaw`].
pub fn aggregate(config: &SimConfig, tallies: &[Tally]) -> Result<EmpiricalLaw> {
    if tallies.is_empty() {
        return Err(Error::malformed("tallies", "nothing to aggregate"));
    }
    let m = tallies[0].phases;
    let g = config.grid.len();
    if tallies.iter().any(|t| t.phases != m || t.ramp_w.len() != m * (g + 1)) {
        return Err(Error::GridMismatch("tallies disagree on grid or phase count".into()));
    }
    let total = tree_sum(tallies);
    let time = total.observed_time;
    let occupation: Vec<RowVector> =
        (0..g).map(|k| RowVector::from_fn(m, |_, i| total.occupation(&config.grid, i, k) / time)).collect();
    let phase_marginal = RowVector::from_fn(m, |_, i| total.phase_time[i] / time);
    let zero_fraction = RowVector::from_fn(m, |_, i| total.zero_time[i] / time);

    let batches = total.cycles.len();
    let counts: Vec<u64> = (0..m).map(|i| (0..batches).map(|b| total.regen[b * m + i]).sum()).collect();
    let n_regen: u64 = counts.iter().sum();
    let regen_phase_freq = RowVector::from_fn(m, |_, i| counts[i] as f64 / n_regen as f64);
    let n_cycles: u64 = total.cycles.iter().sum();
    let sum: f64 = total.cycle_sum.iter().sum();
    let sumsq: f64 = total.cycle_sumsq.iter().sum();
    let mean_cycle = sum / n_cycles as f64;
    let nc = n_cycles as f64;
    let cycle_var = (sumsq - nc * mean_cycle * mean_cycle) / (nc - 1.0);
    let mean_cycle_se_iid = libm::sqrt(cycle_var / nc);
    let regen_freq_se_iid = regen_phase_freq.map(|p| libm::sqrt(p * (1.0 - p) / n_regen as f64));

    // Batch means over every (replication, batch) cell.
    let mut freq_by_batch: Vec<Vec<f64>> = (0..m).map(|_| Vec::new()).collect();
    let mut cycle_by_batch = Vec::new();
    for t in tallies {
        for b in 0..t.cycles.len() {
            let n_b: u64 = (0..m).map(|i| t.regen[b * m + i]).sum();
            if n_b > 0 {
                for (i, f) in freq_by_batch.iter_mut().enumerate() {
                    f.push(t.regen[b * m + i] as f64 / n_b as f64);
                }
            }
            if t.cycles[b] > 0 {
                cycle_by_batch.push(t.cycle_sum[b] / t.cycles[b] as f64);
            }
        }
    }
    let se = |xs: &[f64]| {
        let (_, sd) = mean_sd(xs);
        sd / libm::sqrt(xs.len() as f64)
    };
    let regen_freq_se = RowVector::from_fn(m, |_, i| se(&freq_by_batch[i]));
    let mean_cycle_se = se(&cycle_by_batch);

    Ok(EmpiricalLaw {
        grid: config.grid.clone(),
        occupation,
        phase_marginal,
        zero_fraction,
        regen_phase_freq,
        n_regenerations: n_regen,
        mean_cycle,
        n_cycles,
        regen_freq_se,
        mean_cycle_se,
        regen_freq_se_iid,
        mean_cycle_se_iid,
        observed_time: time,
    })
}

/// Sup-distances between empirical and reference CDFs on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub per_phase: Vec<f64>,
    /// Sup-distance between the level marginals (phase sums).
    pub total: f64,
}

/// Compares against a reference table evaluated at exactly `emp.grid`.
pub fn ks_distance(emp: &EmpiricalLaw, reference: &CdfTable) -> Result<KsReport> {
    if reference.levels.len() != emp.grid.len()
        || reference.levels.iter().zip(&emp.grid).any(|(l, g)| *l != Level::At(*g))
    {
        return Err(Error::GridMismatch(format!(
            "reference has {} levels that do not match the {} simulation levels",
            reference.levels.len(),
            emp.grid.len()
        )));
    }
    let m = emp.phase_marginal.len();
    if reference.rows.iter().any(|r| r.len() != m) {
        return Err(Error::GridMismatch(format!("reference rows are not of length {m}")));
    }
    let mut per_phase = alloc::vec![0.0_f64; m];
    let mut total = 0.0_f64;
    for (e, r) in emp.occupation.iter().zip(&reference.rows) {
        for i in 0..m {
            per_phase[i] = per_phase[i].max(libm::fabs(e[i] - r[i]));
        }
        total = total.max(libm::fabs(e.sum() - r.sum()));
    }
    Ok(KsReport { per_phase, total })
}

/// Evaluates `law` on the simulation grid and compares.
pub fn ks_against(emp: &EmpiricalLaw, law: &PhaseCdf) -> Result<KsReport> {
    let levels: Vec<Level> = emp.grid.iter().map(|g| Level::At(*g)).collect();
    ks_distance(emp, &evaluate_cdf(law, &levels)?)
}

/// Deviations of the regeneration statistics from their limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenReport {
    /// `regen_phase_freq − ρ`.
    pub freq_dev: RowVector,
    pub freq_se: RowVector,
    /// `mean_cycle − ρm`.
    pub cycle_dev: f64,
    pub cycle_se: f64,
    pub expected_cycle: f64,
    pub n_cycles: u64,
}

impl RegenReport {
    /// Largest deviation in units of its standard error. Components with a
    /// zero error (a single phase) count only if they deviate.
    pub fn max_z(&self) -> f64 {
        let z = |d: f64, s: f64| {
            if s > 0.0 {
                libm::fabs(d) / s
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let mut worst = z(self.cycle_dev, self.cycle_se);
        for (d, s) in self.freq_dev.iter().zip(self.freq_se.iter()) {
            worst = worst.max(z(*d, *s));
        }
        worst
    }
}

pub fn regen_stats_compare(emp: &EmpiricalLaw, law: &RegenerationLaw) -> Result<RegenReport> {
    if emp.n_cycles < MIN_CYCLES {
        return Err(Error::InsufficientCycles { got: emp.n_cycles as usize, need: MIN_CYCLES as usize });
    }
    if law.rho.len() != emp.regen_phase_freq.len() {
        return Err(Error::Shape {
            what: "regeneration law".into(),
            expected: emp.regen_phase_freq.len(),
            found: law.rho.len(),
        });
    }
    let expected_cycle = law.mean_cycle();
    Ok(RegenReport {
        freq_dev: &emp.regen_phase_freq - &law.rho,
        freq_se: emp.regen_freq_se.clone(),
        cycle_dev: emp.mean_cycle - expected_cycle,
        cycle_se: emp.mean_cycle_se,
        expected_cycle,
        n_cycles: emp.n_cycles,
    })
}
