use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{SimConfig, BATCHES, WARM_UP_FRACTION};
use crate::model::{BoundaryVariant, MmbmModel};
use crate::{Error, Result};

/// Raw sums from one replication; see [`super::aggregate`].
///
/// Occupation below a level is kept in ramp form. A linear segment from
/// `a` to `b` at speed `s` spends `((g − min)₊ − (g − max)₊)/s` time at or
/// below `g`, so the whole path gives `F(g) = Σ w_v (g − v)₊` over its
/// turning points `v`. Each point is filed under the grid bin containing
/// it, and `F(g_k) = g_k Σ w − Σ w v` over bins up to `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub phases: usize,
    /// `ramp_w[i * (G + 1) + b]`: total ramp weight of phase-`i` points in
    /// bin `b`, where bin `b < G` is `(g[b−1], g[b]]` and bin `G` lies
    /// above the grid.
    pub ramp_w: Vec<f64>,
    /// Matching sums of `w · v`.
    pub ramp_wv: Vec<f64>,
    /// Highest bin holding ramp points, per phase. From there on the
    /// occupation is the whole phase time, which avoids cancellation at
    /// high levels.
    pub top_bin: Vec<usize>,
    pub zero_time: Vec<f64>,
    pub phase_time: Vec<f64>,
    pub observed_time: f64,
    /// Regenerations per phase, by batch: `regen[batch * m + i]`.
    pub regen: Vec<u64>,
    /// Completed cycles, their total and squared lengths, by batch.
    pub cycles: Vec<u64>,
    pub cycle_sum: Vec<f64>,
    pub cycle_sumsq: Vec<f64>,
}

impl Tally {
    fn new(m: usize, grid_len: usize) -> Self {
        Self {
            phases: m,
            ramp_w: vec![0.0; m * (grid_len + 1)],
            ramp_wv: vec![0.0; m * (grid_len + 1)],
            top_bin: vec![0; m],
            zero_time: vec![0.0; m],
            phase_time: vec![0.0; m],
            observed_time: 0.0,
            regen: vec![0; BATCHES * m],
            cycles: vec![0; BATCHES],
            cycle_sum: vec![0.0; BATCHES],
            cycle_sumsq: vec![0.0; BATCHES],
        }
    }

    /// Time in phase `i` at levels `≤ grid[k]`.
    pub fn occupation(&self, grid: &[f64], i: usize, k: usize) -> f64 {
        if k >= self.top_bin[i] {
            return self.phase_time[i];
        }
        let base = i * (grid.len() + 1);
        let w: f64 = self.ramp_w[base..=base + k].iter().sum();
        let wv: f64 = self.ramp_wv[base..=base + k].iter().sum();
        self.zero_time[i] + grid[k] * w - wv
    }
}

/// Bin lookup for ramp points. Points exactly on a grid level may land in
/// either neighbouring bin: their ramp vanishes at that level.
#[derive(Debug, Clone)]
enum Binning {
    Uniform { g0: f64, inv_h: f64, top: usize },
    General,
}

impl Binning {
    fn new(grid: &[f64]) -> Self {
        let n = grid.len();
        if n >= 2 {
            let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
            let uniform = grid
                .iter()
                .enumerate()
                .all(|(k, g)| libm::fabs(g - (grid[0] + h * k as f64)) <= 1e-12 * grid[n - 1].max(1.0));
            if uniform && h > 0.0 {
                return Binning::Uniform { g0: grid[0], inv_h: 1.0 / h, top: n };
            }
        }
        Binning::General
    }

    #[inline(always)]
    fn bin(&self, grid: &[f64], v: f64) -> usize {
        match *self {
            Binning::Uniform { g0, inv_h, top } => {
                let x = (v - g0) * inv_h;
                let k = if x > 0.0 { (x as usize).saturating_add(1) } else { 0 };
                k.min(top)
            }
            Binning::General => grid.partition_point(|g| *g < v),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    /// Leave the boundary upward in the given phase.
    Exit(usize),
    /// Stay at zero, phase changes.
    Move(usize),
}

/// Competing exponential events from one state.
#[derive(Debug, Clone)]
struct Table {
    inv_rate: f64,
    cumulative: Vec<(f64, Outcome)>,
}

impl Table {
    fn new(entries: Vec<(f64, Outcome)>) -> Result<Self> {
        if let Some((r, _)) = entries.iter().find(|(r, _)| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::malformed("boundary rates", alloc::format!("rate {r} is negative at this lambda")));
        }
        let total: f64 = entries.iter().map(|(r, _)| r).sum();
        let mut acc = 0.0;
        let mut cumulative = Vec::new();
        for (r, o) in entries {
            if r > 0.0 {
                acc += r / total;
                cumulative.push((acc, o));
            }
        }
        if let Some(last) = cumulative.last_mut() {
            last.0 = f64::INFINITY;
        }
        Ok(Self { inv_rate: if total > 0.0 { 1.0 / total } else { f64::INFINITY }, cumulative })
    }

    #[inline]
    fn pick(&self, u: f64) -> Outcome {
        self.cumulative.iter().find(|(c, _)| u < *c).map(|(_, o)| *o).unwrap_or(self.cumulative[0].1)
    }
}

struct Params {
    m: usize,
    inv_lambda: f64,
    up: Vec<f64>,
    down: Vec<f64>,
    inv_down_speed: Vec<f64>,
    inv_up_speed: Vec<f64>,
    /// `1/c_up + 1/|c_down|`: ramp weight of a turning point.
    turn: Vec<f64>,
    /// Interior phase changes.
    phase: Vec<Table>,
    boundary: Vec<Table>,
    /// Boundary phase changes follow the interior generator, so one phase
    /// clock runs throughout (standard boundary).
    shared_clock: bool,
    inv_q: f64,
}

impl Params {
    fn new(config: &SimConfig, model: &MmbmModel) -> Result<Self> {
        let m = model.phases();
        let lambda = config.lambda;
        let sl = libm::sqrt(lambda);
        let mu = model.mu();
        let sg = model.sigma();
        let gen = model.generator();
        let up: Vec<f64> = (0..m).map(|i| mu[i] + sg[i] * sl).collect();
        let down: Vec<f64> = (0..m).map(|i| mu[i] - sg[i] * sl).collect();
        let moves = |i: usize, scale: f64| -> Vec<(f64, Outcome)> {
            (0..m).filter(|j| *j != i).map(|j| (gen[(i, j)] * scale, Outcome::Move(j))).collect()
        };
        let phase = (0..m).map(|i| Table::new(moves(i, 1.0))).collect::<Result<Vec<_>>>()?;
        let boundary = match &config.variant {
            BoundaryVariant::Standard => (0..m)
                .map(|i| {
                    let mut e = vec![(lambda, Outcome::Exit(i))];
                    e.extend(moves(i, 1.0));
                    Table::new(e)
                })
                .collect::<Result<Vec<_>>>()?,
            BoundaryVariant::Sticky(s) => (0..m)
                .map(|i| {
                    let a = s.a()[i];
                    let mut e = vec![(a * sl, Outcome::Exit(i))];
                    e.extend(moves(i, a / sl));
                    Table::new(e)
                })
                .collect::<Result<Vec<_>>>()?,
            BoundaryVariant::Resampled(s) => {
                let qt = s.q_tilde_for(model)?;
                let a = s.a();
                let at = s.a_tilde();
                (0..m)
                    .map(|i| {
                        let mut e: Vec<(f64, Outcome)> = (0..m).map(|j| (sl * a[(i, j)], Outcome::Exit(j))).collect();
                        e.extend(
                            (0..m).filter(|j| *j != i).map(|j| (sl * at[(i, j)] + qt[(i, j)] / sl, Outcome::Move(j))),
                        );
                        Table::new(e)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self {
            m,
            inv_lambda: 1.0 / lambda,
            inv_down_speed: down.iter().map(|d| -1.0 / d).collect(),
            inv_up_speed: up.iter().map(|u| 1.0 / u).collect(),
            turn: up.iter().zip(&down).map(|(u, d)| 1.0 / u - 1.0 / d).collect(),
            up,
            down,
            phase,
            boundary,
            shared_clock: matches!(config.variant, BoundaryVariant::Standard),
            inv_q: 1.0 / config.q,
        })
    }
}

/// Standard exponential variates drawn in blocks, which keeps the sampler
/// out of the event loop.
struct ExpBuffer {
    buf: [f64; EXP_BLOCK],
    next: usize,
}

const EXP_BLOCK: usize = 256;

impl ExpBuffer {
    fn new() -> Self {
        Self { buf: [0.0; EXP_BLOCK], next: EXP_BLOCK }
    }

    #[inline(always)]
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if self.next == EXP_BLOCK {
            self.refill(rng);
        }
        let e = self.buf[self.next];
        self.next += 1;
        e
    }

    #[inline(never)]
    fn refill(&mut self, rng: &mut ChaCha8Rng) {
        for x in self.buf.iter_mut() {
            *x = rng.sample(Exp1);
        }
        self.next = 0;
    }
}

struct Path<'a> {
    p: &'a Params,
    grid: &'a [f64],
    rng: ChaCha8Rng,
    exps: ExpBuffer,
    t: f64,
    y: f64,
    up: bool,
    phase: usize,
    at_zero: bool,
    /// Absolute time of the next interior phase change.
    t_phase: f64,
    /// Phase and remaining interior clock at the last boundary hit. The
    /// residual is independent of the boundary dynamics, so it resumes on
    /// exit if the phase is unchanged.
    paused: Option<(usize, f64)>,
    /// Absolute expiry time of the regeneration timer.
    expiry: f64,
    last_regen: Option<f64>,
    binning: Binning,
    tally: Tally,
    /// Start of the observation window and batch length.
    window: f64,
    batch_len: f64,
}

impl<'a> Path<'a> {
    #[inline(always)]
    fn exp(&mut self) -> f64 {
        self.exps.draw(&mut self.rng)
    }

    fn new_phase_clock(&mut self) {
        let r = self.p.phase[self.phase].inv_rate;
        self.t_phase = if r.is_finite() { self.t + self.exp() * r } else { f64::INFINITY };
    }

    fn regenerate(&mut self, at: f64) {
        if at >= self.window {
            let batch = (((at - self.window) / self.batch_len) as usize).min(BATCHES - 1);
            self.tally.regen[batch * self.p.m + self.phase] += 1;
            if let Some(prev) = self.last_regen {
                let len = at - prev;
                self.tally.cycles[batch] += 1;
                self.tally.cycle_sum[batch] += len;
                self.tally.cycle_sumsq[batch] += len * len;
            }
            self.last_regen = Some(at);
        }
        self.expiry = at + self.exp() * self.p.inv_q;
    }

    /// Simulates until `t_end`. Clocks other than the regeneration timer
    /// are memoryless, so stopping and resuming is exact.
    fn run_until(&mut self, t_end: f64) {
        while self.t < t_end {
            if self.at_zero {
                self.boundary_sojourn(t_end);
            } else {
                self.interior(t_end);
            }
        }
    }

    fn boundary_sojourn(&mut self, t_end: f64) {
        let p = self.p;
        if p.shared_clock {
            let t_leave = self.t + self.exp() * p.inv_lambda;
            let t_next = t_leave.min(self.t_phase);
            self.hold_at_zero(t_next.min(t_end));
            if t_next > t_end {
                return;
            }
            if self.t_phase < t_leave {
                if let Outcome::Move(j) = p.phase[self.phase].pick(self.rng.random()) {
                    self.phase = j;
                }
                self.new_phase_clock();
            } else {
                self.at_zero = false;
                self.up = true;
            }
            return;
        }
        let table = &p.boundary[self.phase];
        let t_leave = self.t + self.exp() * table.inv_rate;
        self.hold_at_zero(t_leave.min(t_end));
        if t_leave > t_end {
            return;
        }
        let u: f64 = self.rng.random();
        match table.pick(u) {
            Outcome::Exit(j) => {
                self.phase = j;
                self.at_zero = false;
                self.up = true;
                match self.paused.take() {
                    Some((i, left)) if i == j => self.t_phase = self.t + left,
                    _ => self.new_phase_clock(),
                }
            }
            Outcome::Move(j) => self.phase = j,
        }
    }

    /// Stays at zero until `stop`, running the regeneration timer.
    fn hold_at_zero(&mut self, stop: f64) {
        // Timer-first on ties.
        while self.expiry <= stop {
            let at = self.expiry.max(self.t);
            self.regenerate(at);
        }
        let dt = stop - self.t;
        self.tally.zero_time[self.phase] += dt;
        self.tally.phase_time[self.phase] += dt;
        self.t = stop;
    }

    /// Interior motion until the level hits zero or `t_end` is reached.
    ///
    /// This is the hot loop (one iteration per `κ` flip), so the state
    /// lives in locals and is written back on exit.
    fn interior(&mut self, t_end: f64) {
        let p = self.p;
        let grid = self.grid;
        let rng = &mut self.rng;
        let exps = &mut self.exps;
        let mut ramps = Ramps {
            binning: &self.binning,
            grid,
            w: &mut self.tally.ramp_w[..],
            wv: &mut self.tally.ramp_wv[..],
            top: &mut self.tally.top_bin[..],
            nb: grid.len() + 1,
        };
        let phase_time = &mut self.tally.phase_time[..];
        // Ramp weights of a segment's endpoints: +1/s at its lower end,
        // −1/s at its upper end.
        let start = |up: bool, i: usize| if up { p.inv_up_speed[i] } else { -p.inv_down_speed[i] };

        let mut t = self.t;
        let mut y = self.y;
        let mut up = self.up;
        let mut i = self.phase;
        let mut t_phase = self.t_phase;
        let mut t_enter = t;
        ramps.add(i, y, start(up, i));
        let mut c_up = p.up[i];
        let mut c_down = p.down[i];
        let mut inv_speed = p.inv_down_speed[i];
        let mut turns = ramps.turns_at(y);
        let hit_zero = loop {
            let t_flip = t + exps.draw(rng) * p.inv_lambda;
            let t_stop = if t_phase < t_end { t_phase } else { t_end };
            if up {
                if t_flip < t_stop {
                    y += c_up * (t_flip - t);
                    t = t_flip;
                    up = false;
                    if !turns.holds(y) {
                        ramps.flush(&mut turns, i, p.turn[i], y);
                    }
                    turns.peak(y);
                    continue;
                }
                y += c_up * (t_stop - t);
            } else {
                let t_hit = t + y * inv_speed;
                let t_next = if t_flip < t_stop { t_flip } else { t_stop };
                if t_hit <= t_next {
                    y = 0.0;
                    t = t_hit;
                    break true;
                }
                // never below zero, whatever the rounding
                y = (y + c_down * (t_next - t)).max(0.0);
                if t_flip < t_stop {
                    t = t_flip;
                    up = true;
                    if !turns.holds(y) {
                        ramps.flush(&mut turns, i, p.turn[i], y);
                    }
                    turns.trough(y);
                    continue;
                }
            }
            t = t_stop;
            if t_stop >= t_end {
                break false;
            }
            let u: f64 = rng.random();
            if let Outcome::Move(j) = p.phase[i].pick(u) {
                ramps.flush(&mut turns, i, p.turn[i], y);
                ramps.add(i, y, -start(up, i));
                phase_time[i] += t - t_enter;
                t_enter = t;
                i = j;
                ramps.add(i, y, start(up, i));
                c_up = p.up[i];
                c_down = p.down[i];
                inv_speed = p.inv_down_speed[i];
            }
            let r = p.phase[i].inv_rate;
            t_phase = if r.is_finite() { t + exps.draw(rng) * r } else { f64::INFINITY };
        };
        ramps.flush(&mut turns, i, p.turn[i], y);
        ramps.add(i, y, -start(up, i));
        phase_time[i] += t - t_enter;
        self.t = t;
        self.y = y;
        self.up = up;
        self.phase = i;
        self.t_phase = t_phase;
        self.at_zero = hit_zero;
        if hit_zero {
            self.paused = Some((i, t_phase - t));
        }
    }
}

/// Turning points of the current phase that fall in one grid bin
/// `(lo, hi]`, kept in registers until the path leaves the bin. Troughs
/// carry ramp weight `+turn` and peaks `−turn`, so a signed count and sum
/// are enough.
struct Turns {
    bin: usize,
    lo: f64,
    hi: f64,
    count: f64,
    sum: f64,
}

impl Turns {
    #[inline(always)]
    fn holds(&self, y: f64) -> bool {
        self.lo < y && y <= self.hi
    }

    #[inline(always)]
    fn peak(&mut self, y: f64) {
        self.count -= 1.0;
        self.sum -= y;
    }

    #[inline(always)]
    fn trough(&mut self, y: f64) {
        self.count += 1.0;
        self.sum += y;
    }
}

struct Ramps<'a> {
    binning: &'a Binning,
    grid: &'a [f64],
    w: &'a mut [f64],
    wv: &'a mut [f64],
    top: &'a mut [usize],
    nb: usize,
}

impl Ramps<'_> {
    #[inline]
    fn add(&mut self, phase: usize, v: f64, weight: f64) {
        let bin = self.binning.bin(self.grid, v);
        self.file(phase, bin, weight, weight * v);
    }

    #[inline]
    fn file(&mut self, phase: usize, bin: usize, w: f64, wv: f64) {
        let idx = phase * self.nb + bin;
        self.w[idx] += w;
        self.wv[idx] += wv;
        self.top[phase] = self.top[phase].max(bin);
    }

    fn turns_at(&self, y: f64) -> Turns {
        let bin = self.binning.bin(self.grid, y);
        let g = self.grid;
        let lo = if bin == 0 { f64::NEG_INFINITY } else { g[bin - 1] };
        let hi = if bin == g.len() { f64::INFINITY } else { g[bin] };
        Turns { bin, lo, hi, count: 0.0, sum: 0.0 }
    }

    /// Files the pending turning points and moves `turns` to the bin of `y`.
    #[inline(never)]
    fn flush(&mut self, turns: &mut Turns, phase: usize, turn: f64, y: f64) {
        self.file(phase, turns.bin, turn * turns.count, turn * turns.sum);
        *turns = self.turns_at(y);
    }
}

/// Simulates one replication on its own random stream
/// `(seed, replication)`.
pub fn run_replication(config: &SimConfig, model: &MmbmModel, replication: u64) -> Result<Tally> {
    config.validate(model)?;
    let params = Params::new(config, model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replication);
    let m = model.phases();
    let warm = config.horizon * WARM_UP_FRACTION;
    let mut path = Path {
        p: &params,
        grid: &config.grid,
        rng,
        exps: ExpBuffer::new(),
        t: 0.0,
        y: 0.0,
        up: false,
        phase: 0,
        at_zero: true,
        t_phase: f64::INFINITY,
        paused: None,
        expiry: 0.0,
        last_regen: None,
        binning: Binning::new(&config.grid),
        tally: Tally::new(m, config.grid.len()),
        window: warm,
        batch_len: (config.horizon - warm) / BATCHES as f64,
    };
    path.expiry = path.exp() * params.inv_q;
    if params.shared_clock {
        path.new_phase_clock();
    }
    path.run_until(warm);
    path.tally = Tally::new(m, config.grid.len());
    path.run_until(config.horizon);
    path.tally.observed_time = config.horizon - warm;
    Ok(path.tally)
}
