//! Cost model and discrete-step simulator for overlapping memory traffic
//! with tile computation, plus the staggered Subject/Examiner self-test.
//!
//! Quantities, all in compute-clock cycles:
//!
//! - `kappa = ceil(k / block)`: the matrix edge in tiles.
//! - `K`: number of container fills (one fill = `block` rows or columns).
//!   Re-reading `B` for every band of `A` costs `kappa^2 + kappa`; with `z`
//!   row-stores and a diagonal sweep it drops to `kappa^2 / (z-1) + kappa`.
//! - `Phi = K * delta + kappa * delta`: total memory time, the second term
//!   being the write-back of `C`.
//! - `Gamma = depth * kappa^2`: total compute time.
//!
//! The design is compute-bound when `Gamma >= Phi`.

use std::fmt;
use std::io::Write;

use crate::error::{domain_err, Error, Result};
use crate::matrix::{Z4Matrix, DEFAULT_BLOCK, DEFAULT_DEPTH};
use crate::z4core::{dot, ma, PackedZ4Vector, Z4Digit, DEFAULT_CHUNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduleParams {
    /// Dot-product chunk width.
    pub n: usize,
    /// Container depth, i.e. cycles per tile iteration.
    pub depth: u64,
    /// Matrix edge.
    pub k: usize,
    /// Number of row-stores; there are `z + 2` containers in total.
    pub z: u64,
    /// Cycles to fill one container.
    pub delta: u64,
    /// Tile edge.
    pub block: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            n: DEFAULT_CHUNK,
            depth: DEFAULT_DEPTH as u64,
            k: 896,
            z: 10,
            delta: 140,
            block: DEFAULT_BLOCK,
        }
    }
}

impl ScheduleParams {
    pub fn kappa(&self) -> u64 {
        if self.block == 0 {
            0
        } else {
            self.k.div_ceil(self.block) as u64
        }
    }

    /// Every reason the parameters cannot be scheduled as described,
    /// excluding the memory-bound check.
    pub fn structural_problems(&self) -> Vec<Infeasibility> {
        let mut out = Vec::new();
        if self.block == 0 || self.n == 0 || self.depth == 0 || self.k == 0 {
            out.push(Infeasibility::ZeroParameter);
        }
        if self.z < 2 {
            out.push(Infeasibility::TooFewRowStores { z: self.z });
        }
        if self.delta == 0 {
            out.push(Infeasibility::ZeroDelta);
        }
        // Tile padding adds zero rows and columns; the row length stays k.
        if (self.n as u64).saturating_mul(self.depth) < self.k as u64 {
            out.push(Infeasibility::ContainerTooShallow {
                capacity: self.n as u64 * self.depth,
                k: self.k as u64,
            });
        }
        if self.z >= 2 && !self.kappa().is_multiple_of(self.z - 1) {
            out.push(Infeasibility::Divisibility { z_minus_1: self.z - 1, kappa: self.kappa() });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infeasibility {
    ZeroParameter,
    TooFewRowStores { z: u64 },
    ZeroDelta,
    ContainerTooShallow { capacity: u64, k: u64 },
    Divisibility { z_minus_1: u64, kappa: u64 },
    MemoryBound { phi: u64, gamma: u64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::ZeroParameter => write!(f, "n, depth, k and block must be positive"),
            Infeasibility::TooFewRowStores { z } => write!(f, "need z >= 2 row-stores, got {z}"),
            Infeasibility::ZeroDelta => write!(f, "delta must be positive"),
            Infeasibility::ContainerTooShallow { capacity, k } => {
                write!(f, "container holds {capacity} digits but rows have {k}")
            }
            Infeasibility::Divisibility { z_minus_1, kappa } => {
                write!(f, "z-1 = {z_minus_1} does not divide kappa = {kappa}")
            }
            Infeasibility::MemoryBound { phi, gamma } => {
                write!(f, "memory time {phi} exceeds compute time {gamma}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleReport {
    pub kappa: u64,
    pub k_naive: u64,
    pub k_improved: u64,
    pub phi_naive: u64,
    pub phi_improved: u64,
    pub gamma: u64,
    pub feasible: bool,
    pub reasons: Vec<Infeasibility>,
    /// Filled in by [`simulate`].
    pub simulated_cycles: Option<u64>,
    /// `Gamma - Phi_improved`.
    pub memory_bound_margin: i64,
}

/// Closed-form costs. Never fails; problems are listed in `reasons`.
///
/// When `z - 1` does not divide `kappa` the improved fill count is rounded
/// up. With `z < 2` the improved schedule degenerates and is costed as if
/// `z - 1 = 1`.
pub fn cost_model(p: &ScheduleParams) -> ScheduleReport {
    let kappa = p.kappa();
    let stores = p.z.saturating_sub(1).max(1);
    let k_naive = kappa * kappa + kappa;
    let k_improved = (kappa * kappa).div_ceil(stores) + kappa;
    let phi_naive = k_naive * p.delta + kappa * p.delta;
    let phi_improved = k_improved * p.delta + kappa * p.delta;
    let gamma = p.depth * kappa * kappa;
    let mut reasons = p.structural_problems();
    if gamma < phi_improved {
        reasons.push(Infeasibility::MemoryBound { phi: phi_improved, gamma });
    }
    ScheduleReport {
        kappa,
        k_naive,
        k_improved,
        phi_naive,
        phi_improved,
        gamma,
        feasible: reasons.is_empty(),
        reasons,
        simulated_cycles: None,
        memory_bound_margin: gamma as i64 - phi_improved as i64,
    }
}

/// How the simulated design reacts to late data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Timing {
    /// A macro-step lasts until both its compute and its memory traffic are
    /// done.
    #[default]
    Stall,
    /// Compute advances every `(z-1) * depth` cycles regardless; a container
    /// that is not full when its macro-step starts is a violation.
    Strict,
}

/// One macro-step of the simulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepTrace {
    pub step: u64,
    pub start: u64,
    pub compute: u64,
    pub memory: u64,
    /// `'1'` for row-stores feeding this step's computation.
    pub rowstore: String,
    /// `'1'` for the column-store feeding this step's computation.
    pub colstore: String,
}

impl fmt::Display for StepTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} compute={} memory={} rowstore={} colstore={}",
            self.step, self.compute, self.memory, self.rowstore, self.colstore
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simulation {
    pub report: ScheduleReport,
    pub trace: Vec<StepTrace>,
    /// Row-store fills completed inside the macro-step loop.
    pub row_fills: u64,
    /// Column-store fills completed inside the macro-step loop.
    pub column_fills: u64,
    /// Cycles for the initial `z-1` row fills and one column fill, which
    /// happen before the loop and are not part of `simulated_cycles`.
    pub prologue_cycles: u64,
    pub max_step_memory: u64,
}

#[derive(Clone, Debug)]
struct RowStore {
    block: u64,
    chunks: u64,
    ready_at: u64,
}

#[derive(Clone, Debug)]
struct ColumnStore {
    block: u64,
    full: bool,
    ready_at: u64,
}

/// `floor((i+1) * total / parts) - floor(i * total / parts)`: spreads
/// `total` over `parts` slots so the slots sum to `total` exactly.
fn spread(total: u64, parts: u64, i: u64) -> u64 {
    let at = |j: u64| (j as u128 * total as u128 / parts as u128) as u64;
    at(i + 1) - at(i)
}

pub fn simulate(p: &ScheduleParams) -> Result<Simulation> {
    simulate_with(p, Timing::Stall)
}

/// Steps through the `kappa^2 / (z-1)` macro-steps of the row-store
/// schedule.
///
/// Macro-step `i` multiplies column band `i mod kappa` against the `z-1`
/// active row bands `w, ..., w+z-2 (mod kappa)` with `w = i / q` and
/// `q = kappa / (z-1)`. Meanwhile the idle column-store loads the next
/// column band (`delta` cycles), the idle row-store receives `1/q` of the
/// next row band, and `1/q` of a band's worth of results is written back.
/// When the idle row-store is full it becomes active at the next
/// macro-step boundary and the store holding the lowest band is retired to
/// receive new rows. Row and write durations are spread so that each
/// macro-step's memory time is at most `delta + ceil(2 delta / q)`.
pub fn simulate_with(p: &ScheduleParams, timing: Timing) -> Result<Simulation> {
    let problems = p.structural_problems();
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|r| r.to_string()).collect();
        return domain_err(format!("cannot simulate: {}", list.join("; ")));
    }
    let kappa = p.kappa();
    let active_count = p.z - 1;
    let q = kappa / active_count;
    let steps = kappa * q;
    let compute = active_count * p.depth;

    // stores 0..z-1 hold bands 0..z-2 from the prologue; store z-1 is idle
    let mut rows: Vec<RowStore> = (0..p.z)
        .map(|s| RowStore {
            block: s % kappa,
            chunks: if s < active_count { q } else { 0 },
            ready_at: 0,
        })
        .collect();
    let mut active: std::collections::VecDeque<usize> = (0..active_count as usize).collect();
    let mut loading = active_count as usize;
    let mut cols = [
        ColumnStore { block: 0, full: true, ready_at: 0 },
        ColumnStore { block: 1 % kappa, full: false, ready_at: 0 },
    ];
    let mut current_col = 0usize;

    let mut t = 0u64;
    let mut mem_free = 0u64;
    let mut row_fills = 0u64;
    let mut column_fills = 0u64;
    let mut max_step_memory = 0u64;
    let mut trace = Vec::with_capacity(steps as usize);

    for i in 0..steps {
        let w = i / q;
        let j = i % kappa;

        if i > 0 && i % q == 0 {
            let retired = active.pop_front().expect("z-1 >= 1 active stores");
            active.push_back(loading);
            loading = retired;
            rows[loading] = RowStore { block: (w + active_count) % kappa, chunks: 0, ready_at: 0 };
        }

        // data-ready check
        let mut needed_at = 0u64;
        let mut missing = None;
        for (slot, &s) in active.iter().enumerate() {
            let want = (w + slot as u64) % kappa;
            let store = &rows[s];
            if store.block != want || store.chunks < q {
                missing = Some(format!("row band {want} not loaded in row-store {s}"));
                break;
            }
            needed_at = needed_at.max(store.ready_at);
        }
        let col = &cols[current_col];
        if missing.is_none() && (col.block != j || !col.full) {
            missing = Some(format!("column band {j} not loaded"));
        }
        needed_at = needed_at.max(col.ready_at);
        if let Some(what) = missing {
            return Err(Error::DataNotReady { step: i, what });
        }
        if needed_at > t {
            match timing {
                Timing::Strict => {
                    return Err(Error::DataNotReady {
                        step: i,
                        what: format!("operands ready at cycle {needed_at}, step starts at {t}"),
                    })
                }
                Timing::Stall => t = needed_at,
            }
        }
        let start = t;

        // memory traffic issued this step
        let row_time = spread(kappa * p.delta, steps, i);
        let write_time = spread(2 * kappa * p.delta, steps, i) - row_time;
        let mut m = start.max(mem_free);
        m += p.delta;
        let other = 1 - current_col;
        cols[other] = ColumnStore { block: (j + 1) % kappa, full: true, ready_at: m };
        column_fills += 1;
        m += row_time;
        let ld = &mut rows[loading];
        ld.chunks += 1;
        if ld.chunks == q {
            ld.ready_at = m;
            row_fills += 1;
        }
        m += write_time;
        mem_free = m;
        let memory = p.delta + row_time + write_time;
        max_step_memory = max_step_memory.max(memory);

        t = match timing {
            Timing::Stall => (start + compute).max(m),
            Timing::Strict => start + compute,
        };

        let mut rowstore = vec!['0'; p.z as usize];
        for &s in &active {
            rowstore[s] = '1';
        }
        let mut colstore = ['0', '0'];
        colstore[current_col] = '1';
        trace.push(StepTrace {
            step: i,
            start,
            compute,
            memory,
            rowstore: rowstore.into_iter().collect(),
            colstore: colstore.into_iter().collect(),
        });

        cols[current_col].full = false;
        current_col = other;
    }

    let mut report = cost_model(p);
    report.simulated_cycles = Some(t.max(mem_free));
    Ok(Simulation {
        report,
        trace,
        row_fills,
        column_fills,
        prologue_cycles: p.z * p.delta,
        max_step_memory,
    })
}

/// Writes one trace line per macro-step.
pub fn write_trace(sim: &Simulation, mut out: impl Write) -> std::io::Result<()> {
    for step in &sim.trace {
        writeln!(out, "{step}")?;
    }
    Ok(())
}

/// Test-data generator `D_i = D_{i-1} + D_{i-2} + 2 D_{i-4} + D_{i-5} (mod 4)`
/// started from `D_0 = D_1 = D_2 = D_3 = 0, D_4 = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestGen {
    /// `window[(i - m) % 5]` is `D_{i-m}` for the last emitted index `i`.
    window: [u8; 5],
    /// Index of the most recent value.
    index: u64,
}

impl Default for TestGen {
    fn default() -> Self {
        TestGen::from_seed([0, 0, 0, 0, 1])
    }
}

impl TestGen {
    /// Starts from `D_0..D_4 = seed` (each reduced mod 4).
    pub fn from_seed(seed: [u8; 5]) -> Self {
        let mut window = [0u8; 5];
        for (i, v) in seed.iter().enumerate() {
            window[i] = v & 3;
        }
        TestGen { window, index: 4 }
    }

    /// Index of the value most recently produced (4 before the first draw).
    pub fn index(&self) -> u64 {
        self.index
    }

    fn back(&self, m: u64) -> u8 {
        self.window[((self.index - m) % 5) as usize]
    }

    /// Advances the recurrence and returns the new value.
    pub fn next_digit(&mut self) -> Z4Digit {
        let v = (self.back(0) + self.back(1) + 2 * self.back(3) + self.back(4)) & 3;
        self.index += 1;
        self.window[(self.index % 5) as usize] = v;
        Z4Digit::reduce(v as u64)
    }

    pub fn discard(&mut self, count: u64) {
        for _ in 0..count {
            self.next_digit();
        }
    }
}

impl Iterator for TestGen {
    type Item = Z4Digit;

    fn next(&mut self) -> Option<Z4Digit> {
        Some(self.next_digit())
    }
}

pub fn testgen_next(state: &mut TestGen) -> Z4Digit {
    state.next_digit()
}

/// A matrix filled row-major from the test-data generator after discarding
/// `skip` draws.
pub fn testgen_matrix(rows: usize, cols: usize, skip: u64) -> Z4Matrix {
    let mut gen = TestGen::default();
    gen.discard(skip);
    Z4Matrix::from_fn(rows, cols, |_, _| gen.next_digit())
}

/// Corrupts the Subject's output on every `period`-th evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaultInjection {
    pub period: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfTestReport {
    pub rounds: u64,
    pub errors: u64,
    pub first_error_round: Option<u64>,
}

#[derive(Clone, Default)]
struct Examiner {
    u: Vec<Z4Digit>,
    v: Vec<Z4Digit>,
    out: Z4Digit,
}

impl Examiner {
    /// Reference answer: a chain of scalar multiply-accumulates.
    fn load(&mut self, u: Vec<Z4Digit>, v: Vec<Z4Digit>) {
        self.out = u.iter().zip(&v).fold(Z4Digit::ZERO, |s, (&a, &b)| ma(a, b, s));
        self.u = u;
        self.v = v;
    }
}

fn draw(gen: &mut TestGen, n: usize) -> (Vec<Z4Digit>, Vec<Z4Digit>) {
    let u = gen.by_ref().take(n).collect();
    let v = gen.by_ref().take(n).collect();
    (u, v)
}

/// Cross-checks the packed dot product (the Subject) against ten scalar
/// reference units (the Examiners) on a ten-phase rotation.
///
/// Each round `i`, with `p = i mod 10`: the Subject's answer from the
/// previous round is compared with Examiner `p`, Examiner `p-1` receives
/// fresh test data, and the Subject is handed Examiner `p+1`'s data.
pub fn staggered_selftest(
    width: usize,
    rounds: u64,
    fault: Option<FaultInjection>,
) -> Result<SelfTestReport> {
    if width == 0 {
        return domain_err("self-test width must be at least 1");
    }
    if rounds < 10 {
        return domain_err(format!("self-test needs at least 10 rounds, got {rounds}"));
    }
    if fault.is_some_and(|f| f.period == 0) {
        return domain_err("fault period must be at least 1");
    }
    let mut gen = TestGen::default();
    let mut examiners: Vec<Examiner> = vec![Examiner::default(); 10];
    for e in examiners.iter_mut() {
        let (u, v) = draw(&mut gen, width);
        e.load(u, v);
    }

    let mut evaluations = 0u64;
    let mut subject = |e: &Examiner| -> Z4Digit {
        evaluations += 1;
        let out = dot(&PackedZ4Vector::from_digits(&e.u), &PackedZ4Vector::from_digits(&e.v), Z4Digit::ZERO)
            .expect("examiner vectors share a length");
        match fault {
            Some(f) if evaluations.is_multiple_of(f.period) => out.add(Z4Digit::ONE),
            _ => out,
        }
    };

    let mut s_out = subject(&examiners[1]);
    let mut errors = 0u64;
    let mut first_error_round = None;
    for i in 1..=rounds {
        let p = (i % 10) as usize;
        if s_out != examiners[p].out {
            errors += 1;
            first_error_round.get_or_insert(i);
        }
        let (u, v) = draw(&mut gen, width);
        examiners[(p + 9) % 10].load(u, v);
        s_out = subject(&examiners[(p + 1) % 10]);
    }
    Ok(SelfTestReport { rounds, errors, first_error_round })
}
