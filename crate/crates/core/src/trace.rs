//! Stochastic photon-counting traces: single-atom telegraph simulation,
//! hysteresis event detection, trap-lifetime survival experiments, and the
//! alternating probe/cool sequence.
//!
//! Randomness comes from a seeded portable generator (ChaCha8) with one
//! stream per purpose, so identical seeds give bit-identical traces and the
//! occupancy history does not change when only the readout differs:
//!
//! - stream 0: atom arrival/dwell process,
//! - stream 1: plain trace bin counts,
//! - stream 2: probe-window bin counts,
//! - stream 3: cooling-window bin counts,
//! - stream 16 + j*trials + k: survival trial k at delay index j.
//!
//! Trials are therefore independent and may run in any order or in
//! parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use thiserror::Error;

use crate::fit::SurvivalPoint;
use crate::spectra::CoupledSystem;

const STREAM_OCCUPANCY: u64 = 0;
const STREAM_TRACE_COUNTS: u64 = 1;
const STREAM_PROBE_COUNTS: u64 = 2;
const STREAM_COOLING_COUNTS: u64 = 3;
const STREAM_SURVIVAL_BASE: u64 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("atom_rate ({atom_rate}) must exceed background_rate ({background_rate})")]
    RateOrder { atom_rate: f64, background_rate: f64 },
    #[error("trace must span at least one bin (duration {duration} s, bin width {bin_width} s)")]
    EmptyTrace { duration: f64, bin_width: f64 },
    #[error("window of {window} s holds no full bin of {bin_width} s")]
    WindowTooShort { window: f64, bin_width: f64 },
    #[error("all bins are identical ({count} counts); no baseline estimable")]
    AllBinsIdentical { count: u64 },
    #[error("survival experiment needs at least one trial")]
    ZeroTrials,
}

/// Everything the telegraph simulation needs. Rates are detected events per
/// second; times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    /// Detector count rate with no atom present (counts/s).
    pub background_rate: f64,
    /// Detector count rate while an atom fluoresces in the trap (counts/s).
    pub atom_rate: f64,
    /// Histogram bin width (s).
    pub bin_width: f64,
    /// Total trace duration (s); quantized to whole bins.
    pub duration: f64,
    /// Poisson arrival rate of atoms into the empty trap (events/s).
    pub loading_rate: f64,
    /// Mean 1/e dwell time of a trapped atom (s).
    pub lifetime: f64,
    pub seed: u64,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.background_rate < 0.0 || !self.background_rate.is_finite() {
            return Err(TraceError::Negative {
                name: "background_rate",
                value: self.background_rate,
            });
        }
        if self.atom_rate <= self.background_rate {
            return Err(TraceError::RateOrder {
                atom_rate: self.atom_rate,
                background_rate: self.background_rate,
            });
        }
        check_positive("bin_width", self.bin_width)?;
        check_positive("duration", self.duration)?;
        check_positive("lifetime", self.lifetime)?;
        if self.loading_rate < 0.0 || !self.loading_rate.is_finite() {
            return Err(TraceError::Negative {
                name: "loading_rate",
                value: self.loading_rate,
            });
        }
        if self.n_bins() == 0 {
            return Err(TraceError::EmptyTrace {
                duration: self.duration,
                bin_width: self.bin_width,
            });
        }
        Ok(())
    }

    fn n_bins(&self) -> usize {
        (self.duration / self.bin_width).round() as usize
    }
}

/// Time-binned photodetection counts, with the ground-truth atom-presence
/// intervals when the trace is synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonTrace {
    pub counts: Vec<u64>,
    pub bin_width: f64,
    /// Non-overlapping, ordered (start, end) intervals in seconds; `None`
    /// for ingested traces without a truth sidecar.
    pub truth_intervals: Option<Vec<(f64, f64)>>,
}

impl PhotonTrace {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn duration(&self) -> f64 {
        self.counts.len() as f64 * self.bin_width
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of each bin covered by a truth interval (all zeros when no
    /// truth is attached).
    pub fn bin_occupancy(&self) -> Vec<f64> {
        let mut fractions = vec![0.0; self.counts.len()];
        let Some(intervals) = &self.truth_intervals else {
            return fractions;
        };
        let mut ptr = 0;
        for (i, f) in fractions.iter_mut().enumerate() {
            let start = i as f64 * self.bin_width;
            let end = start + self.bin_width;
            *f = occupied_fraction(intervals, start, end, &mut ptr);
        }
        fractions
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Alternating empty/occupied renewal process over [0, duration): arrivals
/// are Poisson while the trap is empty (single occupancy is structural),
/// dwells are exponential with the configured mean lifetime.
fn occupancy_intervals(
    loading_rate: f64,
    lifetime: f64,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    if loading_rate <= 0.0 {
        return intervals;
    }
    let arrival = Exp::new(loading_rate).expect("positive rate");
    let dwell = Exp::new(1.0 / lifetime).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += arrival.sample(rng);
        if t >= duration {
            break;
        }
        let end = t + dwell.sample(rng);
        intervals.push((t, end.min(duration)));
        t = end;
        if t >= duration {
            break;
        }
    }
    intervals
}

/// Overlap fraction of [start, end) with the ordered intervals; `ptr` lets a
/// monotone caller skip already-passed intervals.
fn occupied_fraction(intervals: &[(f64, f64)], start: f64, end: f64, ptr: &mut usize) -> f64 {
    while *ptr < intervals.len() && intervals[*ptr].1 <= start {
        *ptr += 1;
    }
    let mut overlap = 0.0;
    let mut k = *ptr;
    while k < intervals.len() && intervals[k].0 < end {
        overlap += (intervals[k].1.min(end) - intervals[k].0.max(start)).max(0.0);
        k += 1;
    }
    overlap / (end - start)
}

/// Simulate a fluorescence telegraph trace: per-bin counts are Poisson with
/// the background rate, the atom rate, or the occupancy-weighted mix in
/// bins containing a transition. Fully determined by the seed.
pub fn simulate_trace(cfg: &TraceConfig) -> Result<PhotonTrace, TraceError> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let duration = n_bins as f64 * cfg.bin_width;
    let intervals = occupancy_intervals(
        cfg.loading_rate,
        cfg.lifetime,
        duration,
        &mut stream_rng(cfg.seed, STREAM_OCCUPANCY),
    );
    let mut rng = stream_rng(cfg.seed, STREAM_TRACE_COUNTS);
    let mut counts = Vec::with_capacity(n_bins);
    let mut ptr = 0;
    for i in 0..n_bins {
        let start = i as f64 * cfg.bin_width;
        let f = occupied_fraction(&intervals, start, start + cfg.bin_width, &mut ptr);
        let rate = cfg.background_rate + (cfg.atom_rate - cfg.background_rate) * f;
        counts.push(poisson_count(&mut rng, rate * cfg.bin_width));
    }
    Ok(PhotonTrace {
        counts,
        bin_width: cfg.bin_width,
        truth_intervals: Some(intervals),
    })
}

/// Two-threshold hysteresis detector.
///
/// The background level is the mean of the lowest quartile of bins (valid
/// while atoms occupy less than ~75% of the trace). The detector enters
/// "atom present" at the first of `min_bins` consecutive bins above
/// mu + threshold_sigma*sqrt(mu) and exits on the symmetric downward
/// condition. Returned intervals are (start, end) in seconds on bin
/// boundaries.
pub fn detect_events(
    trace: &PhotonTrace,
    threshold_sigma: f64,
    min_bins: usize,
) -> Result<Vec<(f64, f64)>, TraceError> {
    check_positive("threshold_sigma", threshold_sigma)?;
    let min_bins = min_bins.max(1);
    let n = trace.counts.len();
    if n == 0 {
        return Err(TraceError::EmptyTrace {
            duration: 0.0,
            bin_width: trace.bin_width,
        });
    }
    let mut sorted = trace.counts.clone();
    sorted.sort_unstable();
    if sorted[0] == sorted[n - 1] {
        return Err(TraceError::AllBinsIdentical { count: sorted[0] });
    }
    let quartile = (n / 4).max(1);
    let baseline = sorted[..quartile].iter().sum::<u64>() as f64 / quartile as f64;
    let threshold = baseline + threshold_sigma * baseline.sqrt();

    let mut events = Vec::new();
    let mut present = false;
    let mut run = 0usize;
    let mut run_start = 0usize;
    let mut event_start = 0usize;
    for (i, &c) in trace.counts.iter().enumerate() {
        let above = c as f64 > threshold;
        // A run of min_bins consecutive bins on the opposite side of the
        // threshold flips the state, back-dated to the run start.
        if above != present {
            if run == 0 {
                run_start = i;
            }
            run += 1;
            if run >= min_bins {
                if present {
                    events.push((event_start, run_start));
                } else {
                    event_start = run_start;
                }
                present = above;
                run = 0;
            }
        } else {
            run = 0;
        }
    }
    if present {
        events.push((event_start, n));
    }
    Ok(events
        .into_iter()
        .map(|(a, b)| (a as f64 * trace.bin_width, b as f64 * trace.bin_width))
        .collect())
}

/// Precision/recall of detected intervals against truth, by overlap
/// matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub truth_events: usize,
    pub detected_events: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
}

pub fn detection_score(truth: &[(f64, f64)], detected: &[(f64, f64)]) -> DetectionScore {
    let overlaps =
        |a: &(f64, f64), b: &(f64, f64)| a.0.max(b.0) < a.1.min(b.1);
    let matched_truth = truth
        .iter()
        .filter(|t| detected.iter().any(|d| overlaps(t, d)))
        .count();
    let matched_detected = detected
        .iter()
        .filter(|d| truth.iter().any(|t| overlaps(t, d)))
        .count();
    DetectionScore {
        truth_events: truth.len(),
        detected_events: detected.len(),
        matched: matched_truth,
        precision: if detected.is_empty() {
            1.0
        } else {
            matched_detected as f64 / detected.len() as f64
        },
        recall: if truth.is_empty() {
            1.0
        } else {
            matched_truth as f64 / truth.len() as f64
        },
    }
}

/// Aggregated outcome of one waiting time in a survival experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalOutcome {
    /// Waiting time tau (s).
    pub delay: f64,
    pub survived: u64,
    pub trials: u64,
}

impl SurvivalOutcome {
    pub fn fit_point(&self) -> SurvivalPoint {
        SurvivalPoint {
            delay: self.delay,
            probability: self.survived as f64 / self.trials as f64,
            trials: self.trials,
        }
    }
}

/// Hold an atom without cooling for each waiting time and count survivors:
/// a trial survives iff its exponential dwell exceeds tau. Trial k of delay
/// j draws from its own generator stream, so the outcome is independent of
/// evaluation order.
pub fn survival_experiment(
    cfg: &TraceConfig,
    delays: &[f64],
    trials_per_delay: u64,
) -> Result<Vec<SurvivalOutcome>, TraceError> {
    check_positive("lifetime", cfg.lifetime)?;
    if trials_per_delay == 0 {
        return Err(TraceError::ZeroTrials);
    }
    let mut outcomes = Vec::with_capacity(delays.len());
    for (j, &delay) in delays.iter().enumerate() {
        if delay < 0.0 {
            return Err(TraceError::Negative {
                name: "delay",
                value: delay,
            });
        }
        let dwell = Exp::new(1.0 / cfg.lifetime).expect("positive rate");
        let mut survived = 0;
        for k in 0..trials_per_delay {
            let stream = STREAM_SURVIVAL_BASE + j as u64 * trials_per_delay + k;
            let mut rng = stream_rng(cfg.seed, stream);
            if dwell.sample(&mut rng) > delay {
                survived += 1;
            }
        }
        outcomes.push(SurvivalOutcome {
            delay,
            survived,
            trials: trials_per_delay,
        });
    }
    Ok(outcomes)
}

/// The interleaved probe/cool readout: probe-window counts follow the
/// coupled (atom present) or empty (atom absent) cavity transmission at the
/// probe frequency, cooling-window counts follow the fluorescence telegraph
/// rates, and the atom comes and goes by the same loading/lifetime process
/// as [`simulate_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingTraces {
    /// Probe windows, concatenated into one timeline.
    pub probe: PhotonTrace,
    /// Cooling windows, concatenated into one timeline.
    pub cooling: PhotonTrace,
}

/// Simulate the alternating sequence. `probe_rate_scale` converts the
/// dimensionless transmission into a detected count rate (counts/s at unit
/// transmission); the background rate applies to both window types.
pub fn alternating_sequence(
    cfg: &TraceConfig,
    probe_window: f64,
    cool_window: f64,
    sys: &CoupledSystem,
    probe_omega: f64,
    probe_rate_scale: f64,
) -> Result<AlternatingTraces, TraceError> {
    cfg.validate()?;
    check_positive("probe_window", probe_window)?;
    check_positive("cool_window", cool_window)?;
    if probe_rate_scale < 0.0 {
        return Err(TraceError::Negative {
            name: "probe_rate_scale",
            value: probe_rate_scale,
        });
    }
    let probe_bins = (probe_window / cfg.bin_width).round() as usize;
    let cool_bins = (cool_window / cfg.bin_width).round() as usize;
    if probe_bins == 0 {
        return Err(TraceError::WindowTooShort {
            window: probe_window,
            bin_width: cfg.bin_width,
        });
    }
    if cool_bins == 0 {
        return Err(TraceError::WindowTooShort {
            window: cool_window,
            bin_width: cfg.bin_width,
        });
    }

    let n_bins = cfg.n_bins();
    let duration = n_bins as f64 * cfg.bin_width;
    let intervals = occupancy_intervals(
        cfg.loading_rate,
        cfg.lifetime,
        duration,
        &mut stream_rng(cfg.seed, STREAM_OCCUPANCY),
    );

    let transmission_with_atom = sys.transmission(probe_omega);
    let transmission_empty = sys.empty().transmission(probe_omega);

    let mut probe_rng = stream_rng(cfg.seed, STREAM_PROBE_COUNTS);
    let mut cool_rng = stream_rng(cfg.seed, STREAM_COOLING_COUNTS);
    let mut probe_counts = Vec::new();
    let mut cool_counts = Vec::new();
    let mut probe_truth: Vec<(f64, f64)> = Vec::new();
    let mut cool_truth: Vec<(f64, f64)> = Vec::new();
    let mut ptr = 0;
    let cycle = probe_bins + cool_bins;
    for i in 0..n_bins {
        let start = i as f64 * cfg.bin_width;
        let f = occupied_fraction(&intervals, start, start + cfg.bin_width, &mut ptr);
        let probing = i % cycle < probe_bins;
        if probing {
            let transmission =
                f * transmission_with_atom + (1.0 - f) * transmission_empty;
            let rate = cfg.background_rate + probe_rate_scale * transmission;
            probe_counts.push(poisson_count(&mut probe_rng, rate * cfg.bin_width));
            if f > 0.0 {
                push_occupied_segment(&mut probe_truth, probe_counts.len() - 1, f, cfg.bin_width);
            }
        } else {
            let rate = cfg.background_rate + (cfg.atom_rate - cfg.background_rate) * f;
            cool_counts.push(poisson_count(&mut cool_rng, rate * cfg.bin_width));
            if f > 0.0 {
                push_occupied_segment(&mut cool_truth, cool_counts.len() - 1, f, cfg.bin_width);
            }
        }
    }
    Ok(AlternatingTraces {
        probe: PhotonTrace {
            counts: probe_counts,
            bin_width: cfg.bin_width,
            truth_intervals: Some(probe_truth),
        },
        cooling: PhotonTrace {
            counts: cool_counts,
            bin_width: cfg.bin_width,
            truth_intervals: Some(cool_truth),
        },
    })
}

/// Record an occupied bin on a concatenated timeline, merging into the
/// previous interval when contiguous. Partially occupied bins extend the
/// interval by their occupied fraction so the remapped truth keeps the
/// total occupancy time.
fn push_occupied_segment(truth: &mut Vec<(f64, f64)>, bin_index: usize, fraction: f64, bin_width: f64) {
    let start = bin_index as f64 * bin_width;
    let end = start + fraction * bin_width;
    if let Some(last) = truth.last_mut() {
        if (last.1 - start).abs() < 1e-12 * bin_width.max(1.0) {
            last.1 = end;
            return;
        }
    }
    truth.push((start, end));
}

fn check_positive(name: &'static str, value: f64) -> Result<(), TraceError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(TraceError::NonPositive { name, value });
    }
    Ok(())
}
