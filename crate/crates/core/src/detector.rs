//! Segment-power event detection.
//!
//! The pipeline quantizes a (bandpass-filtered) clip into short
//! non-overlapping segments, computes each segment's mean-square power
//! P = (1/N) * sum(x[n]^2), compares it against a fixed threshold, and then
//! votes: a segment counts as active if some window of W consecutive
//! segments containing it holds at least k threshold exceedances. Maximal
//! runs of active segments become events, and events separated by short
//! gaps are merged. The voting step is what makes the detector robust to
//! single-segment noise spikes while still firing on brief tonal bursts.
//!
//! Defaults: 0.5 ms segments, threshold 3e-4 (full-scale squared units),
//! 5 votes out of 1000 segments (half a second), 2.5 s merge gap.

use crate::clip::AudioClip;
use crate::filter::{apply_filter, FilterError, FirFilter};
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("segment of {segment_ms} ms is shorter than one sample at {fs} Hz")]
    SegmentTooShort { segment_ms: f64, fs: u32 },
    #[error("clip holds no samples")]
    EmptyClip,
    #[error("decision sequence is empty")]
    EmptyInput,
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Segment length in milliseconds.
    pub segment_ms: f64,
    /// Power threshold in full-scale-squared units; exceedance is strict (>).
    pub threshold: f64,
    /// Votes required within one window for its segments to be active.
    pub votes_required: usize,
    /// Window length in segments.
    pub vote_window: usize,
    /// Events closer than this (end to start) are merged.
    pub merge_gap_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            segment_ms: 0.5,
            threshold: 3e-4,
            votes_required: 5,
            vote_window: 1000,
            merge_gap_s: 2.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.segment_ms > 0.0) {
            return Err(DetectorError::InvalidConfig(
                "segment_ms must be positive".into(),
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(DetectorError::InvalidConfig(
                "threshold must be non-negative".into(),
            ));
        }
        if self.votes_required == 0 || self.vote_window == 0 {
            return Err(DetectorError::InvalidConfig(
                "votes_required and vote_window must be at least 1".into(),
            ));
        }
        if self.votes_required > self.vote_window {
            return Err(DetectorError::InvalidConfig(format!(
                "votes_required {} exceeds vote_window {}",
                self.votes_required, self.vote_window
            )));
        }
        if !(self.merge_gap_s >= 0.0) {
            return Err(DetectorError::InvalidConfig(
                "merge_gap_s must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Mean-square power of consecutive non-overlapping segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPowerSeries {
    pub powers: Vec<f64>,
    /// Realized segment duration: round(segment_ms * fs / 1000) samples.
    pub segment_duration_s: f64,
    /// Clip-timeline time of the first segment's first sample.
    pub start_time_s: f64,
}

impl SegmentPowerSeries {
    /// Start time of segment i.
    pub fn segment_time_s(&self, i: usize) -> f64 {
        self.start_time_s + i as f64 * self.segment_duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub start_s: f64,
    pub end_s: f64,
}

/// Splits the clip into round(segment_ms*fs/1000)-sample segments and takes
/// each segment's mean square. A trailing partial segment is dropped.
pub fn segment_power(
    clip: &AudioClip,
    segment_ms: f64,
) -> Result<SegmentPowerSeries, DetectorError> {
    if clip.is_empty() {
        return Err(DetectorError::EmptyClip);
    }
    let fs = clip.sample_rate_hz;
    let n = (segment_ms * fs as f64 / 1000.0).round() as usize;
    if n == 0 || !segment_ms.is_finite() || segment_ms <= 0.0 {
        return Err(DetectorError::SegmentTooShort { segment_ms, fs });
    }
    let n_segments = clip.len() / n;
    let mut powers = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let block = &clip.samples[s * n..(s + 1) * n];
        let sum: f64 = block.iter().map(|x| x * x).sum();
        powers.push(sum / n as f64);
    }
    Ok(SegmentPowerSeries {
        powers,
        segment_duration_s: n as f64 / fs as f64,
        start_time_s: 0.0,
    })
}

/// Strict threshold exceedance per segment.
pub fn threshold_decisions(series: &SegmentPowerSeries, threshold: f64) -> Vec<bool> {
    series.powers.iter().map(|&p| p > threshold).collect()
}

/// Vote-based event extraction.
///
/// Segment i is active iff some window of W consecutive segments containing
/// i holds at least `votes_required` true decisions; maximal active runs
/// become events, then events with gaps <= merge_gap_s are merged. For
/// records shorter than W the window clips to the record length, so short
/// clips can still vote.
pub fn detect_events(
    decisions: &[bool],
    segment_duration_s: f64,
    start_time_s: f64,
    config: &DetectorConfig,
) -> Result<Vec<DetectionEvent>, DetectorError> {
    config.validate()?;
    if decisions.is_empty() {
        return Err(DetectorError::EmptyInput);
    }
    let n = decisions.len();
    let w = config.vote_window.min(n);
    let k = config.votes_required;
    if k > w {
        return Ok(Vec::new()); // a clipped window cannot hold enough votes
    }

    // Sliding count over all length-w windows; the active set is the union
    // of qualifying windows, accumulated as [start, end) runs.
    let mut events: Vec<DetectionEvent> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let mut count = decisions[..w].iter().filter(|&&d| d).count();
    for s in 0..=(n - w) {
        if s > 0 {
            count -= decisions[s - 1] as usize;
            count += decisions[s + w - 1] as usize;
        }
        if count >= k {
            run = match run {
                Some((a, b)) if s <= b => Some((a, s + w)),
                Some((a, b)) => {
                    events.push(run_to_event(a, b, segment_duration_s, start_time_s));
                    Some((s, s + w))
                }
                None => Some((s, s + w)),
            };
        }
    }
    if let Some((a, b)) = run {
        events.push(run_to_event(a, b, segment_duration_s, start_time_s));
    }

    Ok(merge_events(events, config.merge_gap_s))
}

fn run_to_event(a: usize, b: usize, dur: f64, start: f64) -> DetectionEvent {
    DetectionEvent {
        start_s: start + a as f64 * dur,
        end_s: start + b as f64 * dur,
    }
}

fn merge_events(events: Vec<DetectionEvent>, merge_gap_s: f64) -> Vec<DetectionEvent> {
    let mut merged: Vec<DetectionEvent> = Vec::with_capacity(events.len());
    for e in events {
        match merged.last_mut() {
            Some(prev) if e.start_s - prev.end_s <= merge_gap_s => {
                prev.end_s = prev.end_s.max(e.end_s);
            }
            _ => merged.push(e),
        }
    }
    merged
}

/// Full detection result with the intermediate traces kept for export.
#[derive(Debug, Clone)]
pub struct DetectorTrace {
    pub series: SegmentPowerSeries,
    pub decisions: Vec<bool>,
    pub events: Vec<DetectionEvent>,
}

/// Bandpass, segment, threshold, vote. Event times refer to the original
/// clip's timeline: the filter's valid-convolution output starts
/// (taps-1)/2 samples into the clip, and that group delay is carried into
/// the power series' start time.
pub fn run_detector(
    clip: &AudioClip,
    bandpass: &FirFilter,
    config: &DetectorConfig,
) -> Result<Vec<DetectionEvent>, DetectorError> {
    Ok(run_detector_trace(clip, bandpass, config)?.events)
}

/// [`run_detector`], returning power and decision traces as well.
pub fn run_detector_trace(
    clip: &AudioClip,
    bandpass: &FirFilter,
    config: &DetectorConfig,
) -> Result<DetectorTrace, DetectorError> {
    config.validate()?;
    let filtered = apply_filter(bandpass, clip)?;
    let mut series = segment_power(&filtered, config.segment_ms)?;
    series.start_time_s =
        bandpass.leading_trim_samples() as f64 / clip.sample_rate_hz as f64;
    let decisions = threshold_decisions(&series, config.threshold);
    let events = detect_events(
        &decisions,
        series.segment_duration_s,
        series.start_time_s,
        config,
    )?;
    Ok(DetectorTrace {
        series,
        decisions,
        events,
    })
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// `[{"start_s": ..., "end_s": ...}, ...]`
pub fn events_to_json(events: &[DetectionEvent]) -> String {
    crate::numfmt::to_json(&events)
}

/// Header `start_s,end_s`, one row per event.
pub fn events_to_csv(events: &[DetectionEvent], out: &mut dyn Write) -> io::Result<()> {
    out.write_all(b"start_s,end_s\n")?;
    for e in events {
        writeln!(
            out,
            "{},{}",
            crate::numfmt::sig9(e.start_s),
            crate::numfmt::sig9(e.end_s)
        )?;
    }
    Ok(())
}

/// Header `time_s,power`, one row per segment (segment start times).
pub fn power_series_to_csv(series: &SegmentPowerSeries, out: &mut dyn Write) -> io::Result<()> {
    out.write_all(b"time_s,power\n")?;
    for (i, p) in series.powers.iter().enumerate() {
        writeln!(
            out,
            "{},{}",
            crate::numfmt::sig9(series.segment_time_s(i)),
            crate::numfmt::sig9(*p)
        )?;
    }
    Ok(())
}

/// Header `time_s,exceeds`, decisions as 0/1.
pub fn decisions_to_csv(
    decisions: &[bool],
    series: &SegmentPowerSeries,
    out: &mut dyn Write,
) -> io::Result<()> {
    out.write_all(b"time_s,exceeds\n")?;
    for (i, d) in decisions.iter().enumerate() {
        writeln!(
            out,
            "{},{}",
            crate::numfmt::sig9(series.segment_time_s(i)),
            u8::from(*d)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::design_bandpass;
    use crate::spectral::WindowKind;
    use crate::testutil::{tone, white_noise};
    use proptest::prelude::*;

    fn series_of(powers: Vec<f64>) -> SegmentPowerSeries {
        SegmentPowerSeries {
            powers,
            segment_duration_s: 0.0005,
            start_time_s: 0.0,
        }
    }

    /// Naive reference: enumerate every window, mark covered segments, scan
    /// runs, merge by gap. Kept deliberately independent of the
    /// implementation.
    fn oracle_events(
        decisions: &[bool],
        dur: f64,
        start: f64,
        config: &DetectorConfig,
    ) -> Vec<DetectionEvent> {
        let n = decisions.len();
        let w = config.vote_window.min(n);
        let mut active = vec![false; n];
        if w >= config.votes_required {
            for s in 0..=(n - w) {
                let votes = decisions[s..s + w].iter().filter(|&&d| d).count();
                if votes >= config.votes_required {
                    for a in active.iter_mut().skip(s).take(w) {
                        *a = true;
                    }
                }
            }
        }
        let mut raw: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < n {
            if active[i] {
                let begin = i;
                while i < n && active[i] {
                    i += 1;
                }
                raw.push((begin, i));
            } else {
                i += 1;
            }
        }
        let mut events: Vec<DetectionEvent> = Vec::new();
        for (a, b) in raw {
            let e = DetectionEvent {
                start_s: start + a as f64 * dur,
                end_s: start + b as f64 * dur,
            };
            if let Some(prev) = events.last_mut() {
                if e.start_s - prev.end_s <= config.merge_gap_s {
                    prev.end_s = e.end_s;
                    continue;
                }
            }
            events.push(e);
        }
        events
    }

    fn assert_same_events(a: &[DetectionEvent], b: &[DetectionEvent]) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x.start_s - y.start_s).abs() < 1e-12, "{a:?} vs {b:?}");
            assert!((x.end_s - y.end_s).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn constant_block_power_is_square_of_value() {
        let clip = AudioClip::new(vec![0.5; 960], 192_000).unwrap();
        let series = segment_power(&clip, 0.5).unwrap();
        assert_eq!(series.powers.len(), 10);
        assert!(series.powers.iter().all(|&p| p == 0.25));
        assert_eq!(series.segment_duration_s, 96.0 / 192_000.0);
    }

    #[test]
    fn whole_period_sine_power_is_half() {
        // 96 samples hold exactly 10 cycles of 20 kHz at 192 kHz.
        let clip = tone(192_000, 20_000.0, 1.0, 0.01);
        let series = segment_power(&clip, 0.5).unwrap();
        for p in &series.powers {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn trailing_partial_segment_is_dropped() {
        let clip = AudioClip::new(vec![1.0; 250], 192_000).unwrap();
        let series = segment_power(&clip, 0.5).unwrap();
        assert_eq!(series.powers.len(), 2); // 250 = 2*96 + 58
    }

    #[test]
    fn segment_powers_reconstruct_global_mean_square() {
        let clip = white_noise(192_000, 0.33, 0.3, 9);
        let series = segment_power(&clip, 0.5).unwrap();
        let n = 96;
        let covered = series.powers.len() * n;
        let direct: f64 = clip.samples[..covered].iter().map(|x| x * x).sum();
        let from_segments: f64 = series.powers.iter().sum::<f64>() * n as f64;
        assert!((from_segments - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn segment_shorter_than_one_sample_is_rejected() {
        let clip = AudioClip::new(vec![0.0; 100], 1000).unwrap();
        assert!(matches!(
            segment_power(&clip, 0.1),
            Err(DetectorError::SegmentTooShort { .. })
        ));
        let empty = AudioClip::new(vec![], 1000).unwrap();
        assert!(matches!(
            segment_power(&empty, 0.5),
            Err(DetectorError::EmptyClip)
        ));
    }

    #[test]
    fn threshold_is_strictly_greater() {
        let series = series_of(vec![2e-4, 3e-4, 3.1e-4]);
        assert_eq!(threshold_decisions(&series, 3e-4), vec![false, false, true]);
    }

    #[test]
    fn threshold_scales_with_power() {
        let series = series_of(vec![1e-5, 2e-4, 5e-4, 3e-3]);
        let doubled = series_of(series.powers.iter().map(|p| p * 2.0).collect());
        assert_eq!(
            threshold_decisions(&series, 3e-4),
            threshold_decisions(&doubled, 6e-4)
        );
    }

    #[test]
    fn all_quiet_yields_no_events() {
        let decisions = vec![false; 5000];
        let events =
            detect_events(&decisions, 0.0005, 0.0, &DetectorConfig::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn clustered_votes_yield_exactly_one_event() {
        let mut decisions = vec![false; 3000];
        for d in decisions.iter_mut().skip(1000).take(5) {
            *d = true;
        }
        let config = DetectorConfig::default();
        let events = detect_events(&decisions, 0.0005, 0.0, &config).unwrap();
        assert_eq!(events.len(), 1);
        // Qualifying windows run from start 5 through 1000; the active union
        // is [5, 2000).
        assert!((events[0].start_s - 5.0 * 0.0005).abs() < 1e-12);
        assert!((events[0].end_s - 2000.0 * 0.0005).abs() < 1e-12);
    }

    #[test]
    fn four_votes_are_not_enough_by_default() {
        let mut decisions = vec![false; 3000];
        for d in decisions.iter_mut().skip(1000).take(4) {
            *d = true;
        }
        let events =
            detect_events(&decisions, 0.0005, 0.0, &DetectorConfig::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn records_shorter_than_the_window_still_vote() {
        let mut decisions = vec![false; 120];
        for d in decisions.iter_mut().skip(40).take(5) {
            *d = true;
        }
        let config = DetectorConfig::default(); // W = 1000 clips to 120
        let events = detect_events(&decisions, 0.0005, 0.0, &config).unwrap();
        assert_eq!(events.len(), 1);
        assert_same_events(&events, &oracle_events(&decisions, 0.0005, 0.0, &config));
    }

    #[test]
    fn merged_events_keep_wide_gaps_apart() {
        // The vote-window union pads each 5-true cluster out to ~1000
        // segments, so clusters c segments apart leave events separated by
        // (c - 1995) segments: 4000 -> 1.0 s (merges at the default 2.5 s),
        // 8000 -> 3.0 s (stays split).
        let dur = 0.0005;
        let config = DetectorConfig::default();
        for (gap_segments, expected) in [(4000usize, 1usize), (8000, 2)] {
            let mut decisions = vec![false; 9000 + gap_segments];
            for d in decisions.iter_mut().skip(100).take(5) {
                *d = true;
            }
            for d in decisions.iter_mut().skip(100 + gap_segments).take(5) {
                *d = true;
            }
            let events = detect_events(&decisions, dur, 0.0, &config).unwrap();
            assert_eq!(events.len(), expected, "gap {gap_segments}");
            for pair in events.windows(2) {
                assert!(pair[1].start_s - pair[0].end_s > config.merge_gap_s);
            }
            assert_same_events(&events, &oracle_events(&decisions, dur, 0.0, &config));
        }
    }

    #[test]
    fn empty_decisions_are_an_error() {
        assert!(matches!(
            detect_events(&[], 0.0005, 0.0, &DetectorConfig::default()),
            Err(DetectorError::EmptyInput)
        ));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let d = vec![true; 10];
        for config in [
            DetectorConfig {
                segment_ms: 0.0,
                ..DetectorConfig::default()
            },
            DetectorConfig {
                votes_required: 0,
                ..DetectorConfig::default()
            },
            DetectorConfig {
                vote_window: 0,
                ..DetectorConfig::default()
            },
            DetectorConfig {
                votes_required: 20,
                vote_window: 10,
                ..DetectorConfig::default()
            },
            DetectorConfig {
                merge_gap_s: -1.0,
                ..DetectorConfig::default()
            },
        ] {
            assert!(
                matches!(
                    detect_events(&d, 0.0005, 0.0, &config),
                    Err(DetectorError::InvalidConfig(_))
                ),
                "{config:?}"
            );
        }
    }

    #[test]
    fn run_detector_times_refer_to_the_original_clip() {
        // Passband tone well above threshold: every segment is active, so the
        // single event must start exactly at the filter's leading trim.
        let clip = tone(192_000, 20_000.0, 0.1, 0.5);
        let bp = design_bandpass(16_000.0, 60_000.0, 512, 192_000.0, WindowKind::Hann).unwrap();
        let config = DetectorConfig::default();
        let trace = run_detector_trace(&clip, &bp, &config).unwrap();
        assert_eq!(trace.events.len(), 1);
        let lead = 256.0 / 192_000.0;
        assert!((trace.series.start_time_s - lead).abs() < 1e-15);
        assert!((trace.events[0].start_s - lead).abs() < 1e-12);
        assert!(trace.decisions.iter().all(|&d| d));
    }

    #[test]
    fn event_json_shape_is_stable() {
        let events = vec![DetectionEvent {
            start_s: 4.16,
            end_s: 7.52,
        }];
        let json = events_to_json(&events);
        assert_eq!(
            json,
            "[{\"start_s\":4.160000000e0,\"end_s\":7.520000000e0}]"
        );
        assert_eq!(events_to_json(&[]), "[]");
        let mut csv = Vec::new();
        events_to_csv(&events, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("start_s,end_s\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn trace_csv_exports_align() {
        let clip = tone(192_000, 20_000.0, 0.1, 0.05);
        let bp = design_bandpass(16_000.0, 60_000.0, 512, 192_000.0, WindowKind::Hann).unwrap();
        let trace = run_detector_trace(&clip, &bp, &DetectorConfig::default()).unwrap();
        let mut p = Vec::new();
        power_series_to_csv(&trace.series, &mut p).unwrap();
        let mut d = Vec::new();
        decisions_to_csv(&trace.decisions, &trace.series, &mut d).unwrap();
        let p = String::from_utf8(p).unwrap();
        let d = String::from_utf8(d).unwrap();
        assert_eq!(p.lines().count(), d.lines().count());
        let first_power_time: f64 = p
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!((first_power_time - 256.0 / 192_000.0).abs() < 1e-9);
    }

    proptest! {
        /// The sliding implementation matches the window-enumerating oracle
        /// on arbitrary decision sequences and configs.
        #[test]
        fn matches_brute_force_oracle(
            decisions in proptest::collection::vec(proptest::bool::weighted(0.15), 1..400),
            w in 1usize..60,
            k in 1usize..8,
            gap_segments in 0usize..50,
        ) {
            prop_assume!(k <= w);
            let config = DetectorConfig {
                segment_ms: 0.5,
                threshold: 3e-4,
                votes_required: k,
                vote_window: w,
                merge_gap_s: gap_segments as f64 * 0.0005,
            };
            let got = detect_events(&decisions, 0.0005, 0.0, &config).unwrap();
            let want = oracle_events(&decisions, 0.0005, 0.0, &config);
            prop_assert_eq!(got.len(), want.len(), "decisions {:?}", decisions);
            for (x, y) in got.iter().zip(&want) {
                prop_assert!((x.start_s - y.start_s).abs() < 1e-12);
                prop_assert!((x.end_s - y.end_s).abs() < 1e-12);
            }
        }

        /// Turning one decision true never removes covered time.
        #[test]
        fn extra_votes_only_grow_coverage(
            mut decisions in proptest::collection::vec(proptest::bool::weighted(0.1), 2..300),
            flip in 0usize..300,
            w in 2usize..40,
            k in 1usize..6,
        ) {
            prop_assume!(k <= w);
            let config = DetectorConfig {
                segment_ms: 0.5,
                threshold: 3e-4,
                votes_required: k,
                vote_window: w,
                merge_gap_s: 0.01,
            };
            let before = detect_events(&decisions, 0.0005, 0.0, &config).unwrap();
            let idx = flip % decisions.len();
            decisions[idx] = true;
            let after = detect_events(&decisions, 0.0005, 0.0, &config).unwrap();
            for e in &before {
                prop_assert!(
                    after.iter().any(|a| a.start_s <= e.start_s + 1e-12
                        && e.end_s <= a.end_s + 1e-12),
                    "event {:?} lost after flipping {}: {:?} -> {:?}",
                    e, idx, before, after
                );
            }
        }
    }
}
