//! Emission-band summaries and ranked vehicle comparisons.
//!
//! [`summarize_bands`] reduces a PSD to the facts a field engineer quotes:
//! which frequency ranges hold signal, where the strongest component sits,
//! and how strong it is relative to the noise floor. The floor is the median
//! PSD inside the analysis window — scale-free and robust against the signal
//! bins themselves — and a bin counts as signal only when it exceeds the
//! floor by a configurable prominence factor. Neighboring signal runs are
//! merged across small gaps and sliver ranges are dropped so one noisy bin
//! cannot fragment or fake an emission band.
//!
//! [`compare_profiles`] ranks several such summaries by peak strength, the
//! "which vehicle is loudest" table.

use crate::numfmt;
use crate::spectral::PowerSpectralDensity;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Merge signal runs separated by at most this many non-signal bins.
pub const GAP_CLOSURE_BINS: usize = 3;

/// Discard ranges narrower than this after gap closure.
pub const MIN_RANGE_WIDTH_HZ: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("analysis window [{lo_hz}, {hi_hz}] Hz outside the PSD range [0, {max_hz}] Hz")]
    WindowOutOfRange { lo_hz: f64, hi_hz: f64, max_hz: f64 },
    #[error("prominence factor {0} must exceed 1")]
    InvalidProminence(f64),
    #[error("no summaries to compare")]
    EmptyInput,
}

/// Closed-open frequency interval covering whole PSD bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqRange {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FreqRange {
    pub fn width_hz(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.lo_hz && freq_hz < self.hi_hz
    }
}

/// What a PSD says inside one analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    /// Signal ranges, disjoint and ascending; empty when nothing clears the
    /// prominence criterion.
    pub ranges: Vec<FreqRange>,
    /// Frequency of the largest PSD bin in the window, signal or not.
    pub strongest_freq_hz: f64,
    pub strongest_psd: f64,
    /// Median PSD across the window.
    pub noise_floor: f64,
    pub window_lo_hz: f64,
    pub window_hi_hz: f64,
}

impl BandSummary {
    pub fn total_range_width_hz(&self) -> f64 {
        self.ranges.iter().map(FreqRange::width_hz).sum()
    }

    pub fn to_json(&self) -> String {
        numfmt::to_json(self)
    }
}

/// Summarizes the PSD bins inside `[analysis_lo, analysis_hi]` Hz.
///
/// A bin is signal when its PSD strictly exceeds `prominence_factor` times
/// the window median. Signal runs closed over gaps of at most
/// [`GAP_CLOSURE_BINS`] bins become ranges spanning whole bin cells
/// (resolution-wide each); ranges narrower than [`MIN_RANGE_WIDTH_HZ`] are
/// dropped. A quiet window is not an error: it yields empty ranges with the
/// floor still reported.
pub fn summarize_bands(
    psd: &PowerSpectralDensity,
    analysis_lo: f64,
    analysis_hi: f64,
    prominence_factor: f64,
) -> Result<BandSummary, ReportError> {
    if !(prominence_factor.is_finite() && prominence_factor > 1.0) {
        return Err(ReportError::InvalidProminence(prominence_factor));
    }
    let max_hz = psd.max_freq_hz();
    if !(analysis_lo.is_finite()
        && analysis_hi.is_finite()
        && analysis_lo >= 0.0
        && analysis_lo < analysis_hi
        && analysis_hi <= max_hz)
    {
        return Err(ReportError::WindowOutOfRange {
            lo_hz: analysis_lo,
            hi_hz: analysis_hi,
            max_hz,
        });
    }

    let window: Vec<usize> = (0..psd.n_bins())
        .filter(|&k| psd.bin_freqs_hz[k] >= analysis_lo && psd.bin_freqs_hz[k] <= analysis_hi)
        .collect();
    if window.is_empty() {
        return Err(ReportError::WindowOutOfRange {
            lo_hz: analysis_lo,
            hi_hz: analysis_hi,
            max_hz,
        });
    }

    let noise_floor = median(window.iter().map(|&k| psd.psd[k]));
    let strongest = window
        .iter()
        .copied()
        .max_by(|&a, &b| psd.psd[a].total_cmp(&psd.psd[b]))
        .expect("window checked non-empty");

    // Signal mask over the window, then runs with small gaps closed.
    let threshold = prominence_factor * noise_floor;
    let mask: Vec<bool> = window.iter().map(|&k| psd.psd[k] > threshold).collect();
    let mut ranges = Vec::new();
    let mut run: Option<(usize, usize)> = None; // window-relative [first, last]
    for (i, &on) in mask.iter().enumerate() {
        if !on {
            continue;
        }
        run = match run {
            Some((first, last)) if i - last <= GAP_CLOSURE_BINS + 1 => Some((first, i)),
            Some((first, last)) => {
                push_range(&mut ranges, psd, &window, first, last, analysis_hi);
                Some((i, i))
            }
            None => Some((i, i)),
        };
    }
    if let Some((first, last)) = run {
        push_range(&mut ranges, psd, &window, first, last, analysis_hi);
    }

    Ok(BandSummary {
        ranges,
        strongest_freq_hz: psd.bin_freqs_hz[strongest],
        strongest_psd: psd.psd[strongest],
        noise_floor,
        window_lo_hz: analysis_lo,
        window_hi_hz: analysis_hi,
    })
}

fn push_range(
    ranges: &mut Vec<FreqRange>,
    psd: &PowerSpectralDensity,
    window: &[usize],
    first: usize,
    last: usize,
    analysis_hi: f64,
) {
    let lo_hz = psd.bin_freqs_hz[window[first]];
    let hi_hz = (psd.bin_freqs_hz[window[last]] + psd.resolution_hz).min(analysis_hi.max(lo_hz));
    let range = FreqRange { lo_hz, hi_hz };
    if range.width_hz() >= MIN_RANGE_WIDTH_HZ {
        ranges.push(range);
    }
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Comparison tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub ranges: Vec<FreqRange>,
    pub strongest_freq_hz: f64,
    pub strongest_psd: f64,
    pub total_range_width_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        numfmt::to_json(self)
    }
}

/// Ranks summaries by peak strength, strongest first; equal peaks fall back
/// to label order so the result is deterministic.
pub fn compare_profiles(
    summaries: &[(String, BandSummary)],
) -> Result<ComparisonTable, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut rows: Vec<ComparisonRow> = summaries
        .iter()
        .map(|(label, s)| ComparisonRow {
            label: label.clone(),
            ranges: s.ranges.clone(),
            strongest_freq_hz: s.strongest_freq_hz,
            strongest_psd: s.strongest_psd,
            total_range_width_hz: s.total_range_width_hz(),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.strongest_psd
            .total_cmp(&a.strongest_psd)
            .then_with(|| a.label.cmp(&b.label))
    });
    Ok(ComparisonTable { rows })
}

// ---------------------------------------------------------------------------
// Text rendering
// ---------------------------------------------------------------------------

/// kHz with at most one decimal: 16000 -> "16", 16500 -> "16.5".
pub fn format_khz(freq_hz: f64) -> String {
    let text = format!("{:.1}", freq_hz / 1_000.0);
    text.strip_suffix(".0").unwrap_or(&text).to_string()
}

/// "16 - 30, 49 - 54" style rendering of range lists.
pub fn ranges_to_text(ranges: &[FreqRange]) -> String {
    if ranges.is_empty() {
        return "none (no signal above the noise floor)".to_string();
    }
    ranges
        .iter()
        .map(|r| format!("{} - {}", format_khz(r.lo_hz), format_khz(r.hi_hz)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn summary_to_text(summary: &BandSummary) -> String {
    format!(
        "analysis window : {} - {} kHz\n\
         noise floor     : {}\n\
         signal ranges   : {}\n\
         strongest       : {} kHz at {}\n",
        format_khz(summary.window_lo_hz),
        format_khz(summary.window_hi_hz),
        numfmt::sig9(summary.noise_floor),
        ranges_to_text(&summary.ranges),
        format_khz(summary.strongest_freq_hz),
        numfmt::sig9(summary.strongest_psd),
    )
}

/// Aligned-column comparison, strongest row first.
pub fn table_to_text(table: &ComparisonTable) -> String {
    let headers = [
        "label",
        "ranges (kHz)",
        "strongest (kHz)",
        "peak psd",
        "total width (kHz)",
    ];
    let mut cells: Vec<[String; 5]> = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        cells.push([
            row.label.clone(),
            ranges_to_text(&row.ranges),
            format_khz(row.strongest_freq_hz),
            numfmt::sig9(row.strongest_psd),
            format_khz(row.total_range_width_hz),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let render = |row: &[String]| {
        row.iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let header_row: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut out = render(&header_row);
    out.push('\n');
    for row in &cells {
        out.push_str(&render(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{welch_psd, WindowKind};
    use crate::testutil::white_noise;

    /// Flat PSD on a uniform grid starting at 0 Hz.
    fn flat_psd(resolution_hz: f64, n_bins: usize, base: f64) -> PowerSpectralDensity {
        PowerSpectralDensity {
            psd: vec![base; n_bins],
            bin_freqs_hz: (0..n_bins).map(|k| k as f64 * resolution_hz).collect(),
            resolution_hz,
            n_segments: 1,
        }
    }

    #[test]
    fn injected_delta_becomes_one_range_around_it() {
        // 187.5 Hz bins up to 60 kHz; bin 133 sits at 24937.5 Hz.
        let mut psd = flat_psd(187.5, 321, 1e-9);
        psd.psd[133] = 1e-7;
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert_eq!(s.ranges.len(), 1);
        assert!(s.ranges[0].contains(25_000.0));
        assert_eq!(s.strongest_freq_hz, 24_937.5);
        assert_eq!(s.strongest_psd, 1e-7);
        assert_eq!(s.noise_floor, 1e-9);
    }

    #[test]
    fn flat_psd_yields_no_ranges() {
        let psd = flat_psd(187.5, 321, 1e-9);
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert!(s.ranges.is_empty());
        assert_eq!(s.noise_floor, 1e-9);
        assert_eq!(s.strongest_psd, 1e-9);
        assert!(summary_to_text(&s).contains("no signal"));
    }

    #[test]
    fn white_noise_psd_yields_no_ranges() {
        let clip = white_noise(192_000, 2.0, 0.1, 17);
        let psd = welch_psd(&clip, 16_384, 0.5, WindowKind::Hann).unwrap();
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert!(s.ranges.is_empty(), "ranges {:?}", s.ranges);
    }

    #[test]
    fn small_gaps_merge_and_large_gaps_split() {
        // Two 3-bin clusters split by a 3-bin gap: one range.
        let mut psd = flat_psd(187.5, 321, 1e-9);
        for k in [100, 101, 102, 106, 107, 108] {
            psd.psd[k] = 5e-8;
        }
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert_eq!(s.ranges.len(), 1);
        assert_eq!(s.ranges[0].lo_hz, 100.0 * 187.5);
        assert_eq!(s.ranges[0].hi_hz, 109.0 * 187.5);

        // Widen the gap to 4 bins: two ranges.
        let mut psd = flat_psd(187.5, 321, 1e-9);
        for k in [100, 101, 102, 107, 108, 109] {
            psd.psd[k] = 5e-8;
        }
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert_eq!(s.ranges.len(), 2);
        assert!(s.ranges[0].hi_hz < s.ranges[1].lo_hz); // disjoint, ascending
    }

    #[test]
    fn lone_fine_resolution_spike_is_dropped_but_still_strongest() {
        // 11.72 Hz bins as with a 16384-point estimate at 192 kHz: a single
        // hot bin is narrower than the minimum range width.
        let res = 11.71875;
        let mut psd = flat_psd(res, 8_193, 1e-9);
        let spike = (30_000.0 / res).round() as usize;
        psd.psd[spike] = 1e-6;
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert!(s.ranges.is_empty());
        assert_eq!(s.strongest_psd, 1e-6);
        assert_eq!(s.strongest_freq_hz, psd.bin_freqs_hz[spike]);

        // A 9-bin cluster (105 Hz wide) survives.
        for k in spike..spike + 9 {
            psd.psd[k] = 1e-6;
        }
        let s = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert_eq!(s.ranges.len(), 1);
        assert!((s.ranges[0].width_hz() - 9.0 * res).abs() < 1e-9);
    }

    #[test]
    fn summary_is_scale_invariant_up_to_the_psd_values() {
        let mut psd = flat_psd(187.5, 321, 1e-9);
        for k in [100, 101, 102, 200, 201, 202] {
            psd.psd[k] = 5e-8;
        }
        let a = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        for v in &mut psd.psd {
            *v *= 3.7e4;
        }
        let b = summarize_bands(&psd, 15_000.0, 60_000.0, 10.0).unwrap();
        assert_eq!(a.ranges, b.ranges);
        assert_eq!(a.strongest_freq_hz, b.strongest_freq_hz);
        assert!((b.strongest_psd / a.strongest_psd - 3.7e4).abs() < 1e-6);
        assert!((b.noise_floor / a.noise_floor - 3.7e4).abs() < 1e-6);
    }

    #[test]
    fn even_sized_windows_use_the_middle_pair_median() {
        let mut psd = flat_psd(100.0, 10, 0.0);
        psd.psd = vec![1.0, 2.0, 3.0, 100.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        // Window covering bins 0..=3: sorted [1, 2, 3, 100], median 2.5.
        let s = summarize_bands(&psd, 0.0, 300.0, 10.0).unwrap();
        assert_eq!(s.noise_floor, 2.5);
    }

    #[test]
    fn window_and_prominence_validation() {
        let psd = flat_psd(187.5, 321, 1e-9);
        assert!(matches!(
            summarize_bands(&psd, -1.0, 60_000.0, 10.0),
            Err(ReportError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            summarize_bands(&psd, 15_000.0, 90_000.0, 10.0),
            Err(ReportError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            summarize_bands(&psd, 30_000.0, 15_000.0, 10.0),
            Err(ReportError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            summarize_bands(&psd, 15_000.0, 60_000.0, 1.0),
            Err(ReportError::InvalidProminence(_))
        ));
    }

    #[test]
    fn comparison_sorts_by_peak_and_breaks_ties_by_label() {
        let summary = |peak: f64| BandSummary {
            ranges: vec![FreqRange {
                lo_hz: 16_000.0,
                hi_hz: 30_000.0,
            }],
            strongest_freq_hz: 20_000.0,
            strongest_psd: peak,
            noise_floor: 1e-9,
            window_lo_hz: 15_000.0,
            window_hi_hz: 60_000.0,
        };
        let table = compare_profiles(&[
            ("toyota".to_string(), summary(3e-9)),
            ("nissan".to_string(), summary(2e-7)),
            ("bmw".to_string(), summary(2e-7)),
        ])
        .unwrap();
        let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["bmw", "nissan", "toyota"]); // tie: bmw < nissan
        assert_eq!(table.rows[0].total_range_width_hz, 14_000.0);

        assert!(matches!(
            compare_profiles(&[]),
            Err(ReportError::EmptyInput)
        ));
        let single = compare_profiles(&[("solo".to_string(), summary(1e-8))]).unwrap();
        assert_eq!(single.rows.len(), 1);
    }

    #[test]
    fn khz_rendering_matches_field_conventions() {
        assert_eq!(format_khz(16_000.0), "16");
        assert_eq!(format_khz(16_500.0), "16.5");
        assert_eq!(format_khz(959.0), "1");
        let ranges = vec![
            FreqRange {
                lo_hz: 16_000.0,
                hi_hz: 30_000.0,
            },
            FreqRange {
                lo_hz: 49_000.0,
                hi_hz: 54_000.0,
            },
        ];
        assert_eq!(ranges_to_text(&ranges), "16 - 30, 49 - 54");
    }

    #[test]
    fn table_text_is_aligned_and_ordered() {
        let summary = |lo: f64, hi: f64, peak: f64| BandSummary {
            ranges: vec![FreqRange { lo_hz: lo, hi_hz: hi }],
            strongest_freq_hz: 20_000.0,
            strongest_psd: peak,
            noise_floor: 1e-9,
            window_lo_hz: 15_000.0,
            window_hi_hz: 60_000.0,
        };
        let table = compare_profiles(&[
            ("toyota".to_string(), summary(15_000.0, 30_000.0, 3e-9)),
            ("nissan".to_string(), summary(14_000.0, 35_000.0, 2e-7)),
        ])
        .unwrap();
        let text = table_to_text(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("label"));
        assert!(lines[1].starts_with("nissan"));
        assert!(lines[2].starts_with("toyota"));
        assert!(lines[1].contains("14 - 35"));

        let json = table.to_json();
        assert!(json.contains("\"label\":\"nissan\""));
        assert!(json.contains("2.000000000e-7"));
    }
}
