//! Detection of electric and hybrid vehicles from their ultrasonic acoustic
//! emissions.
//!
//! Electric drivetrains radiate narrowband sound between roughly 15 and
//! 60 kHz: power-inverter switching (and its magnetostrictive coupling into
//! the motor stack) produces stable tones far above both human hearing and
//! ordinary traffic noise, which is concentrated below a few kHz. That makes
//! the ultrasonic band a clean place to look for approaching EVs, e.g. as a
//! pedestrian-safety sensor.
//!
//! The crate provides the full pipeline plus a synthetic test bench:
//!
//! * [`clip`] / [`wav`] - audio containers and WAV file I/O at high sample
//!   rates (192 kHz typical).
//! * [`spectral`] - STFT spectrograms and Welch power spectral densities.
//! * [`filter`] - linear-phase FIR bandpass design and application.
//! * [`detector`] - short-segment power, thresholding, and vote-based event
//!   detection.
//! * [`synth`] - emission profiles of real vehicles and a scene renderer
//!   (trajectories, spherical spreading, optional Doppler, shaped background
//!   noise) for reproducible end-to-end validation.
//! * [`report`] - emission-band summaries and ranked comparisons.
//!
//! ```
//! use evdetect_core::detector::{run_detector, DetectorConfig};
//! use evdetect_core::filter::design_bandpass;
//! use evdetect_core::spectral::WindowKind;
//! use evdetect_core::synth::{builtin_profiles, render_scene, TrajectoryScenario};
//!
//! let profile = &builtin_profiles()[0];
//! let scenario = TrajectoryScenario::pass_by_constant(15.0, 1.0, 4.17);
//! let clip = render_scene(profile, &scenario, 192_000, 0.12, 0.02, false, 7).unwrap();
//!
//! let bandpass = design_bandpass(16_000.0, 60_000.0, 512, 192_000.0, WindowKind::Hann).unwrap();
//! let events = run_detector(&clip, &bandpass, &DetectorConfig::default()).unwrap();
//! assert!(!events.is_empty());
//! ```

pub mod clip;
pub mod detector;
pub mod filter;
pub mod numfmt;
pub mod report;
pub mod spectral;
pub mod synth;
pub mod wav;

pub use clip::{AudioClip, AudioError};
pub use detector::{DetectionEvent, DetectorConfig};
pub use filter::FirFilter;
pub use spectral::{PowerSpectralDensity, Spectrogram, WindowKind, WindowSpec};
pub use synth::{EmissionProfile, TrajectoryScenario};
