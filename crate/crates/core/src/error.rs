use thiserror::Error;

/// Crate-wide error type. Variants are grouped by subsystem; all carry enough
/// context to be actionable from a CLI message without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied values failed (ranges, signs, sizes).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Polynomial or transfer-function coefficients contain NaN or infinity.
    #[error("non-finite coefficients")]
    NonFiniteCoefficients,

    /// Numerator degree exceeds denominator degree where a proper system is required.
    #[error("improper transfer function (numerator degree exceeds denominator degree)")]
    ImproperSystem,

    /// Frequency-response evaluation hit a pole on the imaginary axis.
    #[error("pole on the imaginary axis at omega = {omega} rad/s")]
    PoleOnImaginaryAxis { omega: f64 },

    /// No unity-gain crossover inside the requested frequency window.
    #[error("no gain crossover in [{omega_lo}, {omega_hi}] rad/s")]
    NoGainCrossover { omega_lo: f64, omega_hi: f64 },

    /// An algebraic reduction produced a degenerate system (zero denominator or similar).
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    /// A dominant complex pole pair was expected but the poles are all real.
    #[error("no complex pole pair: {0}")]
    NoComplexPolePair(String),

    /// A design request cannot be met with physically meaningful parameters.
    #[error("infeasible design: {0}")]
    Infeasible(String),

    /// A closed loop built for analysis has right-half-plane poles.
    #[error("unstable closed loop; right-half-plane poles: {poles}")]
    UnstableClosedLoop { poles: String },

    /// Configuration file problems (parse errors, unknown keys, bad units).
    #[error("config error: {0}")]
    Config(String),

    /// Simulation state left its validity envelope.
    #[error("simulation diverged at t = {t:.6} s: {what}")]
    Divergence { t: f64, what: String },

    /// The steady-state pre-solve did not converge.
    #[error("initialization failed: {0}")]
    InitializationFailed(String),

    /// A controller declared a dependency on remote-terminal measurements.
    #[error("locality violation in {controller}: depends on remote signals {signals:?}")]
    LocalityViolation {
        controller: String,
        signals: Vec<String>,
    },

    /// A requested metric cannot be computed from the available log.
    #[error("metric unavailable: {0}")]
    MetricsUnavailable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
