use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty train")]
    EmptyTrain,

    #[error("{name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unphysical statistics: {0}")]
    UnphysicalStatistics(String),

    #[error("sample rate too low: {sample_rate} Hz < {required} Hz")]
    SampleRateTooLow { sample_rate: f64, required: f64 },

    #[error("integration window of {window} samples exceeds series of {available}")]
    WindowExceedsSeries { window: usize, available: usize },

    #[error("signal exceeds model range (normalized first harmonic {ratio})")]
    SignalOutOfRange { ratio: f64 },

    #[error("insufficient transmission for target squeezing: {target_db} dB needs 1 - eta < {linear}, eta = {eta}")]
    InsufficientTransmission { target_db: f64, eta: f64, linear: f64 },

    #[error("conjugate balance unachievable: {0}")]
    BalanceUnachievable(String),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("disjoint frequency ranges: trace [{trace_lo}, {trace_hi}] Hz, reference [{ref_lo}, {ref_hi}] Hz")]
    DisjointFrequencyRanges {
        trace_lo: f64,
        trace_hi: f64,
        ref_lo: f64,
        ref_hi: f64,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("at field {field_tesla} T: {source}")]
    AtField {
        field_tesla: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
