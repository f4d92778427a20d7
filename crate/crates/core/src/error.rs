use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Box with non-positive or non-finite extent.
    InvalidBox {
        width: f64,
        height: f64,
    },
    /// Cosine operations need a nonzero, finite norm.
    ZeroNorm,
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    InvalidParameter(&'static str),
    LabelOutOfRange {
        label: usize,
        n_classes: usize,
    },
    /// A local-ID class has no view assigned to it.
    UnknownClassView(usize),
    OutOfOrderFrame {
        view: usize,
        last: u32,
        got: u32,
    },
    /// Metric denominators are undefined without ground truth.
    EmptyGroundTruth,
    InstanceTooLarge(&'static str),
    Diverged {
        epoch: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidBox { width, height } => {
                write!(f, "invalid box extent {width}x{height}")
            }
            Error::ZeroNorm => f.write_str("embedding has zero or non-finite norm"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::LabelOutOfRange { label, n_classes } => {
                write!(f, "label {label} out of range for {n_classes} classes")
            }
            Error::UnknownClassView(c) => write!(f, "class {c} has no view mapping"),
            Error::OutOfOrderFrame { view, last, got } => {
                write!(f, "view {view}: frame {got} does not follow frame {last}")
            }
            Error::EmptyGroundTruth => f.write_str("ground truth is empty; metric undefined"),
            Error::InstanceTooLarge(what) => write!(f, "instance too large for enumeration: {what}"),
            Error::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
        }
    }
}

impl core::error::Error for Error {}
