use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{context}: non-finite value at index {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("{op}: series of length {len} is shorter than the required {min}")]
    TooShort {
        op: &'static str,
        len: usize,
        min: usize,
    },

    #[error("derivative order must be 1 or 2, got {0}")]
    InvalidOrder(u8),

    #[error("representation {0} requested more than once")]
    DuplicateKind(&'static str),

    #[error("at least one representation is required")]
    EmptyKinds,

    #[error("unknown representation `{0}`; valid names are TIME, DT1, DT2, HLB_MAG, DWT_A, FFT_MAG, DCT, ACF")]
    UnknownKind(String),

    #[error("{op}: shape mismatch in {dimension}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        dimension: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: expected a rank-{expected} tensor, found rank {found}")]
    Rank {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("convolution kernel size {0} must be odd")]
    EvenKernel(usize),

    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropout(f64),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("batch norm in train mode needs at least 2 values per channel, got {0}")]
    BatchTooSmall(usize),

    #[error("series length {len} is shorter than the largest kernel ({kernel})")]
    InputTooShort { len: usize, kernel: usize },

    #[error("input has {found} channels but the model was built for {expected}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset series {index} has length {found}, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset needs at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("labels are not contiguous in [0, {classes}): class {missing} has no samples")]
    NonContiguousLabels { classes: usize, missing: usize },

    #[error("class {class} has {count} sample(s); stratified splitting needs at least 2")]
    ClassTooSmall { class: usize, count: usize },

    #[error("resample {resample}: index {index} out of range for {len} series")]
    IndexOutOfRange {
        resample: usize,
        index: usize,
        len: usize,
    },

    #[error("resample {resample}: index {index} appears in both train and test")]
    Overlap { resample: usize, index: usize },

    #[error("resample {resample}: index {index} listed twice")]
    RepeatedIndex { resample: usize, index: usize },

    #[error("resample {resample}: {part} partition is empty")]
    EmptyPartition { resample: usize, part: &'static str },

    #[error("resample {resample}: class {class} missing from the training partition")]
    ClassMissingFromTrain { resample: usize, class: usize },

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("probability row {row} sums to {sum}, expected 1")]
    NotAProbability { row: usize, sum: f64 },

    #[error("result grid is incomplete; missing {}", missing.join(", "))]
    IncompleteGrid { missing: Vec<String> },

    #[error("duplicate result record for {0}")]
    DuplicateRecord(String),

    #[error("no critical-difference constant for k = {k}, alpha = {alpha}")]
    UnsupportedCd { k: usize, alpha: f64 },

    #[error("score matrix: {0}")]
    InvalidScores(String),
}
