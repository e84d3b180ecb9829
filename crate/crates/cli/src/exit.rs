use std::io::ErrorKind;

use sld::Error;

pub const OK: u8 = 0;
pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const CONFIG: u8 = 3;
pub const IO: u8 = 4;

/// Process exit code for a library error: 2 for bad input (including a
/// missing input file), 3 for config or geometry problems, 4 for other IO.
pub fn code_for(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::Schema(_) | Error::Checkpoint(_) | Error::Dimension { .. } => USAGE,
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => USAGE,
        Error::Io { .. } => IO,
        Error::Config(_) | Error::Geometry(_) | Error::EmptyDataset(_) => CONFIG,
        Error::Degenerate { .. } | Error::Evaluation(_) | Error::NonFiniteGradient { .. } | Error::State(_) => FAILURE,
    }
}
