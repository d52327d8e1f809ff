//! Process exit codes and the mapping from library errors onto them.

use std::fmt;
use std::process::ExitCode;

use meshpref::mdpo::MdpoError;
use meshpref::mesh::{MeshError, ObjError};
use meshpref::metrics::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags or input that cannot be read.
    Input,
    /// Geometry on which a metric or operation is undefined.
    Degenerate,
    /// A result failed one of its own consistency checks.
    Internal,
}

impl Kind {
    pub fn code(self) -> ExitCode {
        ExitCode::from(match self {
            Kind::Input => 2,
            Kind::Degenerate => 3,
            Kind::Internal => 4,
        })
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind: Kind::Input,
        error: error.into(),
    }
}

pub fn internal(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind: Kind::Internal,
        error: error.into(),
    }
}

pub fn usage(message: impl fmt::Display) -> CliError {
    input(anyhow::anyhow!("{message}"))
}

fn mesh_kind(e: &MeshError) -> Kind {
    match e {
        MeshError::Degenerate(_) | MeshError::Empty => Kind::Degenerate,
        _ => Kind::Input,
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError {
            kind: mesh_kind(&e),
            error: e.into(),
        }
    }
}

impl From<ObjError> for CliError {
    fn from(e: ObjError) -> Self {
        let kind = match &e {
            ObjError::Mesh(m) => mesh_kind(m),
            _ => Kind::Input,
        };
        CliError { kind, error: e.into() }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let kind = match &e {
            MetricError::Mesh(m) => mesh_kind(m),
            MetricError::Undefined(_) | MetricError::Quad(_) => Kind::Degenerate,
        };
        CliError { kind, error: e.into() }
    }
}

impl From<MdpoError> for CliError {
    fn from(e: MdpoError) -> Self {
        let kind = match &e {
            MdpoError::Diverged { .. } | MdpoError::ShapeMismatch => Kind::Internal,
            _ => Kind::Input,
        };
        CliError { kind, error: e.into() }
    }
}
