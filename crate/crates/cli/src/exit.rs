//! Exit codes and the mapping from library errors onto them.

use std::fmt;
use std::process::ExitCode;

use studentsim::assessment::AssessmentError;
use studentsim::engine::EngineError;
use studentsim::evaluation::EvalError;
use studentsim::gateway::GatewayError;
use studentsim::prompts::PromptError;
use studentsim::sensing::SensingError;
use studentsim::student::StudentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Transport = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { exit: Exit::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { exit: Exit::Data, message: message.into() }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self { exit: Exit::Transport, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<StudentError> for CliError {
    fn from(e: StudentError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<SensingError> for CliError {
    fn from(e: SensingError) -> Self {
        match e {
            SensingError::Io(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        if e.is_transport() {
            CliError::transport(e.to_string())
        } else {
            CliError::usage(e.to_string())
        }
    }
}

impl From<AssessmentError> for CliError {
    fn from(e: AssessmentError) -> Self {
        match e {
            AssessmentError::Io(_) => CliError::usage(e.to_string()),
            AssessmentError::Schedule(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) | EngineError::Io(_) => CliError::usage(e.to_string()),
            EngineError::Prompt(p) => p.into(),
            EngineError::Assessment(a) => a.into(),
            EngineError::Gateway(g) => g.into(),
            EngineError::Argument(_) | EngineError::UnknownStudent(_) | EngineError::RunLog(_) => {
                CliError::data(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}
