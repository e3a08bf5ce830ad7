//! CLI error categories mapped to exit codes: 2 config, 3 data, 4 runtime.

use std::fmt;

use xbarnas::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: String) -> Self {
        CliError {
            category: Category::Config,
            message,
        }
    }

    pub fn data(message: String) -> Self {
        CliError {
            category: Category::Data,
            message,
        }
    }

    pub fn runtime(message: String) -> Self {
        CliError {
            category: Category::Runtime,
            message,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            Category::Config => 2,
            Category::Data => 3,
            Category::Runtime => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.category {
            Category::Config => "config",
            Category::Data => "data",
            Category::Runtime => "runtime",
        };
        write!(f, "{c} error: {}", self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let category = match &e {
            CoreError::InvalidConfig(_)
            | CoreError::UnsupportedSwitches(_)
            | CoreError::InvalidFormat { .. } => Category::Config,
            CoreError::Data(_) | CoreError::History(_) => Category::Data,
            _ => Category::Runtime,
        };
        CliError {
            category,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}
