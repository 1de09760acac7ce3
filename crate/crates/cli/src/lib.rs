//! Experiment harness for causeq: spec files, derived seeding, dataset
//! and model file formats, and the batch commands behind the CLI.

pub mod harness;
pub mod io;
pub mod run;
pub mod spec;

/// Process exit codes shared by every subcommand.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const PARAM: i32 = 2;
    pub const IO: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

/// Maps an error chain onto the documented exit codes: parameter and
/// input problems exit 2, filesystem problems 3, numerical failures 4.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<causeq::Error>() {
            return match e {
                causeq::Error::Param(_) | causeq::Error::Input(_) | causeq::Error::Mismatch(_) => {
                    exit_code::PARAM
                }
                causeq::Error::Numerical(_) => exit_code::NUMERICAL,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit_code::IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return exit_code::PARAM;
        }
    }
    exit_code::PARAM
}
