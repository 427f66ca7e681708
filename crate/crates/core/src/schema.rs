//! JSON Schemas for every document the library and CLI write. The committed
//! copies live in `schemas/v1/` at the workspace root.

use schemars::schema::RootSchema;
use schemars::schema_for;

use crate::accounting::ReductionReport;
use crate::backend::ProofBundle;
use crate::bench::BenchReport;
use crate::chain::{self, ChainStatus, RejectReason};
use crate::circuit::{ConstraintReport, PublicInputsDocument};
use crate::didp::IdentityFile;
use crate::games::GameResult;

pub const SCHEMA_VERSION: &str = "v1";

pub fn all() -> Vec<(&'static str, RootSchema)> {
    let mut out = vec![
        ("proof_bundle", schema_for!(ProofBundle)),
        ("public_inputs", schema_for!(PublicInputsDocument)),
        ("identity_file", schema_for!(IdentityFile)),
        ("chain_status", schema_for!(ChainStatus)),
        ("reject_reason", schema_for!(RejectReason)),
        ("constraint_report", schema_for!(ConstraintReport)),
        ("game_result", schema_for!(GameResult)),
        ("reduction_report", schema_for!(ReductionReport)),
        ("bench_report", schema_for!(BenchReport)),
    ];
    out.extend(chain::state_file_schemas());
    out
}

pub fn render(schema: &RootSchema) -> String {
    serde_json::to_string_pretty(schema).expect("schema serializes") + "\n"
}
