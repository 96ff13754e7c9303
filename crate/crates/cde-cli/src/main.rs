//! JSON-in, JSON-out front end for the exchange solver. Node and packet
//! indices are 1-based on the wire, 0-based inside the library.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use cde::basis_search::BasisSet;
use cde::codegen::{
    build_code, verify_code, verify_universal_recovery, CodeMatrix, CodegenError,
};
use cde::gf2m::{Field, FieldSpec, Gf};
use cde::model::{instance_from_json, BitVector, Instance, NormalizationReport, Rational};
use cde::oracle;
use cde::solver::{self, SloSolution, SolveError};

#[derive(Parser)]
#[command(name = "cde", version, about = "Minimum-broadcast packet exchange planner")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Io {
    /// Input JSON file.
    input: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CodeArgs {
    /// Field degree m for GF(2^m). Smallest workable degree when omitted.
    #[arg(long)]
    field_m: Option<u32>,
    /// Modulus bit pattern for the chosen degree. Requires --field-m.
    #[arg(long)]
    poly: Option<u32>,
    /// Re-verify the construction with randomized decode trials.
    #[arg(long)]
    check: bool,
    /// Seed for the randomized trials.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Subcommand)]
enum Verb {
    /// Minimize the total number of transmissions.
    Solve {
        #[command(flatten)]
        io: Io,
        /// Strip universal columns and fold single-owner columns into the
        /// reported totals instead of rejecting the instance.
        #[arg(long)]
        normalize: bool,
        /// Attach the transmission coefficients to the result.
        #[arg(long)]
        emit_code: bool,
        #[command(flatten)]
        code: CodeArgs,
    },
    /// Minimize the weighted transmission cost.
    SolveWeighted {
        #[command(flatten)]
        io: Io,
        /// Strip universal columns and fold single-owner columns into the
        /// reported totals instead of rejecting the instance.
        #[arg(long)]
        normalize: bool,
    },
    /// Staged exchange over the instance's arrival groups.
    Slo {
        #[command(flatten)]
        io: Io,
        /// Attach the final round's transmission coefficients.
        #[arg(long)]
        emit_code: bool,
        #[command(flatten)]
        code: CodeArgs,
    },
    /// Solve and emit the transmission coefficients in one step.
    Codegen {
        #[command(flatten)]
        io: Io,
        /// Strip universal columns and fold single-owner columns into the
        /// reported totals instead of rejecting the instance.
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        code: CodeArgs,
    },
    /// Validate an emitted code file.
    Verify {
        #[command(flatten)]
        io: Io,
        /// Also run decode trials against this instance.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Seed for the decode trials.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Exhaustive reference answers for small instances.
    Oracle {
        #[command(flatten)]
        io: Io,
    },
}

enum Failure {
    /// Bad input or an unsatisfiable request. Exit 1.
    User(String),
    /// The solver produced something it could not stand behind. Exit 2.
    Internal(String),
}

type CliResult<T> = Result<T, Failure>;

fn user(msg: impl Into<String>) -> Failure {
    Failure::User(msg.into())
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Failure {
        match e {
            SolveError::StaleSeeds { .. } | SolveError::BadExtension { .. } => {
                Failure::Internal(e.to_string())
            }
            SolveError::NotCanonical => user(format!("{e} or rerun with --normalize")),
            other => user(other.to_string()),
        }
    }
}

impl From<CodegenError> for Failure {
    fn from(e: CodegenError) -> Failure {
        match e {
            CodegenError::ConstructionFailed { .. } => Failure::Internal(e.to_string()),
            other => user(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Solve { io, normalize, emit_code, code } => {
            run_solve(&io, normalize, emit_code, &code)
        }
        Verb::SolveWeighted { io, normalize } => run_solve_weighted(&io, normalize),
        Verb::Slo { io, emit_code, code } => run_slo(&io, emit_code, &code),
        Verb::Codegen { io, normalize, code } => run_solve(&io, normalize, true, &code),
        Verb::Verify { io, instance, seed } => run_verify(&io, instance.as_deref(), seed),
        Verb::Oracle { io } => run_oracle(&io),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| user(format!("cannot read {}: {e}", path.display())))?;
    instance_from_json(&text).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn emit(io: &Io, value: &Value) -> CliResult<()> {
    let text = format!("{value:#}\n");
    match &io.output {
        Some(path) => fs::write(path, &text)
            .map_err(|e| user(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn one_based(ids: &[usize]) -> Vec<usize> {
    ids.iter().map(|&i| i + 1).collect()
}

fn bit_row(v: &BitVector) -> Vec<u8> {
    v.to_bools().iter().map(|&b| u8::from(b)).collect()
}

/// Basis rows spread back over the original packet columns.
fn basis_rows(basis: &BasisSet, column_map: &[usize], width: usize) -> Vec<Vec<u8>> {
    basis
        .vectors
        .iter()
        .map(|v| bit_row(&v.embed(column_map, width)))
        .collect()
}

fn ratio_value(r: Rational) -> Value {
    if r.is_integer() {
        json!(r.to_integer())
    } else {
        json!(format!("{}/{}", r.numer(), r.denom()))
    }
}

fn normalize_value(report: &NormalizationReport) -> Value {
    let forced: Vec<Value> = report
        .forced
        .iter()
        .map(|&(node, col)| json!([node + 1, col + 1]))
        .collect();
    json!({
        "removed_universal": one_based(&report.removed_universal),
        "forced": forced,
        "core_columns": one_based(&report.column_map),
    })
}

/// Without --normalize any non-canonical instance is refused rather than
/// silently reduced, so reported totals always match the input as given.
fn require_canonical_unless(inst: &Instance, normalize: bool) -> CliResult<()> {
    if !normalize && !inst.is_canonical() {
        return Err(user(
            "instance has packets held by fewer than two or by all nodes; \
             rerun with --normalize to fold them into the totals",
        ));
    }
    Ok(())
}

fn field_spec(args: &CodeArgs) -> CliResult<Option<FieldSpec>> {
    match (args.field_m, args.poly) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(user("--poly requires --field-m")),
        (Some(m), None) => FieldSpec::with_default_poly(m)
            .map(Some)
            .map_err(|e| user(e.to_string())),
        (Some(m), Some(poly)) => Ok(Some(FieldSpec { m, poly })),
    }
}

fn run_solve(io: &Io, normalize: bool, emit_code: bool, code_args: &CodeArgs) -> CliResult<()> {
    let inst = load_instance(&io.input)?;
    require_canonical_unless(&inst, normalize)?;
    let sol = solver::solve(&inst)?;
    let mut out = Map::new();
    out.insert("R_star".into(), json!(sol.min_broadcasts));
    out.insert("d_star".into(), json!(sol.d));
    out.insert("rate".into(), json!(sol.rates));
    out.insert("senders".into(), json!(one_based(&sol.basis.provenance)));
    out.insert(
        "basis".into(),
        json!(basis_rows(&sol.basis, &sol.report.column_map, inst.k())),
    );
    if normalize {
        out.insert("normalize".into(), normalize_value(&sol.report));
    }
    if emit_code || code_args.check {
        let code = build_code(&sol.basis, field_spec(code_args)?)?;
        if code_args.check {
            let field = Field::new(code.field).map_err(|e| Failure::Internal(e.to_string()))?;
            let ok = verify_code(&field, &code)
                && verify_universal_recovery(&field, &code, sol.core.rows(), 25, code_args.seed);
            if !ok {
                return Err(Failure::Internal(
                    "constructed code failed its decode trials".into(),
                ));
            }
            out.insert("check".into(), json!(true));
        }
        if emit_code {
            out.insert(
                "code".into(),
                serde_json::to_value(&code).map_err(|e| Failure::Internal(e.to_string()))?,
            );
            out.insert("core_columns".into(), json!(one_based(&sol.report.column_map)));
        }
    }
    emit(io, &Value::Object(out))
}

fn run_solve_weighted(io: &Io, normalize: bool) -> CliResult<()> {
    let inst = load_instance(&io.input)?;
    require_canonical_unless(&inst, normalize)?;
    let (work, report) = if normalize {
        let (core, report) = inst.normalize();
        (core, Some(report))
    } else {
        (inst.clone(), None)
    };
    let ws = solver::solve_weighted(&work)?;
    let mut rates = ws.rates.clone();
    let mut cost = ws.cost;
    let mut total = ws.total;
    if let Some(report) = &report {
        let weights = inst.weights().expect("solve_weighted checked them");
        for &(node, _) in &report.forced {
            rates[node] += 1;
            cost += weights[node];
            total += 1;
        }
    }
    let identity: Vec<usize> = (0..inst.k()).collect();
    let column_map = report
        .as_ref()
        .map_or(identity.as_slice(), |r| r.column_map.as_slice());
    let mut out = Map::new();
    out.insert("cost".into(), ratio_value(cost));
    out.insert("R".into(), json!(total));
    out.insert("d_star".into(), json!(ws.d));
    out.insert("rate".into(), json!(rates));
    out.insert("senders".into(), json!(one_based(&ws.basis.provenance)));
    out.insert("basis".into(), json!(basis_rows(&ws.basis, column_map, inst.k())));
    if let Some(report) = &report {
        out.insert("normalize".into(), normalize_value(report));
    }
    emit(io, &Value::Object(out))
}

fn run_slo(io: &Io, emit_code: bool, code_args: &CodeArgs) -> CliResult<()> {
    let inst = load_instance(&io.input)?;
    let slo = solver::solve_slo(&inst)?;
    let k = inst.k();
    let rounds: Vec<Value> = slo
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "round": i + 1,
                "nodes": one_based(&r.nodes),
                "columns": one_based(&r.columns),
                "d": r.d,
                "R_star": r.min_broadcasts,
                "rate": r.rates,
                "new_rows": r.new_rows,
                "senders": one_based(&r.basis.provenance),
                "basis": basis_rows(&r.basis, &r.columns, k),
            })
        })
        .collect();
    let mut out = Map::new();
    out.insert("rounds".into(), json!(rounds));
    if emit_code || code_args.check {
        let last = slo
            .rounds
            .last()
            .ok_or_else(|| user("instance declares no arrival groups"))?;
        let code = build_code(&last.basis, field_spec(code_args)?)?;
        if code_args.check {
            let field = Field::new(code.field).map_err(|e| Failure::Internal(e.to_string()))?;
            staged_check(&field, &code, &inst, &slo, code_args.seed)?;
            out.insert("check".into(), json!(true));
        }
        if emit_code {
            out.insert(
                "code".into(),
                serde_json::to_value(&code).map_err(|e| Failure::Internal(e.to_string()))?,
            );
            out.insert("core_columns".into(), json!(one_based(&last.columns)));
        }
    }
    emit(io, &Value::Object(out))
}

/// Each round must already decode from the leading rows alone, since later
/// rounds only append transmissions. Checked per round on the prefix of the
/// final code restricted to the columns present at that point.
fn staged_check(
    field: &Field,
    code: &CodeMatrix,
    inst: &Instance,
    slo: &SloSolution,
    seed: u64,
) -> CliResult<()> {
    let final_cols = &slo.rounds.last().expect("caller checked rounds").columns;
    for (i, round) in slo.rounds.iter().enumerate() {
        let local: Vec<usize> = round
            .columns
            .iter()
            .map(|c| {
                final_cols
                    .iter()
                    .position(|f| f == c)
                    .ok_or_else(|| Failure::Internal(format!("round {}: column drift", i + 1)))
            })
            .collect::<CliResult<_>>()?;
        let rows: Vec<Vec<Gf>> = code.rows[..round.min_broadcasts]
            .iter()
            .map(|row| local.iter().map(|&c| row[c]).collect())
            .collect();
        let supports: Vec<BitVector> = code.supports[..round.min_broadcasts]
            .iter()
            .map(|s| s.restrict(&local))
            .collect();
        let sub = CodeMatrix {
            field: code.field,
            d: round.d,
            rows,
            supports,
        };
        let sides: Vec<BitVector> = round
            .nodes
            .iter()
            .map(|&node| inst.row(node).restrict(&round.columns))
            .collect();
        if !verify_universal_recovery(field, &sub, &sides, 25, seed ^ i as u64) {
            return Err(Failure::Internal(format!(
                "round {}: prefix transmissions do not decode for every node",
                i + 1
            )));
        }
    }
    Ok(())
}

fn run_verify(io: &Io, instance: Option<&Path>, seed: u64) -> CliResult<()> {
    let text = fs::read_to_string(&io.input)
        .map_err(|e| user(format!("cannot read {}: {e}", io.input.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| user(format!("{}: {e}", io.input.display())))?;
    let (code_value, cols_value) = match value.get("code") {
        Some(code) => (code.clone(), value.get("core_columns").cloned()),
        None => (value, None),
    };
    let code: CodeMatrix =
        serde_json::from_value(code_value).map_err(|e| user(format!("malformed code: {e}")))?;
    let field = Field::new(code.field).map_err(|e| user(e.to_string()))?;
    let sound = verify_code(&field, &code);
    let mut out = Map::new();
    out.insert("ok".into(), json!(sound));
    let mut ok = sound;
    if let Some(path) = instance {
        let inst = load_instance(path)?;
        let cols: Vec<usize> = match cols_value {
            Some(v) => {
                let raw: Vec<usize> = serde_json::from_value(v)
                    .map_err(|e| user(format!("malformed core_columns: {e}")))?;
                if raw.iter().any(|&c| c < 1 || c > inst.k()) {
                    return Err(user("core_columns index out of range"));
                }
                raw.iter().map(|&c| c - 1).collect()
            }
            None => (0..inst.k()).collect(),
        };
        if cols.len() != code.width() {
            return Err(user(format!(
                "code covers {} packets but the instance provides {}",
                code.width(),
                cols.len()
            )));
        }
        let sides: Vec<BitVector> = inst.rows().iter().map(|r| r.restrict(&cols)).collect();
        let recovered = sound && verify_universal_recovery(&field, &code, &sides, 50, seed);
        out.insert("recovery".into(), json!(recovered));
        ok = ok && recovered;
    }
    out.insert("ok".into(), json!(ok));
    emit(io, &Value::Object(out))?;
    if ok {
        Ok(())
    } else {
        Err(user("code failed verification"))
    }
}

fn run_oracle(io: &Io) -> CliResult<()> {
    let inst = load_instance(&io.input)?;
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Failure::from(SolveError::Invalid(violations)));
    }
    let too_large = |e: oracle::TooLarge| user(e.to_string());
    let (r_min, rate) = oracle::min_sum_rate(&inst).map_err(too_large)?;
    let mut out = Map::new();
    out.insert("R_min".into(), json!(r_min));
    out.insert("rate".into(), json!(rate));
    if let Some(weights) = inst.weights() {
        let (cost, total, rates) = oracle::min_weighted_cost(&inst, weights).map_err(too_large)?;
        out.insert("min_cost".into(), ratio_value(cost));
        out.insert("min_cost_R".into(), json!(total));
        out.insert("min_cost_rate".into(), json!(rates));
        let mut table = Vec::new();
        for r in 0..=inst.k() {
            if let Some((cost, _)) = oracle::min_cost_at_sum(&inst, weights, r).map_err(too_large)? {
                table.push(json!({"R": r, "cost": ratio_value(cost)}));
            }
        }
        out.insert("kappa".into(), json!(table));
    }
    emit(io, &Value::Object(out))
}
