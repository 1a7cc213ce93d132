use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use assoc_core::assoc::AssociationKind;
use assoc_core::collapse::{paradox_search, property_battery, simpson_scan};
use assoc_core::io::{parse_params, OutputFormat, Report, RunConfig, TableFile};
use assoc_core::param_system::{di_forward_fast, di_inverse, full_params, lor_inverse, LorFitOptions, ParamKind};
use assoc_core::sampling::{DecisionRow, DecisionStudy};
use assoc_core::structure::{canonicalize, decompose};
use assoc_core::table::{BinaryTable, TableConfig};
use assoc_core::Error;

use super::{Command, KindArg, EXIT_INPUT, EXIT_NOT_FOUND, EXIT_NUMERIC};

pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

pub struct Failure {
    pub error: Error,
    pub code: u8,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::NonRealizableParams { .. }
            | Error::Convergence { .. }
            | Error::NonFinite(_)
            | Error::Evaluation(_)
            | Error::DegenerateMarginal { .. } => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Failure { error, code }
    }
}

type CmdResult = Result<Outcome, Failure>;

fn kind_of(arg: KindArg) -> AssociationKind {
    match arg {
        KindArg::Lor => AssociationKind::Lor,
        KindArg::Di => AssociationKind::Di,
        KindArg::Ex => AssociationKind::Ex,
        KindArg::Bahadur => AssociationKind::Bahadur,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Accepts either a bare document or a report envelope, whose `result`
/// (or `result.table`) holds the document.
fn unwrap_envelope(text: &str, inner: &str) -> Result<String, Error> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        // Let the typed parser produce the located diagnostic.
        Err(_) => return Ok(text.to_string()),
    };
    let Some(result) = value.get("result") else {
        return Ok(text.to_string());
    };
    let doc = result.get(inner).unwrap_or(result);
    Ok(doc.to_string())
}

pub fn read_table(path: &Path, config: &RunConfig) -> Result<BinaryTable, Error> {
    let text = unwrap_envelope(&read(path)?, "table")?;
    let file = TableFile::parse(&text)?;
    let table_config = TableConfig {
        max_k: config.max_k,
        ..TableConfig::default()
    };
    file.to_table(&table_config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Parse(format!("cannot write {}: {e}", path.display())))
}

fn envelope<T: Serialize>(command: &str, config: &RunConfig, result: T) -> String {
    let report = Report {
        tool: "binassoc",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config: config.clone(),
        result,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_output(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn csv_unsupported(command: &str) -> Failure {
    Failure {
        error: Error::InvalidArgument(format!("csv output is not available for `{command}`")),
        code: EXIT_INPUT,
    }
}

fn ok(stdout: String) -> CmdResult {
    Ok(Outcome { stdout, code: 0 })
}

pub fn run(command: Command, config: &RunConfig) -> CmdResult {
    let csv = config.format == OutputFormat::Csv;
    match command {
        Command::Params { table, kind, full } => {
            let table = read_table(&table, config)?;
            if full {
                let params = match kind {
                    KindArg::Lor => full_params(&table, ParamKind::Lor),
                    KindArg::Di => di_forward_fast(&table),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "--full is only defined for lor and di, not {other:?}"
                        ))
                        .into())
                    }
                };
                if csv {
                    let rows = params
                        .iter()
                        .map(|(m, v)| vec![m.to_string(), v.to_string()])
                        .collect();
                    return ok(csv_output(&["mask", "value"], rows));
                }
                ok(envelope("params", config, params))
            } else {
                let kind = kind_of(kind);
                let e = kind.evaluate(&table)?;
                if csv {
                    return ok(csv_output(
                        &["kind", "value", "sign"],
                        vec![vec![kind.name(), e.value.to_string(), e.sign().to_string()]],
                    ));
                }
                ok(envelope(
                    "params",
                    config,
                    json!({ "kind": kind.name(), "k": table.k(), "value": e.value, "sign": e.sign() }),
                ))
            }
        }
        Command::Reconstruct { params, output, .. } => {
            if csv {
                return Err(csv_unsupported("reconstruct"));
            }
            let text = unwrap_envelope(&read(&params)?, "params")?;
            let params = parse_params(&text)?;
            let (table, fit) = match params.kind() {
                ParamKind::Di => (di_inverse(&params)?, Value::Null),
                ParamKind::Lor => {
                    let options = LorFitOptions {
                        tol: config.lor_tol,
                        max_iter: config.lor_max_iter,
                    };
                    let fit = lor_inverse(&params, &options)?;
                    let diag = json!({ "cycles": fit.cycles, "residual": fit.residual });
                    (fit.table, diag)
                }
            };
            let file = TableFile::from_table(&table);
            if let Some(path) = output {
                write_file(&path, &file.to_json())?;
            }
            ok(envelope("reconstruct", config, json!({ "table": file, "fit": fit })))
        }
        Command::Simpson { table, kind } => {
            let table = read_table(&table, config)?;
            let kinds: Vec<_> = kind.into_iter().map(kind_of).collect();
            let reports = simpson_scan(&table, &kinds)?;
            if csv {
                let rows = reports
                    .iter()
                    .map(|r| {
                        vec![
                            r.variable.to_string(),
                            r.kind.clone(),
                            r.layer_signs[0].to_string(),
                            r.layer_signs[1].to_string(),
                            r.collapsed_sign.to_string(),
                            r.paradox.to_string(),
                            r.values[0].to_string(),
                            r.values[1].to_string(),
                            r.values[2].to_string(),
                        ]
                    })
                    .collect();
                return ok(csv_output(
                    &["variable", "kind", "layer1_sign", "layer2_sign", "collapsed_sign", "paradox", "layer1", "layer2", "collapsed"],
                    rows,
                ));
            }
            let any = reports.iter().any(|r| r.paradox);
            ok(envelope("simpson", config, json!({ "paradox": any, "reports": reports })))
        }
        Command::Search { kind, k, trials, output } => {
            if csv {
                return Err(csv_unsupported("search"));
            }
            let kind = kind_of(kind);
            let found = paradox_search(&kind, k, trials, config.seed)?;
            match found {
                Some(w) => {
                    let file = TableFile::from_table(&w.table);
                    if let Some(path) = output {
                        write_file(&path, &file.to_json())?;
                    }
                    ok(envelope(
                        "search",
                        config,
                        json!({ "found": true, "kind": kind.name(), "trial": w.trial, "table": file, "report": w.report }),
                    ))
                }
                None => Ok(Outcome {
                    stdout: envelope("search", config, json!({ "found": false, "kind": kind.name(), "witness": "none" })),
                    code: EXIT_NOT_FOUND,
                }),
            }
        }
        Command::Canonical { table } => {
            if csv {
                return Err(csv_unsupported("canonical"));
            }
            let table = read_table(&table, config)?;
            ok(envelope("canonical", config, canonicalize(&table)))
        }
        Command::Decompose { table } => {
            if csv {
                return Err(csv_unsupported("decompose"));
            }
            let table = read_table(&table, config)?;
            let d = decompose(&table);
            let count = d.component_count();
            ok(envelope(
                "decompose",
                config,
                json!({ "component_count": count, "decomposition": d }),
            ))
        }
        Command::Power { n, p, table, mc } => {
            let rows = power_rows(&n, &p, table.as_deref(), mc, config)?;
            if csv {
                let rows = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.p.to_string(),
                            r.exact.to_string(),
                            r.normal.to_string(),
                            r.empirical.map(|e| e.to_string()).unwrap_or_default(),
                        ]
                    })
                    .collect();
                return ok(csv_output(&["N", "p", "exact", "normal", "empirical"], rows));
            }
            ok(envelope("power", config, json!({ "rows": rows })))
        }
        Command::Battery { kind, k, trials, witnesses } => {
            if csv {
                return Err(csv_unsupported("battery"));
            }
            let summary = property_battery(&kind_of(kind), k, trials, config.seed, witnesses)?;
            ok(envelope("battery", config, summary))
        }
    }
}

fn power_rows(
    sizes: &[u64],
    masses: &[f64],
    table: Option<&Path>,
    mc: u64,
    config: &RunConfig,
) -> Result<Vec<DecisionRow>, Failure> {
    let mut rows = Vec::new();
    match table {
        Some(path) => {
            let table = read_table(path, config)?;
            for &n in sizes {
                rows.push(DecisionStudy::from_table(table.clone(), n, mc, config.seed).run()?);
            }
        }
        None => {
            if masses.is_empty() {
                return Err(Error::InvalidArgument("power needs --p or --table".into()).into());
            }
            for &n in sizes {
                for &p in masses {
                    let study = DecisionStudy {
                        n,
                        p_even: p,
                        true_table: None,
                        replications: mc,
                        seed: config.seed,
                    };
                    rows.push(study.run()?);
                }
            }
        }
    }
    Ok(rows)
}
