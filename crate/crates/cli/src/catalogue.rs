use std::collections::BTreeMap;

use serde_json::json;
use slowfast::catalogue::{
    entries_json, enumerate_mm, oracle_status, verify_oracles, write_entries_csv, Census, OracleOptions, Scheme,
};

use crate::output::{json_bytes, CliResult, Failure, Sink};
use crate::{CatalogueArgs, Format, SchemeArg};

/// (total, singular, NH, S, T, R, relevant S, relevant T)
fn expected(s: Scheme) -> [usize; 8] {
    match s {
        Scheme::Irreversible => [27, 23, 16, 11, 5, 7, 11, 5],
        Scheme::Reversible => [81, 67, 47, 43, 14, 10, 22, 5],
    }
}

fn counts(c: &Census) -> [usize; 8] {
    let g = |m: &BTreeMap<String, usize>, k: &str| m.get(k).copied().unwrap_or(0);
    [
        c.total,
        c.singular,
        c.normally_hyperbolic,
        g(&c.classes, "S"),
        g(&c.classes, "T"),
        g(&c.classes, "R"),
        g(&c.relevant, "S"),
        g(&c.relevant, "T"),
    ]
}

pub fn run(args: &CatalogueArgs) -> CliResult<()> {
    let schemes = match args.scheme {
        SchemeArg::Irreversible => vec![Scheme::Irreversible],
        SchemeArg::Reversible => vec![Scheme::Reversible],
        SchemeArg::Both => vec![Scheme::Irreversible, Scheme::Reversible],
    };
    let sink = Sink::new(args.out.as_deref())?;
    // the table goes to stdout without a directory, so the report moves to stderr
    let report = |line: String| {
        if sink.is_dir() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    let outcomes = if args.verify_oracles {
        let opts = OracleOptions { seed: args.seed, ..Default::default() };
        let all = verify_oracles(&opts)?;
        Some(all.into_iter().filter(|o| schemes.contains(&o.scheme)).collect::<Vec<_>>())
    } else {
        None
    };
    let mut failures = Vec::new();
    for &scheme in &schemes {
        let entries = enumerate_mm(scheme)?;
        let status = outcomes.as_deref().map(|o| oracle_status(o, scheme)).unwrap_or_default();
        let name = format!("catalogue_{}", scheme.name());
        match args.format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_entries_csv(&mut buf, &entries, &status)?;
                sink.emit(&format!("{name}.csv"), &buf)?;
            }
            Format::Json => sink.emit(&format!("{name}.json"), &json_bytes(&entries_json(&entries, &status)))?,
        }
        let census = Census::of(&entries);
        report(format!("{}: {}", scheme.name(), census.summary()));
        if counts(&census) != expected(scheme) {
            failures.push(format!("{} census {:?}", scheme.name(), counts(&census)));
        }
    }
    if let Some(out) = &outcomes {
        for o in out {
            let verdict = if o.passed { "PASS" } else { "FAIL" };
            let product = if o.product_passed { "product ok" } else { "product mismatch" };
            let detail = o.error.clone().unwrap_or_else(|| format!("max rel error {:.2e}, {product}", o.max_rel_error));
            report(format!("{verdict} {} {} [{}] order {}: {detail}", o.table, o.label, o.config, o.order));
            if !o.passed {
                failures.push(format!("oracle {}", o.label));
            }
        }
        let passed = out.iter().filter(|o| o.passed).count();
        report(format!("oracles: {passed}/{} passed", out.len()));
        sink.file("oracles.json", &json_bytes(&json!(out)))?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join(", ")))
    }
}
